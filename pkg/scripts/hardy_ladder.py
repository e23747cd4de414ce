"""Discrete Hardy and Rellich minima under grid refinement and epsilon truncation.

    python3 scripts/hardy_ladder.py [--max-cells 4096]
"""
import argparse
import csv
import sys

from degenlab.coefficients import CoefficientField
from degenlab.geometry import DomainSpec, LayerSpec
from degenlab.grid import assemble, grid_for
from degenlab.spectral import hardy_min, rellich_min


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--max-cells", type=int, default=4096)
    args = p.parse_args(argv)
    cells = [c for c in (256, 512, 1024, 2048, 4096, 8192) if c <= args.max_cells]
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["quotient", "domain", "delta", "epsilon", "grading", "cells", "numeric_min", "bound",
                  "limiting_constant"])
    fld = CoefficientField.exact(0.0)
    for name, spec in (("interval", DomainSpec.interval(0, 1)), ("punctured3", DomainSpec.punctured(3))):
        for eps in (1e-6, 1e-12, 1e-30):
            for grading in ("geometric", "power"):
                if grading == "power" and eps < 1e-8:
                    continue  # a power grid cannot resolve many decades near the boundary
                for n in cells:
                    op = assemble(fld, grid_for(spec, eps, 1.0, n, grading=grading))
                    rep = hardy_min(op, fld, spec, LayerSpec(1.0), ladder=False)
                    out.writerow(["hardy", name, 0.0, eps, grading, n, rep.numeric_min, rep.theoretical_bound,
                                  0.25])
    spec = DomainSpec.punctured(5)
    for delta in (0.0, 0.5, 1.0, 1.5):
        f = CoefficientField.exact(delta)
        for n in cells:
            op = assemble(f, grid_for(spec, 1e-12, 1.0, n, grading="geometric"))
            rep = rellich_min(op, f, spec, LayerSpec(1.0), ladder=False)
            out.writerow(["rellich", "punctured5", delta, 1e-12, "geometric", n, rep.numeric_min,
                          rep.theoretical_bound if rep.theoretical_bound is not None else "",
                          rep.limiting_constant])


if __name__ == "__main__":
    main()
