"""Mass lost by the truncated Dirichlet heat flow on the 1D model, as a function
of delta; the loss jumps from order one to zero across delta = 1.

    python3 scripts/mass_probe.py [--T 0.1] [--cells 2000]
"""
import argparse
import csv
import sys

import numpy as np

from degenlab.coefficients import CoefficientField
from degenlab.geometry import DomainSpec
from degenlab.uniqueness import mass_conservation_test


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--T", type=float, default=0.1)
    p.add_argument("--cells", type=int, default=2000)
    args = p.parse_args(argv)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["delta", "loss_1e-2", "loss_1e-3", "loss_1e-4", "extrapolated", "status"])
    for delta in np.round(np.arange(0.0, 2.01, 0.125), 4):
        rep = mass_conservation_test(DomainSpec.interval(0, 1), CoefficientField.exact(float(delta)),
                                     T=args.T, cells=args.cells)
        ext = "" if rep.extrapolated is None else f"{rep.extrapolated:.6e}"
        out.writerow([delta, *(f"{x:.6e}" for x in rep.losses), ext, rep.status])


if __name__ == "__main__":
    main()
