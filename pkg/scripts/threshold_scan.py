"""Uniqueness verdicts across delta for several domain classes, plus the 1D
Weyl / deficiency classification of c = x^delta.

    python3 scripts/threshold_scan.py [--step 0.05] [--max-delta 2.5]
"""
import argparse
import csv
import sys

import numpy as np

from degenlab.coefficients import CoefficientField
from degenlab.geometry import DomainSpec
from degenlab.spectral import deficiency_indices, weyl_classify
from degenlab.uniqueness import classify

DOMAINS = {
    "interval": DomainSpec.interval(0, 1),
    "punctured3": DomainSpec.punctured(3),
    "ball_interior3": DomainSpec.ball_interior(3, 1.0),
    "ball_exterior2": DomainSpec.ball_exterior(2, 1.0),
    "convex_product4_2": DomainSpec.convex_product(4, 2, 1.0),
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--max-delta", type=float, default=2.5)
    args = p.parse_args(argv)
    deltas = np.round(np.arange(0.0, args.max_delta + 1e-12, args.step), 10)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["domain", "delta", "markov_threshold", "l2_threshold", "verdict", "provenance"])
    for name, spec in DOMAINS.items():
        for delta in deltas:
            v = classify(spec, CoefficientField.exact(float(delta)))
            out.writerow([name, delta, v.markov_threshold, v.l2_threshold, v.verdict, v.provenance])
    out.writerow([])
    out.writerow(["delta", "weyl_verdict", "weyl_closed_form", "n_plus", "n_minus", "endpoint"])
    for delta in deltas:
        fld = CoefficientField.exact(float(delta))
        w, res = weyl_classify(fld), deficiency_indices(fld)
        out.writerow([delta, w.verdict, w.closed_form, res.n_plus, res.n_minus, res.endpoint_classification])


if __name__ == "__main__":
    main()
