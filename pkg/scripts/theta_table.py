"""Phase shifts and c_lambda for the catalog models on a log grid of lambda."""
import argparse
import math
import sys

import numpy as np

from halfline_spectral import build_model
from halfline_spectral.spectral import emit, theta_table

MODELS = ["stable:0.5", "stable:1", "stable:1.5", "relativistic:1", "gamma", "log-log", "cp-exp"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", nargs="*", default=MODELS)
    ap.add_argument("--lam-min", type=float, default=0.01)
    ap.add_argument("--lam-max", type=float, default=100.0)
    ap.add_argument("--count", type=int, default=9)
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    args = ap.parse_args(argv)
    lams = np.geomspace(args.lam_min, args.lam_max, args.count)
    rows = []
    for text in args.models:
        for lam, th, c in theta_table(build_model(text), lams):
            rows.append((text, lam, th, th / math.pi, c))
    sys.stdout.write(emit(["model", "lambda", "theta", "theta_over_pi", "c_lambda"], rows, args.format))


if __name__ == "__main__":
    main()
