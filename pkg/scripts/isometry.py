"""Plancherel check (2/pi) ||Pi f||^2 = ||f||^2 for a few test functions.

The lambda integral is a composite Gauss rule cut at --cut; the printed
ratio should approach 1 as the cut grows.
"""
import argparse
import math
import sys

import numpy as np
from numpy.polynomial.legendre import leggauss

from halfline_spectral import build_model
from halfline_spectral.spectral import EigenfunctionFamily, emit, pi_transform

FUNCS = {
    "bump:3:0.5": (lambda x: np.exp(-(x - 3) ** 2 / 0.5), (0.0, 8.0), ()),
    "bump:1.5:0.3": (lambda x: np.exp(-(x - 1.5) ** 2 / 0.18), (0.0, 4.0), ()),
    "tent:1:2:3": (lambda x: np.maximum(0.0, 1 - np.abs(x - 2)), (1.0, 3.0), (2.0,)),
}


def composite(edges, n=16):
    gx, gw = leggauss(n)
    d = np.diff(edges)
    return ((edges[:-1, None] + d[:, None] * (gx + 1) / 2).ravel(),
            (d[:, None] * gw / 2).ravel())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="stable:1")
    ap.add_argument("--cut", type=float, nargs="*", default=[25.0, 50.0, 100.0])
    args = ap.parse_args(argv)
    m = build_model(args.model)
    fam = EigenfunctionFamily(m)
    rows = []
    for name, (f, sup, bp) in FUNCS.items():
        xe = np.unique(np.concatenate([np.linspace(*sup, 401), bp]))
        xn, xw = composite(xe)
        norm2 = float(np.sum(xw * f(xn) ** 2))
        for cut in args.cut:
            edges = np.concatenate([[0.0], np.geomspace(1e-6, 0.25, 20), np.arange(0.5, cut + 1e-9, 0.25)])
            ln, lw = composite(edges)
            P = pi_transform(m, f, ln, support=sup, breakpoints=bp, family=fam)
            val = 2 / math.pi * float(np.sum(lw * P ** 2))
            rows.append((name, cut, val, norm2, val / norm2 - 1))
    sys.stdout.write(emit(["f", "cut", "plancherel", "norm2", "rel_err"], rows))


if __name__ == "__main__":
    main()
