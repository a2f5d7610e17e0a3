"""Residual of the cone R q(x)/|x| on an annulus in R^4 under refinement.

The critical R = sqrt(5)/2 is a minimal cone, so its residual is pure
truncation error; any other R leaves an O(1) floor.
"""

import argparse
import math

from graphflow import scenarios
from graphflow.analysis import cone_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--R", type=float, action="append", help="repeatable; default sqrt(5)/2 and 1")
    ap.add_argument("--rmin", type=float, default=0.3)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--h0", type=float, default=0.125)
    args = ap.parse_args()
    hs = [args.h0 / 2**k for k in range(args.levels)]
    for R in args.R or [math.sqrt(5) / 2, 1.0]:
        _, errs, orders = cone_study(scenarios.lawson_osserman_cone(R, args.rmin), hs)
        print(f"R = {R:.6f}")
        for h, e in zip(hs, errs):
            print(f"  h = {h:<10.6g} residual = {e:.6e}")
        print("  orders  " + "  ".join(f"{o:.3f}" for o in orders))


if __name__ == "__main__":
    main()
