"""Discrete stationary residual of the exact solutions under h-refinement."""

import argparse

from graphflow import scenarios
from graphflow.analysis import residual_study
from graphflow.domain import DomainSpec

CASES = {
    "holomorphic_square": (scenarios.holomorphic_square, (-1.0, 1.0)),
    "holomorphic_cube": (scenarios.holomorphic_cube, (-1.0, 1.0)),
    "scherk": (scenarios.scherk, (-1.0, 1.0)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h0", type=float, default=1 / 32)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--ball", action="store_true", help="use the unit disc instead of the square")
    args = ap.parse_args()
    for name, (make, (lo, hi)) in CASES.items():
        spec = DomainSpec.ball(2, args.h0) if args.ball else DomainSpec.box((lo, lo), (hi, hi), args.h0)
        hs, errs, orders = residual_study(make(), spec, args.levels)
        print(name)
        for h, e in zip(hs, errs):
            print(f"  h = {h:<10.6g} residual = {e:.6e}")
        print("  orders  " + "  ".join(f"{o:.3f}" for o in orders))


if __name__ == "__main__":
    main()
