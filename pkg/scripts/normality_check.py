"""Tangential part of the discrete Laplace-Beltrami of the graph embedding.

For a graph the Laplacian of the position vector is the mean curvature, a
normal vector, so its tangential part must vanish as h -> 0.
"""

import argparse

from graphflow import scenarios
from graphflow.analysis import normality_defect, observed_orders
from graphflow.domain import DomainSpec, build_lattice
from graphflow.jets import GraphField


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--amp", type=float, default=0.3)
    args = ap.parse_args()
    sc = scenarios.sinusoid(2, 2, args.amp)
    hs = [1 / 8 / 2**k for k in range(args.levels)]
    tang, diff = [], []
    for h in hs:
        t, d = normality_defect(GraphField.sample(build_lattice(DomainSpec.box((0, 0), (1, 1), h)), sc))
        tang.append(t)
        diff.append(d)
        print(f"h = {h:<10.6g} tangential = {t:.4e}  |Delta F - H| = {d:.4e}")
    print("orders (tangential)  " + "  ".join(f"{o:.3f}" for o in observed_orders(hs, tang)))
    print("orders (difference)  " + "  ".join(f"{o:.3f}" for o in observed_orders(hs, diff)))


if __name__ == "__main__":
    main()
