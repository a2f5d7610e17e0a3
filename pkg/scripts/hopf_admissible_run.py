"""Flow from admissible Hopf data on the unit ball of R^4 with all monitors on.

    python scripts/hopf_admissible_run.py --R 0.0068 --h 0.125 --t-end 0.05
"""

import argparse
import time

import numpy as np

from graphflow import scenarios
from graphflow.domain import DomainSpec, build_lattice, diameter
from graphflow.flow import StepConfig, run
from graphflow.jets import GraphField, sup_norm_D, sup_norm_D2
from graphflow.monitors import (
    FlowMonitor,
    barrier_check,
    barrier_parameters,
    boundary_gradient_bound,
    max_principle_check,
    star_omega_min_principle,
    theorem_a_value,
)
from graphflow.serialize import write_diagnostics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--R", type=float, default=0.0068)
    ap.add_argument("--h", type=float, default=0.125)
    ap.add_argument("--t-end", type=float, default=0.05)
    ap.add_argument("--scheme", choices=["explicit", "semi_implicit"], default="explicit")
    ap.add_argument("--dt", default="auto")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="write the diagnostics series here")
    args = ap.parse_args()

    lat = build_lattice(DomainSpec.ball(4, args.h))
    sc = scenarios.hopf_quadratic(args.R)
    psi = GraphField.sample(lat, sc)
    C, ok = theorem_a_value(sc, lat)
    print(f"C(R = {args.R}) = {C:.6f}  admissible = {ok}")

    dt = args.dt if args.dt == "auto" else float(args.dt)
    cfg = StepConfig(scheme=args.scheme, dt=dt, t_end=args.t_end, steady_tol=0.0, workers=args.workers)
    t0 = time.perf_counter()
    traj = run(psi, cfg, FlowMonitor(psi, workers=args.workers), snapshot_every=50)
    recs = traj.records
    print(f"{traj.reason.value} after {traj.steps} steps in {time.perf_counter() - t0:.1f} s")

    supD2, supDb = sup_norm_D2(sc, lat, "closure"), sup_norm_D(sc, lat, "boundary")
    delta = diameter(lat.spec)
    bound = boundary_gradient_bound(4, delta, recs[-1].xi, supD2, supDb)
    print(f"max lambda over run      {max(r.max_lambda for r in recs):.6g}")
    print(f"max pair product         {max(r.max_pair_product for r in recs):.6g}")
    print(f"boundary |Df| / bound    {max(r.boundary_max_Df for r in recs):.6g} / {bound:.6g}")
    mp = max_principle_check(recs, psi)
    print(f"max principle            holds = {mp.holds}, worst margin {mp.worst_margin:.3e}")
    so = star_omega_min_principle(recs)
    print(f"*Omega_1 principle       holds = {so.holds}, margin {so.worst_margin:.3e}")
    excess = np.array([r.area_excess for r in recs])
    print(f"largest area increase    {np.max(np.diff(excess)):.3e}")
    drop = excess[0] - excess[-1]
    print(f"area drop / energy spent {drop:.6e} / {recs[-1].energy_spent:.6e}")

    params = barrier_parameters(4, delta, recs[-1].xi, supD2)
    final = traj.final
    worst = min(
        barrier_check(final, psi, p, params, a) for p in np.eye(4) for a in range(3)
    )
    print(f"barrier minimum at t_end {worst:.3e} (axis boundary points)")
    if args.csv:
        write_diagnostics(recs, args.csv)
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
