"""Command line entry point: ``graphflow <subcommand> ...``.

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 strict-mode invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, scenarios
from .analysis import annulus_points, cone_study
from .config import ConfigError, RunConfig, parse_config, serialize_config
from .domain import DomainError, build_lattice, diameter
from .flow import NumericalFailure, Termination, max_residual, run
from .jets import GraphField, sup_norm_D, sup_norm_D2
from .monitors import FlowMonitor, boundary_gradient_bound, theorem_a_value
from .plot import render_plot
from .serialize import SnapshotError, atomic_write, read_snapshot, write_diagnostics, write_snapshot

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 2, 3, 4

_NUM = {"type": "number"}
_STR = {"type": "string"}


def _obj(props, required=None):
    return {
        "type": "object",
        "properties": {"command": _STR, "status": {"enum": ["ok", "error"]}, **props},
        "required": ["command", "status"] + list(required if required is not None else props),
    }


ERROR_SCHEMA = _obj({"error": _STR, "exit_code": {"type": "integer"}})

SCHEMAS = {
    "run": _obj(
        {
            "reason": {"enum": [t.value for t in Termination]},
            "steps": {"type": "integer"},
            "t_final": _NUM,
            "C": _NUM,
            "admissible": {"type": "boolean"},
            "boundary_gradient_bound": _NUM,
            "final_residual": _NUM,
            "violations": {"type": "array", "items": {"type": "array"}},
            "failure": {"type": ["string", "null"]},
            "files": {"type": "array", "items": _STR},
            "version": _STR,
        }
    ),
    "check-condition": _obj(
        {
            "C": _NUM,
            "admissible": {"type": "boolean"},
            "delta": _NUM,
            "sup_D2_psi": _NUM,
            "sup_boundary_D_psi": _NUM,
        }
    ),
    "residual": _obj({"source": {"enum": ["config", "snapshot"]}, "t": _NUM, "residual_max": _NUM}),
    "cone-analyze": _obj(
        {
            "R": _NUM,
            "r_min": _NUM,
            "points": {"type": "integer"},
            "h": {"type": "array", "items": _NUM},
            "residual": {"type": "array", "items": _NUM},
            "ratios": {"type": "array", "items": _NUM},
            "orders": {"type": "array", "items": _NUM},
        }
    ),
    "list-scenarios": _obj(
        {
            "scenarios": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"name": _STR, "dimensions": _STR, "parameters": {"type": "object"}},
                    "required": ["name", "dimensions", "parameters"],
                },
            }
        }
    ),
    "plot": _obj({"csv": _STR, "quantity": _STR, "svg": _STR}),
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


@dataclass
class RunResult:
    reason: Termination
    steps: int
    t_final: float
    files: list = field(default_factory=list)
    report: dict = field(default_factory=dict)

    @property
    def exit_code(self):
        if self.reason == Termination.NUMERICAL_FAILURE:
            return EXIT_NUMERICAL
        if self.reason == Termination.INVARIANT_VIOLATION:
            return EXIT_VIOLATION
        return EXIT_OK


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_INVALID) from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INVALID) from None


def run_config(cfg: RunConfig, out_dir=None) -> RunResult:
    """Run the flow described by ``cfg`` and write CSV, snapshots, SVG and report."""
    if cfg.scenario == "lawson_osserman_cone":
        raise CliError("the cone scenario is evaluation-only; use cone-analyze", EXIT_INVALID)
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    scenario = cfg.make_scenario()
    try:
        lattice = build_lattice(cfg.domain)
        psi = GraphField.sample(lattice, scenario)
        C, ok = theorem_a_value(scenario, lattice, seed=cfg.monitors.seed)
    except (DomainError, ValueError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    monitor = FlowMonitor(psi, area_tol=cfg.monitors.area_tol, eps_mp=cfg.monitors.mp_eps, workers=cfg.stepping.workers)
    traj = run(psi, cfg.stepping, monitor, snapshot_every=cfg.output.snapshot_every, strict=cfg.monitors.strict)

    cad = cfg.monitors.cadence
    recs = traj.records
    rows = [r for k, r in enumerate(recs) if k % cad == 0 or k == len(recs) - 1]
    files = []
    write_diagnostics(rows, out / "diagnostics.csv")
    files.append("diagnostics.csv")
    for k, (_, f) in enumerate(traj.snapshots):
        name = f"snapshots/snap_{k:05d}.bin"
        write_snapshot(f, out / name)
        files += [name, name + ".meta"]
    svg = f"{cfg.output.plot}.svg"
    render_plot(out / "diagnostics.csv", cfg.output.plot, out / svg)
    files.append(svg)
    atomic_write(out / "config.resolved", serialize_config(cfg))
    files.append("config.resolved")

    final = traj.snapshots[-1][1]
    last = recs[-1]
    supD2 = sup_norm_D2(scenario, lattice, "closure", seed=cfg.monitors.seed)
    supDb = sup_norm_D(scenario, lattice, "boundary")
    report = {
        "command": "run",
        "status": "ok",
        "reason": traj.reason.value,
        "steps": traj.steps,
        "t_final": float(final.t),
        "C": float(C),
        "admissible": bool(ok),
        "boundary_gradient_bound": boundary_gradient_bound(lattice.n, diameter(cfg.domain), last.xi, supD2, supDb),
        "final_residual": float(last.residual_max),
        "violations": [[float(t), v] for t, v in traj.violations],
        "failure": traj.failure,
        "files": files + ["report.json"],
        "version": __version__,
    }
    atomic_write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return RunResult(traj.reason, traj.steps, float(final.t), report["files"], report)


def _cmd_run(args):
    cfg = load_config(args.config)
    res = run_config(cfg, args.out)
    return res.report, res.exit_code


def _cmd_check(args):
    cfg = load_config(args.config)
    scenario = cfg.make_scenario()
    try:
        lattice = build_lattice(cfg.domain)
        C, ok = theorem_a_value(scenario, lattice, seed=cfg.monitors.seed)
    except (DomainError, ValueError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    return {
        "command": "check-condition",
        "status": "ok",
        "C": float(C),
        "admissible": bool(ok),
        "delta": diameter(cfg.domain),
        "sup_D2_psi": sup_norm_D2(scenario, lattice, "closure", seed=cfg.monitors.seed),
        "sup_boundary_D_psi": sup_norm_D(scenario, lattice, "boundary"),
    }, EXIT_OK


def _cmd_residual(args):
    path = Path(args.source)
    if Path(str(path) + ".meta").exists():
        try:
            f = read_snapshot(path)
        except (SnapshotError, OSError) as exc:
            raise CliError(str(exc), EXIT_INVALID) from None
        source = "snapshot"
    else:
        cfg = load_config(path)
        try:
            f = GraphField.sample(build_lattice(cfg.domain), cfg.make_scenario())
        except (DomainError, ValueError) as exc:
            raise CliError(str(exc), EXIT_INVALID) from None
        source = "config"
    try:
        r = max_residual(f)
    except (NumericalFailure, ValueError) as exc:
        raise CliError(str(exc), EXIT_NUMERICAL) from None
    return {"command": "residual", "status": "ok", "source": source, "t": float(f.t), "residual_max": r}, EXIT_OK


def _cmd_cone(args):
    try:
        sc = scenarios.lawson_osserman_cone(args.R, args.rmin)
        hs = sorted({float(h) for h in args.h}, reverse=True)
        if any(not h > 0 for h in hs):
            raise ValueError("h must be positive")
        hs, errs, orders = cone_study(sc, hs, args.rmax)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    pts = annulus_points(args.rmin, args.rmax, hs[0], math.sqrt(2) * hs[0])
    ratios = [a / b if b > 0 else math.inf for a, b in zip(errs[:-1], errs[1:])]
    return {
        "command": "cone-analyze",
        "status": "ok",
        "R": float(args.R),
        "r_min": float(args.rmin),
        "points": int(len(pts)),
        "h": hs,
        "residual": [float(e) for e in errs],
        "ratios": [float(r) for r in ratios],
        "orders": [float(o) for o in np.asarray(orders)],
    }, EXIT_OK


def _cmd_list(args):
    items = []
    for name, (_, schema) in scenarios.REGISTRY.items():
        params = {k: {"type": t, "default": (None if d is None else d)} for k, (t, d) in schema.items()}
        items.append({"name": name, "dimensions": scenarios.DIMENSIONS[name], "parameters": params})
    return {"command": "list-scenarios", "status": "ok", "scenarios": items}, EXIT_OK


def _cmd_plot(args):
    csv = Path(args.csv)
    svg = Path(args.out) if args.out else csv.with_name(f"{csv.stem}.{args.quantity}.svg")
    try:
        render_plot(csv, args.quantity, svg)
    except KeyError as exc:
        raise CliError(str(exc.args[0]), EXIT_INVALID) from None
    except (OSError, ValueError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    return {"command": "plot", "status": "ok", "csv": str(csv), "quantity": args.quantity, "svg": str(svg)}, EXIT_OK


def _human(report):
    cmd = report["command"]
    if report["status"] == "error":
        return f"error: {report['error']}"
    if cmd == "check-condition":
        return (
            f"C = {report['C']:.6g}\nadmissible = {str(report['admissible']).lower()}\n"
            f"delta = {report['delta']:.6g}, sup|D^2 psi| = {report['sup_D2_psi']:.6g}, "
            f"sup_boundary |D psi| = {report['sup_boundary_D_psi']:.6g}"
        )
    if cmd == "run":
        lines = [f"reason = {report['reason']}", f"steps = {report['steps']}", f"t = {report['t_final']:.6g}"]
        lines.append(f"C = {report['C']:.6g} (admissible = {str(report['admissible']).lower()})")
        lines.append(f"final residual = {report['final_residual']:.6g}")
        lines += [f"violation at t = {t:.6g}: {v}" for t, v in report["violations"][:10]]
        if report["failure"]:
            lines.append(f"failure: {report['failure']}")
        return "\n".join(lines)
    if cmd == "residual":
        return f"max residual = {report['residual_max']:.6g} (t = {report['t']:.6g}, from {report['source']})"
    if cmd == "cone-analyze":
        lines = [f"R = {report['R']:.8g}, r_min = {report['r_min']:.6g}, {report['points']} points"]
        lines += [f"h = {h:.6g}  residual = {e:.6e}" for h, e in zip(report["h"], report["residual"])]
        lines += [f"ratio = {r:.4f}  order = {o:.4f}" for r, o in zip(report["ratios"], report["orders"])]
        return "\n".join(lines)
    if cmd == "list-scenarios":
        return "\n".join(
            f"{s['name']:<22} {s['dimensions']:<22} " + " ".join(f"{k}:{v['type']}" for k, v in s["parameters"].items())
            for s in report["scenarios"]
        )
    if cmd == "plot":
        return f"wrote {report['svg']}"
    return json.dumps(report)


def build_parser():
    p = argparse.ArgumentParser(prog="graphflow", description="Nonparametric mean curvature flow in any codimension.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json", action="store_true", help="machine-readable report")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("run", _cmd_run, "run the flow from a config file")
    sp.add_argument("config")
    sp.add_argument("--out", help="override the output directory")
    add("check-condition", _cmd_check, "evaluate the admissibility constant C").add_argument("config")
    add("residual", _cmd_residual, "max stationary residual of a config's data or a snapshot").add_argument("source")
    sp = add("cone-analyze", _cmd_cone, "cone residual refinement study on an annulus")
    sp.add_argument("--R", type=float, required=True)
    sp.add_argument("--rmin", type=float, default=0.3)
    sp.add_argument("--rmax", type=float, default=1.0)
    sp.add_argument("--h", type=float, action="append", required=True, help="repeat for several spacings")
    add("list-scenarios", _cmd_list, "list built-in scenarios")
    sp = add("plot", _cmd_plot, "render a diagnostics column as SVG")
    sp.add_argument("csv")
    sp.add_argument("--quantity", required=True)
    sp.add_argument("--out")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        report, code = args.fn(args)
    except CliError as exc:
        report, code = {"command": args.command, "status": "error", "error": str(exc), "exit_code": exc.code}, exc.code
    except NumericalFailure as exc:
        report, code = {"command": args.command, "status": "error", "error": str(exc), "exit_code": EXIT_NUMERICAL}, EXIT_NUMERICAL
    text = json.dumps(report, sort_keys=True) if args.json else _human(report)
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
