"""Diagnostics CSV, raw snapshots with a text sidecar, atomic file writes."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

from .domain import DomainSpec, Lattice, build_lattice
from .jets import GraphField
from .monitors import CSV_FIELDS, DiagnosticsRecord

CSV_COLUMNS_BASE = tuple(CSV_FIELDS)
SNAPSHOT_FORMAT = "graphflow-snapshot-1"


class SnapshotError(ValueError):
    pass


def atomic_write(path, data: bytes | str):
    """Write to a temporary file next to ``path`` and rename over it."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _num(v) -> str:
    return format(float(v), ".17g")


def csv_header(m):
    return list(CSV_COLUMNS_BASE) + [f"f_max_{a + 1}" for a in range(m)] + [f"f_min_{a + 1}" for a in range(m)]


def diagnostics_csv(series) -> str:
    series = list(series)
    if not series:
        raise ValueError("cannot write an empty diagnostics series")
    m = len(series[0].f_max)
    rows = [",".join(csv_header(m))]
    for rec in series:
        vals = [getattr(rec, k) for k in CSV_COLUMNS_BASE] + list(rec.f_max) + list(rec.f_min)
        rows.append(",".join(_num(v) for v in vals))
    return "\n".join(rows) + "\n"


def write_diagnostics(series, path):
    try:
        return atomic_write(path, diagnostics_csv(series))
    except OSError as exc:
        raise OSError(f"cannot write diagnostics to {path}: {exc}") from exc


def read_diagnostics(path):
    """Column name -> float array."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read diagnostics from {path}: {exc}") from exc
    lines = text.rstrip("\n").split("\n")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]], dtype=float).reshape(-1, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def records_from_columns(cols):
    m = sum(1 for k in cols if k.startswith("f_max_"))
    out = []
    for r in range(len(cols["t"])):
        kw = {k: float(cols[k][r]) for k in CSV_COLUMNS_BASE}
        kw["f_max"] = tuple(float(cols[f"f_max_{a + 1}"][r]) for a in range(m))
        kw["f_min"] = tuple(float(cols[f"f_min_{a + 1}"][r]) for a in range(m))
        out.append(DiagnosticsRecord(**kw))
    return out


def _spec_lines(spec: DomainSpec):
    out = [f"kind = {spec.kind}", f"n = {spec.n}", f"h = {spec.h!r}"]
    if spec.kind == "box":
        out += ["lower = " + ", ".join(repr(v) for v in spec.lower), "upper = " + ", ".join(repr(v) for v in spec.upper)]
    else:
        out += ["center = " + ", ".join(repr(v) for v in spec.center), f"radius = {spec.radius!r}"]
    return out


def _spec_from_meta(meta):
    vec = lambda s: tuple(float(v) for v in s.split(","))  # noqa: E731
    if meta["kind"] == "box":
        return DomainSpec.box(vec(meta["lower"]), vec(meta["upper"]), float(meta["h"]))
    return DomainSpec.ball(int(meta["n"]), float(meta["h"]), float(meta["radius"]), vec(meta["center"]))


def snapshot_bytes(field: GraphField):
    raw = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    meta = [f"format = {SNAPSHOT_FORMAT}"] + _spec_lines(field.lattice.spec)
    meta += [
        f"m = {field.m}",
        f"n_state = {field.lattice.n_state}",
        f"t = {float(field.t)!r}",
        f"sha256 = {hashlib.sha256(raw).hexdigest()}",
    ]
    return raw, "\n".join(meta) + "\n"


def write_snapshot(field: GraphField, path):
    raw, meta = snapshot_bytes(field)
    path = Path(path)
    atomic_write(path, raw)
    atomic_write(path.with_name(path.name + ".meta"), meta)
    return path


def read_snapshot_meta(path):
    meta_path = Path(str(path) + ".meta")
    try:
        text = meta_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SnapshotError(f"cannot read sidecar {meta_path}: {exc}") from exc
    meta = {}
    for line in text.splitlines():
        if line.strip():
            k, v = (p.strip() for p in line.split("=", 1))
            meta[k] = v
    if meta.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"{meta_path} is not a {SNAPSHOT_FORMAT} sidecar")
    return meta


def read_snapshot(path, lattice: Lattice | None = None) -> GraphField:
    """Load and validate a snapshot; ``lattice`` must match the recorded domain if given."""
    meta = read_snapshot_meta(path)
    raw = Path(path).read_bytes()
    if hashlib.sha256(raw).hexdigest() != meta["sha256"]:
        raise SnapshotError(f"checksum mismatch in {path}")
    spec = _spec_from_meta(meta)
    if lattice is None:
        lattice = build_lattice(spec)
    elif lattice.spec != spec:
        raise SnapshotError(f"snapshot {path} was written on a different domain")
    m, ns = int(meta["m"]), int(meta["n_state"])
    if ns != lattice.n_state or len(raw) != 8 * ns * m:
        raise SnapshotError(f"snapshot {path} does not fit the lattice ({ns} x {m} values expected)")
    values = np.frombuffer(raw, dtype="<f8").reshape(ns, m).astype(float)
    return GraphField(lattice, values, float(meta["t"]))
