"""Time stepping for the nonparametric mean curvature flow

    df^a/dt = g^{ij} d^2 f^a / dx^i dx^j,   f = psi on the boundary.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import induced_metric, mean_curvature_vector, normal_projection, system_residual
from .jets import GraphField, Jet, jets, stencils


class NumericalFailure(RuntimeError):
    def __init__(self, message, node=None, residual=None):
        super().__init__(message)
        self.node = node
        self.residual = residual


class Termination(str, enum.Enum):
    REACHED_T_END = "reached_t_end"
    STEADY_STATE = "steady_state"
    INVARIANT_VIOLATION = "invariant_violation"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class StepConfig:
    scheme: str = "explicit"
    dt: float | str = "auto"
    safety: float = 0.8
    solver_tol: float = 1e-10
    picard_iters: int = 1
    t_end: float = 0.05
    steady_tol: float | None = None
    max_steps: int = 1_000_000
    workers: int = 1

    def __post_init__(self):
        if self.scheme not in ("explicit", "semi_implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.safety < 1:
            raise ValueError(f"safety must lie in (0, 1), got {self.safety}")
        if not 0 < self.solver_tol <= 1e-8:
            raise ValueError(f"solver_tol must lie in (0, 1e-8], got {self.solver_tol}")
        if self.picard_iters < 1:
            raise ValueError("picard_iters must be >= 1")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError(f"dt must be 'auto' or positive, got {self.dt!r}")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def _chunks(count, workers):
    bounds = np.linspace(0, count, workers + 1).round().astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def interior_jets(field: GraphField, workers=1) -> Jet:
    """Jets at all interior nodes, optionally split over a thread pool.

    Each node's jet is computed by the same row operations whatever the
    split, so the result is bit-identical for any worker count.
    """
    if workers == 1 or field._jet is not None:
        return jets(field)
    lat = field.lattice
    st = stencils(lat)
    key = ("row_blocks", workers)
    blocks = lat._cache.get(key)
    if blocks is None:
        ni, n, npairs = lat.n_interior, lat.n, len(st.pairs)
        blocks = []
        for s in _chunks(ni, workers):
            r1 = np.concatenate([np.arange(s.start, s.stop) + i * ni for i in range(n)])
            r2 = np.concatenate([np.arange(s.start, s.stop) + p * ni for p in range(npairs)])
            blocks.append((s, st.D1[r1], st.D2[r2]))
        lat._cache[key] = blocks

    def work(block):
        s, d1, d2 = block
        k = s.stop - s.start
        m, n = field.m, lat.n
        a = (d1 @ field.values).reshape(n, k, m).transpose(1, 2, 0)
        b = (d2 @ field.values).reshape(len(st.pairs), k, m)
        D2f = np.empty((k, m, n, n))
        for p, (i, j) in enumerate(st.pairs):
            D2f[:, :, i, j] = b[p]
            D2f[:, :, j, i] = b[p]
        return np.ascontiguousarray(a), D2f

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(work, blocks))
    field._jet = Jet(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
    return field._jet


def _finite_jet(field, workers=1) -> Jet:
    jet = interior_jets(field, workers)
    # slopes beyond 1e100 overflow the metric inverse
    ok = np.all(np.abs(jet.Df) < 1e100, axis=(-2, -1)) & np.all(np.isfinite(jet.D2f), axis=(-3, -2, -1))
    if not ok.all():
        k = int(np.flatnonzero(~ok)[0])
        raise NumericalFailure(f"non-finite derivatives at interior node {k}", node=k)
    return jet


def stable_dt(field: GraphField, safety=0.8, workers=1) -> float:
    """sigma h^2 / (2 sum_i max_nodes g^{ii} / (theta_- theta_+)_i).

    theta are the Shortley-Weller neighbour fractions (1 away from curved
    boundaries), so on boxes this is sigma h^2 / (2 sum_i max g^{ii}).
    """
    lat = field.lattice
    try:
        _, g_inv, _ = induced_metric(_finite_jet(field, workers).Df)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"induced metric not invertible: {exc}") from None
    diag = np.diagonal(g_inv, axis1=-2, axis2=-1) / (lat.theta[:, :, 0] * lat.theta[:, :, 1])
    return float(safety * lat.h**2 / (2 * np.sum(np.max(diag, axis=0))))


def velocity(field: GraphField, workers=1):
    """Right-hand side g^{ij} D_ij f^a at interior nodes, shape (n_interior, m)."""
    jet = _finite_jet(field, workers)
    try:
        return system_residual(jet)
    except np.linalg.LinAlgError as exc:
        # huge rank-deficient slopes swamp the identity in g
        raise NumericalFailure(f"induced metric not invertible: {exc}") from None


def _check_finite(values, what):
    bad = np.flatnonzero(~np.all(np.isfinite(values), axis=-1))
    if bad.size:
        raise NumericalFailure(f"{what} produced non-finite values at interior node {int(bad[0])}", node=int(bad[0]))


def step_explicit(field: GraphField, dt, workers=1) -> GraphField:
    new = field.interior_values + dt * velocity(field, workers)
    _check_finite(new, "explicit step")
    return field.replace(new, field.t + dt)


def frozen_operator(field: GraphField):
    """Sparse L with (L u)_k = g^{ij}(k) (D_ij u)_k, metric frozen from ``field``."""
    lat = field.lattice
    st = stencils(lat)
    ni = lat.n_interior
    _, g_inv, _ = induced_metric(jets(field).Df)
    blocks = []
    for p, (i, j) in enumerate(st.pairs):
        c = g_inv[:, i, j] * (1.0 if i == j else 2.0)
        blocks.append(sp.diags(c) @ st.D2[p * ni : (p + 1) * ni])
    L = blocks[0]
    for b in blocks[1:]:
        L = L + b
    return L.tocsr()


def _solve(A, b, tol):
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros_like(b), 0.0
    try:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
    except RuntimeError:
        M = None
    x, info = spla.gmres(A, b, rtol=tol, atol=0.0, restart=60, maxiter=200, M=M)
    res = np.linalg.norm(b - A @ x) / bnorm
    if res > tol:
        raise NumericalFailure(f"linear solve stalled at relative residual {res:.3e}", residual=res)
    return x, res


def step_semi_implicit(field: GraphField, dt, cfg: StepConfig) -> GraphField:
    """Backward Euler with the metric lagged from the newest Picard iterate."""
    lat = field.lattice
    ni = lat.n_interior
    f_old = field.interior_values
    fb = field.boundary_values
    current = field
    for _ in range(cfg.picard_iters):
        L = frozen_operator(current)
        A = (sp.identity(ni, format="csr") - dt * L[:, :ni]).tocsr()
        rhs = f_old + dt * (L[:, ni:] @ fb)
        new = np.empty_like(f_old)
        for a in range(field.m):
            new[:, a], _ = _solve(A, rhs[:, a], cfg.solver_tol)
        _check_finite(new, "semi-implicit step")
        current = field.replace(new, field.t + dt)
    return current


def step(field, dt, cfg: StepConfig):
    if cfg.scheme == "explicit":
        return step_explicit(field, dt, cfg.workers)
    return step_semi_implicit(field, dt, cfg)


def max_residual(field: GraphField, workers=1) -> float:
    return float(np.max(np.linalg.norm(velocity(field, workers), axis=-1)))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    reason: Termination | None = None
    steps: int = 0
    failure: str | None = None

    @property
    def final(self):
        return self.snapshots[-1][1] if self.snapshots else None


def run(field0: GraphField, cfg: StepConfig, monitor=None, snapshot_every=0, strict=False, on_step=None):
    """Advance ``field0`` until t_end, steady state, a strict violation or failure.

    ``monitor`` is a callable (field, prev_record, dt) -> record exposing
    ``violations(record)``; ``snapshot_every`` = 0 keeps only the first and
    last states.
    """
    h = field0.lattice.h
    steady_tol = cfg.steady_tol if cfg.steady_tol is not None else 10 * h * h
    traj = Trajectory()
    field = field0
    traj.snapshots.append((field.t, field))
    record = monitor(field, None, 0.0) if monitor else None
    if record is not None:
        traj.records.append(record)
    last = field
    while True:
        if traj.steps >= cfg.max_steps:
            traj.reason = Termination.REACHED_T_END
            break
        try:
            dt = stable_dt(field, cfg.safety, cfg.workers) if cfg.dt == "auto" else float(cfg.dt)
            remaining = cfg.t_end - field.t
            if dt >= remaining * (1 - 1e-12):
                dt = remaining
            nxt = step(field, dt, cfg)
        except NumericalFailure as exc:
            traj.reason = Termination.NUMERICAL_FAILURE
            traj.failure = str(exc)
            break
        if dt == remaining:
            nxt.t = cfg.t_end
        traj.steps += 1
        field = nxt
        if on_step is not None:
            on_step(field)
        if monitor is not None:
            try:
                record = monitor(field, record, dt)
            except (NumericalFailure, np.linalg.LinAlgError) as exc:
                traj.reason = Termination.NUMERICAL_FAILURE
                traj.failure = f"diagnostics failed at t = {field.t:.6g}: {exc}"
                break
            traj.records.append(record)
            found = monitor.violations(record)
            if found:
                traj.violations.extend((field.t, v) for v in found)
                if strict:
                    traj.reason = Termination.INVARIANT_VIOLATION
                    break
        if snapshot_every and traj.steps % snapshot_every == 0:
            traj.snapshots.append((field.t, field))
            last = field
        try:
            res = record.residual_max if record is not None else max_residual(field, cfg.workers)
        except NumericalFailure as exc:
            traj.reason = Termination.NUMERICAL_FAILURE
            traj.failure = str(exc)
            break
        if res < steady_tol:
            traj.reason = Termination.STEADY_STATE
            break
        if field.t >= cfg.t_end:
            traj.reason = Termination.REACHED_T_END
            break
    if last is not field:
        traj.snapshots.append((field.t, field))
    traj.times = [t for t, _ in traj.snapshots]
    return traj


def velocity_consistency(field_t: GraphField, field_next: GraphField, dt) -> float:
    """max_k | ((0, (f_next - f) / dt))^perp - H |, geometry taken from field_t."""
    if field_t.lattice is not field_next.lattice and field_t.lattice.fingerprint() != field_next.lattice.fingerprint():
        raise ValueError("fields live on different lattices")
    jet = jets(field_t)
    n = field_t.lattice.n
    v = (field_next.interior_values - field_t.interior_values) / dt
    v = np.pad(v, [(0, 0), (n, 0)])
    dev = normal_projection(v, jet.Df) - mean_curvature_vector(jet)
    return float(np.max(np.linalg.norm(dev, axis=-1)))
