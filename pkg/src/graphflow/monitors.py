"""Diagnostics along the flow and checkers for the admissibility condition,
the boundary gradient barrier, the maximum principle and *Omega_1."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .domain import DomainSpec, Lattice, diameter, supporting_hyperplane
from .flow import interior_jets
from .geometry import curvature_summary, gram_singular_values, max_pair_product, star_omega1
from .jets import GraphField, operator_norms, sup_norm_D, sup_norm_D2


@dataclass
class DiagnosticsRecord:
    t: float
    area: float
    max_lambda: float
    max_pair_product: float
    min_star_omega1: float
    residual_max: float
    A2_max: float
    boundary_max_Df: float
    xi: float
    energy_spent: float
    f_max: tuple
    f_min: tuple
    # not serialised
    dissipation: float = 0.0
    area_excess: float = 0.0
    min_star_omega1_lateral: float = 1.0


CSV_FIELDS = [
    "t",
    "area",
    "max_lambda",
    "max_pair_product",
    "min_star_omega1",
    "residual_max",
    "A2_max",
    "boundary_max_Df",
    "xi",
    "energy_spent",
]


def node_weights(lattice: Lattice, sub=6):
    """Quadrature weights for interior nodes summing to |Omega| exactly.

    Each node gets the measure of its h-cube inside the domain (sub^n
    midpoint samples for cubes that cross the boundary); the uncovered
    sliver along the boundary is spread over boundary-adjacent nodes.
    """
    cached = lattice._cache.get(("weights", sub))
    if cached is not None:
        return cached
    spec, h, n = lattice.spec, lattice.h, lattice.n
    x = lattice.interior_points()
    w = np.full(len(x), h**n)
    if spec.kind == "ball":
        r = np.linalg.norm(x - np.asarray(spec.center), axis=1)
        cut = np.flatnonzero(r + h * math.sqrt(n) / 2 > spec.radius)
        offs = (np.arange(sub) + 0.5) / sub - 0.5
        grid = np.array(list(itertools.product(offs, repeat=n))) * h
        for k in cut:
            w[k] = h**n * np.mean(spec.contains(x[k] + grid))
    adj = lattice.boundary_adjacent()
    missing = spec.volume() - w.sum()
    w[adj] *= 1 + missing / w[adj].sum()
    lattice._cache[("weights", sub)] = w
    return w


def _box_grid_values(field: GraphField):
    lat = field.lattice
    return field.values[lat.state_index.ravel()].reshape(lat.shape + (field.m,))


def _cell_gradients(field: GraphField):
    """Df at box cell centres from corner differences, shape (cells, m, n)."""
    u = _box_grid_values(field)
    n, h = field.lattice.n, field.lattice.h
    grads = []
    for i in range(n):
        d = np.diff(u, axis=i) / h
        for j in range(n):
            if j != i:
                sl_a = [slice(None)] * d.ndim
                sl_b = [slice(None)] * d.ndim
                sl_a[j], sl_b[j] = slice(None, -1), slice(1, None)
                d = 0.5 * (d[tuple(sl_a)] + d[tuple(sl_b)])
        grads.append(d.reshape(-1, field.m))
    return np.stack(grads, axis=-1)


def _excess(Df=None, lam=None):
    """sqrt(det(I + Df^T Df)) - 1 without cancellation."""
    if lam is None:
        lam = gram_singular_values(Df)
    return np.expm1(0.5 * np.sum(np.log1p(lam**2), axis=-1))


def area_excess(field: GraphField, lam=None):
    """Area minus |Omega|: box cells on boxes, weighted nodes on balls.

    ``lam`` optionally supplies the nodal singular values (ball case).
    """
    lat = field.lattice
    if lat.spec.kind == "box":
        ex = _excess(_cell_gradients(field))
        return math.fsum(ex * lat.h**lat.n)
    if lam is None:
        lam = gram_singular_values(interior_jets(field).Df)
    return math.fsum(node_weights(lat) * _excess(lam=lam))


def area(field: GraphField) -> float:
    return field.lattice.spec.volume() + area_excess(field)


def monitor_step(field: GraphField, prev: DiagnosticsRecord | None = None, dt=0.0, workers=1) -> DiagnosticsRecord:
    lat = field.lattice
    jet = interior_jets(field, workers)
    lam = gram_singular_values(jet.Df)
    H, A2, resid, _ = curvature_summary(jet)
    w = node_weights(lat)
    sqrt_g = 1.0 + _excess(lam=lam)
    dissipation = math.fsum(w * np.sum(H**2, axis=-1) * sqrt_g)
    excess = area_excess(field, lam)
    adj = lat.boundary_adjacent()
    norms = lam[:, 0] if lam.shape[1] else np.zeros(len(lam))
    so = star_omega1(lam)
    energy = 0.0 if prev is None else prev.energy_spent + 0.5 * dt * (prev.dissipation + dissipation)
    xi = float(np.max(norms) ** 2)
    if prev is not None:
        xi = max(xi, prev.xi)
    return DiagnosticsRecord(
        t=float(field.t),
        area=lat.spec.volume() + excess,
        max_lambda=float(np.max(norms)),
        max_pair_product=float(np.max(max_pair_product(lam))),
        min_star_omega1=float(np.min(so)),
        residual_max=float(np.max(np.linalg.norm(resid, axis=-1))),
        A2_max=float(np.max(A2)),
        boundary_max_Df=float(np.max(norms[adj])) if adj.size else 0.0,
        xi=xi,
        energy_spent=energy,
        f_max=tuple(float(v) for v in field.values.max(axis=0)),
        f_min=tuple(float(v) for v in field.values.min(axis=0)),
        dissipation=dissipation,
        area_excess=excess,
        min_star_omega1_lateral=float(np.min(so[adj])) if adj.size else 1.0,
    )


class FlowMonitor:
    """Callable monitor for ``flow.run``; flags invariant losses per step."""

    def __init__(self, psi: GraphField, area_tol=1e-6, eps_mp=None, workers=1):
        self.psi_max = psi.values.max(axis=0)
        self.psi_min = psi.values.min(axis=0)
        scale = 1 + float(np.max(np.abs(psi.values)))
        self.eps_mp = 1e-8 * scale if eps_mp is None else eps_mp
        self.area_tol = area_tol
        self.workers = workers
        self.area0 = None
        self._prev = None
        self._last_prev = None

    def __call__(self, field, prev, dt):
        rec = monitor_step(field, prev, dt, self.workers)
        if self.area0 is None:
            self.area0 = rec.area
        self._last_prev, self._prev = self._prev, rec
        return rec

    def violations(self, rec):
        out = []
        if rec.max_lambda >= 1:
            out.append(f"max singular value {rec.max_lambda:.6g} >= 1")
        if np.any(np.asarray(rec.f_max) > self.psi_max + self.eps_mp) or np.any(
            np.asarray(rec.f_min) < self.psi_min - self.eps_mp
        ):
            out.append("maximum principle margin exceeded")
        prev = self._last_prev
        if prev is not None and rec.area_excess - prev.area_excess > self.area_tol * self.area0:
            out.append(f"area increased by {rec.area_excess - prev.area_excess:.3e}")
        return out


def theorem_a_value(scenario, lattice: Lattice, seed=0):
    """C = 8 n delta sup|D^2 psi| + sqrt(2) sup_boundary |D psi|; admissible iff C < 1."""
    spec = lattice.spec
    try:
        scenario.validate_domain(spec)
        d2 = sup_norm_D2(scenario, lattice, "closure", seed=seed)
        d1 = sup_norm_D(scenario, lattice, "boundary")
    except ValueError as exc:
        raise ValueError(f"scenario {scenario.name} is not defined on the closed domain: {exc}") from exc
    C = 8 * spec.n * diameter(spec) * d2 + math.sqrt(2) * d1
    return C, C < 1


def boundary_gradient_bound(n, delta, xi, supD2, supD_boundary):
    return 4 * n * delta * (1 + xi) * supD2 + math.sqrt(2) * supD_boundary


@dataclass(frozen=True)
class BarrierParams:
    k: float
    nu: float
    nu_k: float


def barrier_parameters(n, delta, xi, supD2) -> BarrierParams:
    """Optimal barrier constants: k = 1/delta, nu k = 4 n delta (1 + xi) sup|D^2 psi|."""
    if not delta > 0:
        raise ValueError("diameter must be positive")
    k = 1.0 / delta
    nu_k = 4 * n * delta * (1 + xi) * supD2
    return BarrierParams(k=k, nu=nu_k / k, nu_k=nu_k)


def barrier_constraint(params: BarrierParams, delta, xi):
    """Left side of nu k^2 / (1 + k delta)^2 / (1 + xi) >= n sup|D^2 psi|."""
    return params.nu * params.k**2 / (1 + params.k * delta) ** 2 / (1 + xi)


def barrier_check(field: GraphField, psi: GraphField, p, params: BarrierParams, alpha, spec: DomainSpec | None = None):
    """min over lattice points of S = nu log(1 + k d_P) -/+ (f^a - psi^a)."""
    spec = spec or field.lattice.spec
    plane = supporting_hyperplane(spec, p)
    d = plane(field.lattice.points)
    log_term = params.nu * np.log1p(params.k * np.maximum(d, 0.0))
    diff = field.values[:, alpha] - psi.values[:, alpha]
    return float(min(np.min(log_term - diff), np.min(log_term + diff)))


@dataclass
class PrincipleReport:
    holds: bool
    worst_margin: float
    violations: list = field(default_factory=list)
    applicable: bool = True


def max_principle_check(series, psi: GraphField, eps=None) -> PrincipleReport:
    """Per component: max f^a(t) <= max psi^a + eps and min f^a(t) >= min psi^a - eps."""
    if not series:
        raise ValueError("empty diagnostics series")
    pmax, pmin = psi.values.max(axis=0), psi.values.min(axis=0)
    eps = 1e-8 * (1 + float(np.max(np.abs(psi.values)))) if eps is None else eps
    worst = -math.inf
    bad = []
    for rec in series:
        over = np.asarray(rec.f_max) - pmax
        under = pmin - np.asarray(rec.f_min)
        margin = float(max(over.max(), under.max()))
        worst = max(worst, margin)
        if margin > eps:
            bad.append((rec.t, margin))
    return PrincipleReport(not bad, worst, bad)


def star_omega_min_principle(series, tol=1e-6) -> PrincipleReport:
    """min of *Omega_1 over interior x elapsed time is reached on the parabolic boundary.

    The lateral boundary is represented by the boundary-adjacent interior
    nodes, the closest places where Df is available.
    """
    if not series:
        raise ValueError("empty diagnostics series")
    if any(rec.max_pair_product >= 1 for rec in series):
        return PrincipleReport(True, 0.0, applicable=False)
    parabolic = min([series[0].min_star_omega1] + [r.min_star_omega1_lateral for r in series])
    overall = min(r.min_star_omega1 for r in series)
    margin = parabolic - overall
    return PrincipleReport(margin <= tol, margin, [] if margin <= tol else [margin])


def boundary_probe_norms(field: GraphField):
    """|Df| at the boundary-adjacent interior nodes."""
    jet = interior_jets(field)
    adj = field.lattice.boundary_adjacent()
    return operator_norms(jet.Df[adj])
