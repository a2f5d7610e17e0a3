"""Refinement studies: stationary residuals of exact solutions, the cone on
annuli, and the divergence-form Laplacian of the graph embedding."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .domain import DomainSpec, build_lattice
from .geometry import induced_metric, mean_curvature_vector, normal_projection
from .jets import GraphField, Jet, jets


def discrete_residual(scenario, spec: DomainSpec) -> float:
    """max over interior nodes of |g^{ij} D_ij f| for psi sampled on the lattice."""
    scenario.validate_domain(spec)
    field = GraphField.sample(build_lattice(spec), scenario)
    jet = jets(field)
    _, g_inv, _ = induced_metric(jet.Df)
    r = np.einsum("kij,kaij->ka", g_inv, jet.D2f)
    return float(np.max(np.linalg.norm(r, axis=-1)))


def observed_orders(hs, errors):
    """log(e_k / e_{k+1}) / log(h_k / h_{k+1}) for consecutive refinements."""
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    if len(hs) != len(errors) or len(hs) < 2:
        raise ValueError("need at least two (h, error) pairs")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


def residual_study(scenario, spec: DomainSpec, levels=3):
    """Residuals on h, h/2, ... and the observed orders between them."""
    hs = [spec.h / 2**k for k in range(levels)]
    errs = [discrete_residual(scenario, spec.with_h(h)) for h in hs]
    return hs, errs, observed_orders(hs, errs)


def annulus_points(r_min, r_max, spacing, reach, n=4):
    """Nodes of the lattice spacing * Z^n with r_min + reach <= |x| <= r_max - reach."""
    k = int(math.floor(r_max / spacing))
    ax = spacing * np.arange(-k, k + 1)
    grid = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    r = np.linalg.norm(grid, axis=1)
    return grid[(r >= r_min + reach) & (r <= r_max - reach)]


def _central_jet(psi, x, h):
    n = x.shape[1]
    f0 = psi(x)
    m = f0.shape[1]
    Df = np.empty((len(x), m, n))
    D2f = np.empty((len(x), m, n, n))
    eye = np.eye(n) * h
    for i in range(n):
        fp, fm = psi(x + eye[i]), psi(x - eye[i])
        Df[:, :, i] = (fp - fm) / (2 * h)
        D2f[:, :, i, i] = (fp - 2 * f0 + fm) / h**2
    for i, j in itertools.combinations(range(n), 2):
        a, b = eye[i], eye[j]
        v = (psi(x + a + b) - psi(x + a - b) - psi(x - a + b) + psi(x - a - b)) / (4 * h * h)
        D2f[:, :, i, j] = D2f[:, :, j, i] = v
    return Jet(Df, D2f)


def stencil_residual(scenario, points, h, chunk=4096) -> float:
    """max over ``points`` of |g^{ij} D_ij f| with central differences of spacing h."""
    worst = 0.0
    for s in range(0, len(points), chunk):
        jet = _central_jet(scenario.psi, points[s : s + chunk], h)
        _, g_inv, _ = induced_metric(jet.Df)
        r = np.einsum("kij,kaij->ka", g_inv, jet.D2f)
        worst = max(worst, float(np.max(np.linalg.norm(r, axis=-1))))
    return worst


def cone_study(scenario, hs, r_max=1.0):
    """Cone residuals on a fixed point set for each h in ``hs``.

    The points are the annulus nodes of the coarsest spacing whose full
    stencil (reach sqrt(2) h) stays inside r_min <= |x| <= r_max, so every
    level measures truncation error at the same places.
    """
    hs = sorted((float(h) for h in hs), reverse=True)
    r_min = scenario.params["r_min"]
    pts = annulus_points(r_min, r_max, hs[0], math.sqrt(2) * hs[0], scenario.n)
    if len(pts) == 0:
        raise ValueError(f"no evaluation points in the annulus for h = {hs[0]}")
    errs = [stencil_residual(scenario, pts, h) for h in hs]
    return hs, errs, (observed_orders(hs, errs) if len(hs) > 1 else np.array([]))


def divergence_form_laplacian(field: GraphField):
    """Delta F = g^{-1/2} d_i (sqrt(g) g^{ij} d_j F) for F = (x, f) on a box.

    Fluxes live on cell faces (normal derivative from the two nodes, the
    others averaged from central differences).  Returns (state indices,
    Delta F in R^{n+m}) for nodes at least two steps from the boundary.
    """
    lat = field.lattice
    if lat.spec.kind != "box":
        raise ValueError("divergence-form Laplacian is implemented on boxes")
    n, h, m = lat.n, lat.h, field.m
    u = field.values[lat.state_index.ravel()].reshape(lat.shape + (m,))
    central = np.full(lat.shape + (m, n), np.nan)
    inner = tuple(slice(1, -1) for _ in range(n))
    for j in range(n):
        up = [slice(1, -1)] * n
        dn = [slice(1, -1)] * n
        up[j], dn[j] = slice(2, None), slice(None, -2)
        central[inner + (slice(None), j)] = (u[tuple(up)] - u[tuple(dn)]) / (2 * h)

    def flux(Df, i):
        g, g_inv, det_g = induced_metric(np.nan_to_num(Df))
        row = g_inv[..., i, :]
        vec = np.concatenate([row, np.einsum("...aj,...j->...a", Df, row)], axis=-1)
        return np.sqrt(det_g)[..., None] * vec

    total = np.zeros(lat.shape + (n + m,))
    for i in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[i], hi[i] = slice(None, -1), slice(1, None)
        face = 0.5 * (central[tuple(lo)] + central[tuple(hi)])
        face[..., i] = (u[tuple(hi)] - u[tuple(lo)]) / h
        F = flux(face, i)
        F[np.any(np.isnan(face), axis=(-2, -1))] = np.nan
        div = np.full(lat.shape + (n + m,), np.nan)
        mid = [slice(None)] * n
        mid[i] = slice(1, -1)
        div[tuple(mid)] = (F[tuple(hi)] - F[tuple(lo)]) / h
        total += div
    _, _, det_g = induced_metric(np.nan_to_num(central))
    total /= np.sqrt(det_g)[..., None]
    ok = np.all(np.isfinite(total), axis=-1) & np.all(np.isfinite(central), axis=(-2, -1))
    ids = lat.state_index[ok]
    return ids, total[ok]


def normality_defect(field: GraphField):
    """(max |tangential part of Delta F|, max |Delta F - (g^{ij} d_ij F)^perp|)."""
    ids, lap = divergence_form_laplacian(field)
    if len(ids) == 0:
        raise ValueError("lattice too coarse for the divergence-form Laplacian")
    jet = jets(field)
    sub = Jet(jet.Df[ids], jet.D2f[ids])
    tangential = lap - normal_projection(lap, sub.Df)
    diff = lap - mean_curvature_vector(sub)
    return float(np.max(np.linalg.norm(tangential, axis=-1))), float(np.max(np.linalg.norm(diff, axis=-1)))
