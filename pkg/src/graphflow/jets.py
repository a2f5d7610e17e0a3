"""Finite-difference jets (Df, D^2 f) of lattice fields and derivative norms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.stats import qmc

from .domain import Lattice


@dataclass
class GraphField:
    """Values of f: Omega -> R^m in lattice state order, shape (n_state, m)."""

    lattice: Lattice
    values: np.ndarray
    t: float = 0.0
    _jet: "Jet | None" = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.lattice.n_state:
            raise ValueError(f"field has {v.shape[0]} rows, lattice has {self.lattice.n_state} state entries")
        self.values = v

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def interior_values(self):
        return self.values[: self.lattice.n_interior]

    @property
    def boundary_values(self):
        return self.values[self.lattice.n_interior :]

    def replace(self, interior_values, t):
        values = self.values.copy()
        values[: self.lattice.n_interior] = interior_values
        return GraphField(self.lattice, values, t)

    @classmethod
    def sample(cls, lattice, scenario, t=0.0):
        return cls(lattice, scenario.psi(lattice.points), t)


@dataclass
class Jet:
    """First and second derivatives; leading axes (if any) index nodes.

    Df has shape (..., m, n) and D2f (..., m, n, n), symmetric in the last two.
    """

    Df: np.ndarray
    D2f: np.ndarray


def pair_list(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


@dataclass(frozen=True)
class Stencils:
    """Sparse derivative operators from state vectors to interior nodes.

    ``D1`` stacks the n first-derivative operators (row i * n_interior + k)
    and ``D2`` the second-derivative operators for ``pairs``.  ``mixed_fallback``
    flags interior nodes where some mixed derivative could not use the
    centred cross stencil.
    """

    D1: sp.csr_matrix
    D2: sp.csr_matrix
    pairs: list
    mixed_fallback: np.ndarray

    def second(self, i, j):
        k = self.pairs.index((min(i, j), max(i, j)))
        ni = self.D2.shape[0] // len(self.pairs)
        return self.D2[k * ni : (k + 1) * ni]


def stencils(lattice: Lattice) -> Stencils:
    cached = lattice._cache.get("stencils")
    if cached is None:
        cached = lattice._cache["stencils"] = _build_stencils(lattice)
    return cached


def _build_stencils(lat: Lattice) -> Stencils:
    n, h, ni, ns = lat.n, lat.h, lat.n_interior, lat.n_state
    rows1, cols1, vals1 = [], [], []
    pairs = pair_list(n)
    rows2, cols2, vals2 = [], [], []
    own = np.arange(ni)

    for i in range(n):
        a = lat.theta[:, i, 0] * h
        b = lat.theta[:, i, 1] * h
        lo, hi = lat.nbr[:, i, 0], lat.nbr[:, i, 1]
        base = i * ni
        for col, w in ((lo, -b / (a * (a + b))), (own, (b - a) / (a * b)), (hi, a / (b * (a + b)))):
            rows1.append(base + own)
            cols1.append(col)
            vals1.append(w)
        base = pairs.index((i, i)) * ni
        for col, w in ((lo, 2 / (a * (a + b))), (own, -2 / (a * b)), (hi, 2 / (b * (a + b)))):
            rows2.append(base + own)
            cols2.append(col)
            vals2.append(w)

    multi = np.stack(np.unravel_index(lat.interior, lat.shape), axis=-1)

    def lookup(offset):
        j = multi + offset
        ok = np.all((j >= 0) & (j < np.asarray(lat.shape)), axis=1)
        out = np.full(ni, -1, dtype=np.int64)
        jj = tuple(j[ok].T)
        out[ok] = lat.state_index[jj]
        return out

    fallback = np.zeros(ni, dtype=bool)
    unresolved = {}
    for i, j in pairs:
        if i == j:
            continue
        base = pairs.index((i, j)) * ni
        ei, ej = np.eye(n, dtype=np.int64)[i], np.eye(n, dtype=np.int64)[j]
        diag = {(si, sj): lookup(si * ei + sj * ej) for si in (1, -1) for sj in (1, -1)}
        axis = {(0, s): lookup(s * ei) for s in (1, -1)} | {(1, s): lookup(s * ej) for s in (1, -1)}
        central = np.all([diag[q] >= 0 for q in diag], axis=0)
        idx = np.flatnonzero(central)
        w = 1.0 / (4 * h * h)
        for (si, sj), d in diag.items():
            rows2.append(base + idx)
            cols2.append(d[idx])
            vals2.append(np.full(idx.size, si * sj * w))
        todo = ~central
        fallback |= todo
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            d, a_i, a_j = diag[(si, sj)], axis[(0, si)], axis[(1, sj)]
            ok = todo & (d >= 0) & (a_i >= 0) & (a_j >= 0)
            idx = np.flatnonzero(ok)
            s = si * sj / (h * h)
            for col, sign in ((d, 1.0), (a_i, -1.0), (a_j, -1.0), (own, 1.0)):
                rows2.append(base + idx)
                cols2.append(col[idx])
                vals2.append(np.full(idx.size, sign * s))
            todo &= ~ok
        for k in np.flatnonzero(todo):
            unresolved.setdefault(int(k), []).append((i, j))

    for k, missing in sorted(unresolved.items()):
        cols, weights = _quadratic_fit_weights(lat, k, multi[k], missing)
        for (i, j), w in zip(missing, weights):
            rows2.append(np.full(len(cols), pairs.index((i, j)) * ni + k))
            cols2.append(cols)
            vals2.append(w)

    def assemble(rows, cols, vals, nrows):
        m = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nrows, ns)
        )
        return m.tocsr()

    return Stencils(
        D1=assemble(rows1, cols1, vals1, n * ni),
        D2=assemble(rows2, cols2, vals2, len(pairs) * ni),
        pairs=pairs,
        mixed_fallback=fallback,
    )


def _quadratic_fit_weights(lat, k, node, missing):
    """Least-squares quadratic fit around node k; weights for mixed derivatives."""
    n, h = lat.n, lat.h
    cols = []
    for off in itertools.product((-1, 0, 1), repeat=n):
        j = node + np.asarray(off)
        if np.all((j >= 0) & (j < np.asarray(lat.shape))):
            s = lat.state_index[tuple(j)]
            if s >= 0:
                cols.append(int(s))
    cols.extend(int(c) for c in lat.nbr[k].ravel() if c >= lat.n_interior + len(lat.boundary_nodes))
    cols = np.unique(cols)
    y = (lat.points[cols] - lat.points[k]) / h
    monomials = [()] + [(a,) for a in range(n)] + pair_list(n)
    V = np.stack([np.prod(y[:, list(mono)], axis=1) if mono else np.ones(len(y)) for mono in monomials], axis=1)
    if np.linalg.matrix_rank(V) < V.shape[1]:
        raise ValueError(f"cannot fit a quadratic around interior node {k}")
    pinv = np.linalg.pinv(V)
    weights = [pinv[monomials.index((i, j))] / (h * h) for i, j in missing]
    return cols, weights


def jets(field: GraphField) -> Jet:
    """Jets at every interior node, stacked along the first axis.

    Cached on the field; fields are treated as immutable once built.
    """
    if field._jet is None:
        field._jet = _compute_jets(field)
    return field._jet


def _compute_jets(field: GraphField) -> Jet:
    st = stencils(field.lattice)
    n, ni, m = field.lattice.n, field.lattice.n_interior, field.m
    d1 = (st.D1 @ field.values).reshape(n, ni, m).transpose(1, 2, 0)
    d2 = (st.D2 @ field.values).reshape(len(st.pairs), ni, m)
    D2f = np.empty((ni, m, n, n))
    for p, (i, j) in enumerate(st.pairs):
        D2f[:, :, i, j] = d2[p]
        D2f[:, :, j, i] = d2[p]
    return Jet(np.ascontiguousarray(d1), D2f)


def jet_at(field: GraphField, node) -> Jet:
    """Jet at one interior node, given as a state id or grid multi-index."""
    lat = field.lattice
    if isinstance(node, (int, np.integer)):
        k = int(node)
        if not 0 <= k < lat.n_interior:
            raise ValueError(f"state id {k} is not an interior node")
    else:
        k = lat.interior_id(node)
    st = stencils(lat)
    n, ni = lat.n, lat.n_interior
    Df = np.stack([st.D1[i * ni + k] @ field.values for i in range(n)], axis=-1).reshape(field.m, n)
    D2f = np.empty((field.m, n, n))
    for p, (i, j) in enumerate(st.pairs):
        v = (st.D2[p * ni + k] @ field.values).ravel()
        D2f[:, i, j] = v
        D2f[:, j, i] = v
    return Jet(Df, D2f)


def operator_norm(M) -> float:
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("operator_norm of a non-finite matrix")
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(np.atleast_2d(M), compute_uv=False)[0])


def operator_norms(M):
    """Batched largest singular values over leading axes."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("operator_norm of a non-finite matrix")
    return np.linalg.svd(M, compute_uv=False)[..., 0]


def sample_region(lattice: Lattice, region: str):
    if region == "closure":
        return lattice.points
    if region == "boundary":
        return lattice.boundary_points()
    raise ValueError(f"unknown region {region!r}")


def sup_norm_D(scenario, lattice: Lattice, region="closure") -> float:
    """max over sampled points of |D psi|(x)."""
    x = sample_region(lattice, region)
    if len(x) == 0:
        raise ValueError(f"empty {region} region")
    return float(np.max(operator_norms(scenario.dpsi(x))))


def sphere_directions(n, count=16_384, seed=0):
    """Quasi-uniform unit vectors in R^n (scrambled Sobol through the normal cdf)."""
    from scipy.special import ndtri

    u = qmc.Sobol(d=n, scramble=True, seed=seed).random(count)
    v = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def quadratic_form_sup(H, directions=None, rtol=1e-6):
    """sup over unit v of |H(v, v)| for one hessian stack H of shape (m, n, n)."""
    H = np.asarray(H, dtype=float)
    m, n, _ = H.shape
    if m == 1:
        return float(np.max(np.abs(np.linalg.eigvalsh(H[0]))))
    if not np.any(H):
        return 0.0
    if directions is None:
        directions = sphere_directions(n)
    vals = np.linalg.norm(np.einsum("aij,vi,vj->va", H, directions, directions), axis=1)
    v0 = directions[np.argmax(vals)]

    def neg(w):
        v = w / np.linalg.norm(w)
        return -float(np.sum(np.einsum("aij,i,j->a", H, v, v) ** 2))

    res = optimize.minimize(neg, v0, method="BFGS", options={"gtol": 1e-12 * (1 + vals.max() ** 2)})
    best = max(float(vals.max()), np.sqrt(max(-res.fun, 0.0)))
    # sampling lower bound and refined value must agree to rtol once refined
    assert best >= vals.max() * (1 - rtol)
    return best


def sup_norm_D2(scenario, lattice: Lattice, region="closure", seed=0) -> float:
    """max over sampled points x of sup_{|v|=1} |D^2 psi(x)(v, v)|."""
    x = sample_region(lattice, region)
    H = scenario.d2psi(x)
    H = np.unique(H.reshape(len(x), -1), axis=0).reshape(-1, *H.shape[1:])
    m, n = H.shape[1], H.shape[2]
    if m == 1:
        return float(np.max(np.abs(np.linalg.eigvalsh(H[:, 0]))))
    rho = np.abs(np.linalg.eigvalsh(H)).max(axis=-1)
    lower = rho.max(axis=1)
    upper = np.sqrt(np.sum(rho**2, axis=1))
    directions = sphere_directions(n, seed=seed)
    best = 0.0
    for k in np.argsort(-upper, kind="stable"):
        if upper[k] <= best:
            break
        if lower[k] > best or upper[k] > best:
            best = max(best, quadratic_form_sup(H[k], directions))
    return best
