"""Convex domains (boxes and balls) and their uniform lattices.

Box faces coincide with lattice planes.  Ball boundaries are handled with
Shortley-Weller fractions: every interior node whose axis neighbour falls
outside the ball records the exact intersection of that axis segment with
the sphere, and the intersection point becomes a boundary point of the
lattice carrying Dirichlet data.

State vectors on a lattice are ordered as

    interior nodes (C order) | boundary lattice nodes (C order) | axis points

and every field in the package uses that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2

_ON_SPHERE_RTOL = 1e-12


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    kind: Literal["box", "ball"]
    n: int
    h: float
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    center: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.n not in (2, 3, 4):
            raise DomainError(f"dimension must be 2, 3 or 4, got {self.n}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise DomainError(f"grid spacing must be positive, got {self.h}")
        if self.kind == "box":
            if len(self.lower) != self.n or len(self.upper) != self.n:
                raise DomainError("box needs n lower and n upper bounds")
            for a, b in zip(self.lower, self.upper):
                if not b > a:
                    raise DomainError(f"box side [{a}, {b}] has non-positive length")
        else:
            if len(self.center) != self.n:
                raise DomainError("ball needs an n-dimensional center")
            if not self.radius > 0:
                raise DomainError(f"ball radius must be positive, got {self.radius}")

    @classmethod
    def box(cls, lower, upper, h):
        lower = tuple(float(v) for v in lower)
        return cls("box", len(lower), float(h), lower=lower, upper=tuple(float(v) for v in upper))

    @classmethod
    def ball(cls, n, h, radius=1.0, center=None):
        center = tuple(float(v) for v in (center if center is not None else [0.0] * n))
        return cls("ball", int(n), float(h), center=center, radius=float(radius))

    def with_h(self, h):
        return DomainSpec(self.kind, self.n, float(h), self.lower, self.upper, self.center, self.radius)

    def volume(self):
        if self.kind == "box":
            return math.prod(b - a for a, b in zip(self.lower, self.upper))
        n = self.n
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius**n

    def contains(self, x, tol=0.0):
        """Membership in the closed domain, vectorised over the last axis."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
            return np.all((x >= lo - tol) & (x <= hi + tol), axis=-1)
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        return r <= self.radius + tol


def diameter(spec: DomainSpec) -> float:
    if spec.kind == "box":
        return math.sqrt(sum((b - a) ** 2 for a, b in zip(spec.lower, spec.upper)))
    return 2.0 * spec.radius


@dataclass(frozen=True)
class Hyperplane:
    """Supporting hyperplane through ``point`` with unit inward ``normal``.

    Calling it returns the signed distance d(y) = normal . (y - point),
    which is non-negative on the closed convex domain.
    """

    point: np.ndarray
    normal: np.ndarray

    def __call__(self, y):
        return (np.asarray(y, dtype=float) - self.point) @ self.normal


def supporting_hyperplane(spec: DomainSpec, p) -> Hyperplane:
    p = np.asarray(p, dtype=float)
    tol = 1e-12 * diameter(spec)
    if spec.kind == "ball":
        c = np.asarray(spec.center)
        r = np.linalg.norm(p - c)
        if abs(r - spec.radius) > tol:
            raise DomainError(f"point {p.tolist()} is not on the sphere (|p - c| = {r!r})")
        return Hyperplane(p.copy(), (c - p) / r)
    if not np.all(spec.contains(p, tol)):
        raise DomainError(f"point {p.tolist()} lies outside the box")
    # corners: first face in axis order, lower before upper
    for i in range(spec.n):
        for bound, sign in ((spec.lower[i], 1.0), (spec.upper[i], -1.0)):
            if abs(p[i] - bound) <= tol:
                normal = np.zeros(spec.n)
                normal[i] = sign
                return Hyperplane(p.copy(), normal)
    raise DomainError(f"point {p.tolist()} is not on the box boundary")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Immutable discretisation of a DomainSpec.

    ``kinds`` classifies every node of the bounding grid.  For interior
    node ``k`` (in state order) and axis ``i``, ``nbr[k, i, 0/1]`` is the
    state index of the minus/plus neighbour and ``theta[k, i, 0/1]`` its
    distance in units of h (1 for lattice neighbours, in (0, 1] for axis
    points on the sphere).
    """

    spec: DomainSpec
    shape: tuple[int, ...]
    origin: np.ndarray
    kinds: np.ndarray
    state_index: np.ndarray
    interior: np.ndarray
    boundary_nodes: np.ndarray
    points: np.ndarray
    nbr: np.ndarray
    theta: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.spec.n

    @property
    def h(self):
        return self.spec.h

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def n_state(self):
        return len(self.points)

    @property
    def n_boundary(self):
        return self.n_state - self.n_interior

    def interior_points(self):
        return self.points[: self.n_interior]

    def boundary_points(self):
        return self.points[self.n_interior :]

    def node_coords(self, multi_index):
        return self.origin + self.h * np.asarray(multi_index, dtype=float)

    def interior_id(self, multi_index):
        """State index of the interior node at a grid multi-index."""
        idx = tuple(int(v) for v in multi_index)
        if any(v < 0 or v >= s for v, s in zip(idx, self.shape)):
            raise DomainError(f"node {idx} outside the grid")
        if self.kinds[idx] != INTERIOR:
            raise DomainError(f"node {idx} is not interior")
        return int(self.state_index[idx])

    def boundary_adjacent(self):
        """Interior nodes with at least one neighbour on the boundary."""
        ni = self.n_interior
        return np.flatnonzero(np.any(self.nbr >= ni, axis=(1, 2)))

    def fingerprint(self):
        return f"{self.spec!r}|{self.n_state}"


def build_lattice(spec: DomainSpec) -> Lattice:
    n, h = spec.n, spec.h
    if spec.kind == "box":
        lo = np.asarray(spec.lower)
        counts = []
        for a, b in zip(spec.lower, spec.upper):
            steps = (b - a) / h
            k = round(steps)
            if abs(steps - k) > 1e-9 * max(1.0, steps):
                raise DomainError(f"box side {b - a} is not a multiple of h = {h}")
            counts.append(k + 1)
        shape = tuple(counts)
        origin = lo
        grids = np.indices(shape)
        kinds = np.full(shape, INTERIOR, dtype=np.int8)
        for i in range(n):
            on_face = (grids[i] == 0) | (grids[i] == shape[i] - 1)
            kinds[on_face] = BOUNDARY
    else:
        c = np.asarray(spec.center)
        k = int(math.floor(spec.radius / h * (1 + 1e-12)))
        shape = (2 * k + 1,) * n
        origin = c - k * h
        x = origin + h * np.moveaxis(np.indices(shape), 0, -1)
        r = np.linalg.norm(x - c, axis=-1)
        tol = _ON_SPHERE_RTOL * spec.radius
        kinds = np.where(
            r < spec.radius - tol, INTERIOR, np.where(r <= spec.radius + tol, BOUNDARY, EXTERIOR)
        ).astype(np.int8)

    interior = np.flatnonzero(kinds.ravel() == INTERIOR)
    if interior.size == 0:
        raise DomainError(f"grid spacing h = {h} leaves no interior node")
    bnodes = np.flatnonzero(kinds.ravel() == BOUNDARY)
    state_index = np.full(int(np.prod(shape)), -1, dtype=np.int64)
    state_index[interior] = np.arange(interior.size)
    state_index[bnodes] = interior.size + np.arange(bnodes.size)

    multi = np.stack(np.unravel_index(interior, shape), axis=-1)
    strides = np.array([int(np.prod(shape[i + 1 :])) for i in range(n)])
    nbr = np.empty((interior.size, n, 2), dtype=np.int64)
    theta = np.ones((interior.size, n, 2))
    coords = [origin + h * np.stack(np.unravel_index(ids, shape), axis=-1) for ids in (interior, bnodes)]
    extra = []
    next_id = interior.size + bnodes.size
    for i in range(n):
        for side, s in enumerate((-1, 1)):
            j = multi[:, i] + s
            inside_grid = (j >= 0) & (j < shape[i])
            flat = interior + s * strides[i]
            idx = np.where(inside_grid, state_index[np.where(inside_grid, flat, 0)], -1)
            missing = np.flatnonzero(idx < 0)
            if missing.size:
                if spec.kind == "box":
                    raise AssertionError("box interior nodes always have lattice neighbours")
                xc = coords[0][missing] - np.asarray(spec.center)
                rest = np.sum(xc**2, axis=1) - xc[:, i] ** 2
                dist = np.sqrt(spec.radius**2 - rest) - s * xc[:, i]
                th = dist / h
                p = coords[0][missing].copy()
                p[:, i] += s * dist
                ids = next_id + np.arange(missing.size)
                next_id += missing.size
                idx[missing] = ids
                theta[missing, i, side] = th
                extra.append(p)
            nbr[:, i, side] = idx
    points = np.concatenate(coords + extra, axis=0)
    return Lattice(
        spec=spec,
        shape=tuple(shape),
        origin=np.asarray(origin, dtype=float),
        kinds=kinds,
        state_index=state_index.reshape(shape),
        interior=interior,
        boundary_nodes=bnodes,
        points=points,
        nbr=nbr,
        theta=theta,
    )
