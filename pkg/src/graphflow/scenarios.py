"""Built-in boundary/initial data with analytic derivatives.

Complex coordinates for the Hopf family are unpacked as z1 = x1 + i x2,
z2 = x3 + i x4, so 2 z1 conj(z2) = 2(x1 x3 + x2 x4) + 2i(x2 x3 - x1 x4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import DomainSpec


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    m: int
    psi: Callable
    dpsi: Callable
    d2psi: Callable
    exact: bool = False
    params: dict = field(default_factory=dict)
    check_domain: Callable | None = None

    def validate_domain(self, spec: DomainSpec):
        if spec.n != self.n:
            raise ScenarioError(f"scenario {self.name} needs n = {self.n}, domain has n = {spec.n}")
        if self.check_domain is not None:
            self.check_domain(spec)

    def scaled(self, c):
        """The scenario c * psi (same name and flags)."""
        return Scenario(
            self.name,
            self.n,
            self.m,
            lambda x: c * self.psi(x),
            lambda x: c * self.dpsi(x),
            lambda x: c * self.d2psi(x),
            self.exact and c == 1,
            dict(self.params, scale=c),
            self.check_domain,
        )


def _pts(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim == 2 else x[None, :]


def affine(A, b=None) -> Scenario:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    b = np.zeros(m) if b is None else np.asarray(b, dtype=float)
    return Scenario(
        "affine",
        n,
        m,
        psi=lambda x: _pts(x) @ A.T + b,
        dpsi=lambda x: np.broadcast_to(A, (len(_pts(x)), m, n)).copy(),
        d2psi=lambda x: np.zeros((len(_pts(x)), m, n, n)),
        exact=True,
        params={"A": A.tolist(), "b": b.tolist()},
    )


def holomorphic_square() -> Scenario:
    def psi(x):
        x, y = _pts(x).T
        return np.stack([x * x - y * y, 2 * x * y], axis=-1)

    def dpsi(x):
        x, y = _pts(x).T
        return np.stack([np.stack([2 * x, -2 * y], -1), np.stack([2 * y, 2 * x], -1)], axis=1)

    def d2psi(x):
        H = np.array([[[2.0, 0.0], [0.0, -2.0]], [[0.0, 2.0], [2.0, 0.0]]])
        return np.broadcast_to(H, (len(_pts(x)), 2, 2, 2)).copy()

    return Scenario("holomorphic_square", 2, 2, psi, dpsi, d2psi, exact=True)


def holomorphic_cube() -> Scenario:
    """(Re z^3, Im z^3): minimal in R^4 but not reproduced exactly by the stencils."""

    def psi(x):
        x, y = _pts(x).T
        return np.stack([x**3 - 3 * x * y * y, 3 * x * x * y - y**3], axis=-1)

    def dpsi(x):
        x, y = _pts(x).T
        u_x, u_y = 3 * x * x - 3 * y * y, -6 * x * y
        return np.stack([np.stack([u_x, u_y], -1), np.stack([-u_y, u_x], -1)], axis=1)

    def d2psi(x):
        x, y = _pts(x).T
        a, b = 6 * x, -6 * y
        return np.stack(
            [np.stack([np.stack([a, b], -1), np.stack([b, -a], -1)], 1),
             np.stack([np.stack([-b, a], -1), np.stack([a, b], -1)], 1)],
            axis=1,
        )

    return Scenario("holomorphic_cube", 2, 2, psi, dpsi, d2psi, exact=True)


def scherk(margin=1e-3) -> Scenario:
    def check(spec: DomainSpec):
        lim = math.pi / 2 - margin
        if spec.kind == "box":
            corners = np.array([spec.lower, spec.upper])
        else:
            corners = np.array([np.asarray(spec.center) - spec.radius, np.asarray(spec.center) + spec.radius])
        if np.any(np.abs(corners) >= lim):
            raise ScenarioError(f"Scherk surface needs the domain inside (-pi/2, pi/2)^2 with margin {margin}")

    def psi(x):
        x, y = _pts(x).T
        return np.log(np.cos(x) / np.cos(y))[:, None]

    def dpsi(x):
        x, y = _pts(x).T
        return np.stack([-np.tan(x), np.tan(y)], -1)[:, None, :]

    def d2psi(x):
        x, y = _pts(x).T
        z = np.zeros_like(x)
        H = np.stack([np.stack([-1 / np.cos(x) ** 2, z], -1), np.stack([z, 1 / np.cos(y) ** 2], -1)], 1)
        return H[:, None]

    return Scenario("scherk", 2, 1, psi, dpsi, d2psi, exact=True, check_domain=check)


def hopf_q(x):
    x1, x2, x3, x4 = _pts(x).T
    return np.stack([x1 * x1 + x2 * x2 - x3 * x3 - x4 * x4, 2 * (x1 * x3 + x2 * x4), 2 * (x2 * x3 - x1 * x4)], -1)


def hopf_dq(x):
    x1, x2, x3, x4 = _pts(x).T
    rows = [
        [2 * x1, 2 * x2, -2 * x3, -2 * x4],
        [2 * x3, 2 * x4, 2 * x1, 2 * x2],
        [-2 * x4, 2 * x3, 2 * x2, -2 * x1],
    ]
    return np.stack([np.stack(r, -1) for r in rows], 1)


HOPF_D2Q = np.array(
    [
        np.diag([2.0, 2.0, -2.0, -2.0]),
        [[0, 0, 2, 0], [0, 0, 0, 2], [2, 0, 0, 0], [0, 2, 0, 0]],
        [[0, 0, 0, -2], [0, 0, 2, 0], [0, 2, 0, 0], [-2, 0, 0, 0]],
    ],
    dtype=float,
)


def hopf_quadratic(R) -> Scenario:
    if not R > 0:
        raise ScenarioError(f"R must be positive, got {R}")
    R = float(R)
    return Scenario(
        "hopf_quadratic",
        4,
        3,
        psi=lambda x: R * hopf_q(x),
        dpsi=lambda x: R * hopf_dq(x),
        d2psi=lambda x: np.broadcast_to(R * HOPF_D2Q, (len(_pts(x)), 3, 4, 4)).copy(),
        params={"R": R},
    )


def lawson_osserman_cone(R, r_min=0.3) -> Scenario:
    """f(x) = R q(x) / |x| on r_min <= |x|; evaluation only."""
    if not R > 0 or not r_min > 0:
        raise ScenarioError("cone needs R > 0 and r_min > 0")
    R, r_min = float(R), float(r_min)

    def radii(x):
        x = _pts(x)
        r = np.linalg.norm(x, axis=1)
        if np.any(r < r_min * (1 - 1e-12)):
            raise ScenarioError(f"cone evaluated inside |x| < r_min = {r_min}")
        return x, r

    def psi(x):
        x, r = radii(x)
        return R * hopf_q(x) / r[:, None]

    def dpsi(x):
        x, r = radii(x)
        q, dq = hopf_q(x), hopf_dq(x)
        return R * (dq / r[:, None, None] - q[:, :, None] * x[:, None, :] / r[:, None, None] ** 3)

    def d2psi(x):
        x, r = radii(x)
        q, dq = hopf_q(x), hopf_dq(x)
        r1, r3, r5 = r[:, None, None, None], r[:, None, None, None] ** 3, r[:, None, None, None] ** 5
        xx = np.einsum("ni,nj->nij", x, x)[:, None]
        cross = dq[:, :, :, None] * x[:, None, None, :]
        eye = np.eye(4)[None, None]
        out = HOPF_D2Q[None] / r1 - (cross + np.swapaxes(cross, -1, -2)) / r3
        out = out - q[:, :, None, None] * (eye / r3 - 3 * xx / r5)
        return R * out

    exact = abs(R - math.sqrt(5) / 2) < 1e-12
    return Scenario("lawson_osserman_cone", 4, 3, psi, dpsi, d2psi, exact=exact, params={"R": R, "r_min": r_min})


def sinusoid(n=2, m=1, amplitude=0.1) -> Scenario:
    """psi^a(x) = amplitude * sin(pi (a+1) x_1 + a) * cos(pi x_2 / 2): smooth, not stationary."""
    amplitude = float(amplitude)
    k = np.pi * (np.arange(m) + 1.0)
    ph = np.arange(m, dtype=float)

    def parts(x):
        x = _pts(x)
        s = np.sin(k * x[:, :1] + ph)
        c = np.cos(k * x[:, :1] + ph)
        cy = np.cos(np.pi * x[:, 1:2] / 2)
        sy = np.sin(np.pi * x[:, 1:2] / 2)
        return x, s, c, cy, sy

    def psi(x):
        _, s, _, cy, _ = parts(x)
        return amplitude * s * cy

    def dpsi(x):
        x, s, c, cy, sy = parts(x)
        out = np.zeros((len(x), m, n))
        out[:, :, 0] = amplitude * k * c * cy
        out[:, :, 1] = -amplitude * s * sy * np.pi / 2
        return out

    def d2psi(x):
        x, s, c, cy, sy = parts(x)
        out = np.zeros((len(x), m, n, n))
        out[:, :, 0, 0] = -amplitude * k * k * s * cy
        out[:, :, 0, 1] = out[:, :, 1, 0] = -amplitude * k * c * sy * np.pi / 2
        out[:, :, 1, 1] = -amplitude * s * cy * (np.pi / 2) ** 2
        return out

    if n < 2:
        raise ScenarioError("sinusoid needs n >= 2")
    return Scenario("sinusoid", n, m, psi, dpsi, d2psi, params={"n": n, "m": m, "amplitude": amplitude})


# name -> (factory, parameter schema {name: (type, default or None if required)})
REGISTRY = {
    "affine": (None, {"A": ("matrix", None), "b": ("vector", "zeros")}),
    "holomorphic_square": (holomorphic_square, {}),
    "holomorphic_cube": (holomorphic_cube, {}),
    "scherk": (scherk, {}),
    "hopf_quadratic": (hopf_quadratic, {"R": ("float", None)}),
    "lawson_osserman_cone": (lawson_osserman_cone, {"R": ("float", None), "r_min": ("float", 0.3)}),
    "sinusoid": (sinusoid, {"n": ("int", 2), "m": ("int", 1), "amplitude": ("float", 0.1)}),
}

DIMENSIONS = {
    "affine": "n x m from A",
    "holomorphic_square": "n=2 m=2",
    "holomorphic_cube": "n=2 m=2",
    "scherk": "n=2 m=1",
    "hopf_quadratic": "n=4 m=3",
    "lawson_osserman_cone": "n=4 m=3",
    "sinusoid": "n, m from parameters",
}


def make(name, **params) -> Scenario:
    if name not in REGISTRY:
        raise ScenarioError(f"unknown scenario {name!r}")
    if name == "affine":
        return affine(params["A"], params.get("b"))
    factory, schema = REGISTRY[name]
    unknown = set(params) - set(schema)
    if unknown:
        raise ScenarioError(f"unknown parameters for {name}: {sorted(unknown)}")
    return factory(**params)
