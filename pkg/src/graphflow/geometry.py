"""Pointwise geometry of the graph of f: metric, singular values, frames,
second fundamental form, mean curvature and the *Omega_1 evolution bracket.

Every function accepts arrays with arbitrary leading (batch) axes; a single
node is just the empty batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input to geometry kernel")


def induced_metric(Df):
    """Return (g, g_inv, det_g) for g = I + Df^T Df."""
    Df = np.asarray(Df, dtype=float)
    _finite(Df)
    n = Df.shape[-1]
    g = np.eye(n) + np.einsum("...ai,...aj->...ij", Df, Df)
    return g, np.linalg.inv(g), np.linalg.det(g)


@dataclass
class SVD:
    """Df = U diag(lam) V^T with deterministic signs.

    ``lam`` holds min(n, m) values in descending order; ``V`` (n x n) and
    ``U`` (m x m) are full orthonormal bases.  Column i of V is a_i and
    column i of U is a_{n+i} in the notation Df(a_i) = lam_i a_{n+i}.
    """

    lam: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def padded(self, size):
        """Singular values padded with zeros to ``size`` entries."""
        k = self.lam.shape[-1]
        pad = [(0, 0)] * (self.lam.ndim - 1) + [(0, max(size - k, 0))]
        return np.pad(self.lam, pad)[..., :size]


def _first_nonzero_sign(cols):
    # cols: (..., d, k); sign of the first entry with |c| > tol in each column
    tol = 1e-12 * np.max(np.abs(cols), axis=-2, keepdims=True)
    big = np.abs(cols) > tol
    first = np.argmax(big, axis=-2)[..., None, :]
    s = np.sign(np.take_along_axis(cols, first, axis=-2))
    return np.where(s == 0, 1.0, s)


def singular_values(Df) -> SVD:
    Df = np.asarray(Df, dtype=float)
    _finite(Df)
    U, lam, Vt = np.linalg.svd(Df, full_matrices=True)
    V = np.swapaxes(Vt, -1, -2).copy()
    U = U.copy()
    k = lam.shape[-1]
    s = _first_nonzero_sign(V)
    V *= s
    U[..., :k] *= s[..., :k]
    if U.shape[-1] > k:
        U[..., k:] *= _first_nonzero_sign(U[..., k:])
    return SVD(lam, U, V)


def star_omega1(lam):
    lam = np.asarray(lam, dtype=float)
    return 1.0 / np.sqrt(np.prod(1.0 + lam**2, axis=-1))


def area_density(Df):
    """sqrt(det(I + Df^T Df)), evaluated through the singular values."""
    lam = singular_values(Df).lam
    return np.exp(0.5 * np.sum(np.log1p(lam**2), axis=-1))


def p_form_eigen(lam, n, m):
    """Eigenvalues of P restricted to the tangent (n) and normal (m) spaces."""
    lam = np.asarray(lam, dtype=float)
    k = lam.shape[-1]
    pad = [(0, 0)] * (lam.ndim - 1)
    lt = np.pad(lam, pad + [(0, n - k)])
    ln = np.pad(lam, pad + [(0, m - k)])
    return (1 - lt**2) / (1 + lt**2), (ln**2 - 1) / (1 + ln**2)


def frames(svd: SVD, n, m):
    """Orthonormal tangent frame (n+m, n) and normal frame (n+m, m).

    e_i = (a_i + lam_i a_{n+i}) / sqrt(1 + lam_i^2),
    e_{n+i} = (a_{n+i} - lam_i a_i) / sqrt(1 + lam_i^2),
    with unmatched directions taken straight from the completed bases.
    """
    lt = svd.padded(n)
    ln = svd.padded(m)
    V, U = svd.V, svd.U
    batch = V.shape[:-2]
    tangent = np.zeros(batch + (n + m, n))
    normal = np.zeros(batch + (n + m, m))
    k = min(n, m)
    tangent[..., :n, :] = V
    tangent[..., n:, :k] = U[..., :, :k] * lt[..., None, :k]
    tangent /= np.sqrt(1 + lt**2)[..., None, :]
    normal[..., n:, :] = U
    normal[..., :n, :k] = -V[..., :, :k] * ln[..., None, :k]
    normal /= np.sqrt(1 + ln**2)[..., None, :]
    return tangent, normal


def p_form_matrix(n, m):
    return np.diag(np.concatenate([np.ones(n), -np.ones(m)]))


def system_residual(jet: Jet):
    """g^{ij} d^2 f^a / dx^i dx^j for each component a."""
    _, g_inv, _ = induced_metric(jet.Df)
    return np.einsum("...ij,...aij->...a", g_inv, jet.D2f)


def tangent_basis(Df):
    """Columns dF(d_i) = (e_i, d_i f) of the graph embedding, shape (n+m, n)."""
    Df = np.asarray(Df, dtype=float)
    n = Df.shape[-1]
    eye = np.broadcast_to(np.eye(n), Df.shape[:-2] + (n, n))
    return np.concatenate([eye, Df], axis=-2)


def normal_projection(v, Df):
    """Component of v in R^{n+m} orthogonal to the tangent space of the graph."""
    v = np.asarray(v, dtype=float)
    B = tangent_basis(Df)
    _, g_inv, _ = induced_metric(Df)
    coeff = np.einsum("...ij,...Aj,...A->...i", g_inv, B, v)
    return v - np.einsum("...Ai,...i->...A", B, coeff)


def mean_curvature_vector(jet: Jet):
    """H = (g^{ij} d^2 F / dx^i dx^j)^perp as a vector in R^{n+m}."""
    n = jet.Df.shape[-1]
    w = system_residual(jet)
    pad = [(0, 0)] * (w.ndim - 1) + [(n, 0)]
    return normal_projection(np.pad(w, pad), jet.Df)


@dataclass
class SecondFundamentalForm:
    """h[..., a, i, k] = (0, D^2 f(d_i, d_k)) . e_{n+a} in coordinate indices."""

    h: np.ndarray
    H_components: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    svd: SVD
    g_inv: np.ndarray

    def adapted(self):
        """h in the orthonormal tangent frame e_i built from the SVD."""
        n = self.h.shape[-1]
        T = self.svd.V / np.sqrt(1 + self.svd.padded(n) ** 2)[..., None, :]
        return np.einsum("...ip,...kq,...aik->...apq", T, T, self.h)


def second_fundamental_form(jet: Jet, svd: SVD | None = None) -> SecondFundamentalForm:
    Df, D2f = np.asarray(jet.Df, dtype=float), np.asarray(jet.D2f, dtype=float)
    _finite(Df, D2f)
    m, n = Df.shape[-2:]
    if svd is None:
        svd = singular_values(Df)
    _, normal = frames(svd, n, m)
    _, g_inv, _ = induced_metric(Df)
    h = np.einsum("...bik,...ba->...aik", D2f, normal[..., n:, :])
    H_a = np.einsum("...ik,...aik->...a", g_inv, h)
    raised = g_inv[..., None, :, :] @ h @ g_inv[..., None, :, :]
    A2 = np.sum(raised * h, axis=(-3, -2, -1))
    H = np.einsum("...Aa,...a->...A", normal, H_a)
    return SecondFundamentalForm(h, H_a, H, A2, svd, g_inv)


def max_pair_product(lam):
    """max_{i != j} |lam_i lam_j| (0 when fewer than two values)."""
    lam = np.abs(np.asarray(lam, dtype=float))
    if lam.shape[-1] < 2:
        return np.zeros(lam.shape[:-1])
    # values are sorted descending
    return lam[..., 0] * lam[..., 1]


def stability_bracket(lam, h_adapted):
    """The bracket whose negative drives (d/dt - Delta) ln *Omega_1.

    sum_{a,l,k} h_{alk}^2 + sum_{k,i} lam_i^2 h_{n+i,ik}^2
      + 2 sum_{k, i<j} lam_i lam_j h_{n+i,jk} h_{n+j,ik}
    with normal index n+i matched to singular value lam_i.
    """
    lam = np.asarray(lam, dtype=float)
    h = np.asarray(h_adapted, dtype=float)
    k = lam.shape[-1]
    total = np.sum(h**2, axis=(-3, -2, -1))
    idx = np.arange(k)
    diag = h[..., idx, idx, :]  # h_{n+i, i, k}
    total = total + np.sum(lam[..., :, None] ** 2 * diag**2, axis=(-2, -1))
    for i in range(k):
        for j in range(i + 1, k):
            total = total + 2 * lam[..., i] * lam[..., j] * np.sum(h[..., i, j, :] * h[..., j, i, :], axis=-1)
    return total


def gram_singular_values(Df):
    """Descending singular values from the smaller Gram matrix (no frames)."""
    Df = np.asarray(Df, dtype=float)
    m, n = Df.shape[-2:]
    G = Df @ np.swapaxes(Df, -1, -2) if m <= n else np.swapaxes(Df, -1, -2) @ Df
    mu = np.linalg.eigvalsh(G)[..., ::-1]
    return np.sqrt(np.maximum(mu, 0.0))


def curvature_summary(jet: Jet):
    """(H as an R^{n+m} vector, |A|^2, g^{ij} D_ij f, g^{-1}) without frames.

    The normal part of (0, w) has tangential coefficients c = g^{-1} Df^T w,
    and on vertical vectors the normal metric is (I + Df Df^T)^{-1}, so
    |A|^2 = g^{ik} g^{jl} D_ij f^T (I + Df Df^T)^{-1} D_kl f.
    """
    Df, D2f = jet.Df, jet.D2f
    m, n = Df.shape[-2:]
    _, g_inv, _ = induced_metric(Df)
    w = np.einsum("...ij,...aij->...a", g_inv, D2f)
    c = np.einsum("...ij,...aj,...a->...i", g_inv, Df, w)
    H = np.concatenate([-c, w - np.einsum("...ai,...i->...a", Df, c)], axis=-1)
    normal_metric = np.linalg.inv(np.eye(m) + Df @ np.swapaxes(Df, -1, -2))
    raised = g_inv[..., None, :, :] @ D2f @ g_inv[..., None, :, :]
    lead = raised.shape[:-3]
    X = raised.reshape(lead + (m, n * n))
    Y = D2f.reshape(lead + (m, n * n))
    A2 = np.sum(normal_metric * (X @ np.swapaxes(Y, -1, -2)), axis=(-2, -1))
    return H, A2, w, g_inv


@dataclass
class GeomSample:
    g: np.ndarray
    g_inv: np.ndarray
    det_g: np.ndarray
    lam: np.ndarray
    star_omega1: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    h: np.ndarray
    p_tangent: np.ndarray
    p_normal: np.ndarray
    residual: np.ndarray


def geom_sample(jet: Jet) -> GeomSample:
    m, n = jet.Df.shape[-2:]
    g, g_inv, det_g = induced_metric(jet.Df)
    svd = singular_values(jet.Df)
    sff = second_fundamental_form(jet, svd)
    pt, pn = p_form_eigen(svd.lam, n, m)
    return GeomSample(
        g=g,
        g_inv=g_inv,
        det_g=det_g,
        lam=svd.lam,
        star_omega1=star_omega1(svd.lam),
        H=sff.H,
        A2=sff.A2,
        h=sff.h,
        p_tangent=pt,
        p_normal=pn,
        residual=system_residual(jet),
    )
