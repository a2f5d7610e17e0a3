import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from graphflow.geometry import (
    area_density,
    curvature_summary,
    frames,
    geom_sample,
    gram_singular_values,
    induced_metric,
    max_pair_product,
    mean_curvature_vector,
    normal_projection,
    p_form_eigen,
    p_form_matrix,
    second_fundamental_form,
    singular_values,
    stability_bracket,
    star_omega1,
    system_residual,
    tangent_basis,
)
from graphflow.jets import Jet

dims = st.tuples(st.integers(1, 4), st.integers(1, 4))


def random_jet(rng, m, n, scale=1.0):
    D2 = rng.normal(size=(m, n, n))
    return Jet(scale * rng.normal(size=(m, n)), D2 + np.swapaxes(D2, -1, -2))


@st.composite
def matrices(draw):
    m, n = draw(dims)
    return draw(hnp.arrays(np.float64, (m, n), elements=st.floats(-3, 3, allow_nan=False)))


def test_metric_examples():
    g, gi, d = induced_metric(np.zeros((2, 3)))
    np.testing.assert_array_equal(g, np.eye(3))
    assert d == 1
    g, _, d = induced_metric(np.array([[1.0, 0.0]]))
    np.testing.assert_array_equal(g, np.diag([2.0, 1.0]))
    assert d == pytest.approx(2)
    g, _, d = induced_metric(np.eye(2))
    np.testing.assert_array_equal(g, 2 * np.eye(2))
    assert d == pytest.approx(4)


@given(matrices())
def test_metric_inverse_and_lower_bound(M):
    g, gi, d = induced_metric(M)
    n = M.shape[1]
    assert np.linalg.norm(g @ gi - np.eye(n)) <= 1e-12 * np.linalg.cond(g)
    assert np.linalg.eigvalsh(g - np.eye(n)).min() >= -1e-12 * (1 + np.abs(g).max())
    assert d >= 1 - 1e-12


def test_geometry_rejects_nonfinite():
    with pytest.raises(ValueError):
        induced_metric(np.array([[np.inf]]))
    with pytest.raises(ValueError):
        singular_values(np.array([[np.nan, 0.0]]))


def test_singular_value_examples():
    np.testing.assert_allclose(singular_values(np.array([[0.0, 1.0], [1.0, 0.0]])).lam, [1, 1])
    np.testing.assert_allclose(singular_values(np.diag([3.0, 4.0])).lam, [4, 3])
    np.testing.assert_allclose(singular_values(np.diag([4.0, 3.0])).lam, [4, 3])


@given(matrices())
def test_singular_values_against_eigensolve(M):
    lam = singular_values(M).lam
    mu = np.sort(np.linalg.eigvalsh(M.T @ M))[::-1][: len(lam)]
    np.testing.assert_allclose(lam**2, mu, atol=1e-10 * (1 + mu.max()))
    assert np.all(np.diff(lam) <= 0) and np.all(lam >= 0)
    np.testing.assert_allclose(gram_singular_values(M), lam, atol=1e-7 * (1 + lam.max()))


@given(matrices())
def test_svd_reconstructs_with_sign_convention(M):
    s = singular_values(M)
    m, n = M.shape
    k = len(s.lam)
    np.testing.assert_allclose(s.U[:, :k] * s.lam @ s.V[:, :k].T, M, atol=1e-12 * (1 + np.abs(M).max()))
    np.testing.assert_allclose(s.V.T @ s.V, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(s.U.T @ s.U, np.eye(m), atol=1e-12)
    for col in s.V.T:
        big = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        assert col[big[0]] > 0


def test_svd_deterministic(rng):
    M = rng.normal(size=(3, 4))
    a, b = singular_values(M), singular_values(M.copy())
    np.testing.assert_array_equal(a.U, b.U)
    np.testing.assert_array_equal(a.V, b.V)


@given(matrices())
def test_det_and_area_density_identities(M):
    lam = singular_values(M).lam
    _, _, d = induced_metric(M)
    prod = np.prod(1 + lam**2)
    assert d == pytest.approx(prod, rel=1e-10)
    assert area_density(M) == pytest.approx(np.sqrt(prod), rel=1e-10)
    assert star_omega1(lam) == pytest.approx(1 / np.sqrt(d), rel=1e-10)


def test_star_omega_examples():
    assert star_omega1(np.zeros(3)) == 1.0
    assert star_omega1(np.ones(2)) == pytest.approx(0.5)
    assert star_omega1(np.ones(4)) == pytest.approx(0.25)
    assert area_density(np.zeros((2, 2))) == 1.0
    assert area_density(np.array([[0.6, 0.8]])) == pytest.approx(np.sqrt(2))


def test_p_form_examples():
    t, nn = p_form_eigen(np.array([0.0]), 1, 1)
    assert (t[0], nn[0]) == (1.0, -1.0)
    t, nn = p_form_eigen(np.array([1.0]), 1, 1)
    assert (t[0], nn[0]) == (0.0, 0.0)
    t, nn = p_form_eigen(np.array([0.5]), 3, 1)
    np.testing.assert_allclose(t, [0.6, 1, 1])
    np.testing.assert_allclose(nn, [-0.6])


def _frame_case(M):
    m, n = M.shape
    s = singular_values(M)
    T, N = frames(s, n, m)
    P = p_form_matrix(n, m)
    return s, T, N, P


@given(matrices())
def test_frames_orthonormal_and_tangent(M):
    m, n = M.shape
    s, T, N, _ = _frame_case(M)
    E = np.concatenate([T, N], axis=1)
    np.testing.assert_allclose(E.T @ E, np.eye(n + m), atol=1e-12)
    # tangent frame spans the image of dF = (I, Df)
    B = tangent_basis(M)
    np.testing.assert_allclose(N.T @ B, 0, atol=1e-12 * (1 + np.abs(M).max()))


@given(matrices())
def test_p_form_identity_by_frame_assembly(M):
    m, n = M.shape
    s, T, N, P = _frame_case(M)
    pt, pn = p_form_eigen(s.lam, n, m)
    np.testing.assert_allclose(T.T @ P @ T, np.diag(pt), atol=1e-10)
    np.testing.assert_allclose(N.T @ P @ N, np.diag(pn), atol=1e-10)
    k = len(s.lam)
    np.testing.assert_array_equal(pt[:k] + pn[:k], 0.0)


@given(matrices())
def test_p_positivity_equivalences(M):
    m, n = M.shape
    s, T, _, P = _frame_case(M)
    lam = s.lam
    if abs(lam.max(initial=0) - 1) < 1e-9:
        return
    a = bool(np.linalg.eigvalsh(T.T @ P @ T).min() > 0)
    b = bool(lam.max(initial=0) < 1)
    c = bool(np.linalg.svd(M, compute_uv=False).max() < 1)
    assert a == b == c


@given(matrices())
def test_star_omega_from_frame_jacobian(M):
    m, n = M.shape
    s, T, _, _ = _frame_case(M)
    # Omega_1 evaluated on the orthonormal tangent frame = det of its base projection
    jac = abs(np.linalg.det(T[:n, :]))
    assert jac == pytest.approx(star_omega1(s.lam), rel=1e-10)


def test_normal_projection_examples(rng):
    v = rng.normal(size=5)
    out = normal_projection(v, np.zeros((3, 2)))
    np.testing.assert_allclose(out, np.concatenate([[0, 0], v[2:]]), atol=1e-15)
    M = rng.normal(size=(3, 2))
    w = rng.normal(size=2)
    np.testing.assert_allclose(normal_projection(tangent_basis(M) @ w, M), 0, atol=1e-12)


@given(matrices(), st.integers(0, 2**32 - 1))
def test_normal_projection_idempotent(M, seed):
    m, n = M.shape
    v = np.random.default_rng(seed).normal(size=n + m)
    p = normal_projection(v, M)
    np.testing.assert_allclose(normal_projection(p, M), p, atol=1e-12 * (1 + np.abs(v).max()) * (1 + np.abs(M).max() ** 2))


def test_sff_flat_point_example():
    jet = Jet(np.zeros((1, 2)), np.eye(2)[None])
    s = second_fundamental_form(jet)
    assert s.H_components[0] == pytest.approx(2.0)
    assert s.A2 == pytest.approx(2.0)
    np.testing.assert_allclose(s.H, [0, 0, 2.0])


def test_affine_has_no_curvature(rng):
    jet = Jet(rng.normal(size=(2, 3)), np.zeros((2, 3, 3)))
    s = second_fundamental_form(jet)
    assert np.all(s.h == 0) and s.A2 == 0 and np.all(s.H == 0)
    np.testing.assert_array_equal(system_residual(jet), 0.0)


@given(dims, st.integers(0, 2**32 - 1))
def test_sff_symmetric_and_frame_free_agreement(mn, seed):
    m, n = mn
    jet = random_jet(np.random.default_rng(seed), m, n)
    s = second_fundamental_form(jet)
    np.testing.assert_allclose(s.h, np.swapaxes(s.h, -1, -2), atol=1e-12)
    H, A2, w, _ = curvature_summary(jet)
    np.testing.assert_allclose(H, s.H, atol=1e-10 * (1 + np.abs(H).max()))
    np.testing.assert_allclose(A2, s.A2, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(mean_curvature_vector(jet), H, atol=1e-10 * (1 + np.abs(H).max()))
    np.testing.assert_allclose(w, system_residual(jet), atol=1e-12 * (1 + np.abs(w).max()))


@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_sff_frame_independence_repeated_singular_values(n, seed):
    rng = np.random.default_rng(seed)
    m = n
    Q1, _ = np.linalg.qr(rng.normal(size=(m, m)))
    Q2, _ = np.linalg.qr(rng.normal(size=(n, n)))
    Df = 0.7 * Q1 @ Q2.T  # all singular values equal
    D2 = rng.normal(size=(m, n, n))
    jet = Jet(Df, D2 + np.swapaxes(D2, -1, -2))
    base = second_fundamental_form(jet)
    # another orthonormal completion: rotate the matched singular pairs together
    R, _ = np.linalg.qr(rng.normal(size=(n, n)))
    other = second_fundamental_form(jet, type(base.svd)(base.svd.lam, base.svd.U @ R, base.svd.V @ R))
    assert other.A2 == pytest.approx(base.A2, rel=1e-10)
    assert np.sum(other.H_components**2) == pytest.approx(np.sum(base.H_components**2), rel=1e-10)


def test_bracket_examples(rng):
    lam = np.array([0.3, 0.2])
    assert stability_bracket(lam, np.zeros((2, 2, 2))) == 0.0
    h = rng.normal(size=(2, 2, 2))
    h = h + np.swapaxes(h, -1, -2)
    assert stability_bracket(np.zeros(2), h) == pytest.approx(np.sum(h**2))


@given(dims, st.integers(0, 2**32 - 1))
def test_bracket_bound(mn, seed):
    m, n = mn
    rng = np.random.default_rng(seed)
    k = min(m, n)
    lam = np.sort(rng.uniform(0, 2, size=k))[::-1]
    if k >= 2 and lam[0] * lam[1] > 1:
        lam[1] = rng.uniform(0, 1 / lam[0])
    h = rng.normal(size=(m, n, n))
    h = h + np.swapaxes(h, -1, -2)
    A2 = np.sum(h**2)
    bound = (1 - max_pair_product(lam)) * A2
    assert stability_bracket(lam, h) >= bound - 1e-12
    assert stability_bracket(lam, h) >= -1e-12


def test_bracket_matches_adapted_sff(rng):
    jet = random_jet(rng, 3, 4, scale=0.3)
    s = second_fundamental_form(jet)
    ha = s.adapted()
    assert np.sum(ha**2) == pytest.approx(s.A2, rel=1e-10)
    assert stability_bracket(s.svd.lam, ha) >= (1 - max_pair_product(s.svd.lam)) * s.A2 - 1e-12


def test_geom_sample_consistent(rng):
    jet = random_jet(rng, 2, 3, 0.5)
    gs = geom_sample(jet)
    assert gs.det_g == pytest.approx(np.prod(1 + gs.lam**2))
    assert gs.star_omega1 == pytest.approx(1 / np.sqrt(gs.det_g))
    assert gs.p_tangent.shape == (3,) and gs.p_normal.shape == (2,)


def test_batched_equals_pointwise(rng):
    Df = rng.normal(size=(6, 2, 3))
    D2 = rng.normal(size=(6, 2, 3, 3))
    jet = Jet(Df, D2 + np.swapaxes(D2, -1, -2))
    s = second_fundamental_form(jet)
    for k in range(6):
        sk = second_fundamental_form(Jet(Df[k], jet.D2f[k]))
        assert sk.A2 == pytest.approx(s.A2[k], rel=1e-12)
