import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvfractal.errors import (
    DegenerateSegmentError,
    DimensionMismatchError,
    NonFiniteError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)
from mvfractal.norms import (
    NormOrder,
    SpdMatrix,
    lpq_euclid_norm,
    lpq_norm,
    lpqr_norm,
    mahalanobis_lpq_norm,
    power_sum_root,
    spd_factorize,
)


def loop_lpq(z, p, q):
    total = 0.0
    for row in z:
        inner = 0.0
        for v in row:
            inner += abs(v) ** p
        total += inner ** (q / p)
    return total ** (1 / q)


def loop_lpqr(z, p, q, r):
    total = 0.0
    for plane in z:
        mid = 0.0
        for vec in plane:
            length = sum(abs(c) ** r for c in vec) ** (1 / r)
            mid += length**p
        total += mid ** (q / p)
    return total ** (1 / q)


def random_spd(rng, m):
    a = rng.standard_normal((m, m))
    return a @ a.T + 0.1 * np.eye(m)


def test_norm_order():
    with pytest.raises(ZeroDivisionError):
        NormOrder(p=2, q=0)
    with pytest.raises(ZeroDivisionError):
        NormOrder(p=0, q=2)
    assert NormOrder(1, 1).is_true_norm
    assert not NormOrder(2, -1).is_true_norm


def test_lpq_hand_cases():
    assert lpq_norm([[3.0, 4.0], [0.0, 0.0]], NormOrder(2, 1)) == 5.0
    assert lpq_norm(np.eye(2), NormOrder(2, 2)) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_lpq_matches_loop(rng):
    for _ in range(20):
        z = rng.standard_normal((5, 3))
        assert lpq_norm(z, NormOrder(2, 4)) == pytest.approx(loop_lpq(z, 2, 4), rel=1e-12)
        p, q = rng.uniform(0.5, 5), rng.uniform(-4, 5)
        assert lpq_norm(z, NormOrder(p, q)) == pytest.approx(loop_lpq(z, p, q), rel=1e-12)


def test_lpqr_matches_loop_and_collapses(rng):
    for _ in range(20):
        z = rng.standard_normal((4, 3, 2))
        p, q, r = rng.uniform(1, 4, size=3)
        assert lpqr_norm(z, NormOrder(p, q, r)) == pytest.approx(loop_lpqr(z, p, q, r), rel=1e-12)
        assert lpqr_norm(z, NormOrder(p, q, 2)) == pytest.approx(lpq_euclid_norm(z, NormOrder(p, q)), rel=1e-14)
        assert lpq_euclid_norm(z, NormOrder(p, q)) == pytest.approx(loop_lpqr(z, p, q, 2), rel=1e-12)


def test_lpqr_degenerate():
    assert lpqr_norm(np.zeros((2, 3, 4)), NormOrder(1.5, 2.5, 3)) == 0.0
    for order in (NormOrder(1, 1, 1), NormOrder(3, 0.5, 7), NormOrder(2, -2, 2)):
        assert lpqr_norm(np.full((1, 1, 1), -2.5), order) == pytest.approx(2.5, rel=1e-15)


def test_unit_vectors_count():
    z = np.zeros((3, 4, 2))
    z[..., 0] = 0.6
    z[..., 1] = 0.8
    assert lpq_euclid_norm(z, NormOrder(1, 1)) == pytest.approx(12.0, rel=1e-14)


def test_inf_order_is_max():
    z = np.array([[1.0, -7.0], [3.0, 2.0]])
    assert lpq_norm(z, NormOrder(math.inf, math.inf)) == 7.0


def test_log_domain_agrees_and_avoids_overflow():
    v = np.array([0.5, 1.0, 2.0])
    direct = np.sum(v**49.0) ** (1 / 49.0)
    assert power_sum_root(v, 49.0) == pytest.approx(direct, rel=1e-14)
    big = np.array([1e10, 2e10])
    assert np.isfinite(power_sum_root(big, 80.0))
    assert power_sum_root(big, 80.0) == pytest.approx(2e10 * (1 + 0.5**80) ** (1 / 80), rel=1e-13)
    assert power_sum_root(big, -80.0) == pytest.approx(1e10 * (1 + 2.0**-80) ** (-1 / 80), rel=1e-13)


def test_negative_exponent_zero_entry():
    with pytest.raises(DegenerateSegmentError):
        power_sum_root(np.array([0.0, 1.0]), -2.0)


def test_non_finite_rejected():
    with pytest.raises(NonFiniteError):
        lpq_norm([[1.0, np.nan]], NormOrder())


def test_spd_identity():
    f = spd_factorize(np.eye(3))
    np.testing.assert_allclose(f.factor.T @ f.factor, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(f.whitener @ f.whitener.T, np.eye(3), atol=1e-15)


def test_spd_diag_mahalanobis():
    f = spd_factorize(np.diag([4.0, 9.0]))
    assert f.mahalanobis(np.array([2.0, 3.0])) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_spd_invariants(rng):
    for m in range(1, 7):
        sigma = random_spd(rng, m)
        f = spd_factorize(sigma)
        scale = np.abs(sigma).max()
        assert np.abs(f.factor.T @ f.factor - sigma).max() <= 1e-10 * scale
        np.testing.assert_allclose(f.eigenvectors @ f.eigenvectors.T, np.eye(m), atol=1e-10)
        np.testing.assert_allclose(f.whitener.T @ f.whitener, np.linalg.inv(sigma), rtol=1e-8, atol=1e-10)
        z = rng.standard_normal(m)
        oracle = math.sqrt(z @ np.linalg.inv(sigma) @ z)
        assert f.mahalanobis(z) == pytest.approx(oracle, rel=1e-10)


def test_spd_rejects_asymmetric_and_indefinite():
    with pytest.raises(NotSymmetricError):
        spd_factorize([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(NotPositiveDefiniteError) as info:
        spd_factorize([[1.0, 2.0], [2.0, 1.0]])
    assert info.value.min_eigenvalue == pytest.approx(-1.0)
    with pytest.raises(NotPositiveDefiniteError):
        spd_factorize([[1.0, 1.0], [1.0, 1.0]])


def test_spd_shrinkage_repairs_singular():
    f = spd_factorize([[1.0, 1.0], [1.0, 1.0]], shrinkage=1e-3)
    np.testing.assert_allclose(f.sigma, [[1.0, 0.999], [0.999, 1.0]], rtol=1e-15)
    assert f.shrinkage == 1e-3


def test_mahalanobis_identity_and_diag(rng):
    z = rng.standard_normal((5, 4, 3))
    order = NormOrder(2, 3)
    assert mahalanobis_lpq_norm(z, SpdMatrix.identity(3), order) == pytest.approx(
        lpq_euclid_norm(z, order), rel=1e-12)
    var = np.array([0.5, 2.0, 7.0])
    assert mahalanobis_lpq_norm(z, spd_factorize(np.diag(var)), order) == pytest.approx(
        lpq_euclid_norm(z / np.sqrt(var), order), rel=1e-12)


def test_mahalanobis_bivariate_closed_form():
    rho, s1, s2 = 0.5, 1.0, 2.0
    sigma = np.array([[s1**2, rho * s1 * s2], [rho * s1 * s2, s2**2]])
    z = np.array([1.0, 1.0]).reshape(1, 1, 2)
    closed = math.sqrt((1 / (1 - rho**2)) * (1 / s1**2 + 1 / s2**2 - 2 * rho / (s1 * s2)))
    assert mahalanobis_lpq_norm(z, spd_factorize(sigma), NormOrder(2, 2)) == pytest.approx(closed, rel=1e-14)
    assert closed == pytest.approx(1.0, rel=1e-15)


def test_mahalanobis_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        mahalanobis_lpq_norm(np.ones((2, 2, 3)), SpdMatrix.identity(2), NormOrder())


def test_whitened_equivalence(rng):
    for m in range(1, 7):
        sigma = random_spd(rng, m)
        f = spd_factorize(sigma)
        z = rng.standard_normal((3, 5, m))
        w = z @ f.whitener.T
        np.testing.assert_allclose(np.einsum("uvi,uvi->uv", w, w),
                                   np.einsum("uvi,ij,uvj->uv", z, np.linalg.inv(sigma), z), rtol=1e-10)
        assert mahalanobis_lpq_norm(z, f, NormOrder(2, 2)) == pytest.approx(
            lpq_euclid_norm(w, NormOrder(2, 2)), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(1.0, 8.0), st.floats(1.01, 100.0), st.integers(0, 2**31))
def test_exact_scaling(p, q, k, seed):
    z = np.random.default_rng(seed).standard_normal((3, 4, 2))
    for norm in (lambda a: lpq_euclid_norm(a, NormOrder(p, q)), lambda a: lpqr_norm(a, NormOrder(p, q, 3))):
        assert norm(k * z) == pytest.approx(k * norm(z), rel=1e-12)


def test_partition_independent(rng):
    z = rng.standard_normal((40, 6, 3))
    order = NormOrder(2, 3)
    whole = lpq_euclid_norm(z, order)
    parts = [lpq_euclid_norm(z[i:i + 10], order) for i in range(0, 40, 10)]
    assert whole == pytest.approx(np.sum(np.array(parts) ** 3) ** (1 / 3), rel=1e-13)
