import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tksd.kernels import (
    DegenerateDataError, KernelConfig, NotPositiveDefiniteError, factorize, gram,
    gram_bundle, grad_gram_l, kernel_bundle, median_heuristic, regularized_spd_solve,
)

E1 = np.exp(-1.0)


def test_median_heuristic_examples():
    assert median_heuristic(np.array([[0.0], [1.0], [3.0]])) == 2.0
    assert median_heuristic(np.array([[0.0, 0.0], [3.0, 4.0]])) == 5.0
    # four points -> six distances, even count uses midpoint
    X = np.array([[0.0], [1.0], [2.0], [4.0]])  # 1,2,4,1,3,2 -> sorted 1,1,2,2,3,4
    assert median_heuristic(X) == 2.0


def test_median_heuristic_errors():
    with pytest.raises(DegenerateDataError):
        median_heuristic(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(ValueError):
        median_heuristic(np.array([[1.0, 2.0]]))


def test_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(0.0)
    with pytest.raises(ValueError):
        KernelConfig(1.0, jitter=-1.0)


def test_bundle_identity():
    b = kernel_bundle(np.ones(3), np.ones(3), KernelConfig(1.0))
    assert b.k == 1.0
    np.testing.assert_array_equal(b.dkx, 0.0)
    np.testing.assert_array_equal(b.dky, 0.0)
    np.testing.assert_array_equal(b.dkxy, 1.0)


def test_bundle_substitution():
    b = kernel_bundle([0.0], [2.0], KernelConfig(np.sqrt(2.0)))
    assert b.k == pytest.approx(E1, rel=1e-15)
    assert b.dkx[0] == pytest.approx(E1, rel=1e-15)
    assert b.dky[0] == pytest.approx(-E1, rel=1e-15)
    assert b.dkxy[0] == pytest.approx(-E1 / 2, rel=1e-15)


def test_bundle_swap_symmetry(rng):
    x, y = rng.normal(size=3), rng.normal(size=3)
    cfg = KernelConfig(0.7)
    a, b = kernel_bundle(x, y, cfg), kernel_bundle(y, x, cfg)
    assert a.k == b.k
    np.testing.assert_allclose(a.dkx, b.dky)
    np.testing.assert_allclose(a.dkxy, b.dkxy)


def test_bundle_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_bundle(np.zeros(2), np.zeros(3), KernelConfig(1.0))


@settings(max_examples=50, deadline=None)
@given(arrays(float, 6, elements=st.floats(-3, 3)), st.floats(0.3, 3.0))
def test_bundle_matches_finite_differences(v, sigma):
    x, y = v[:3], v[3:]
    cfg = KernelConfig(sigma)
    b = kernel_bundle(x, y, cfg)
    step = 1e-5 * sigma
    for l in range(3):
        e = np.zeros(3)
        e[l] = step
        fd_x = (kernel_bundle(x + e, y, cfg).k - kernel_bundle(x - e, y, cfg).k) / (2 * step)
        fd_xy = (kernel_bundle(x + e, y, cfg).dky[l] - kernel_bundle(x - e, y, cfg).dky[l]) / (2 * step)
        assert fd_x == pytest.approx(b.dkx[l], rel=1e-5, abs=1e-9)
        assert fd_xy == pytest.approx(b.dkxy[l], rel=1e-5, abs=1e-9)
    assert 0 < b.k <= 1


def test_gram_examples(rng):
    cfg = KernelConfig(np.sqrt(2.0))
    np.testing.assert_allclose(gram([[0.0]], [[0.0], [2.0]], cfg), [[1.0, E1]])
    X, Y = rng.normal(size=(5, 2)), rng.normal(size=(4, 2))
    np.testing.assert_array_equal(np.diag(gram(X, X, cfg)), 1.0)
    np.testing.assert_allclose(gram(X, Y, cfg), gram(Y, X, cfg).T)
    with pytest.raises(ValueError):
        gram(X, rng.normal(size=(3, 3)), cfg)


def test_gram_derivatives_agree_with_bundle(rng):
    cfg = KernelConfig(0.9)
    X, Y = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    K, dKx, dKy, dKxy = gram_bundle(X, Y, cfg)
    for i, j in [(0, 0), (1, 4), (3, 2)]:
        b = kernel_bundle(X[i], Y[j], cfg)
        assert K[i, j] == pytest.approx(b.k, rel=1e-14)
        np.testing.assert_allclose(dKx[:, i, j], b.dkx, rtol=1e-13)
        np.testing.assert_allclose(dKy[:, i, j], b.dky, rtol=1e-13)
        np.testing.assert_allclose(dKxy[:, i, j], b.dkxy, rtol=1e-13)
    np.testing.assert_allclose(grad_gram_l(X, Y, 1, cfg), dKx[1])


def test_solve_identity_and_diagonal():
    r, eps = regularized_spd_solve(np.eye(2), np.array([3.0, 7.0]), KernelConfig(1.0, jitter=0.0))
    np.testing.assert_allclose(r, [3.0, 7.0])
    assert eps == 0.0
    r, _ = regularized_spd_solve(2 * np.eye(2), np.array([2.0, 4.0]), KernelConfig(1.0, jitter=0.0))
    np.testing.assert_allclose(r, [1.0, 2.0])


def _cramer_2x2(A, b):
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return np.array([(b[0] * A[1, 1] - A[0, 1] * b[1]) / det,
                     (A[0, 0] * b[1] - b[0] * A[1, 0]) / det])


def test_solve_singular_with_jitter_matches_elimination():
    K = np.ones((2, 2))
    b = np.array([1.0, 1.0])
    r, eps = regularized_spd_solve(K, b, KernelConfig(1.0, jitter=1e-6))
    expected = _cramer_2x2(K + 1e-6 * np.eye(2), b)
    np.testing.assert_allclose(r, expected, rtol=1e-8)
    assert eps == 1e-6


def test_jitter_escalation_and_failure():
    K = np.array([[1.0, 2.5], [2.5, 1.0]])  # indefinite, min eigenvalue -1.5
    f = factorize(K, KernelConfig(1.0, jitter=1e-3, jitter_growth_limit=6))
    assert f.escalations == 4 and f.jitter == pytest.approx(10.0)
    with pytest.raises(NotPositiveDefiniteError):
        factorize(K, KernelConfig(1.0, jitter=1e-3, jitter_growth_limit=2))


def test_default_jitter_is_scale_relative():
    f = factorize(4.0 * np.eye(3), KernelConfig(1.0))
    assert f.jitter == pytest.approx(4e-8)


def test_solve_residual_bound(rng):
    X = rng.normal(size=(30, 2))
    cfg = KernelConfig(1.0, jitter=1e-6)
    K = gram(X, X, cfg)
    B = rng.normal(size=(30, 3))
    r, eps = regularized_spd_solve(K, B, cfg)
    resid = np.linalg.norm((K + eps * np.eye(30)) @ r - B)
    assert resid <= 1e-8 * (np.linalg.norm(K, 2) + eps) * np.linalg.norm(r)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 20), st.integers(0, 10_000))
def test_gram_plus_jitter_factorises(m, seed):
    X = np.random.default_rng(seed).normal(size=(m, 2))
    f = factorize(gram(X, X, KernelConfig(1.0)), KernelConfig(1.0, jitter=1e-6,
                                                               jitter_growth_limit=0))
    assert f.escalations == 0
