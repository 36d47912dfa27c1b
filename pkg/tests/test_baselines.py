import math

import numpy as np
import pytest

from conftest import central_fd
from tksd.baselines import (
    approx_weights, bdksd_grad, bdksd_vstat, exact_l2ball_weights, fit_bdksd, fit_truncsm,
    ksd_vstat, truncsm_grad, truncsm_objective,
)
from tksd.geometry import LpBall, gaussian_sampler, sample_boundary_lp, truncated_rejection_sample
from tksd.kernels import KernelConfig, median_heuristic
from tksd.models import GaussianMeanModel, GaussianMixtureMeansModel, TruncatedRegressionModel


def ksd_oracle(psi, X, s):
    n, d = X.shape
    total = 0.0
    for i in range(n):
        for j in range(n):
            diff = X[i] - X[j]
            k = math.exp(-diff @ diff / (2 * s * s))
            for l in range(d):
                total += (psi[i, l] * psi[j, l] * k + psi[i, l] * diff[l] / s ** 2 * k
                          - psi[j, l] * diff[l] / s ** 2 * k
                          + k * (1 / s ** 2 - diff[l] ** 2 / s ** 4))
    return total / n ** 2


def weighted_instance(rng, n=30):
    X = rng.uniform(-0.7, 0.7, size=(n, 2))
    h, dh = exact_l2ball_weights(X, 1.0)
    return X, h, dh


def test_ksd_matches_oracle(rng):
    model = GaussianMeanModel.isotropic(2)
    X = rng.normal(size=(15, 2))
    theta = rng.normal(size=2)
    assert ksd_vstat(model, X, KernelConfig(0.8), theta) == pytest.approx(
        ksd_oracle(model.score(X, theta), X, 0.8), rel=1e-12)


def test_bdksd_reductions(rng):
    model = GaussianMeanModel(np.array([[1.0, 0.4], [0.4, 2.0]]))
    X = rng.normal(size=(20, 2))
    cfg = KernelConfig(1.1)
    theta = rng.normal(size=2)
    one = bdksd_vstat(model, X, np.ones(20), np.zeros((20, 2)), cfg, theta)
    assert abs(one - ksd_oracle(model.score(X, theta), X, 1.1)) < 1e-12
    assert bdksd_vstat(model, X, np.zeros(20), np.zeros((20, 2)), cfg, theta) == 0.0


def test_bdksd_matches_brute_force(rng):
    model = GaussianMeanModel.isotropic(2)
    X, h, dh = weighted_instance(rng, n=12)
    s = 0.7
    theta = rng.normal(size=2)
    psi = model.score(X, theta)
    A = psi * h[:, None] + dh
    total = 0.0
    for i in range(12):
        for j in range(12):
            diff = X[i] - X[j]
            k = math.exp(-diff @ diff / (2 * s * s))
            for l in range(2):
                total += (A[i, l] * A[j, l] * k + A[i, l] * h[j] * diff[l] / s ** 2 * k
                          - A[j, l] * h[i] * diff[l] / s ** 2 * k
                          + h[i] * h[j] * k * (1 / s ** 2 - diff[l] ** 2 / s ** 4))
    assert bdksd_vstat(model, X, h, dh, KernelConfig(s), theta) == pytest.approx(
        total / 144, rel=1e-12)


def _models(rng):
    X, h, dh = weighted_instance(rng)
    c = rng.normal(size=30)
    Y = (1 + 2 * c)[:, None] + rng.normal(size=(30, 1))
    hy = Y[:, 0] - Y.min() + 0.1
    return [
        (GaussianMeanModel(np.array([[1.0, 0.3], [0.3, 0.6]])), X, h, dh),
        (GaussianMixtureMeansModel(2, 2), X, h, dh),
        (TruncatedRegressionModel(c), Y, hy, np.ones((30, 1))),
    ]


def test_truncsm_grad_fd(rng):
    for model, X, h, dh in _models(rng):
        for _ in range(10):
            th = rng.normal(size=model.dim_theta)
            g = truncsm_grad(model, X, h, dh, th)
            fd = central_fd(lambda t: truncsm_objective(model, X, h, dh, t), th)
            assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5


def test_bdksd_grad_fd(rng):
    for model, X, h, dh in _models(rng):
        cfg = KernelConfig(median_heuristic(X))
        for _ in range(10):
            th = rng.normal(size=model.dim_theta)
            g = bdksd_grad(model, X, h, dh, cfg, th)
            fd = central_fd(lambda t: bdksd_vstat(model, X, h, dh, cfg, t), th)
            assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5


def test_truncsm_plain_score_matching(rng):
    model = GaussianMeanModel.isotropic(3)
    X = rng.normal(size=(40, 3)) + 2
    ones, zeros = np.ones(40), np.zeros((40, 3))
    mu = rng.normal(size=3)
    expect = np.mean(np.sum((mu - X) ** 2, axis=1)) - 6
    assert truncsm_objective(model, X, ones, zeros, mu) == pytest.approx(expect, rel=1e-12)
    res = fit_truncsm(model, X, ones, zeros)
    np.testing.assert_allclose(res.theta_hat, X.mean(axis=0), atol=1e-8)


def test_truncsm_untruncated_limit(rng):
    model = GaussianMeanModel.isotropic(2)
    X = rng.normal(size=(200, 2))
    h, dh = exact_l2ball_weights(X, 1e4)
    np.testing.assert_allclose(fit_truncsm(model, X, h, dh).theta_hat, X.mean(axis=0), atol=1e-2)


def test_negative_weights_rejected(rng):
    model = GaussianMeanModel.isotropic(2)
    X = rng.normal(size=(5, 2))
    h = np.array([1.0, -0.1, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        truncsm_objective(model, X, h, np.zeros((5, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        bdksd_vstat(model, X, h, np.zeros((5, 2)), KernelConfig(1.0), np.zeros(2))


def _ball_sample(seed, n=300):
    rng = np.random.default_rng(seed)
    X, _ = truncated_rejection_sample(gaussian_sampler([0.5, 0.5]), LpBall.centered(2, 1.0, 2),
                                      n, rng)
    return rng, X


def test_exact_vs_dense_approx(rng):
    model = GaussianMeanModel.isotropic(2)
    _, X = _ball_sample(1)
    h, dh = exact_l2ball_weights(X, 1.0)
    B = sample_boundary_lp(2, 1.0, 2, 100_000, rng)
    ha, dha = approx_weights(X, B)
    th = np.array([0.2, 0.7])
    a = truncsm_objective(model, X, h, dh, th)
    b = truncsm_objective(model, X, ha, dha, th)
    assert abs(a - b) < 1e-3 * abs(a)
    B = sample_boundary_lp(2, 1.0, 2, 10_000, rng)
    ha, dha = approx_weights(X, B)
    e = fit_truncsm(model, X, h, dh).theta_hat
    f = fit_truncsm(model, X, ha, dha).theta_hat
    assert np.linalg.norm(e - f) < 1e-2


@pytest.mark.slow
def test_truncsm_approx_improves_with_m():
    model = GaussianMeanModel.isotropic(2)
    mu = np.array([0.5, 0.5])
    err = {8: [], 512: []}
    for s in range(64):
        rng, X = _ball_sample(s)
        for m in err:
            h, dh = approx_weights(X, sample_boundary_lp(2, 1.0, 2, m, rng))
            err[m].append(np.linalg.norm(fit_truncsm(model, X, h, dh).theta_hat - mu))
    assert np.mean(err[512]) <= np.mean(err[8])


def test_bdksd_consistent_on_ball(rng):
    model = GaussianMeanModel.isotropic(2)
    _, X = _ball_sample(3, n=500)
    h, dh = exact_l2ball_weights(X, 1.0)
    res = fit_bdksd(model, X, h, dh, KernelConfig(median_heuristic(X)))
    assert res.method == "exact-affine"
    assert np.linalg.norm(res.theta_hat - 0.5) < 0.5
