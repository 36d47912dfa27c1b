import numpy as np
import pytest

from conftest import central_fd
from tksd.models import (
    GaussianMeanModel, GaussianMixtureMeansModel, TruncatedRegressionModel, gaussian_loglik,
    ols_fit,
)


def _models(rng):
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    return [
        (GaussianMeanModel(cov), rng.normal(size=(7, 2)), None),
        (GaussianMixtureMeansModel(3, 2), rng.normal(size=(7, 2)), None),
        (TruncatedRegressionModel(rng.normal(size=7)), rng.normal(size=(7, 1)), None),
    ]


def test_gaussian_score_examples(rng):
    X = rng.normal(size=(5, 3))
    m = GaussianMeanModel.isotropic(3)
    np.testing.assert_array_equal(m.score(X, np.zeros(3)), -X)
    np.testing.assert_array_equal(m.score_theta_jacobian(X, np.zeros(3))[2], np.eye(3))
    np.testing.assert_array_equal(m.score_x_divergence(X, np.zeros(3)), -1.0)


def test_gaussian_score_general_cov(rng):
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    m = GaussianMeanModel(cov)
    x, mu = rng.normal(size=2), rng.normal(size=2)
    np.testing.assert_allclose(m.score(x[None], mu)[0], np.linalg.solve(cov, mu - x), rtol=1e-12)
    np.testing.assert_allclose(m.score_x_divergence(x[None], mu)[0],
                               -np.diag(np.linalg.inv(cov)), rtol=1e-12)
    with pytest.raises(ValueError):
        GaussianMeanModel(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_gaussian_score_affine(rng):
    m = GaussianMeanModel(np.array([[2.0, 0.3], [0.3, 0.5]]))
    X = rng.normal(size=(10, 2))
    t1, t2 = rng.normal(size=2), rng.normal(size=2)
    np.testing.assert_allclose(m.score(X, t1 + t2) - m.score(X, t2),
                               m.score(X, t1) - m.score(X, np.zeros(2)), atol=1e-12)


def test_mixture_reductions(rng):
    X = rng.normal(size=(6, 2))
    mu = rng.normal(size=2)
    g = GaussianMeanModel.isotropic(2)
    one = GaussianMixtureMeansModel(1, 2)
    np.testing.assert_allclose(one.score(X, mu), g.score(X, mu), atol=1e-14)
    np.testing.assert_allclose(one.score_x_divergence(X, mu), -1.0, atol=1e-12)
    np.testing.assert_allclose(one.score_theta_jacobian(X, mu), g.score_theta_jacobian(X, mu),
                               atol=1e-4)
    two = GaussianMixtureMeansModel(2, 2)
    np.testing.assert_allclose(two.score(X, np.tile(mu, 2)), mu - X, atol=1e-14)


def test_mixture_weights(rng):
    m = GaussianMixtureMeansModel(4, 3)
    w = m.weights(rng.normal(size=(20, 3)) * 3, rng.normal(size=12))
    np.testing.assert_allclose(w.sum(axis=1), 1.0, rtol=1e-14)
    assert np.all((w > 0) & (w < 1))


def test_mixture_divergence_fd(rng):
    m = GaussianMixtureMeansModel(2, 2)
    for _ in range(20):
        x, th = rng.normal(size=2), 1.5 * rng.normal(size=4)
        div = m.score_x_divergence(x[None], th)[0]
        for l in range(2):
            fd = central_fd(lambda z: m.score(z[None], th)[0, l], x)[l]
            assert div[l] == pytest.approx(fd, abs=1e-4)


def test_theta_jacobians_fd(rng):
    for model, X, _ in _models(rng):
        for _ in range(20):
            th = rng.normal(size=model.dim_theta)
            J = model.score_theta_jacobian(X, th)
            fd = central_fd(lambda t: model.score(X, t).ravel(), th)
            np.testing.assert_allclose(J.reshape(-1, model.dim_theta), fd, atol=1e-6)
            dJ = model.divergence_theta_jacobian(X, th)
            fd = central_fd(lambda t: model.score_x_divergence(X, t).ravel(), th)
            np.testing.assert_allclose(dJ.reshape(-1, model.dim_theta), fd, atol=1e-5)


def test_regression_model():
    c = np.array([0.0, 2.0, -1.0])
    m = TruncatedRegressionModel(c)
    y = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(m.score(y, [3.0, 4.0])[:, 0], 3 + 4 * c - y)
    np.testing.assert_array_equal(m.score_theta_jacobian(y[1:2], [3.0, 4.0], idx=[1])[0],
                                  [[1.0, 2.0]])
    np.testing.assert_array_equal(m.score_x_divergence(y, [0, 0]), -1.0)
    with pytest.raises(ValueError):
        m.score(y[:2], [3.0, 4.0])  # conditional model needs idx here


def test_theta_size_checked(rng):
    with pytest.raises(ValueError):
        GaussianMeanModel.isotropic(2).score(np.zeros((1, 2)), np.zeros(3))


def test_ols_examples(rng):
    c = rng.normal(size=30)
    assert ols_fit(c, 3 + 4 * c) == pytest.approx((3.0, 4.0), abs=1e-12)
    b0, b1 = ols_fit(c, np.full(30, 2.5))
    assert b0 == pytest.approx(2.5, abs=1e-12) and b1 == pytest.approx(0.0, abs=1e-12)
    y = rng.normal(size=30)
    A = np.array([[30, c.sum()], [c.sum(), c @ c]])
    np.testing.assert_allclose(ols_fit(c, y), np.linalg.solve(A, [y.sum(), c @ y]), atol=1e-10)
    with pytest.raises(np.linalg.LinAlgError):
        ols_fit(np.ones(5), rng.normal(size=5))
    with pytest.raises(ValueError):
        ols_fit([1.0], [2.0])


def test_gaussian_loglik():
    from scipy.stats import norm
    y, mu = np.array([0.1, 2.0, -1.0]), np.array([0.0, 1.0, 1.0])
    assert gaussian_loglik(y, mu) == pytest.approx(norm.logpdf(y, mu).sum(), rel=1e-12)
