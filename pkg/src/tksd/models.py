"""Unnormalised density models described through their score in x.

Every model evaluates on a stack of points ``X`` of shape (n, d) and a flat
parameter vector ``theta``:

* ``score(X, theta)``              -> (n, d), grad_x log p(x)
* ``score_theta_jacobian(X, theta)`` -> (n, d, p), d score / d theta
* ``score_x_divergence(X, theta)``  -> (n, d), d score_l / d x_l

Conditional models (regression) take ``idx``, the rows of their covariate
table that the points in ``X`` belong to; it defaults to ``arange(n)``.
"""
import numpy as np
from scipy import linalg
from scipy.special import softmax


def _points(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, d) if d > 1 or X.size == 1 else X[:, None]
    if X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X


class ScoreModel:
    dim_x: int
    dim_theta: int
    affine_in_theta: bool = False
    conditional: bool = False

    def score(self, X, theta, idx=None):
        raise NotImplementedError

    def score_theta_jacobian(self, X, theta, idx=None):
        return self._fd_theta(self.score, X, theta, idx)

    def score_x_divergence(self, X, theta, idx=None):
        raise NotImplementedError

    def divergence_theta_jacobian(self, X, theta, idx=None):
        """d/dtheta of score_x_divergence, shape (n, d, p)."""
        return self._fd_theta(self.score_x_divergence, X, theta, idx)

    def _fd_theta(self, fn, X, theta, idx):
        theta = np.asarray(theta, dtype=float)
        cols = []
        for i in range(theta.size):
            h = 1e-5 * (1.0 + abs(theta[i]))
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            cols.append((fn(X, tp, idx) - fn(X, tm, idx)) / (2 * h))
        return np.stack(cols, axis=-1)

    def _theta(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.dim_theta:
            raise ValueError(f"expected {self.dim_theta} parameters, got {theta.size}")
        return theta


class GaussianMeanModel(ScoreModel):
    """N(mu, cov) with known covariance; theta is the mean."""

    affine_in_theta = True

    def __init__(self, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            c = linalg.cho_factor(cov, lower=True)
        except linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        self.cov = cov
        self.precision = linalg.cho_solve(c, np.eye(cov.shape[0]))
        self.precision = 0.5 * (self.precision + self.precision.T)
        self.dim_x = self.dim_theta = cov.shape[0]

    @classmethod
    def isotropic(cls, d, scale=1.0):
        return cls(scale * np.eye(d))

    def score(self, X, theta, idx=None):
        X = _points(X, self.dim_x)
        return (self._theta(theta) - X) @ self.precision

    def score_theta_jacobian(self, X, theta, idx=None):
        X = _points(X, self.dim_x)
        return np.broadcast_to(self.precision, (X.shape[0],) + self.precision.shape).copy()

    def score_x_divergence(self, X, theta, idx=None):
        X = _points(X, self.dim_x)
        return np.tile(-np.diag(self.precision), (X.shape[0], 1))

    def divergence_theta_jacobian(self, X, theta, idx=None):
        X = _points(X, self.dim_x)
        return np.zeros((X.shape[0], self.dim_x, self.dim_theta))


class GaussianMixtureMeansModel(ScoreModel):
    """Equal-weight mixture of K unit-covariance Gaussians; theta stacks the K means."""

    def __init__(self, n_components, d):
        if n_components < 1:
            raise ValueError("need at least one component")
        self.n_components = n_components
        self.dim_x = d
        self.dim_theta = n_components * d

    def means(self, theta):
        return self._theta(theta).reshape(self.n_components, self.dim_x)

    def _parts(self, X, theta):
        X = _points(X, self.dim_x)
        mu = self.means(theta)
        A = mu[None, :, :] - X[:, None, :]  # (n, K, d)
        w = softmax(-0.5 * np.sum(A ** 2, axis=-1), axis=1)
        return A, w

    def weights(self, X, theta):
        return self._parts(X, theta)[1]

    def score(self, X, theta, idx=None):
        A, w = self._parts(X, theta)
        return np.einsum("nk,nkd->nd", w, A)

    def score_theta_jacobian(self, X, theta, idx=None):
        A, w = self._parts(X, theta)
        psi = np.einsum("nk,nkd->nd", w, A)
        n, K, d = A.shape
        # d psi_l / d mu_kj = w_k [delta_lj - (mu_kj - x_j)(mu_kl - x_l - psi_l)]
        J = -w[:, None, :, None] * (A - psi[:, None, :]).transpose(0, 2, 1)[..., None] \
            * A[:, None, :, :]
        J += w[:, None, :, None] * np.eye(d)[None, :, None, :]
        return J.reshape(n, d, K * d)

    def score_x_divergence(self, X, theta, idx=None):
        A, w = self._parts(X, theta)
        first = np.einsum("nk,nkd->nd", w, A)
        second = np.einsum("nk,nkd->nd", w, A ** 2)
        return second - first ** 2 - 1.0


class TruncatedRegressionModel(ScoreModel):
    """y_i ~ N(b0 + b1 c_i, 1); theta = (b0, b1), points are responses (d = 1)."""

    affine_in_theta = True
    conditional = True
    dim_x = 1
    dim_theta = 2

    def __init__(self, covariates):
        c = np.asarray(covariates, dtype=float).ravel()
        self.covariates = c

    def _design(self, n, idx):
        if idx is None:
            if n != self.covariates.size:
                raise ValueError("conditional model needs idx unless X covers every observation")
            idx = np.arange(n)
        idx = np.atleast_1d(idx)
        if idx.size != n:
            raise ValueError("idx must have one entry per point")
        return self.covariates[idx]

    def score(self, X, theta, idx=None):
        Y = _points(X, 1)
        c = self._design(Y.shape[0], idx)
        b = self._theta(theta)
        return (b[0] + b[1] * c)[:, None] - Y

    def score_theta_jacobian(self, X, theta, idx=None):
        Y = _points(X, 1)
        c = self._design(Y.shape[0], idx)
        return np.stack([np.ones_like(c), c], axis=-1)[:, None, :]

    def score_x_divergence(self, X, theta, idx=None):
        Y = _points(X, 1)
        return -np.ones_like(Y)

    def divergence_theta_jacobian(self, X, theta, idx=None):
        Y = _points(X, 1)
        return np.zeros((Y.shape[0], 1, 2))


def ols_fit(C, y):
    """Least-squares intercept and slope of y on a single covariate."""
    c = np.asarray(C, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if c.size != y.size or c.size < 2:
        raise ValueError("need at least two paired observations")
    design = np.column_stack([np.ones_like(c), c])
    if np.linalg.matrix_rank(design) < 2:
        raise np.linalg.LinAlgError("rank-deficient design: covariate is constant")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(beta[0]), float(beta[1])


def gaussian_loglik(y, mean):
    """Sum of unit-variance normal log densities."""
    r = np.asarray(y, dtype=float) - np.asarray(mean, dtype=float)
    return float(-0.5 * np.sum(r ** 2) - 0.5 * r.size * np.log(2 * np.pi))
