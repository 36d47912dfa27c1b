"""TruncSM and bd-KSD: distance-weighted baselines for truncated estimation.

Both need a weight ``h(x)`` that vanishes on the boundary and its gradient
on the data. :func:`exact_l2ball_weights` and :func:`approx_weights` produce
``(h, dh)`` pairs from a known ball or from sampled boundary points.
"""
import numpy as np

from .geometry import approx_distance, exact_distance_l2ball
from .kernels import gram_bundle
from .optim import OptConfig, minimize


def exact_l2ball_weights(X, radius, center=None):
    return exact_distance_l2ball(np.atleast_2d(X), radius, center)


def approx_weights(X, boundary, alpha=2, gamma=1.0):
    return approx_distance(np.atleast_2d(X), boundary, alpha, gamma)


def _check_weights(h, dh, n, d):
    h = np.asarray(h, dtype=float).ravel()
    dh = np.asarray(dh, dtype=float).reshape(n, d)
    if h.size != n:
        raise ValueError("need one weight per data point")
    if np.any(h < 0):
        raise ValueError("weights must be non-negative")
    return h, dh


def _points(X):
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def truncsm_objective(model, X, h, dh, theta, idx=None):
    """Weighted score-matching loss (data-only part) with a shared weight h."""
    X = _points(X)
    h, dh = _check_weights(h, dh, *X.shape)
    psi = model.score(X, theta, idx)
    div = model.score_x_divergence(X, theta, idx)
    # integrating h * psi_p * psi_q by parts puts a factor 2 on the dh term
    terms = h[:, None] * (psi ** 2 + 2.0 * div) + 2.0 * dh * psi
    return float(np.mean(np.sum(terms, axis=1)))


def truncsm_grad(model, X, h, dh, theta, idx=None):
    X = _points(X)
    h, dh = _check_weights(h, dh, *X.shape)
    psi = model.score(X, theta, idx)
    J = model.score_theta_jacobian(X, theta, idx)
    dJ = model.divergence_theta_jacobian(X, theta, idx)
    coef = 2.0 * (h[:, None] * psi + dh)
    g = np.einsum("nl,nlp->p", coef, J) + 2.0 * np.einsum("n,nlp->p", h, dJ)
    return g / X.shape[0]


def fit_truncsm(model, X, h, dh, opt=None, theta0=None, idx=None):
    X = _points(X)
    h, dh = _check_weights(h, dh, *X.shape)
    return minimize(lambda t: truncsm_objective(model, X, h, dh, t, idx),
                    lambda t: truncsm_grad(model, X, h, dh, t, idx),
                    model.dim_theta, affine=model.affine_in_theta, theta0=theta0,
                    opt=opt or OptConfig())


class BdksdWorkspace:
    """Kernel matrices and weights for the bd-KSD V-statistic."""

    def __init__(self, X, h, dh, cfg, idx=None):
        self.X = _points(X)
        self.h, self.dh = _check_weights(h, dh, *self.X.shape)
        self.idx = idx
        self.K, self.dKx, self.dKy, self.dKxy = gram_bundle(self.X, self.X, cfg)
        hh = np.outer(self.h, self.h)
        # theta-independent pieces of the statistic
        self.const = float(np.sum(hh * self.dKxy.sum(axis=0)))

    def A(self, psi):
        return psi * self.h[:, None] + self.dh


def bdksd_vstat(model, X, h, dh, cfg, theta, idx=None, workspace=None):
    """V-statistic of the bd-KSD with weight h; h == 1 recovers plain KSD."""
    ws = workspace or BdksdWorkspace(X, h, dh, cfg, idx)
    psi = model.score(ws.X, theta, ws.idx)
    A = ws.A(psi)
    n = ws.X.shape[0]
    total = np.sum(ws.K * (A @ A.T))
    total += np.einsum("il,j,lij->", A, ws.h, ws.dKy)
    total += np.einsum("jl,i,lij->", A, ws.h, ws.dKx)
    total += ws.const
    return float(total / n ** 2)


def bdksd_grad(model, X, h, dh, cfg, theta, idx=None, workspace=None):
    ws = workspace or BdksdWorkspace(X, h, dh, cfg, idx)
    psi = model.score(ws.X, theta, ws.idx)
    J = model.score_theta_jacobian(ws.X, theta, ws.idx)
    A = ws.A(psi)
    n = ws.X.shape[0]
    W = ws.K @ A + np.einsum("j,lij->il", ws.h, ws.dKy)
    return 2.0 / n ** 2 * np.einsum("i,il,ilp->p", ws.h, W, J)


def fit_bdksd(model, X, h, dh, cfg, opt=None, theta0=None, idx=None):
    ws = BdksdWorkspace(X, h, dh, cfg, idx)
    return minimize(lambda t: bdksd_vstat(model, None, None, None, cfg, t, workspace=ws),
                    lambda t: bdksd_grad(model, None, None, None, cfg, t, workspace=ws),
                    model.dim_theta, affine=model.affine_in_theta, theta0=theta0,
                    opt=opt or OptConfig())


def ksd_vstat(model, X, cfg, theta, idx=None):
    """Plain (untruncated) KSD V-statistic."""
    X = _points(X)
    n, d = X.shape
    return bdksd_vstat(model, X, np.ones(n), np.zeros((n, d)), cfg, theta, idx)
