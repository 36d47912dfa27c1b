"""Gaussian kernel, its derivatives, Gram assembly and regularised SPD solves."""
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist


class DegenerateDataError(ValueError):
    """Raised when the data carry no spread to set a bandwidth from."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorisation fails even at maximum jitter."""


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel bandwidth and the jitter policy for Gram solves.

    ``jitter=None`` selects the scale-relative default ``1e-8 * trace(K) / m``.
    """

    bandwidth: float
    jitter: float | None = None
    jitter_growth_limit: int = 6

    def __post_init__(self):
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.jitter is not None and self.jitter < 0:
            raise ValueError(f"jitter must be non-negative, got {self.jitter}")
        if self.jitter_growth_limit < 0:
            raise ValueError("jitter_growth_limit must be non-negative")


@dataclass(frozen=True)
class KernelBundle:
    k: float
    dkx: np.ndarray
    dky: np.ndarray
    dkxy: np.ndarray


def median_heuristic(X):
    """Median of the pairwise Euclidean distances between rows of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("median heuristic needs at least two points")
    dists = pdist(X)
    med = float(np.median(dists))
    if med == 0.0:
        if np.all(dists == 0.0):
            raise DegenerateDataError("all pairwise distances are zero")
        # more than half the pairs coincide; fall back to the positive ones
        med = float(np.median(dists[dists > 0]))
    return med


def _as_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def kernel_bundle(x, y, cfg):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    s2 = cfg.bandwidth ** 2
    diff = x - y
    k = float(np.exp(-diff @ diff / (2.0 * s2)))
    dkx = -diff / s2 * k
    return KernelBundle(k=k, dkx=dkx, dky=-dkx, dkxy=k * (1.0 / s2 - diff ** 2 / s2 ** 2))


def _check_dims(X, Y):
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")


def gram(X, Y, cfg):
    """Gram matrix ``K[i, j] = k(X[i], Y[j])``."""
    X, Y = _as_points(X), _as_points(Y)
    _check_dims(X, Y)
    sq = np.sum((X[:, None, :] - Y[None, :, :]) ** 2, axis=-1)
    return np.exp(-sq / (2.0 * cfg.bandwidth ** 2))


def grad_gram_l(X, Y, l, cfg, K=None):
    """Derivative of ``gram(X, Y)`` in the l-th coordinate of the first argument."""
    X, Y = _as_points(X), _as_points(Y)
    _check_dims(X, Y)
    if K is None:
        K = gram(X, Y, cfg)
    return -(X[:, l][:, None] - Y[:, l][None, :]) / cfg.bandwidth ** 2 * K


def gram_bundle(X, Y, cfg):
    """Gram matrix plus all per-coordinate derivative matrices.

    Returns ``(K, dKx, dKy, dKxy)`` where the derivative stacks have shape
    ``(d, n, r)``; ``dKx[l]`` differentiates in ``X[:, l]``, ``dKy[l]`` in
    ``Y[:, l]`` and ``dKxy[l]`` is the mixed same-coordinate derivative.
    """
    X, Y = _as_points(X), _as_points(Y)
    _check_dims(X, Y)
    s2 = cfg.bandwidth ** 2
    D = X.T[:, :, None] - Y.T[:, None, :]  # (d, n, r)
    K = np.exp(-np.sum(D ** 2, axis=0) / (2.0 * s2))
    dKx = -D / s2 * K
    dKxy = K * (1.0 / s2 - D ** 2 / s2 ** 2)
    return K, dKx, -dKx, dKxy


@dataclass(frozen=True)
class SPDFactor:
    """Cholesky factor of ``K + jitter * I`` together with the jitter used."""

    chol: tuple
    jitter: float
    escalations: int

    def solve(self, B):
        return linalg.cho_solve(self.chol, B, check_finite=False)


def factorize(K, cfg):
    """Cholesky-factorise ``K + eps*I``, escalating ``eps`` by 10x on failure."""
    K = np.asarray(K, dtype=float)
    m = K.shape[0]
    if K.shape != (m, m):
        raise ValueError("K must be square")
    if not np.allclose(K, K.T, rtol=1e-12, atol=1e-14):
        raise ValueError("K must be symmetric")
    eps = cfg.jitter if cfg.jitter is not None else 1e-8 * np.trace(K) / m
    # zero jitter cannot be escalated multiplicatively
    base = eps if eps > 0 else 1e-8 * max(np.trace(K) / m, 1.0)
    eye = np.eye(m)
    for attempt in range(cfg.jitter_growth_limit + 1):
        try:
            c = linalg.cho_factor(K + eps * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            c = None
        if c is not None and np.all(np.diag(c[0]) > 0) and np.all(np.isfinite(c[0])):
            return SPDFactor(chol=c, jitter=float(eps), escalations=attempt)
        eps = base if eps == 0 else eps * 10.0
    raise NotPositiveDefiniteError(
        f"factorisation failed with jitter up to {eps / 10.0:.3g}")


def regularized_spd_solve(K, B, cfg):
    """Solve ``(K + eps*I) r = B``; returns ``(r, jitter_used)``."""
    f = factorize(K, cfg)
    return f.solve(np.asarray(B, dtype=float)), f.jitter
