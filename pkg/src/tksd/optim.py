"""Minimisers shared by every estimator: affine-gradient direct solve and Armijo descent."""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class OptConfig:
    c1: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    tol: float = 1e-6
    max_iter: int = 500
    max_backtracks: int = 60


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective_value: float
    grad_norm: float
    iterations: int
    method: str
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def armijo_step(fun, x, f0, g, direction, opt):
    """Backtrack from ``opt.initial_step`` until sufficient decrease holds.

    Returns ``(step, f_new)``; step is 0.0 if no acceptable step was found.
    """
    slope = g @ direction
    step = opt.initial_step
    for _ in range(opt.max_backtracks):
        f = fun(x + step * direction)
        if np.isfinite(f) and f <= f0 + opt.c1 * step * slope:
            return step, f
        step *= opt.shrink
    return 0.0, f0


def descent(fun, grad, theta0, opt=None):
    """Steepest descent with Armijo backtracking."""
    opt = opt or OptConfig()
    x = np.array(theta0, dtype=float)
    f = fun(x)
    g = grad(x)
    it = 0
    converged = False
    while True:
        gnorm = float(np.linalg.norm(g))
        if gnorm < opt.tol * (1.0 + abs(f)):
            converged = True
            break
        if it >= opt.max_iter:
            break
        step, f_new = armijo_step(fun, x, f, g, -g, opt)
        if step == 0.0:
            break
        x = x - step * g
        f = f_new
        g = grad(x)
        it += 1
    return FitResult(x, float(f), float(np.linalg.norm(g)), it, "descent", converged)


def affine_solve(fun, grad, p, theta_ref=None):
    """Minimise a quadratic objective from its (affine) gradient.

    The gradient is probed at ``theta_ref`` and at ``theta_ref + e_i``; the
    implied Hessian is symmetrised and solved directly. Returns ``None`` when
    the Hessian is singular or not positive definite.
    """
    ref = np.zeros(p) if theta_ref is None else np.asarray(theta_ref, dtype=float)
    g0 = grad(ref)
    H = np.empty((p, p))
    for i in range(p):
        e = ref.copy()
        e[i] += 1.0
        H[:, i] = grad(e) - g0
    H = 0.5 * (H + H.T)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(L)) <= 1e-12 * np.max(np.abs(np.diag(L))):
        return None
    delta = -np.linalg.solve(H, g0)
    theta = ref + delta
    g = grad(theta)
    return FitResult(theta, float(fun(theta)), float(np.linalg.norm(g)), p + 2,
                     "exact-affine", True, {"hessian": H})


def minimize(fun, grad, p, affine=False, theta0=None, opt=None):
    """Exact solve for quadratic objectives, falling back to descent."""
    opt = opt or OptConfig()
    x0 = np.zeros(p) if theta0 is None else np.asarray(theta0, dtype=float)
    if affine:
        res = affine_solve(fun, grad, p, x0)
        if res is not None:
            return res
    return descent(fun, grad, x0, opt)
