"""Truncation domains, boundary sampling, distance functions and rejection sampling."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln


class InfeasibleDomainError(RuntimeError):
    """Raised when rejection sampling essentially never lands inside the domain."""


@dataclass(frozen=True)
class LpBall:
    p: int
    radius: float
    center: np.ndarray

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "center", c)

    @classmethod
    def centered(cls, p, radius, d):
        return cls(p, float(radius), np.zeros(d))

    @property
    def dim(self):
        return self.center.shape[0]

    def norm(self, X):
        return np.linalg.norm(np.atleast_2d(X) - self.center, ord=self.p, axis=-1)

    def contains(self, X):
        X = _check_points(X, self.dim)
        inside = self.norm(X) <= self.radius
        return inside

    def surface_area(self):
        """(d-1)-dimensional measure of the sphere/cross-polytope boundary."""
        d, r = self.dim, self.radius
        if self.p == 2:
            return float(2 * math.pi ** (d / 2) / math.gamma(d / 2) * r ** (d - 1))
        if d == 1:
            return 2.0
        # 2^d facets, each a regular (d-1)-simplex with edge r*sqrt(2)
        return float(2 ** d * math.sqrt(d) / math.factorial(d - 1) * r ** (d - 1))


@dataclass(frozen=True)
class Polygon2D:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must be a K x 2 array")
        if v.shape[0] >= 4 and np.array_equal(v[0], v[-1]):
            v = v[:-1]  # explicit closing vertex
        if v.shape[0] < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        if np.any(np.all(v == np.roll(v, -1, axis=0), axis=1)):
            raise ValueError("consecutive polygon vertices must differ")
        if _self_intersects(v):
            raise ValueError("polygon is self-intersecting")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    dim = 2

    @property
    def edges(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def perimeter(self):
        a, b = self.edges
        return float(np.sum(np.linalg.norm(b - a, axis=1)))

    def surface_area(self):
        return self.perimeter()

    def edge_distance(self, X):
        """Euclidean distance from each row of X to the polygon outline."""
        X = _check_points(X, 2)
        a, b = self.edges
        ab = b - a
        t = np.einsum("nkj,kj->nk", X[:, None, :] - a[None], ab) / np.sum(ab ** 2, axis=1)
        t = np.clip(t, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        return np.min(np.linalg.norm(X[:, None, :] - proj, axis=-1), axis=1)

    def contains(self, X):
        X = _check_points(X, 2)
        a, b = self.edges
        x, y = X[:, 0][:, None], X[:, 1][:, None]
        ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
        straddle = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = ax + (y - ay) * (bx - ax) / (by - ay)
        crossings = np.sum(straddle & (x < x_cross), axis=1)
        inside = crossings % 2 == 1
        on_edge = self.edge_distance(X) <= 1e-12 * (1.0 + np.abs(X).max(axis=1))
        return inside | on_edge


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _self_intersects(v):
    K = v.shape[0]
    a, b = v, np.roll(v, -1, axis=0)
    for i in range(K):
        # skip the edge itself and both neighbours
        j = np.arange(i + 2, K)
        if i == 0:
            j = j[j != K - 1]
        if j.size == 0:
            continue
        c, d = a[j], b[j]
        o1 = _orient(a[i], b[i], c)
        o2 = _orient(a[i], b[i], d)
        o3 = _orient(c, d, a[i])
        o4 = _orient(c, d, b[i])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return True
        # collinear overlaps
        col = (o1 == 0) & _on_segment(a[i], b[i], c)
        col |= (o2 == 0) & _on_segment(a[i], b[i], d)
        if np.any(col):
            return True
    return False


def _on_segment(p, q, r):
    return ((np.minimum(p[0], q[0]) <= r[:, 0]) & (r[:, 0] <= np.maximum(p[0], q[0]))
            & (np.minimum(p[1], q[1]) <= r[:, 1]) & (r[:, 1] <= np.maximum(p[1], q[1])))


def _check_points(X, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X


def contains(domain, x):
    """Membership test for a single point (bool) or a stack of points (bool array)."""
    out = domain.contains(x)
    return bool(out[0]) if np.ndim(x) == 1 else out


@dataclass(frozen=True)
class BoundarySample:
    points: np.ndarray
    domain: object = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 1:
            raise ValueError("boundary sample needs at least one point")
        if self.domain is not None:
            if isinstance(self.domain, LpBall):
                tol = 1e-9 * (1.0 + self.domain.radius)
                gap = np.abs(self.domain.norm(pts) - self.domain.radius)
            else:
                tol = 1e-9 * (1.0 + np.abs(self.domain.vertices).max())
                gap = self.domain.edge_distance(pts)
            if np.any(gap > tol):
                raise ValueError("boundary points do not lie on the domain boundary")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def sample_boundary_lp(p, r, d, m, rng, center=None, bias=None):
    """Random points on the sphere of the l_p ball of radius r.

    Gaussian draws are projected radially onto the boundary. ``bias=(s, u)``
    shifts the Gaussian mean to ``s*u`` which concentrates points towards
    direction u for s > 0 and away from it for s < 0.
    """
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    mean = np.zeros(d)
    if bias is not None:
        s, u = bias
        u = np.asarray(u, dtype=float)
        mean = s * u / np.linalg.norm(u)
    Z = rng.standard_normal((m, d)) + mean
    norms = np.linalg.norm(Z, ord=p, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        Z[bad] = rng.standard_normal((bad.sum(), d)) + mean
        norms = np.linalg.norm(Z, ord=p, axis=1)
    pts = r * Z / norms[:, None] + center
    return BoundarySample(pts, LpBall(p, float(r), center))


def sample_boundary_polygon(poly, m, rng):
    """Points uniform in arc length along the polygon outline."""
    a, b = poly.edges
    lengths = np.linalg.norm(b - a, axis=1)
    idx = rng.choice(len(lengths), size=m, p=lengths / lengths.sum())
    t = rng.uniform(size=m)[:, None]
    pts = a[idx] + t * (b[idx] - a[idx])
    return BoundarySample(pts, poly)


def approx_distance(X, boundary, alpha=2, gamma=1.0):
    """Distance to the nearest sampled boundary point, raised to ``gamma``.

    Works on a single point or a stack. Returns ``(value, gradient)``. Ties go
    to the lowest boundary index; the gradient is zero where the norm is not
    differentiable at the attaining point.
    """
    if alpha not in (1, 2):
        raise ValueError("alpha must be 1 or 2")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    single = np.ndim(X) == 1
    B = boundary.points if isinstance(boundary, BoundarySample) else np.atleast_2d(boundary)
    X = _check_points(X, B.shape[1])
    diff = X[:, None, :] - B[None, :, :]
    dist = np.linalg.norm(diff, ord=alpha, axis=-1)
    j = np.argmin(dist, axis=1)
    rows = np.arange(X.shape[0])
    dmin = dist[rows, j]
    dd = diff[rows, j]
    with np.errstate(divide="ignore", invalid="ignore"):
        if alpha == 2:
            unit = dd / dmin[:, None]
        else:
            unit = np.sign(dd)
        grad = gamma * dmin[:, None] ** (gamma - 1.0) * unit
    grad[dmin == 0] = 0.0
    value = dmin ** gamma
    if single:
        return float(value[0]), grad[0]
    return value, grad


def exact_distance_l2ball(X, r, c=None):
    """Distance from interior points to the sphere of radius r around c."""
    single = np.ndim(X) == 1
    X = np.atleast_2d(np.asarray(X, dtype=float))
    c = np.zeros(X.shape[1]) if c is None else np.asarray(c, dtype=float)
    diff = X - c
    rad = np.linalg.norm(diff, axis=1)
    if np.any(rad > r):
        raise ValueError("points must lie inside the ball")
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = -diff / rad[:, None]
    grad[rad == 0] = 0.0
    value = r - rad
    if single:
        return float(value[0]), grad[0]
    return value, grad


def gaussian_sampler(mean, cov=None):
    """Base sampler ``rng, size -> size x d`` for N(mean, cov)."""
    mean = np.asarray(mean, dtype=float)
    L = np.eye(mean.size) if cov is None else np.linalg.cholesky(np.asarray(cov, dtype=float))

    def draw(rng, size):
        return mean + rng.standard_normal((size, mean.size)) @ L.T
    return draw


def truncated_rejection_sample(base_sampler, domain, n, rng, batch=None,
                               max_proposals=1_000_000, min_rate=1e-4):
    """Keep draws from ``base_sampler`` that fall in ``domain`` until n are found.

    Returns ``(X, acceptance_rate)``. Proposals are drawn in fixed-size
    batches so the result depends only on the rng state.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    batch = batch or max(1024, 2 * n)
    kept, n_kept, proposed = [], 0, 0
    while n_kept < n:
        Z = base_sampler(rng, batch)
        proposed += batch
        Z = Z[domain.contains(Z)]
        kept.append(Z)
        n_kept += Z.shape[0]
        if proposed >= max_proposals and n_kept / proposed < min_rate:
            raise InfeasibleDomainError(
                f"acceptance rate {n_kept / proposed:.2e} after {proposed} proposals")
    X = np.concatenate(kept)[:n]
    return X, n_kept / proposed


def epsilon_lower_bound(m, d, L):
    """Smallest radius for which m uniform boundary samples are dense with prob. 0.95."""
    if m < 1 or d < 1 or not L > 0:
        raise ValueError("need m >= 1, d >= 1 and L > 0")
    log_xi = (d / 2) * math.log(math.pi) - gammaln(d / 2 + 1)
    # 1 - 0.05**(1/m) without cancellation at large m
    frac = -math.expm1(math.log(0.05) / m)
    return math.exp((math.log(L) - log_xi + math.log(frac)) / d)


def load_polygon_csv(path):
    verts = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and [c.strip().lower() for c in row] == ["x", "y"]:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(row)}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"{path}:{lineno}: non-finite coordinate")
            verts.append((x, y))
    if len(verts) < 3:
        raise ValueError(f"{path}: polygon needs at least 3 vertices, got {len(verts)}")
    return Polygon2D(np.array(verts))


def save_boundary_csv(sample, path):
    pts = sample.points if isinstance(sample, BoundarySample) else np.asarray(sample)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(pts.shape[1])] if pts.shape[1] != 2 else ["x", "y"])
        for row in pts:
            w.writerow([f"{v:.17g}" for v in row])


def load_boundary_csv(path):
    """Read points written by :func:`save_boundary_csv`."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row:
                rows.append([float(v) for v in row])
    return BoundarySample(np.array(rows))
