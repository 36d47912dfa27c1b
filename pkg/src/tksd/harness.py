"""Seeded experiment runners and CSV/JSON record I/O.

Trial ``t`` of every experiment draws from ``default_rng(base_seed + t)``;
boundary samples use their own stream derived from the same seed, so a
trial's data do not depend on which methods or boundary sizes are run.
"""
import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .baselines import approx_weights, exact_l2ball_weights, fit_bdksd, fit_truncsm
from .estimators import fit_tksd
from .geometry import (
    LpBall, Polygon2D, epsilon_lower_bound, gaussian_sampler, load_polygon_csv,
    sample_boundary_lp, sample_boundary_polygon, truncated_rejection_sample,
)
from .kernels import KernelConfig, median_heuristic
from .models import (
    GaussianMeanModel, GaussianMixtureMeansModel, TruncatedRegressionModel,
    gaussian_loglik, ols_fit,
)

EXPERIMENTS = ("estimate", "dim-bench", "polygon-bench", "consistency", "mixture",
               "regression", "boundary-dist", "retention", "epsilon-table")
METHODS = ("tksd", "truncsm-exact", "truncsm-approx", "bdksd-exact", "bdksd-approx", "mle")

# radius = d ** exponent; two conventions appear for the dimension benchmark
RADIUS_EXPONENTS = {
    "default": {1: 0.98, 2: 0.53},
    "swapped": {1: 0.53, 2: 0.98},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "estimate"
    n: int | None = None
    m: int | None = None
    d: int = 2
    seeds: int = 64
    base_seed: int = 0
    domain: str | None = None  # "l1", "l2" or "polygon"
    radius: float | None = None
    radius_exponent: float | None = None
    radius_convention: str = "default"
    polygon_path: str | None = None
    mu_star: list | None = None
    sigma_scale: float | None = None
    modes: int = 2
    beta: list = field(default_factory=lambda: [3.0, 4.0])
    threshold: float = 5.0
    methods: list | None = None
    n_list: list | None = None
    m_list: list | None = None
    d_list: list | None = None
    modes_list: list | None = None
    L_list: list | None = None
    alpha: int = 2
    gamma: float = 1.0
    jitter: float | None = None
    bias_strength: float = 2.0
    init_scale: float = 0.5
    retention_draws: int = 10_000
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.n is not None and self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if self.methods is not None:
            if not self.methods:
                raise ConfigError("methods must be non-empty")
            bad = set(self.methods) - set(METHODS)
            if bad:
                raise ConfigError(f"unknown methods {sorted(bad)}")
            exact = {"truncsm-exact", "bdksd-exact"} & set(self.methods)
            if exact and self.domain not in (None, "l2"):
                raise ConfigError("exact distance baselines need an l2-ball domain")
        if self.domain not in (None, "l1", "l2", "polygon"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.radius_convention not in RADIUS_EXPONENTS:
            raise ConfigError(f"unknown radius convention {self.radius_convention!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path, **overrides):
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a flat JSON object")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(raw)


@dataclass
class TrialRecord:
    seed: int
    method: str
    n: int
    m: int
    d: int
    theta_hat: tuple
    error: float
    wall_time_ms: float
    converged: bool
    acceptance_rate: float = 1.0
    extra: dict = field(default_factory=dict)


def default_m(d):
    return min(math.ceil(2 * d ** 2), 200)


def _ball(cfg, d, p):
    if cfg.radius is not None:
        r = cfg.radius
    else:
        e = cfg.radius_exponent
        if e is None:
            e = RADIUS_EXPONENTS[cfg.radius_convention][p]
        r = d ** e
    return LpBall.centered(p, r, d)


def synthetic_border(n_vertices=40, seed=7):
    """Irregular star-shaped polygon standing in for a national border.

    Coordinates are lon/lat-like; the point (-115, 35) lies just inside
    its south-western edge.
    """
    rng = np.random.default_rng(seed)
    ang = np.sort((np.arange(n_vertices) + rng.uniform(-0.3, 0.3, n_vertices))
                  * 2 * np.pi / n_vertices)
    rad = 1 + 0.12 * np.sin(3 * ang + 0.5) + 0.05 * rng.standard_normal(n_vertices)
    return Polygon2D(np.column_stack([-99 + 21 * rad * np.cos(ang), 39 + 10 * rad * np.sin(ang)]))


def _domain(cfg, d):
    kind = cfg.domain or ("polygon" if cfg.polygon_path else "l2")
    if kind == "polygon":
        if d != 2:
            raise ConfigError("polygon domains are two-dimensional")
        return load_polygon_csv(cfg.polygon_path) if cfg.polygon_path else synthetic_border()
    return _ball(cfg, d, int(kind[1]))


def _boundary(domain, m, rng, bias=None):
    if isinstance(domain, Polygon2D):
        return sample_boundary_polygon(domain, m, rng)
    return sample_boundary_lp(domain.p, domain.radius, domain.dim, m, rng,
                              center=domain.center, bias=bias)


def _rng(seed, *stream):
    return np.random.default_rng([seed, *stream])


def _timed(fn):
    t0 = time.perf_counter()
    res = fn()
    return res, max((time.perf_counter() - t0) * 1e3, 1e-6)


def _naive_mle(model, X):
    """Maximum likelihood that ignores truncation."""
    if isinstance(model, TruncatedRegressionModel):
        return np.array(ols_fit(model.covariates, X[:, 0]))
    if isinstance(model, GaussianMeanModel):
        return X.mean(axis=0)
    raise ConfigError("naive MLE is only available for Gaussian mean and regression models")


def _fit_method(method, model, X, bnd, domain, cfg_k, cfg, theta0, idx=None):
    """Fit one method; returns (theta_hat, converged, wall_ms)."""
    if method == "mle":
        theta, ms = _timed(lambda: _naive_mle(model, X))
        return theta, True, ms
    if method == "tksd":
        res, ms = _timed(lambda: fit_tksd(model, X, bnd, cfg_k, theta0=theta0, idx=idx))
        return res.theta_hat, res.converged, ms
    if method.endswith("-exact"):
        if not (isinstance(domain, LpBall) and domain.p == 2):
            raise ConfigError("exact distance baselines need an l2-ball domain")
        weights = lambda: exact_l2ball_weights(X, domain.radius, domain.center)
    else:
        weights = lambda: approx_weights(X, bnd, cfg.alpha, cfg.gamma)
    if method.startswith("truncsm"):
        fit = lambda: fit_truncsm(model, X, *weights(), theta0=theta0, idx=idx)
    else:
        fit = lambda: fit_bdksd(model, X, *weights(), cfg_k, theta0=theta0, idx=idx)
    res, ms = _timed(fit)
    return res.theta_hat, res.converged, ms


def _record(seed, method, X, m, theta, theta_star, ms, conv, acc, **extra):
    theta = tuple(float(v) for v in np.ravel(theta))
    err = float(np.linalg.norm(np.asarray(theta) - np.ravel(theta_star)))
    return TrialRecord(seed, method, X.shape[0], m, X.shape[1], theta, err, float(ms),
                       bool(conv), float(acc), extra)


def _run_seeds(task, cfg):
    """Run ``task(seed)`` for every trial and sort the pooled records."""
    seeds = [cfg.base_seed + t for t in range(cfg.seeds)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            out = list(ex.map(task, seeds))
    else:
        out = [task(s) for s in seeds]
    records = [r for rs in out for r in rs]
    records.sort(key=lambda r: (r.seed, r.method, r.d, r.m, r.n))
    return records


def _gaussian_trial(cfg, d, domain, mu_star, n_values, m_values, methods, seed, stream=()):
    """Shared body of the Gaussian-mean experiments (nested n and m prefixes)."""
    cov = (cfg.sigma_scale or 1.0) * np.eye(d)
    model = GaussianMeanModel(cov)
    X_all, acc = truncated_rejection_sample(gaussian_sampler(mu_star, cov), domain,
                                            max(n_values), _rng(seed, *stream))
    B_all = _boundary(domain, max(m_values), _rng(seed, *stream, 1)).points
    recs = []
    for n in n_values:
        X = X_all[:n]
        cfg_k = KernelConfig(median_heuristic(X), cfg.jitter)
        xbar = X.mean(axis=0)
        for m in m_values:
            bnd = B_all[:m]
            for method in methods:
                if method in ("truncsm-exact", "bdksd-exact", "mle") and m != m_values[0]:
                    continue  # these ignore the boundary sample
                theta, conv, ms = _fit_method(method, model, X, bnd, domain, cfg_k, cfg, xbar)
                recs.append(_record(seed, method, X, m, theta, mu_star, ms, conv, acc))
    return recs


def run_estimate(cfg):
    d = 2 if cfg.domain == "polygon" or cfg.polygon_path else cfg.d
    domain = _domain(cfg, d)
    if cfg.mu_star is not None:
        mu_star = np.asarray(cfg.mu_star, dtype=float)
    elif isinstance(domain, Polygon2D):
        mu_star = domain.vertices.mean(axis=0)
    else:
        mu_star = 0.5 * np.ones(d)
    n = cfg.n or (400 if isinstance(domain, Polygon2D) else 300)
    m_values = cfg.m_list or [cfg.m or default_m(d)]
    methods = cfg.methods or ["tksd", "truncsm-approx"]
    return _run_seeds(lambda s: _gaussian_trial(cfg, d, domain, mu_star, [n], m_values,
                                                methods, s), cfg)


def run_polygon_bench(cfg):
    """Gaussian mean inside a 2D polygon, sweeping the number of boundary points."""
    return run_estimate(replace(
        cfg, domain="polygon",
        mu_star=cfg.mu_star or [-115.0, 35.0],
        sigma_scale=cfg.sigma_scale or 10.0,
        n=cfg.n or 400,
        m_list=cfg.m_list or ([cfg.m] if cfg.m else [8, 32, 128]),
        methods=cfg.methods or ["tksd", "truncsm-approx"]))


def run_dim_bench(cfg):
    kind = cfg.domain or "l2"
    p = int(kind[1])
    methods = cfg.methods or (["tksd", "truncsm-exact", "truncsm-approx", "bdksd-approx"]
                              if p == 2 else ["tksd", "truncsm-approx", "bdksd-approx"])
    if p != 2 and any(mm.endswith("-exact") for mm in methods):
        raise ConfigError("exact distance baselines need an l2-ball domain")
    n = cfg.n or 300
    d_values = cfg.d_list or [2, 4, 8]

    def task(seed):
        recs = []
        for d in d_values:
            domain = _ball(cfg, d, p)
            m = cfg.m or default_m(d)
            recs += _gaussian_trial(cfg, d, domain, 0.5 * np.ones(d), [n], [m], methods,
                                    seed, stream=(0, d))
        return recs
    return _run_seeds(task, cfg)


def run_consistency(cfg):
    """TKSD error over an (n, m) grid; returns ``(records, grid)``."""
    n_values = sorted(cfg.n_list or [64, 128, 256, 512])
    m_values = sorted(cfg.m_list or [4, 8, 16, 32])
    d = cfg.d
    domain = _domain(cfg, d)
    mu_star = np.asarray(cfg.mu_star, dtype=float) if cfg.mu_star else 0.5 * np.ones(d)
    methods = cfg.methods or ["tksd"]
    records = _run_seeds(lambda s: _gaussian_trial(cfg, d, domain, mu_star, n_values,
                                                   m_values, methods, s), cfg)
    grid = np.zeros((len(n_values), len(m_values)))
    for i, n in enumerate(n_values):
        for j, m in enumerate(m_values):
            errs = [r.error for r in records if r.method == "tksd" and r.n == n and r.m == m]
            grid[i, j] = np.mean(errs)
    return records, grid


def _mixture_sample(mus, n, domain, rng):
    K, d = mus.shape

    def draw(rng, size):
        comp = rng.integers(K, size=size)
        return mus[comp] + rng.standard_normal((size, d))
    return truncated_rejection_sample(draw, domain, n, rng)


MIXTURE_MODES = np.array([[1.5, 1.5], [-1.5, -1.5], [-1.5, 1.5], [1.5, -1.5]])


def run_mixture(cfg):
    box = Polygon2D(np.array([[-3.0, -3.0], [3.0, -3.0], [3.0, 3.0], [-3.0, 3.0]]))
    n_values = cfg.n_list or [cfg.n or 300]
    modes_values = cfg.modes_list or [cfg.modes]
    m = cfg.m or 200
    methods = cfg.methods or ["tksd", "truncsm-approx"]

    def task(seed):
        recs = []
        for K in modes_values:
            mus = MIXTURE_MODES[:K]
            model = GaussianMixtureMeansModel(K, 2)
            for n in n_values:
                rng = _rng(seed, 2, K, n)
                X, acc = _mixture_sample(mus, n, box, rng)
                init = (mus + math.sqrt(cfg.init_scale) * rng.standard_normal(mus.shape)).ravel()
                bnd = sample_boundary_polygon(box, m, _rng(seed, 1, K, n)).points
                cfg_k = KernelConfig(median_heuristic(X), cfg.jitter)
                for method in methods:
                    if method not in ("tksd", "truncsm-approx", "bdksd-approx"):
                        raise ConfigError(f"method {method!r} is not available for mixtures")
                    theta, conv, ms = _fit_method(method, model, X, bnd, box, cfg_k, cfg, init)
                    recs.append(_record(seed, method, X, m, theta, mus, ms, conv, acc,
                                        modes=K))
        return recs
    return _run_seeds(task, cfg)


def _regression_sample(beta, n, threshold, rng, batch=1024):
    """Draw (c, y) pairs until n satisfy y >= threshold; returns observed and discarded."""
    cs, ys, n_obs = [], [], 0
    while n_obs < n:
        c = rng.uniform(size=batch)
        y = beta[0] + beta[1] * c + rng.standard_normal(batch)
        cs.append(c)
        ys.append(y)
        n_obs += int(np.sum(y >= threshold))
    c, y = np.concatenate(cs), np.concatenate(ys)
    keep = y >= threshold
    last = np.flatnonzero(keep)[n - 1]
    c, y, keep = c[:last + 1], y[:last + 1], keep[:last + 1]
    return (c[keep], y[keep]), (c[~keep], y[~keep]), n / (last + 1)


def run_regression(cfg):
    beta = np.asarray(cfg.beta, dtype=float)
    n = cfg.n or 300
    methods = cfg.methods or ["tksd", "mle"]

    def task(seed):
        (c, y), (cu, yu), acc = _regression_sample(beta, n, cfg.threshold, _rng(seed))
        model = TruncatedRegressionModel(c)
        Y = y[:, None]
        bnd = np.array([[cfg.threshold]])
        cfg_k = KernelConfig(median_heuristic(Y), cfg.jitter)
        b_ols = np.array(ols_fit(c, y))
        recs = []
        for method in methods:
            if method not in ("tksd", "mle"):
                raise ConfigError(f"method {method!r} is not available for regression")
            theta, conv, ms = _fit_method(method, model, Y, bnd, None, cfg_k, cfg, b_ols)
            pred_u = theta[0] + theta[1] * cu
            extra = dict(
                obs_loglik=gaussian_loglik(y, theta[0] + theta[1] * c),
                unobs_loglik=gaussian_loglik(yu, pred_u),
                unobs_mse=float(np.sum((pred_u - yu) ** 2)),
                n_unobs=float(yu.size),
            )
            recs.append(_record(seed, method, Y, 1, theta, beta, ms, conv, acc, **extra))
        return recs
    return _run_seeds(task, cfg)


BOUNDARY_SCENARIOS = {"toward": 1.0, "uniform": 0.0, "away": -1.0}


def run_boundary_dist(cfg):
    """TKSD error when boundary points favour, avoid, or ignore the mean direction."""
    mu_star = np.asarray(cfg.mu_star or [1.0, 1.0], dtype=float)
    d = mu_star.size
    domain = LpBall.centered(2, cfg.radius or 1.0, d)
    n = cfg.n or 400
    m = cfg.m or 30
    model = GaussianMeanModel(np.eye(d))

    def task(seed):
        X, acc = truncated_rejection_sample(gaussian_sampler(mu_star), domain, n, _rng(seed))
        cfg_k = KernelConfig(median_heuristic(X), cfg.jitter)
        recs = []
        for k, (name, sign) in enumerate(BOUNDARY_SCENARIOS.items()):
            bias = (sign * cfg.bias_strength, mu_star) if sign else None
            bnd = _boundary(domain, m, _rng(seed, 1, k), bias)
            theta, conv, ms = _fit_method("tksd", model, X, bnd, domain, cfg_k, cfg,
                                          X.mean(axis=0))
            recs.append(_record(seed, f"tksd-{name}", X, m, theta, mu_star, ms, conv, acc))
        return recs
    return _run_seeds(task, cfg)


def run_retention(cfg):
    """Fraction of N(0.5 * 1_d, I) draws inside l1/l2 balls of radius d**exponent."""
    d_values = cfg.d_list or list(range(2, 11))
    rows = []
    for convention, exps in RADIUS_EXPONENTS.items():
        for p in (1, 2):
            for d in d_values:
                r = d ** exps[p]
                ball = LpBall.centered(p, r, d)
                fr = []
                for t in range(cfg.seeds):
                    rng = _rng(cfg.base_seed + t, 3, d, p)
                    Z = 0.5 + rng.standard_normal((cfg.retention_draws, d))
                    fr.append(np.mean(ball.contains(Z)))
                rows.append(dict(convention=convention, p=p, d=d, exponent=exps[p],
                                 radius=r, retention=float(np.mean(fr)),
                                 retention_se=float(np.std(fr, ddof=1) / np.sqrt(len(fr)))
                                 if len(fr) > 1 else 0.0))
    return rows


def run_epsilon_table(cfg):
    m_values = cfg.m_list or [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 10_000]
    d_values = cfg.d_list or [2, 5, 10]
    L_values = cfg.L_list or [float(d ** 2) for d in d_values]
    return [dict(m=m, d=d, L=L, epsilon=epsilon_lower_bound(m, d, L))
            for d in d_values for L in L_values for m in m_values]


RUNNERS = {
    "estimate": run_estimate,
    "polygon-bench": run_polygon_bench,
    "dim-bench": run_dim_bench,
    "consistency": run_consistency,
    "mixture": run_mixture,
    "regression": run_regression,
    "boundary-dist": run_boundary_dist,
    "retention": run_retention,
    "epsilon-table": run_epsilon_table,
}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------- record I/O

BASE_COLUMNS = ["seed", "method", "n", "m", "d", "error", "wall_time_ms", "converged",
                "acceptance_rate"]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, fh=None):
    """Write records as CSV; returns the text when ``fh`` is None."""
    p = max((len(r.theta_hat) for r in records), default=0)
    extra_keys = sorted({k for r in records for k in r.extra})
    header = BASE_COLUMNS + [f"theta_{i}" for i in range(p)] + extra_keys
    buf = fh or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in records:
        row = [_fmt(getattr(r, c)) for c in BASE_COLUMNS]
        row += [_fmt(r.theta_hat[i]) if i < len(r.theta_hat) else "" for i in range(p)]
        row += [_fmt(r.extra[k]) if k in r.extra else "" for k in extra_keys]
        w.writerow(row)
    if fh is None:
        return buf.getvalue()


def _parse_value(s):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        return float(s)


def records_from_csv(fh):
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.DictReader(fh)
    out = []
    for row in reader:
        theta = []
        i = 0
        while f"theta_{i}" in row:
            if row[f"theta_{i}"] != "":
                theta.append(float(row[f"theta_{i}"]))
            i += 1
        extra = {k: _parse_value(v) for k, v in row.items()
                 if k not in BASE_COLUMNS and not k.startswith("theta_") and v != ""}
        extra = {k: float(v) if isinstance(v, int) else v for k, v in extra.items()}
        out.append(TrialRecord(
            seed=int(row["seed"]), method=row["method"], n=int(row["n"]), m=int(row["m"]),
            d=int(row["d"]), theta_hat=tuple(theta), error=float(row["error"]),
            wall_time_ms=float(row["wall_time_ms"]), converged=row["converged"] == "true",
            acceptance_rate=float(row["acceptance_rate"]), extra=extra))
    return out


def records_to_json(records):
    return json.dumps([asdict(r) for r in records], indent=1)


def table_to_csv(rows, fh=None):
    buf = fh or io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    if fh is None:
        return buf.getvalue()


def summarize(records):
    """Mean error and its standard error per (method, d, m, n)."""
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.d, r.m, r.n), []).append(r.error)
    rows = []
    for (method, d, m, n), errs in sorted(groups.items()):
        e = np.asarray(errs)
        se = float(e.std(ddof=1) / np.sqrt(e.size)) if e.size > 1 else 0.0
        rows.append(dict(method=method, d=d, m=m, n=n, trials=e.size,
                         mean_error=float(e.mean()), se=se))
    return rows
