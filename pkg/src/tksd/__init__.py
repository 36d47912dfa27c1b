"""Truncated kernelised Stein discrepancy estimation with score-based baselines."""
from .baselines import (
    approx_weights, bdksd_grad, bdksd_vstat, exact_l2ball_weights, fit_bdksd,
    fit_truncsm, ksd_vstat, truncsm_grad, truncsm_objective,
)
from .estimators import (
    TksdWorkspace, boundary_residual, fit_tksd, reconstruct_g, tksd_grad,
    tksd_ustat, tksd_vstat, u_l_term, v_l,
)
from .geometry import (
    BoundarySample, InfeasibleDomainError, LpBall, Polygon2D, approx_distance,
    contains, epsilon_lower_bound, exact_distance_l2ball, gaussian_sampler,
    load_boundary_csv, load_polygon_csv, sample_boundary_lp, sample_boundary_polygon,
    save_boundary_csv, truncated_rejection_sample,
)
from .kernels import (
    DegenerateDataError, KernelBundle, KernelConfig, NotPositiveDefiniteError,
    gram, grad_gram_l, kernel_bundle, median_heuristic, regularized_spd_solve,
)
from .models import (
    GaussianMeanModel, GaussianMixtureMeansModel, ScoreModel,
    TruncatedRegressionModel, gaussian_loglik, ols_fit,
)
from .optim import FitResult, OptConfig

__version__ = "0.1.0"
