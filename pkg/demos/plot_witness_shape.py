"""
The witness function vanishes at the boundary points
====================================================

The optimal discriminating function is pinned to zero at every sampled
boundary point. With more points it settles towards a fixed shape.
"""

import numpy as np

from tksd import (GaussianMeanModel, KernelConfig, LpBall, gaussian_sampler, median_heuristic,
                  reconstruct_g, sample_boundary_lp, truncated_rejection_sample)

rng = np.random.default_rng(1)
X, _ = truncated_rejection_sample(gaussian_sampler([0.5, 0.5]), LpBall.centered(2, 1.0, 2),
                                  300, rng)
model = GaussianMeanModel.isotropic(2)
theta = np.zeros(2)  # a deliberately wrong mean
cfg = KernelConfig(median_heuristic(X), jitter=0.0)

g = np.linspace(-0.9, 0.9, 13)
grid = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
grid = grid[np.linalg.norm(grid, axis=1) < 1]

###############################################################################
# Largest value on the boundary sample vs inside the disc, and the change
# against a dense reference.

ref = reconstruct_g(model, X, sample_boundary_lp(2, 1.0, 2, 300, rng), cfg, theta, grid)
for m in (5, 20, 80, 150):
    B = sample_boundary_lp(2, 1.0, 2, m, rng)
    inside = reconstruct_g(model, X, B, cfg, theta, grid)
    on_b = reconstruct_g(model, X, B, cfg, theta, B.points)
    print(f"m={m:3d}  max|g| on boundary {np.abs(on_b).max():.1e}"
          f"  inside {np.abs(inside).max():.3f}  diff to m=300 {np.abs(inside - ref).max():.3f}")

free = reconstruct_g(model, X, B, cfg, theta, B.points, constrained=False)
print(f"without the constraint, max|g| on the same points is {np.abs(free).max():.3f}")
