"""
Regression when small responses are discarded
=============================================

Responses below a threshold never reach the analyst. Ordinary least
squares on the survivors is biased; TKSD treats the threshold as a
one-point boundary in response space.
"""

import numpy as np

from tksd import (KernelConfig, TruncatedRegressionModel, fit_tksd, median_heuristic,
                  ols_fit)

rng = np.random.default_rng(2)
beta = np.array([3.0, 4.0])
c = rng.uniform(size=2000)
y = beta[0] + beta[1] * c + rng.standard_normal(2000)
keep = y >= 5.0
print(f"observed {keep.sum()} of {keep.size}")

model = TruncatedRegressionModel(c[keep])
Y = y[keep][:, None]
res = fit_tksd(model, Y, np.array([[5.0]]), KernelConfig(median_heuristic(Y)))

###############################################################################
# Errors on the coefficients and on the points that were thrown away.

for name, b in (("ols", np.array(ols_fit(c[keep], y[keep]))), ("tksd", res.theta_hat)):
    mse = np.mean((b[0] + b[1] * c[~keep] - y[~keep]) ** 2)
    print(f"{name:5s} beta {b.round(2)}  error {np.linalg.norm(b - beta):.2f}"
          f"  mse on discarded {mse:.2f}")
