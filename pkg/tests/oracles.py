"""Independent reference implementations shared by the tests."""

import numpy as np
from scipy.optimize import minimize


def optimizer_gains(lams, power, sigma_sq):
    """Minimize sum_i lam_i sigma^2 / (g_i^2 lam_i + sigma^2) s.t. mean g_i^2 lam_i = P."""
    lams = np.asarray(lams)
    k = lams.size
    # optimize per-chunk powers p_i = g_i^2 lam_i, on a log scale
    x0 = np.log(np.full(k, power))

    def cost(x):
        p = np.exp(x)
        return np.sum(lams * sigma_sq / (p + sigma_sq)) / np.sum(lams * sigma_sq / (power + sigma_sq))

    cons = {"type": "eq", "fun": lambda x: np.mean(np.exp(x)) / power - 1.0}
    res = minimize(cost, x0, constraints=[cons], method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 2000})
    return np.sqrt(np.exp(res.x) / lams)
