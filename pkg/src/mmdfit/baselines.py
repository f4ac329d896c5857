"""Classical reference estimators used in the comparison experiments."""
from __future__ import annotations

import numpy as np

from .errors import InputError


def _with_intercept(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(len(x)), x])


def ols(x, y, intercept: bool = True):
    """Least-squares coefficients and residual noise standard deviation.

    Returns (beta, sigma) with sigma the degrees-of-freedom corrected estimate.
    """
    design = _with_intercept(x) if intercept else np.asarray(x, dtype=float)
    y = np.ravel(np.asarray(y, dtype=float))
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    dof = len(y) - design.shape[1]
    sigma = float(np.sqrt(resid @ resid / dof)) if dof > 0 else float("nan")
    return beta, sigma


def poisson_glm(x, y, intercept: bool = True, maxit: int = 50, tol: float = 1e-10):
    """Poisson regression with log link, fitted by Newton scoring (IRLS).

    The intercept starts at log(mean(y)) and the other coefficients at zero.
    """
    design = _with_intercept(x) if intercept else np.asarray(x, dtype=float)
    y = np.ravel(np.asarray(y, dtype=float))
    if np.any(y < 0):
        raise InputError("Poisson regression needs nonnegative responses")

    p = design.shape[1]
    beta = np.zeros(p)
    if intercept:
        beta[0] = np.log(max(np.mean(y), 1e-12))

    for _ in range(maxit):
        eta = design @ beta
        mu = np.exp(np.clip(eta, -700, 700))
        w = mu
        z = eta + (y - mu) / np.maximum(mu, 1e-12)
        wx = design * w[:, None]
        beta_new = np.linalg.solve(design.T @ wx, wx.T @ z)
        if np.max(np.abs(beta_new - beta)) < tol * (1.0 + np.max(np.abs(beta))):
            beta = beta_new
            break
        beta = beta_new
    return beta
