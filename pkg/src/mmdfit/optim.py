"""Optimization drivers: backtracking gradient descent and averaged AdaGrad."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MAXIT_MESSAGE = "The maximum number of iterations has been reached"

_ARMIJO_C1 = 1e-4
_MAX_HALVINGS = 60


@dataclass
class OptimizerConfig:
    """Knobs shared by every fitting routine.

    method: "auto" picks the best available strategy for the model/kernel
    combination; "exact", "GD" and "SGD" force a specific one.
    fixed_step: bypasses the line search with a constant step size (useful for
    testing pure gradient descent behavior).
    """

    method: str = "auto"
    maxit: int = 50_000
    mc_samples: int = 64
    step0: float = 0.1
    adagrad_eps: float = 1e-8
    tol: float = 1e-6
    tol_window: int = 50
    burnin: int | None = None
    seed: int | None = 0
    backtracking: bool = True
    fixed_step: float | None = None

    def __post_init__(self):
        if self.method not in ("auto", "exact", "GD", "SGD"):
            raise ConfigurationError(
                f"method must be one of auto/exact/GD/SGD, got {self.method!r}"
            )
        if self.maxit < 1:
            raise ConfigurationError("maxit must be at least 1")
        if self.mc_samples < 2:
            raise ConfigurationError("mc_samples must be at least 2")
        if self.step0 <= 0:
            raise ConfigurationError("step0 must be positive")
        if self.tol <= 0:
            raise ConfigurationError("tol must be positive")
        if self.burnin is not None and not 0 <= self.burnin < self.maxit:
            raise ConfigurationError("burnin must lie in [0, maxit)")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def effective_burnin(self) -> int:
        return self.maxit // 2 if self.burnin is None else self.burnin


@dataclass
class OptimResult:
    theta: np.ndarray
    objective: float | None
    n_iter: int
    converged: bool
    warnings: list = field(default_factory=list)
    trace: np.ndarray | None = None
    theta_trace: np.ndarray | None = None


def _window_stalled(trace, window, tol):
    # sustained: every consecutive change in the window must be small, else a
    # noisy trace would eventually stop on a single chance coincidence
    if len(trace) <= window:
        return False
    recent = trace[-(window + 1):]
    return all(
        abs(b - a) <= tol * max(abs(a), 1e-12)
        for a, b in zip(recent, recent[1:])
    )


def gradient_descent(fun_grad, theta0, cfg: OptimizerConfig, step_ref: float = 1.0) -> OptimResult:
    """Descent with Armijo backtracking and doubling warm-started trial steps.

    fun_grad(theta) -> (objective, gradient). The first trial step is scaled by
    step_ref (a natural length scale of the problem) over the initial gradient
    norm, which makes the path equivariant under rescaling of the data.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    f, g = fun_grad(theta)
    trace = [float(f)]
    theta_trace = [theta.copy()]
    warnings: list = []
    trial = None
    converged = False
    it = 0

    for it in range(1, cfg.maxit + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0 or not np.isfinite(gnorm):
            converged = np.isfinite(gnorm)
            if not converged:
                warnings.append("non-finite gradient encountered; stopping early")
            break

        if cfg.fixed_step is not None or not cfg.backtracking:
            step = cfg.fixed_step if cfg.fixed_step is not None else cfg.step0
            theta = theta - step * g
            f, g = fun_grad(theta)
        else:
            if trial is None:
                trial = cfg.step0 * step_ref / gnorm
            step = trial
            accepted = False
            for _ in range(_MAX_HALVINGS):
                cand = theta - step * g
                f_new, g_new = fun_grad(cand)
                if np.isfinite(f_new) and f_new <= f - _ARMIJO_C1 * step * gnorm * gnorm:
                    theta, f, g = cand, f_new, g_new
                    trial = 2.0 * step
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                # no descent step of any size helps: numerical floor reached
                converged = True
                break

        trace.append(float(f))
        theta_trace.append(theta.copy())
        if _window_stalled(trace, cfg.tol_window, cfg.tol):
            converged = True
            break

    if not converged and it >= cfg.maxit:
        warnings.append(MAXIT_MESSAGE)
    return OptimResult(theta, float(f), it, converged, warnings,
                       np.asarray(trace), np.asarray(theta_trace))


def adagrad(grad_fn, theta0, cfg: OptimizerConfig, rng: np.random.Generator,
            allow_early_stop: bool = False, warn_on_maxit: bool = False) -> OptimResult:
    """Averaged AdaGrad: theta -= step0 * g / sqrt(acc + eps), acc += g^2.

    grad_fn(theta, rng) returns (gradient, objective_estimate_or_None). The
    returned estimate is the average of the post-burn-in iterates, taken in
    optimizer coordinates. Objective estimates, when provided, are smoothed
    over a rolling window of tol_window iterations and the smoothed values form
    the trace; with allow_early_stop the same stalling rule as gradient descent
    applies to that smoothed trace.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    acc = np.zeros_like(theta)
    burnin = cfg.effective_burnin()
    avg = np.zeros_like(theta)
    n_avg = 0
    trace: list = []
    theta_trace = [theta.copy()]
    window = deque(maxlen=cfg.tol_window)
    window_sum = 0.0
    warnings: list = []
    converged = False
    it = 0

    for it in range(1, cfg.maxit + 1):
        g, f_est = grad_fn(theta, rng)
        if not np.all(np.isfinite(g)):
            warnings.append("non-finite stochastic gradient encountered; stopping early")
            break
        acc += g * g
        theta = theta - cfg.step0 * g / np.sqrt(acc + cfg.adagrad_eps)
        theta_trace.append(theta.copy())
        if it > burnin:
            avg += theta
            n_avg += 1
        if f_est is not None:
            if len(window) == window.maxlen:
                window_sum -= window[0]
            window.append(float(f_est))
            window_sum += float(f_est)
            trace.append(window_sum / len(window))
            if allow_early_stop and _window_stalled(trace, cfg.tol_window, cfg.tol):
                converged = True
                break

    estimate = avg / n_avg if n_avg > 0 else theta
    if not converged and warn_on_maxit and it >= cfg.maxit:
        warnings.append(MAXIT_MESSAGE)
    return OptimResult(estimate, None, it, converged, warnings,
                       np.asarray(trace) if trace else None,
                       np.asarray(theta_trace))
