"""Minimum kernel-discrepancy estimation for regression models.

Two estimators are provided, selected by the covariate bandwidth:

* bdwth_x == 0 (default): the per-observation objective. Each observation
  carries its own response law P_i (mean given by the link at x_i' beta);
  the criterion averages the squared kernel discrepancies between P_i and the
  point mass at y_i. A `squared=False` switch averages the unsquared
  discrepancies instead.
* bdwth_x > 0: the pair objective. A covariate kernel couples observations:

      D^2 = (1/n^2) sum_ij kx(x_i, x_j) [ E k(Y_i, Y'_j) - 2 E k(Y_i, y_j)
                                           + k(y_i, y_j) ]

  and the criterion is D = sqrt(max(D^2, 0)), fitted by averaged AdaGrad over
  uniformly sampled ordered pairs.

Families use canonical mean links: identity (linearGaussian), exp
(exponential, gamma, poisson), logistic (beta mean, logistic). gamma and beta
use a mean/precision parameterization (gamma: shape=phi, rate=phi/mu;
beta: a=mu*phi, b=(1-mu)*phi).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from . import kernels
from .errors import BudgetError, CapabilityError, ConfigurationError, InputError
from .models import gaussian_profile_normal_mean, laplace_profile_normal_mean
from .optim import OptimizerConfig, adagrad, gradient_descent

_SQRT2 = np.sqrt(2.0)
_EPS2 = 1e-20            # square of the 1e-10 smoothing constant for sqrt gradients
_EMA_RHO = 0.9
_HAT_DRAWS = 8          # Monte-Carlo draws per side for pair expectations
_HAT_VALUE_BATCHES = 200
_MAX_PAIR_N = 5000
_EXP_CAP = 700.0


def _sigmoid(eta):
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -_EXP_CAP, _EXP_CAP)))


class _CapFlag:
    """Records whether the exp link was ever clipped during a fit."""

    def __init__(self):
        self.hit = False

    def exp(self, eta):
        eta = np.asarray(eta, dtype=float)
        if np.any(np.abs(eta) > _EXP_CAP):
            self.hit = True
        return np.exp(np.clip(eta, -_EXP_CAP, _EXP_CAP))


# ---------------------------------------------------------------------------
# response families
# ---------------------------------------------------------------------------

class RegFamily:
    family_id = ""
    default_kernel_y = kernels.LAPLACE
    aux_label: str | None = None   # None: model has no second parameter
    aux_free = False

    def __init__(self):
        self.cap = _CapFlag()

    def aux_init(self, y) -> float:
        return 1.0

    def check_response(self, y) -> None:
        pass

    def mean(self, eta):
        return np.asarray(eta, dtype=float)

    def has_closed_forms(self, kfamily: str) -> bool:
        return False

    # closed-form primitives (elementwise, broadcasting allowed) -------------
    def pair_mean(self, eta_a, eta_b, aux, kspec, want_grad=False):
        """E k(Y_a, Y_b) for independent responses at two linear predictors.

        Returns E or (E, dE/deta_a, dE/deta_b, dE/daux)."""
        raise CapabilityError(f"{self.family_id!r} has no closed-form kernel expectations")

    def point_mean(self, eta, y, aux, kspec, want_grad=False):
        """E k(Y, y) for the response law at eta against fixed values y.

        Returns F or (F, dF/deta, dF/daux)."""
        raise CapabilityError(f"{self.family_id!r} has no closed-form kernel expectations")

    # stochastic primitives ----------------------------------------------------
    def sample(self, eta, aux, rng):
        raise NotImplementedError

    def score_eta(self, z, eta, aux):
        raise NotImplementedError

    def score_aux(self, z, eta, aux):
        raise CapabilityError(f"{self.family_id!r} has no free second parameter")


class LinearGaussianReg(RegFamily):
    """y = x' beta + Gaussian noise; aux is the noise standard deviation."""

    default_kernel_y = kernels.GAUSSIAN
    aux_label = "noise std"

    def __init__(self, family_id, aux_free):
        super().__init__()
        self.family_id = family_id
        self.aux_free = aux_free

    def aux_init(self, y):
        mad = float(np.median(np.abs(y - np.median(y))))
        s = 1.4826 * mad
        if s <= 0:
            s = float(np.std(y))
        return s if s > 0 else 1.0

    def has_closed_forms(self, kfamily):
        return kfamily in (kernels.GAUSSIAN, kernels.LAPLACE)

    def pair_mean(self, eta_a, eta_b, aux, kspec, want_grad=False):
        d = np.asarray(eta_a, dtype=float) - np.asarray(eta_b, dtype=float)
        if kspec.family == kernels.GAUSSIAN:
            out = gaussian_profile_normal_mean(d, 2.0 * aux * aux, kspec.bandwidth, want_grad)
            if not want_grad:
                return out
            e, dd, dvar = out
            return e, dd, -dd, dvar * 4.0 * aux
        out = laplace_profile_normal_mean(d, _SQRT2 * aux, kspec.bandwidth, want_grad)
        if not want_grad:
            return out
        e, dd, dsig = out
        return e, dd, -dd, dsig * _SQRT2

    def point_mean(self, eta, y, aux, kspec, want_grad=False):
        d = np.asarray(eta, dtype=float) - np.asarray(y, dtype=float)
        if kspec.family == kernels.GAUSSIAN:
            out = gaussian_profile_normal_mean(d, aux * aux, kspec.bandwidth, want_grad)
            if not want_grad:
                return out
            e, dd, dvar = out
            return e, dd, dvar * 2.0 * aux
        out = laplace_profile_normal_mean(d, aux, kspec.bandwidth, want_grad)
        if not want_grad:
            return out
        return out

    def sample(self, eta, aux, rng):
        eta = np.asarray(eta, dtype=float)
        return eta + aux * rng.standard_normal(eta.shape)

    def score_eta(self, z, eta, aux):
        return (z - eta) / aux ** 2

    def score_aux(self, z, eta, aux):
        return ((z - eta) ** 2 - aux ** 2) / aux ** 3


class LogisticReg(RegFamily):
    """Bernoulli response with success probability sigmoid(eta)."""

    family_id = "logistic"

    def check_response(self, y):
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise InputError("logistic regression needs responses in {0, 1}")

    def mean(self, eta):
        return _sigmoid(eta)

    def has_closed_forms(self, kfamily):
        return True  # sums over {0, 1} x {0, 1}

    def _k01(self, kspec):
        k0 = kernels.profile_at_zero(kspec.family)
        k1 = float(kernels.profile(kspec.family, np.asarray(1.0 / kspec.bandwidth)))
        return k0, k1

    def pair_mean(self, eta_a, eta_b, aux, kspec, want_grad=False):
        k0, k1 = self._k01(kspec)
        pa, pb = _sigmoid(eta_a), _sigmoid(eta_b)
        qa, qb = 1.0 - pa, 1.0 - pb
        e = (pa * pb + qa * qb) * k0 + (pa * qb + qa * pb) * k1
        if not want_grad:
            return e
        de_da = (k0 - k1) * (2.0 * pb - 1.0) * pa * qa
        de_db = (k0 - k1) * (2.0 * pa - 1.0) * pb * qb
        return e, de_da, de_db, np.zeros_like(e)

    def point_mean(self, eta, y, aux, kspec, want_grad=False):
        k0, k1 = self._k01(kspec)
        p = _sigmoid(eta)
        y = np.asarray(y, dtype=float)
        k_one = np.where(y == 1.0, k0, k1)   # k(1, y)
        k_zero = np.where(y == 1.0, k1, k0)  # k(0, y)
        f = p * k_one + (1.0 - p) * k_zero
        if not want_grad:
            return f
        df_deta = (k_one - k_zero) * p * (1.0 - p)
        return f, df_deta, np.zeros_like(f)

    def sample(self, eta, aux, rng):
        p = _sigmoid(eta)
        return (rng.random(np.shape(p)) < p).astype(float)

    def score_eta(self, z, eta, aux):
        return z - _sigmoid(eta)


class ExponentialReg(RegFamily):
    """Exponential response with mean exp(eta)."""

    family_id = "exponential"

    def check_response(self, y):
        if np.any(y <= 0):
            raise InputError("exponential regression needs strictly positive responses")

    def mean(self, eta):
        return self.cap.exp(eta)

    def sample(self, eta, aux, rng):
        return rng.exponential(self.mean(eta))

    def score_eta(self, z, eta, aux):
        mu = self.mean(eta)
        return (z - mu) / mu


class GammaReg(RegFamily):
    """Gamma response, mean exp(eta), precision aux (shape=aux, rate=aux/mean)."""

    aux_label = "precision"

    def __init__(self, family_id, aux_free):
        super().__init__()
        self.family_id = family_id
        self.aux_free = aux_free

    def check_response(self, y):
        if np.any(y <= 0):
            raise InputError("gamma regression needs strictly positive responses")

    def mean(self, eta):
        return self.cap.exp(eta)

    def sample(self, eta, aux, rng):
        mu = self.mean(eta)
        return rng.gamma(aux, mu / aux)

    def score_eta(self, z, eta, aux):
        mu = self.mean(eta)
        return aux * (z - mu) / mu

    def score_aux(self, z, eta, aux):
        mu = self.mean(eta)
        return np.log(aux / mu) + 1.0 - digamma(aux) + np.log(z) - z / mu


class BetaReg(RegFamily):
    """Beta response on (0,1), mean sigmoid(eta), precision aux (a=mu*aux, b=(1-mu)*aux)."""

    aux_label = "precision"

    def __init__(self, family_id, aux_free):
        super().__init__()
        self.family_id = family_id
        self.aux_free = aux_free

    def check_response(self, y):
        if np.any((y <= 0) | (y >= 1)):
            raise InputError("beta regression needs responses strictly inside (0, 1)")

    def mean(self, eta):
        return _sigmoid(eta)

    def sample(self, eta, aux, rng):
        mu = self.mean(eta)
        z = rng.beta(mu * aux, (1.0 - mu) * aux)
        return np.clip(z, 1e-12, 1.0 - 1e-12)

    def score_eta(self, z, eta, aux):
        mu = self.mean(eta)
        dmu = aux * (-digamma(mu * aux) + digamma((1.0 - mu) * aux)
                     + np.log(z) - np.log1p(-z))
        return dmu * mu * (1.0 - mu)

    def score_aux(self, z, eta, aux):
        mu = self.mean(eta)
        return (digamma(aux) - mu * digamma(mu * aux)
                - (1.0 - mu) * digamma((1.0 - mu) * aux)
                + mu * np.log(z) + (1.0 - mu) * np.log1p(-z))


class PoissonReg(RegFamily):
    """Poisson response with mean exp(eta)."""

    family_id = "poisson"
    _LAM_CAP = 1e15

    def check_response(self, y):
        if np.any(y < 0) or np.any(np.abs(y - np.round(y)) > 1e-8):
            raise InputError("poisson regression needs nonnegative integer responses")

    def mean(self, eta):
        return self.cap.exp(eta)

    def sample(self, eta, aux, rng):
        lam = np.minimum(self.mean(eta), self._LAM_CAP)
        return rng.poisson(lam).astype(float)

    def score_eta(self, z, eta, aux):
        return z - self.mean(eta)


def _build_reg_registry():
    fams = {
        "linearGaussian": lambda: LinearGaussianReg("linearGaussian", True),
        "linearGaussian.loc": lambda: LinearGaussianReg("linearGaussian.loc", False),
        "exponential": ExponentialReg,
        "gamma": lambda: GammaReg("gamma", True),
        "gamma.loc": lambda: GammaReg("gamma.loc", False),
        "beta": lambda: BetaReg("beta", True),
        "beta.loc": lambda: BetaReg("beta.loc", False),
        "logistic": LogisticReg,
        "poisson": PoissonReg,
    }
    return fams


REG_REGISTRY = _build_reg_registry()
REG_MODEL_IDS = tuple(REG_REGISTRY)


def get_reg_family(model_id: str) -> RegFamily:
    try:
        return REG_REGISTRY[model_id]()
    except KeyError:
        raise ConfigurationError(
            f"unknown regression model {model_id!r}; valid ids: {', '.join(REG_MODEL_IDS)}"
        ) from None


# ---------------------------------------------------------------------------
# result container
# ---------------------------------------------------------------------------

@dataclass
class RegFitResult:
    model_id: str
    estimator_kind: str               # "theta_tilde" (per-observation) or "theta_hat" (pair)
    method: str                       # "GD" or "SGD"
    coefficients: np.ndarray
    feature_names: list
    aux: float | None
    aux_label: str | None
    intercept: bool
    kernel_x: kernels.KernelSpec | None
    kernel_y: kernels.KernelSpec
    value: float                      # final objective value
    squared: bool
    n_iter: int
    converged: bool
    warnings: list = field(default_factory=list)
    trace: np.ndarray | None = None
    theta_trace: np.ndarray | None = None  # iterates in optimizer coordinates
    seed: int | None = None
    error: str | None = None

    def coef_dict(self) -> dict:
        return dict(zip(self.feature_names, (float(c) for c in self.coefficients)))


# ---------------------------------------------------------------------------
# per-observation (tilde) objective
# ---------------------------------------------------------------------------

def tilde_objective(fam: RegFamily, design: np.ndarray, y: np.ndarray,
                    beta: np.ndarray, aux: float | None,
                    kspec_y: kernels.KernelSpec, squared: bool = True) -> float:
    """Closed-form per-observation objective at given coefficients."""
    eta = design @ beta
    k0 = kernels.profile_at_zero(kspec_y.family)
    e = fam.pair_mean(eta, eta, aux, kspec_y)
    f = fam.point_mean(eta, y, aux, kspec_y)
    d2 = np.maximum(e - 2.0 * f + k0, 0.0)
    return float(np.mean(d2)) if squared else float(np.mean(np.sqrt(d2)))


def tilde_objective_mc(fam: RegFamily, design: np.ndarray, y: np.ndarray,
                       beta: np.ndarray, aux: float | None,
                       kspec_y: kernels.KernelSpec, rng: np.random.Generator,
                       squared: bool = True, m: int = 1024) -> float:
    """Monte-Carlo per-observation objective for sampling-only families.

    Unbiased for the squared variant; the unsquared variant takes the root of
    the per-observation averages (a consistent plug-in).
    """
    eta = design @ beta
    k0 = kernels.profile_at_zero(kspec_y.family)
    gamma = kspec_y.bandwidth
    eta_m = np.repeat(eta[:, None], m, axis=1)
    a = fam.sample(eta_m, aux, rng)
    b = fam.sample(eta_m, aux, rng)
    kab = kernels.profile(kspec_y.family, np.abs(a - b) / gamma)
    fa = kernels.profile(kspec_y.family, np.abs(a - y[:, None]) / gamma)
    fb = kernels.profile(kspec_y.family, np.abs(b - y[:, None]) / gamma)
    d2 = np.maximum((kab - fa - fb).mean(axis=1) + k0, 0.0)
    return float(np.mean(d2)) if squared else float(np.mean(np.sqrt(d2)))


def _tilde_gd_fun(fam, design, y, kspec_y, aux_free, aux_fixed, squared):
    n, p = design.shape
    k0 = kernels.profile_at_zero(kspec_y.family)

    def fun_grad(theta):
        beta = theta[:p]
        aux = float(np.exp(theta[p])) if aux_free else aux_fixed
        eta = design @ beta
        e, de_da, de_db, de_daux = fam.pair_mean(eta, eta, aux, kspec_y, True)
        f, df_deta, df_daux = fam.point_mean(eta, y, aux, kspec_y, True)
        d2 = np.maximum(e - 2.0 * f + k0, 0.0)
        dd2_deta = de_da + de_db - 2.0 * df_deta
        if squared:
            val = float(np.mean(d2))
            w = dd2_deta / n
            c = None
        else:
            val = float(np.mean(np.sqrt(d2)))
            c = 0.5 / np.sqrt(d2 + _EPS2)
            w = dd2_deta * c / n
        g = design.T @ w
        if aux_free:
            dd2_daux = de_daux - 2.0 * df_daux
            if not squared:
                dd2_daux = dd2_daux * c
            g = np.append(g, np.mean(dd2_daux) * aux)
        return val, g

    return fun_grad


def _tilde_sgd_fun(fam, design, y, kspec_y, aux_free, aux_fixed, squared):
    n, p = design.shape
    k0 = kernels.profile_at_zero(kspec_y.family)
    gamma = kspec_y.bandwidth
    ema = {"d2": None}

    def kprof(d):
        return kernels.profile(kspec_y.family, np.abs(d) / gamma)

    def grad_fn(theta, rng):
        beta = theta[:p]
        aux = float(np.exp(theta[p])) if aux_free else aux_fixed
        eta = design @ beta
        a = fam.sample(eta, aux, rng)
        b = fam.sample(eta, aux, rng)
        kab = kprof(a - b)
        fa = kprof(a - y)
        fb = kprof(b - y)
        sa = fam.score_eta(a, eta, aux)
        sb = fam.score_eta(b, eta, aux)
        t = (kab - fa) * sa + (kab - fb) * sb          # unbiased for dD2_i/deta_i
        est = kab - fa - fb + k0                        # unbiased for D2_i
        if squared:
            w = t / n
            obj = float(np.mean(est))
            c = None
        else:
            cur = np.maximum(est, 0.0)
            if ema["d2"] is None:
                ema["d2"] = cur
            # the factor uses the pre-update average: independence from the
            # current draw keeps the zero set of the expected update intact
            c = 0.5 / np.sqrt(ema["d2"] + _EPS2)
            ema["d2"] = _EMA_RHO * ema["d2"] + (1 - _EMA_RHO) * cur
            w = t * c / n
            obj = float(np.mean(np.sqrt(cur)))
        g = design.T @ w
        if aux_free:
            za = fam.score_aux(a, eta, aux)
            zb = fam.score_aux(b, eta, aux)
            taux = (kab - fa) * za + (kab - fb) * zb
            if not squared:
                taux = taux * c
            g = np.append(g, np.mean(taux) * aux)
        return g, obj

    return grad_fn


# ---------------------------------------------------------------------------
# pair (hat) objective
# ---------------------------------------------------------------------------

def hat_objective(fam: RegFamily, design: np.ndarray, y: np.ndarray,
                  beta: np.ndarray, aux: float | None,
                  kspec_x: kernels.KernelSpec, kspec_y: kernels.KernelSpec,
                  block: int = 256) -> float:
    """Exact pair objective D (closed-form families), computed blockwise."""
    eta = design @ beta
    n = len(y)
    total = 0.0
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        w = kernels.gram(kspec_x, design[lo:hi], design)
        kyy = kernels.gram(kspec_y, y[lo:hi], y)
        e = fam.pair_mean(eta[lo:hi, None], eta[None, :], aux, kspec_y)
        f = fam.point_mean(eta[lo:hi, None], y[None, :], aux, kspec_y)
        total += float(np.sum(w * (e - 2.0 * f + kyy)))
    return float(np.sqrt(max(total / (n * n), 0.0)))


def hat_objective_mc(fam: RegFamily, design: np.ndarray, y: np.ndarray,
                     beta: np.ndarray, aux: float | None,
                     kspec_x: kernels.KernelSpec, kspec_y: kernels.KernelSpec,
                     rng: np.random.Generator, n_batches: int = _HAT_VALUE_BATCHES,
                     batch: int = 64, m: int = _HAT_DRAWS) -> float:
    """Monte-Carlo estimate of the pair objective for sampling-only families."""
    eta = design @ beta
    n = len(y)
    gamma = kspec_y.bandwidth
    total = 0.0
    count = 0
    for _ in range(n_batches):
        ii = rng.integers(0, n, batch)
        jj = rng.integers(0, n, batch)
        w = kernels.profile(
            kspec_x.family,
            np.linalg.norm(design[ii] - design[jj], axis=1) / kspec_x.bandwidth,
        )
        kyy = kernels.profile(kspec_y.family, np.abs(y[ii] - y[jj]) / gamma)
        eta_i = np.repeat(eta[ii][:, None], m, axis=1)
        eta_j = np.repeat(eta[jj][:, None], m, axis=1)
        yi = fam.sample(eta_i, aux, rng)
        yj = fam.sample(eta_j, aux, rng)
        kmat = kernels.profile(kspec_y.family,
                               np.abs(yi[:, :, None] - yj[:, None, :]) / gamma)
        e = kmat.mean(axis=(1, 2))
        f = kernels.profile(kspec_y.family,
                            np.abs(yi - y[jj][:, None]) / gamma).mean(axis=1)
        total += float(np.sum(w * (e - 2.0 * f + kyy)))
        count += batch
    return float(np.sqrt(max(total / count, 0.0)))


def grad_hat_stochastic(fam: RegFamily, design: np.ndarray, y: np.ndarray,
                        beta: np.ndarray, aux: float | None,
                        kspec_x: kernels.KernelSpec, kspec_y: kernels.KernelSpec,
                        batch: int, rng: np.random.Generator,
                        aux_free: bool = False, m: int = _HAT_DRAWS):
    """One stochastic estimate of the gradient of the squared pair objective.

    Averages over `batch` uniformly sampled ordered pairs (i, j); the
    expectation over the pair indices and any response draws equals the exact
    gradient of D^2 in (beta, aux). Returns (g_beta, g_aux_or_None, d2_est)
    where d2_est is the matching unbiased estimate of D^2 itself.
    """
    n, p = design.shape
    eta = design @ beta
    gamma = kspec_y.bandwidth
    ii = rng.integers(0, n, batch)
    jj = rng.integers(0, n, batch)
    w = kernels.profile(
        kspec_x.family,
        np.linalg.norm(design[ii] - design[jj], axis=1) / kspec_x.bandwidth,
    )
    kyy = kernels.profile(kspec_y.family, np.abs(y[ii] - y[jj]) / gamma)

    if fam.has_closed_forms(kspec_y.family):
        e, de_di, de_dj, de_daux = fam.pair_mean(eta[ii], eta[jj], aux, kspec_y, True)
        f, df_di, df_daux = fam.point_mean(eta[ii], y[jj], aux, kspec_y, True)
        gi = w * (de_di - 2.0 * df_di)
        gj = w * de_dj
        gaux = w * (de_daux - 2.0 * df_daux) if aux_free else None
    else:
        eta_i = np.repeat(eta[ii][:, None], m, axis=1)
        eta_j = np.repeat(eta[jj][:, None], m, axis=1)
        yi = fam.sample(eta_i, aux, rng)
        yj = fam.sample(eta_j, aux, rng)
        kmat = kernels.profile(kspec_y.family,
                               np.abs(yi[:, :, None] - yj[:, None, :]) / gamma)
        e = kmat.mean(axis=(1, 2))
        si = fam.score_eta(yi, eta_i, aux)
        sj = fam.score_eta(yj, eta_j, aux)
        de_di = (kmat.mean(axis=2) * si).mean(axis=1)
        de_dj = (kmat.mean(axis=1) * sj).mean(axis=1)
        kiy = kernels.profile(kspec_y.family, np.abs(yi - y[jj][:, None]) / gamma)
        f = kiy.mean(axis=1)
        df_di = (kiy * si).mean(axis=1)
        gi = w * (de_di - 2.0 * df_di)
        gj = w * de_dj
        if aux_free:
            zi = fam.score_aux(yi, eta_i, aux)
            zj = fam.score_aux(yj, eta_j, aux)
            de_daux = (kmat.mean(axis=2) * zi).mean(axis=1) \
                + (kmat.mean(axis=1) * zj).mean(axis=1)
            df_daux = (kiy * zi).mean(axis=1)
            gaux = w * (de_daux - 2.0 * df_daux)
        else:
            gaux = None

    term = w * (e - 2.0 * f + kyy)
    g_beta = (design[ii].T @ gi + design[jj].T @ gj) / batch
    g_aux = float(np.mean(gaux)) if aux_free else None
    return g_beta, g_aux, float(np.mean(term))


def _hat_sgd_fun(fam, design, y, kspec_x, kspec_y, aux_free, aux_fixed, cfg):
    p = design.shape[1]

    def grad_fn(theta, rng):
        beta = theta[:p]
        aux = float(np.exp(theta[p])) if aux_free else aux_fixed
        g_beta, g_aux, batch_d2 = grad_hat_stochastic(
            fam, design, y, beta, aux, kspec_x, kspec_y, cfg.mc_samples, rng,
            aux_free=aux_free,
        )
        # the descent runs on D^2, which shares its minimizer with D and keeps
        # the gradient scale bounded where D is close to zero; the trace still
        # reports D
        g = g_beta
        if aux_free:
            g = np.append(g, g_aux * aux)
        return g, float(np.sqrt(max(batch_d2, 0.0)))

    return grad_fn


# ---------------------------------------------------------------------------
# public entry point
# ---------------------------------------------------------------------------

def fit_regression(x, y, model: str = "linearGaussian", intercept: bool = True,
                   par1=None, par2=None,
                   kernel_x: str | None = None, kernel_y: str | None = None,
                   bdwth_x=0.0, bdwth_y=None,
                   squared: bool = True, rescale_x: float | None = None,
                   feature_names=None, pair_budget: int = _MAX_PAIR_N,
                   config: OptimizerConfig | None = None) -> RegFitResult:
    """Fit a regression model by minimizing a kernel discrepancy.

    par1: optional initial coefficient vector (matching the design with the
    intercept column when intercept=True); par2: the second response parameter
    (initial value when it is estimated, required fixed value for the .loc
    variants). bdwth_x=0 selects the per-observation objective; a positive
    value (or "auto") selects the pair objective with that covariate bandwidth.
    bdwth_y defaults to the median heuristic of the responses divided by
    sqrt(2). The intercept column is skipped, even with intercept=True, when
    the covariates already contain a constant column.
    """
    cfg = config or OptimizerConfig()
    fam = get_reg_family(model)

    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise InputError("the covariate array must be 2-d (rows are observations)")
    y = np.ravel(np.asarray(y, dtype=float))
    if len(y) != len(x):
        raise InputError(f"covariates have {len(x)} rows but there are {len(y)} responses")
    if len(y) < 2:
        raise InputError("regression needs at least 2 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("data contains non-finite values")
    fam.check_response(y)

    if intercept and x.shape[1] > 0 and np.any(np.all(x == x[0, :], axis=0)):
        intercept = False
    if intercept:
        design = np.column_stack([np.ones(len(y)), x])
    else:
        design = x
    n, p = design.shape

    if feature_names is None:
        feature_names = [f"x{i}" for i in range(1, x.shape[1] + 1)]
    feature_names = list(feature_names)
    if len(feature_names) != x.shape[1]:
        raise InputError(
            f"{len(feature_names)} feature names for {x.shape[1]} covariate columns"
        )
    if intercept:
        feature_names = ["(Intercept)"] + feature_names

    # response kernel
    ky_family = kernel_y or fam.default_kernel_y
    if bdwth_y is None or bdwth_y == "median":
        bw_y = kernels.median_heuristic(y) / _SQRT2
    else:
        bw_y = float(bdwth_y)
    kspec_y = kernels.KernelSpec(ky_family, bw_y)

    # estimator kind and covariate kernel
    hat = not (bdwth_x is None or bdwth_x == 0 or bdwth_x == 0.0)
    kspec_x = None
    if hat:
        if n > pair_budget:
            raise BudgetError(
                f"the pair objective needs O(n^2) work and n={n} exceeds {pair_budget}; "
                f"use bdwth_x=0 (per-observation objective) or raise pair_budget"
            )
        kx_family = kernel_x or kernels.LAPLACE
        if bdwth_x == "auto":
            bw_x = kernels.auto_bdwth_x(x, rescale_x)
        else:
            bw_x = float(bdwth_x)
        kspec_x = kernels.KernelSpec(kx_family, bw_x)

    # initial parameters
    if par1 is None:
        beta0 = np.zeros(p)
    else:
        beta0 = np.ravel(np.asarray(par1, dtype=float))
        if len(beta0) != p:
            extra = " (including the intercept)" if intercept else ""
            raise ConfigurationError(
                f"par1 has length {len(beta0)} but the design has {p} columns{extra}"
            )
    aux_fixed = None
    aux0 = None
    if fam.aux_label is None:
        if par2 is not None:
            raise ConfigurationError(f"model {model!r} has no second response parameter")
    elif fam.aux_free:
        aux0 = float(par2) if par2 is not None else float(fam.aux_init(y))
        if aux0 <= 0:
            raise ConfigurationError(f"{fam.aux_label} must be positive")
    else:
        if par2 is None:
            raise ConfigurationError(
                f"model {model!r} keeps the {fam.aux_label} fixed; par2 must be supplied"
            )
        aux_fixed = float(par2)
        if aux_fixed <= 0:
            raise ConfigurationError(f"{fam.aux_label} must be positive")

    aux_free = fam.aux_free
    theta0 = np.append(beta0, np.log(aux0)) if aux_free else beta0.copy()

    # method dispatch
    if cfg.method == "exact":
        raise CapabilityError("exact enumeration does not apply to regression models")
    if hat:
        if cfg.method == "GD":
            raise CapabilityError("the pair objective is fitted by SGD only")
        method = "SGD"
    elif cfg.method == "GD":
        if not fam.has_closed_forms(kspec_y.family):
            raise CapabilityError(
                f"no closed-form gradients for {model!r} with a {kspec_y.family} "
                f"response kernel; use method='SGD'"
            )
        method = "GD"
    elif cfg.method == "SGD":
        method = "SGD"
    else:
        method = "GD" if fam.has_closed_forms(kspec_y.family) else "SGD"

    # run
    rng = cfg.rng()
    if not hat and method == "GD":
        fun = _tilde_gd_fun(fam, design, y, kspec_y, aux_free, aux_fixed, squared)
        res = gradient_descent(fun, theta0, cfg, step_ref=1.0)
        value = float(res.objective)
    else:
        if hat:
            fun = _hat_sgd_fun(fam, design, y, kspec_x, kspec_y, aux_free, aux_fixed, cfg)
        else:
            fun = _tilde_sgd_fun(fam, design, y, kspec_y, aux_free, aux_fixed, squared)
        res = adagrad(fun, theta0, cfg, rng, allow_early_stop=True, warn_on_maxit=True)
        value = None

    beta = res.theta[:p]
    aux = float(np.exp(res.theta[p])) if aux_free else aux_fixed

    if value is None:
        if hat:
            if fam.has_closed_forms(kspec_y.family):
                value = hat_objective(fam, design, y, beta, aux, kspec_x, kspec_y)
            else:
                value = hat_objective_mc(fam, design, y, beta, aux, kspec_x, kspec_y, rng)
        else:
            if fam.has_closed_forms(kspec_y.family):
                value = tilde_objective(fam, design, y, beta, aux, kspec_y, squared)
            else:
                value = tilde_objective_mc(fam, design, y, beta, aux, kspec_y, rng,
                                           squared=squared)

    warn_list = list(res.warnings)
    if fam.cap.hit:
        warn_list.append(
            f"the exp link was clipped at |eta| = {_EXP_CAP:g} during optimization"
        )
    aborted = [w for w in warn_list if "non-finite" in w]

    return RegFitResult(
        model_id=model,
        estimator_kind="theta_hat" if hat else "theta_tilde",
        method=method,
        coefficients=np.asarray(beta, dtype=float),
        feature_names=feature_names,
        aux=aux,
        aux_label=fam.aux_label,
        intercept=intercept,
        kernel_x=kspec_x,
        kernel_y=kspec_y,
        value=float(value),
        squared=squared,
        n_iter=res.n_iter,
        converged=res.converged,
        warnings=warn_list,
        trace=res.trace,
        theta_trace=res.theta_trace,
        seed=cfg.seed,
        error=aborted[0] if aborted else None,
    )
