"""Parametric model zoo: samplers, scores, reparameterizations, closed-form kernel expectations.

Every model exposes its parameters through two slots, ``par1`` and ``par2``
(second slot absent for one-parameter models). Depending on the model variant a
slot is either estimated or fixed; fixed slots must be supplied by the caller.
Optimizer coordinates are unconstrained reals: scales/rates/shapes live on a log
scale, probabilities on a logit scale, integer sizes are never gradient-optimized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, erfcx, gammaln

from . import kernels
from .errors import CapabilityError, ConfigurationError, InputError

_SQRT2 = np.sqrt(2.0)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)

ENUM_WINDOW = 100  # search width above max(data) for integer size parameters


# ---------------------------------------------------------------------------
# closed-form building blocks
# ---------------------------------------------------------------------------

def gaussian_profile_normal_mean(d, var: float, gamma: float, want_grad: bool = False):
    """E[exp(-Z^2 / gamma^2)] for Z ~ N(d, var), elementwise in d.

    Returns E, or (E, dE/dd, dE/dvar) when want_grad.
    """
    d = np.asarray(d, dtype=float)
    s = gamma * gamma + 2.0 * var
    e = (gamma / np.sqrt(s)) * np.exp(-d * d / s)
    if not want_grad:
        return e
    de_dd = e * (-2.0 * d / s)
    de_dvar = e * (2.0 * (d / s) ** 2 - 1.0 / s)
    return e, de_dd, de_dvar


def laplace_profile_normal_mean(d, sigma: float, gamma: float, want_grad: bool = False):
    """E[exp(-|Z| / gamma)] for Z ~ N(d, sigma^2), elementwise in d.

    Uses the scaled complementary error function; both branches below are
    overflow-safe for any sigma/gamma ratio.
    Returns E, or (E, dE/dd, dE/dsigma) when want_grad.
    """
    d = np.asarray(d, dtype=float)
    sgn = np.sign(d)
    ad = np.abs(d)
    a = 1.0 / gamma
    u = ad / sigma
    q = 0.5 * u * u
    t_plus = (a * sigma + u) / _SQRT2
    t_minus = (a * sigma - u) / _SQRT2

    big_a = np.exp(-q) * erfcx(t_plus)
    big_b = np.empty_like(big_a)
    neg = t_minus < 0
    if np.any(~neg):
        tm = np.where(neg, 0.0, t_minus)
        big_b = np.exp(-q) * erfcx(tm)
    if np.any(neg):
        # erfcx(-t) = 2 exp(t^2) - erfcx(t); the combined exponent
        # a^2 s^2/2 - a|d| is negative whenever t_minus < 0.
        expo = 0.5 * (a * sigma) ** 2 - a * ad
        alt = 2.0 * np.exp(expo) - np.exp(-q) * erfcx(np.abs(t_minus))
        big_b = np.where(neg, alt, big_b)

    e = 0.5 * (big_a + big_b)
    if not want_grad:
        return e
    de_dd = 0.5 * a * (big_a - big_b) * sgn
    de_dsigma = a * (a * sigma * e - _SQRT_2_OVER_PI * np.exp(-q))
    return e, de_dd, de_dsigma


@dataclass
class KernelExpectations:
    """Model-side kernel expectations against a data sample.

    e_kk   = E k(X, X') for X, X' iid from the model
    e_kx   = vector of E k(X, x_i) over data points
    d_*    = gradients with respect to the free natural parameters
             (flattened in slot order), present when requested.
    """

    e_kk: float
    e_kx: np.ndarray
    d_e_kk: np.ndarray | None = None
    d_e_kx: np.ndarray | None = None


# ---------------------------------------------------------------------------
# parameter transforms
# ---------------------------------------------------------------------------

class _Identity:
    @staticmethod
    def fwd(v):
        return np.asarray(v, dtype=float)

    @staticmethod
    def inv(v):
        return np.asarray(v, dtype=float)

    @staticmethod
    def dnat(v):
        return np.ones_like(np.asarray(v, dtype=float))


class _Log:
    @staticmethod
    def fwd(v):
        return np.log(v)

    @staticmethod
    def inv(v):
        return np.exp(np.clip(v, -700.0, 700.0))

    @staticmethod
    def dnat(v):
        return np.asarray(v, dtype=float)


class _Logit:
    @staticmethod
    def fwd(v):
        v = np.asarray(v, dtype=float)
        return np.log(v) - np.log1p(-v)

    @staticmethod
    def inv(v):
        v = np.clip(v, -700.0, 700.0)
        return 1.0 / (1.0 + np.exp(-v))

    @staticmethod
    def dnat(v):
        v = np.asarray(v, dtype=float)
        return v * (1.0 - v)


IDENTITY, LOG, LOGIT = _Identity(), _Log(), _Logit()


@dataclass(frozen=True)
class Slot:
    name: str           # "par1" or "par2"
    label: str          # human description used by summaries
    free: bool
    transform: object = IDENTITY
    vector: bool = False
    integer: bool = False


# ---------------------------------------------------------------------------
# family base
# ---------------------------------------------------------------------------

class ModelFamily:
    model_id: str = ""
    slots: tuple[Slot, ...] = ()
    enumerable = False
    discrete = False
    multivariate = False
    has_score = False
    pathwise = False

    # -- binding -------------------------------------------------------------
    def prepare(self, user: dict, data: np.ndarray) -> dict:
        """Resolve user-supplied values and defaults into a full parameter dict."""
        init = self.default_init(data)
        params: dict = {}
        for s in self.slots:
            v = user.get(s.name)
            if s.free:
                params[s.name] = self._coerce(s, init[s.name] if v is None else v)
            else:
                if v is None:
                    raise ConfigurationError(
                        f"model {self.model_id!r} keeps {s.name} ({s.label}) fixed; "
                        f"its value must be supplied"
                    )
                params[s.name] = self._coerce(s, v)
        self.validate_values(params)
        return params

    def _coerce(self, s: Slot, v):
        if s.vector:
            arr = np.atleast_1d(np.asarray(v, dtype=float))
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{s.name} contains non-finite values")
            return arr
        arr = np.asarray(v, dtype=float)
        if arr.ndim > 0 and arr.size == 1:
            arr = arr.reshape(())
        if arr.ndim != 0:
            raise ConfigurationError(f"{s.name} of {self.model_id!r} must be a scalar")
        if not np.isfinite(arr):
            raise ConfigurationError(f"{s.name} must be finite")
        return float(arr)

    def default_init(self, data: np.ndarray) -> dict:
        raise NotImplementedError

    def validate_values(self, params: dict) -> None:
        pass

    # -- parameter space -------------------------------------------------------
    def free_slots(self) -> tuple[Slot, ...]:
        return tuple(s for s in self.slots if s.free)

    def n_free(self, params: dict) -> int:
        return sum(np.size(params[s.name]) for s in self.free_slots())

    def pack(self, params: dict) -> np.ndarray:
        parts = [np.ravel(s.transform.fwd(params[s.name])) for s in self.free_slots()]
        return np.concatenate(parts) if parts else np.empty(0)

    def unpack(self, theta: np.ndarray, params: dict) -> dict:
        out = dict(params)
        k = 0
        for s in self.free_slots():
            m = np.size(params[s.name])
            piece = s.transform.inv(theta[k:k + m])
            out[s.name] = piece.reshape(np.shape(params[s.name])) if s.vector else float(piece[0])
            k += m
        return out

    def chain_grad(self, params: dict, grad_nat: np.ndarray) -> np.ndarray:
        """Pull a free-natural-parameter gradient back to optimizer coordinates."""
        diag = [np.ravel(s.transform.dnat(params[s.name])) for s in self.free_slots()]
        return grad_nat * np.concatenate(diag)

    # -- sampling / scores ------------------------------------------------------
    def sample(self, params: dict, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def score(self, params: dict, x: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"model {self.model_id!r} has no score function")

    def sample_pathwise(self, params: dict, size: int, rng: np.random.Generator):
        raise CapabilityError(f"model {self.model_id!r} has no pathwise sampler")

    # -- closed forms -------------------------------------------------------------
    def has_closed_forms(self, kfamily: str) -> bool:
        return False

    def kernel_expectations(self, params: dict, kspec: kernels.KernelSpec,
                            data: np.ndarray, want_grad: bool = False) -> KernelExpectations:
        raise CapabilityError(
            f"no closed-form kernel expectations for {self.model_id!r} "
            f"with a {kspec.family} kernel"
        )

    # -- data ------------------------------------------------------------------
    def check_data(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        if self.multivariate:
            if data.ndim == 1:
                data = data[:, None]
            if data.ndim != 2:
                raise InputError("multivariate models need an (n, d) data array")
        else:
            data = np.ravel(data)
        if data.size == 0:
            raise InputError("empty data")
        if not np.all(np.isfinite(data)):
            raise InputError("data contains non-finite values")
        return data


def _median(x):
    return float(np.median(x))


def _robust_scale(x):
    mad = float(np.median(np.abs(x - np.median(x))))
    s = 1.4826 * mad
    if s <= 0:
        s = float(np.std(x))
    return s if s > 0 else 1.0


# ---------------------------------------------------------------------------
# univariate continuous families
# ---------------------------------------------------------------------------

class GaussianFamily(ModelFamily):
    """N(mean, std^2); variants fix one of the two parameters."""

    has_score = True

    def __init__(self, model_id: str, free_mean: bool, free_std: bool):
        self.model_id = model_id
        self.slots = (
            Slot("par1", "mean", free_mean),
            Slot("par2", "standard deviation", free_std, LOG),
        )

    def default_init(self, data):
        return {"par1": _median(data), "par2": _robust_scale(data)}

    def validate_values(self, params):
        if params["par2"] <= 0:
            raise ConfigurationError("standard deviation must be positive")

    def sample(self, params, size, rng):
        return rng.normal(params["par1"], params["par2"], size)

    def score(self, params, x):
        m, sd = params["par1"], params["par2"]
        cols = []
        if self.slots[0].free:
            cols.append((x - m) / sd ** 2)
        if self.slots[1].free:
            cols.append(((x - m) ** 2 - sd ** 2) / sd ** 3)
        return np.column_stack(cols)

    def has_closed_forms(self, kfamily):
        return kfamily in (kernels.GAUSSIAN, kernels.LAPLACE)

    def kernel_expectations(self, params, kspec, data, want_grad=False):
        if not self.has_closed_forms(kspec.family):
            raise CapabilityError(
                f"{self.model_id!r} has closed forms only for Gaussian/Laplace kernels"
            )
        m, sd = params["par1"], params["par2"]
        gamma = kspec.bandwidth
        d = m - data
        if kspec.family == kernels.GAUSSIAN:
            ekk, _, dkk_dvar = gaussian_profile_normal_mean(0.0, 2.0 * sd * sd, gamma, True)
            ekx, dkx_dd, dkx_dvar = gaussian_profile_normal_mean(d, sd * sd, gamma, True)
            dkk_dsd = float(dkk_dvar) * 4.0 * sd          # var = 2 sd^2
            dkx_dsd = dkx_dvar * 2.0 * sd                 # var = sd^2
        else:
            ekk, _, dkk_dsig = laplace_profile_normal_mean(0.0, _SQRT2 * sd, gamma, True)
            ekx, dkx_dd, dkx_dsd = laplace_profile_normal_mean(d, sd, gamma, True)
            dkk_dsd = float(dkk_dsig) * _SQRT2
        if not want_grad:
            return KernelExpectations(float(ekk), np.asarray(ekx))
        gkk, gkx = [], []
        if self.slots[0].free:
            gkk.append(0.0)
            gkx.append(dkx_dd)
        if self.slots[1].free:
            gkk.append(dkk_dsd)
            gkx.append(dkx_dsd)
        return KernelExpectations(
            float(ekk), np.asarray(ekx), np.asarray(gkk), np.column_stack(gkx)
        )


class CauchyFamily(ModelFamily):
    """Cauchy(location, scale) with the scale held fixed."""

    has_score = True

    def __init__(self):
        self.model_id = "Cauchy"
        self.slots = (
            Slot("par1", "location", True),
            Slot("par2", "scale", False, LOG),
        )

    def default_init(self, data):
        return {"par1": _median(data)}

    def validate_values(self, params):
        if params["par2"] <= 0:
            raise ConfigurationError("scale must be positive")

    def sample(self, params, size, rng):
        return params["par1"] + params["par2"] * rng.standard_cauchy(size)

    def score(self, params, x):
        d = x - params["par1"]
        s = params["par2"]
        return (2.0 * d / (s * s + d * d))[:, None]


class ParetoFamily(ModelFamily):
    """Pareto with unit scale: density t/x^(t+1) on [1, inf)."""

    has_score = True

    def __init__(self):
        self.model_id = "Pareto"
        self.slots = (Slot("par1", "exponent", True, LOG),)

    def default_init(self, data):
        med = _median(data)
        if med > 1:
            t = np.log(2.0) / np.log(med)
        else:
            t = 1.0
        return {"par1": float(np.clip(t, 1e-2, 1e3))}

    def sample(self, params, size, rng):
        return 1.0 + rng.pareto(params["par1"], size)

    def score(self, params, x):
        return (1.0 / params["par1"] - np.log(x))[:, None]


class ExponentialFamily(ModelFamily):
    has_score = True

    def __init__(self):
        self.model_id = "exponential"
        self.slots = (Slot("par1", "rate", True, LOG),)

    def default_init(self, data):
        med = _median(data)
        return {"par1": 1.0 / med if med > 0 else 1.0}

    def sample(self, params, size, rng):
        return rng.exponential(1.0 / params["par1"], size)

    def score(self, params, x):
        return (1.0 / params["par1"] - x)[:, None]


class GammaFamily(ModelFamily):
    """Gamma(shape, rate); variants fix one parameter."""

    has_score = True

    def __init__(self, model_id, free_shape, free_rate):
        self.model_id = model_id
        self.slots = (
            Slot("par1", "shape", free_shape, LOG),
            Slot("par2", "rate", free_rate, LOG),
        )

    def default_init(self, data):
        med = max(_median(data), 1e-8)
        s = _robust_scale(data)
        init = {}
        if self.slots[0].free and self.slots[1].free:
            init["par1"] = float(np.clip((med / s) ** 2, 1e-2, 1e4))
            init["par2"] = float(np.clip(med / s ** 2, 1e-4, 1e6))
        elif self.slots[0].free:
            init["par1"] = 1.0  # refined in prepare once par2 is known
        else:
            init["par2"] = 1.0
        return init

    def prepare(self, user, data):
        params = super().prepare(user, data)
        med = max(_median(data), 1e-8)
        # moment-match the free parameter against the user-fixed one
        if self.slots[0].free and not self.slots[1].free and user.get("par1") is None:
            params["par1"] = float(np.clip(med * params["par2"], 1e-2, 1e4))
        if self.slots[1].free and not self.slots[0].free and user.get("par2") is None:
            params["par2"] = float(np.clip(params["par1"] / med, 1e-4, 1e6))
        return params

    def validate_values(self, params):
        if params["par1"] <= 0 or params["par2"] <= 0:
            raise ConfigurationError("gamma shape and rate must be positive")

    def sample(self, params, size, rng):
        return rng.gamma(params["par1"], 1.0 / params["par2"], size)

    def score(self, params, x):
        a, b = params["par1"], params["par2"]
        cols = []
        if self.slots[0].free:
            cols.append(np.log(b) - digamma(a) + np.log(x))
        if self.slots[1].free:
            cols.append(a / b - x)
        return np.column_stack(cols)


class ContinuousUniformFamily(ModelFamily):
    """Uniform on an interval; fitted by pathwise Monte-Carlo gradients.

    Variants: "loc" estimates the midpoint of a fixed-length interval,
    "upper" estimates b in U[a, b] for fixed a, "lower.upper" estimates both
    endpoints. Free interval widths are log-transformed so the endpoints stay
    ordered throughout optimization.
    """

    pathwise = True

    def __init__(self, model_id, variant):
        self.model_id = model_id
        self.variant = variant
        if variant == "loc":
            self.slots = (
                Slot("par1", "midpoint", True),
                Slot("par2", "interval length", False, LOG),
            )
        elif variant == "upper":
            self.slots = (
                Slot("par1", "lower bound", False),
                Slot("par2", "upper bound", True),
            )
        else:
            self.slots = (
                Slot("par1", "lower bound", True),
                Slot("par2", "upper bound", True),
            )

    def default_init(self, data):
        lo, hi, med = float(np.min(data)), float(np.max(data)), _median(data)
        if self.variant == "loc":
            return {"par1": med}
        if self.variant == "upper":
            return {"par2": hi}
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        return {"par1": lo, "par2": hi}

    def validate_values(self, params):
        if self.variant == "loc":
            if params["par2"] <= 0:
                raise ConfigurationError("interval length must be positive")
        elif params["par2"] <= params["par1"]:
            raise ConfigurationError("upper bound must exceed lower bound")

    def prepare(self, user, data):
        params = super().prepare(user, data)
        if self.variant == "upper" and params["par2"] <= params["par1"]:
            params["par2"] = params["par1"] + 1.0
        return params

    def _bounds(self, params):
        if self.variant == "loc":
            half = 0.5 * params["par2"]
            return params["par1"] - half, params["par1"] + half
        return params["par1"], params["par2"]

    def sample(self, params, size, rng):
        a, b = self._bounds(params)
        return a + (b - a) * rng.random(size)

    def sample_pathwise(self, params, size, rng):
        """Draws plus their derivatives with respect to the free natural parameters."""
        a, b = self._bounds(params)
        u = rng.random(size)
        x = a + (b - a) * u
        if self.variant == "loc":
            dx = np.ones((size, 1))
        elif self.variant == "upper":
            dx = u[:, None]
        else:
            dx = np.column_stack([1.0 - u, u])
        return x, dx

    # Free interval widths use a log coordinate: "upper" optimizes log(b - a),
    # "lower.upper" optimizes (a, log(b - a)).
    def pack(self, params):
        if self.variant == "loc":
            return super().pack(params)
        w = np.log(params["par2"] - params["par1"])
        if self.variant == "upper":
            return np.array([w])
        return np.array([params["par1"], w])

    def unpack(self, theta, params):
        if self.variant == "loc":
            return super().unpack(theta, params)
        out = dict(params)
        if self.variant == "upper":
            out["par2"] = float(out["par1"] + np.exp(np.clip(theta[0], -700.0, 700.0)))
        else:
            out["par1"] = float(theta[0])
            out["par2"] = float(theta[0] + np.exp(np.clip(theta[1], -700.0, 700.0)))
        return out

    def chain_grad(self, params, grad_nat):
        if self.variant == "loc":
            return super().chain_grad(params, grad_nat)
        w = params["par2"] - params["par1"]
        if self.variant == "upper":
            return grad_nat * w
        return np.array([grad_nat[0] + grad_nat[1], grad_nat[1] * w])


# ---------------------------------------------------------------------------
# Dirac families (point masses)
# ---------------------------------------------------------------------------

def _dirac_ekx(kspec, a, data, want_grad):
    """k(a, x_i) and its gradient in a for a point mass at a."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    pts = data if data.ndim == 2 else data[:, None]
    diff = a[None, :] - pts                      # (n, d)
    dist = np.linalg.norm(diff, axis=1)
    gamma = kspec.bandwidth
    u = dist / gamma
    k = kernels.profile(kspec.family, u)
    if not want_grad:
        return k, None
    if kspec.family == kernels.GAUSSIAN:
        g = -2.0 * diff / gamma ** 2 * k[:, None]
    elif kspec.family == kernels.LAPLACE:
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(dist[:, None] > 0, diff / (dist[:, None] * gamma), 0.0)
        g = -k[:, None] * unit
    else:  # Cauchy
        g = -2.0 * diff / gamma ** 2 * (k ** 2)[:, None]
    return k, g


class DiracFamily(ModelFamily):
    """Point mass; the fit maximizes the average kernel against the data."""

    def __init__(self, model_id, multivariate):
        self.model_id = model_id
        self.multivariate = multivariate
        self.slots = (Slot("par1", "location", True, IDENTITY, vector=multivariate),)

    def default_init(self, data):
        if self.multivariate:
            return {"par1": np.median(data, axis=0)}
        return {"par1": _median(data)}

    def sample(self, params, size, rng):
        a = params["par1"]
        if self.multivariate:
            return np.tile(np.asarray(a, dtype=float), (size, 1))
        return np.full(size, float(a))

    def has_closed_forms(self, kfamily):
        return True

    def kernel_expectations(self, params, kspec, data, want_grad=False):
        k0 = kernels.profile_at_zero(kspec.family)
        ekx, g = _dirac_ekx(kspec, params["par1"], data, want_grad)
        if not want_grad:
            return KernelExpectations(k0, ekx)
        p = np.size(params["par1"])
        return KernelExpectations(k0, ekx, np.zeros(p), g)


# ---------------------------------------------------------------------------
# discrete families
# ---------------------------------------------------------------------------

def _finite_support_expectations(kspec, support, weights, data, dw=None):
    """Exact kernel expectations for a finite-support law.

    weights: pmf over support; dw: optional pmf derivative for one free scalar.
    """
    ks = kernels.gram(kspec, support[:, None], support[:, None])
    kx = kernels.gram(kspec, support[:, None], data[:, None])
    ekk = float(weights @ ks @ weights)
    ekx = weights @ kx
    if dw is None:
        return KernelExpectations(ekk, ekx)
    dkk = float(2.0 * (dw @ ks @ weights))
    dkx = (dw @ kx)[:, None]
    return KernelExpectations(ekk, ekx, np.array([dkk]), dkx)


class DiscreteUniformFamily(ModelFamily):
    """Uniform on {1, ..., N}; N is found by exact enumeration."""

    discrete = True
    enumerable = True

    def __init__(self):
        self.model_id = "discrete.uniform"
        self.slots = (Slot("par1", "number of support points", True, integer=True),)

    def default_init(self, data):
        return {"par1": max(int(np.ceil(np.max(data))), 1)}

    def validate_values(self, params):
        n_sup = params["par1"]
        if n_sup < 1 or float(n_sup) != float(int(n_sup)):
            raise ConfigurationError("the number of support points must be a positive integer")

    def sample(self, params, size, rng):
        return rng.integers(1, int(params["par1"]) + 1, size).astype(float)

    def has_closed_forms(self, kfamily):
        return True

    def kernel_expectations(self, params, kspec, data, want_grad=False):
        n_sup = int(params["par1"])
        support = np.arange(1, n_sup + 1, dtype=float)
        w = np.full(n_sup, 1.0 / n_sup)
        out = _finite_support_expectations(kspec, support, w, data)
        if want_grad:
            raise CapabilityError("integer size parameters have no gradient")
        return out


class BinomialFamily(ModelFamily):
    """Binomial(N, p); N free means exact enumeration, p free means finite sums."""

    discrete = True

    def __init__(self, model_id, free_n, free_p):
        self.model_id = model_id
        self.enumerable = free_n
        self.has_score = free_p
        self.slots = (
            Slot("par1", "number of trials", free_n, integer=True),
            Slot("par2", "success probability", free_p, LOGIT),
        )

    def default_init(self, data):
        init = {}
        if self.slots[0].free:
            init["par1"] = max(int(np.ceil(np.max(data))), 1)
        if self.slots[1].free:
            init["par2"] = 0.5  # refined in prepare once N is known
        return init

    def prepare(self, user, data):
        params = super().prepare(user, data)
        if self.slots[1].free and user.get("par2") is None:
            n_tr = max(float(params["par1"]), 1.0)
            params["par2"] = float(np.clip(np.mean(data) / n_tr, 0.01, 0.99))
        return params

    def validate_values(self, params):
        n_tr = params["par1"]
        if n_tr < 1 or float(n_tr) != float(int(n_tr)):
            raise ConfigurationError("number of trials must be a positive integer")
        if not 0.0 < params["par2"] < 1.0:
            raise ConfigurationError("success probability must lie in (0, 1)")

    def sample(self, params, size, rng):
        return rng.binomial(int(params["par1"]), params["par2"], size).astype(float)

    def score(self, params, x):
        n_tr, p = float(params["par1"]), params["par2"]
        return (x / p - (n_tr - x) / (1.0 - p))[:, None]

    def has_closed_forms(self, kfamily):
        return not self.slots[0].free  # fixed N: exact sums over {0..N}

    def _pmf(self, n_tr, p):
        s = np.arange(n_tr + 1, dtype=float)
        logw = (
            gammaln(n_tr + 1) - gammaln(s + 1) - gammaln(n_tr - s + 1)
            + s * np.log(p) + (n_tr - s) * np.log1p(-p)
        )
        return s, np.exp(logw)

    def kernel_expectations(self, params, kspec, data, want_grad=False):
        n_tr, p = int(params["par1"]), params["par2"]
        support, w = self._pmf(n_tr, p)
        if not want_grad:
            return _finite_support_expectations(kspec, support, w, data)
        if not self.slots[1].free:
            raise CapabilityError("no free continuous parameter to differentiate")
        dw = w * (support / p - (n_tr - support) / (1.0 - p))
        return _finite_support_expectations(kspec, support, w, data, dw)


class GeometricFamily(ModelFamily):
    """Geometric in the trials convention: support {1, 2, ...}, pmf p(1-p)^(x-1)."""

    discrete = True
    has_score = True

    def __init__(self):
        self.model_id = "geometric"
        self.slots = (Slot("par1", "success probability", True, LOGIT),)

    def default_init(self, data):
        med = max(_median(data), 1.0)
        return {"par1": float(np.clip(1.0 / med, 0.01, 0.99))}

    def validate_values(self, params):
        if not 0.0 < params["par1"] < 1.0:
            raise ConfigurationError("success probability must lie in (0, 1)")

    def sample(self, params, size, rng):
        return rng.geometric(params["par1"], size).astype(float)

    def score(self, params, x):
        p = params["par1"]
        return (1.0 / p - (x - 1.0) / (1.0 - p))[:, None]


class PoissonFamily(ModelFamily):
    discrete = True
    has_score = True

    def __init__(self):
        self.model_id = "Poisson"
        self.slots = (Slot("par1", "mean", True, LOG),)

    def default_init(self, data):
        return {"par1": max(_median(data), 0.1)}

    def validate_values(self, params):
        if params["par1"] <= 0:
            raise ConfigurationError("Poisson mean must be positive")

    def sample(self, params, size, rng):
        return rng.poisson(params["par1"], size).astype(float)

    def score(self, params, x):
        lam = params["par1"]
        return (x / lam - 1.0)[:, None]


# ---------------------------------------------------------------------------
# multivariate Gaussian
# ---------------------------------------------------------------------------

class MultidimGaussianFamily(ModelFamily):
    """N(mean, U U^T) with U lower-triangular (log-transformed diagonal).

    Variants: full (mean and U free), "loc" (U = sigma I with sigma fixed),
    "scale" (mean fixed, U free).
    """

    multivariate = True
    has_score = True

    def __init__(self, model_id, variant):
        self.model_id = model_id
        self.variant = variant
        free_mean = variant in ("full", "loc")
        if variant == "loc":
            second = Slot("par2", "isotropic standard deviation", False, LOG)
        else:
            second = Slot("par2", "covariance factor (lower triangular)",
                          variant in ("full", "scale"), vector=True)
        self.slots = (Slot("par1", "mean vector", free_mean, vector=True), second)

    # --- helpers -------------------------------------------------------------
    def _dim(self, params):
        return np.size(params["par1"])

    def _u_matrix(self, params):
        if self.variant == "loc":
            d = self._dim(params)
            return float(params["par2"]) * np.eye(d)
        u = np.asarray(params["par2"], dtype=float)
        if u.ndim == 1:
            d = int(round((np.sqrt(8 * u.size + 1) - 1) / 2))
            m = np.zeros((d, d))
            m[np.tril_indices(d)] = u
            return m
        return np.tril(u)

    def default_init(self, data):
        med = np.median(data, axis=0)
        scale = np.array([_robust_scale(col) for col in data.T])
        init = {}
        if self.slots[0].free:
            init["par1"] = med
        if self.variant in ("full", "scale") and self.slots[1].free:
            init["par2"] = np.diag(scale)[np.tril_indices(len(scale))]
        return init

    def prepare(self, user, data):
        params = super().prepare(user, data)
        d = data.shape[1]
        if np.size(params["par1"]) != d:
            raise ConfigurationError(
                f"mean vector has dimension {np.size(params['par1'])}, data has {d}"
            )
        if self.variant != "loc":
            u = np.asarray(params["par2"], dtype=float)
            if u.ndim == 2 or (u.ndim == 1 and u.size == d * d):
                u = u.reshape(d, d)[np.tril_indices(d)]
            if u.size != d * (d + 1) // 2:
                raise ConfigurationError(
                    "covariance factor must be a d x d matrix or its lower triangle"
                )
            params["par2"] = u
            if np.any(self._u_matrix(params).diagonal() <= 0):
                raise ConfigurationError("covariance factor needs a positive diagonal")
        elif params["par2"] <= 0:
            raise ConfigurationError("isotropic standard deviation must be positive")
        return params

    # --- parameter space -------------------------------------------------------
    def pack(self, params):
        parts = []
        if self.slots[0].free:
            parts.append(np.ravel(params["par1"]))
        if self.slots[1].free:
            u = self._u_matrix(params)
            v = u[np.tril_indices(u.shape[0])].copy()
            diag_pos = self._diag_positions(u.shape[0])
            v[diag_pos] = np.log(v[diag_pos])
            parts.append(v)
        return np.concatenate(parts)

    def unpack(self, theta, params):
        out = dict(params)
        k = 0
        d = self._dim(params)
        if self.slots[0].free:
            out["par1"] = np.asarray(theta[k:k + d], dtype=float).copy()
            k += d
        if self.slots[1].free:
            v = np.asarray(theta[k:], dtype=float).copy()
            diag_pos = self._diag_positions(d)
            v[diag_pos] = np.exp(np.clip(v[diag_pos], -700.0, 700.0))
            out["par2"] = v
        return out

    @staticmethod
    def _diag_positions(d):
        rows, cols = np.tril_indices(d)
        return np.flatnonzero(rows == cols)

    def chain_grad(self, params, grad_nat):
        diag = []
        d = self._dim(params)
        if self.slots[0].free:
            diag.append(np.ones(d))
        if self.slots[1].free:
            u = self._u_matrix(params)
            scale = np.ones(d * (d + 1) // 2)
            scale[self._diag_positions(d)] = u.diagonal()
            diag.append(scale)
        return grad_nat * np.concatenate(diag)

    # --- sampling / score -------------------------------------------------------
    def sample(self, params, size, rng):
        u = self._u_matrix(params)
        z = rng.standard_normal((size, u.shape[0]))
        return np.asarray(params["par1"], dtype=float)[None, :] + z @ u.T

    def score(self, params, x):
        mu = np.asarray(params["par1"], dtype=float)
        u = self._u_matrix(params)
        sigma_inv = np.linalg.inv(u @ u.T)
        diff = x - mu[None, :]
        si_diff = diff @ sigma_inv
        cols = []
        if self.slots[0].free:
            cols.append(si_diff)
        if self.slots[1].free:
            d = len(mu)
            tri = np.tril_indices(d)
            rows = []
            for sd in si_diff:
                m = np.outer(sd, sd) - sigma_inv
                rows.append((m @ u)[tri])
            cols.append(np.asarray(rows))
        return np.concatenate(cols, axis=1)

    # --- closed forms ------------------------------------------------------------
    def has_closed_forms(self, kfamily):
        return kfamily == kernels.GAUSSIAN

    def kernel_expectations(self, params, kspec, data, want_grad=False):
        if kspec.family != kernels.GAUSSIAN:
            raise CapabilityError(
                "multivariate Gaussian closed forms exist for the Gaussian kernel only"
            )
        mu = np.asarray(params["par1"], dtype=float)
        u = self._u_matrix(params)
        d = len(mu)
        gamma = kspec.bandwidth
        sigma = u @ u.T
        eye = np.eye(d)

        bx = sigma + 0.5 * gamma * gamma * eye
        bk = sigma + 0.25 * gamma * gamma * eye
        w = np.linalg.inv(bx)
        sign, logdet_bx = np.linalg.slogdet(bx)
        _, logdet_bk = np.linalg.slogdet(bk)
        cx = np.exp(0.5 * d * np.log(0.5 * gamma * gamma) - 0.5 * logdet_bx)
        ekk = float(np.exp(0.5 * d * np.log(0.25 * gamma * gamma) - 0.5 * logdet_bk))

        diff = mu[None, :] - data                 # (n, d)
        wd = diff @ w                              # (n, d) rows W d_i
        quad = np.sum(diff * wd, axis=1)
        ekx = cx * np.exp(-0.5 * quad)
        if not want_grad:
            return KernelExpectations(ekk, ekx)

        tri = np.tril_indices(d)
        gkk_parts, gkx_parts = [], []
        if self.slots[0].free:
            gkk_parts.append(np.zeros(d))
            gkx_parts.append(-ekx[:, None] * wd)
        if self.slots[1].free:
            v = np.linalg.inv(bk)
            gkk_parts.append(-ekk * (v @ u)[tri])
            wu = w @ u
            n = len(data)
            gx = np.empty((n, len(tri[0])))
            for i in range(n):
                m = np.outer(wd[i], wd[i]) - w
                gx[i] = ekx[i] * (m @ u)[tri]
            gkx_parts.append(gx)
        return KernelExpectations(
            ekk, ekx, np.concatenate(gkk_parts), np.concatenate(gkx_parts, axis=1)
        )


# ---------------------------------------------------------------------------
# registry and user-facing spec
# ---------------------------------------------------------------------------

def _build_registry():
    fams = [
        GaussianFamily("Gaussian", True, True),
        GaussianFamily("Gaussian.loc", True, False),
        GaussianFamily("Gaussian.scale", False, True),
        CauchyFamily(),
        ParetoFamily(),
        ExponentialFamily(),
        GammaFamily("gamma", True, True),
        GammaFamily("gamma.shape", True, False),
        GammaFamily("gamma.rate", False, True),
        ContinuousUniformFamily("continuous.uniform.loc", "loc"),
        ContinuousUniformFamily("continuous.uniform.upper", "upper"),
        ContinuousUniformFamily("continuous.uniform.lower.upper", "lower.upper"),
        DiracFamily("Dirac", False),
        DiscreteUniformFamily(),
        BinomialFamily("binomial", True, True),
        BinomialFamily("binomial.size", True, False),
        BinomialFamily("binomial.prob", False, True),
        GeometricFamily(),
        PoissonFamily(),
        MultidimGaussianFamily("multidim.Gaussian", "full"),
        MultidimGaussianFamily("multidim.Gaussian.loc", "loc"),
        MultidimGaussianFamily("multidim.Gaussian.scale", "scale"),
        DiracFamily("multidim.Dirac", True),
    ]
    return {f.model_id: f for f in fams}


MODEL_REGISTRY = _build_registry()
MODEL_IDS = tuple(MODEL_REGISTRY)


@dataclass
class ModelSpec:
    """User-facing model choice: id plus optional par1/par2 values.

    For a free slot the value is an initialization override; for a fixed slot
    it is the (required) fixed value.
    """

    model_id: str
    par1: object = None
    par2: object = None


def get_family(model_id: str) -> ModelFamily:
    try:
        return MODEL_REGISTRY[model_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {model_id!r}; valid ids: {', '.join(MODEL_IDS)}"
        ) from None


def resolve_model(spec: ModelSpec, data) -> tuple[ModelFamily, dict, np.ndarray]:
    """Validate data against the model and build the initial parameter dict."""
    family = get_family(spec.model_id)
    data = family.check_data(data)
    params = family.prepare({"par1": spec.par1, "par2": spec.par2}, data)
    return family, params, data
