"""Closed-form kernel expectations against quadrature and Monte-Carlo checks."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from mmdfit import kernels
from mmdfit.errors import CapabilityError
from mmdfit.kernels import KernelSpec
from mmdfit.models import (
    gaussian_profile_normal_mean,
    get_family,
    laplace_profile_normal_mean,
)

from test_models import make_params


# ---------------------------------------------------------------------------
# the two normal-mean profile integrals
# ---------------------------------------------------------------------------

def test_gaussian_kernel_point_expectation_formula():
    # E exp(-(X - y)^2 / gamma^2) for X ~ N(m, s^2)
    m, s, gamma, y = 0.4, 1.3, 1.7, -0.8
    want = gamma / math.sqrt(gamma**2 + 2 * s**2) * math.exp(
        -((m - y) ** 2) / (gamma**2 + 2 * s**2)
    )
    got = gaussian_profile_normal_mean(np.array([m - y]), s * s, gamma)
    assert got[0] == pytest.approx(want, rel=1e-12)


def test_gaussian_kernel_pair_expectation_formula():
    # E exp(-(X - X')^2 / gamma^2) = gamma / sqrt(gamma^2 + 4 s^2)
    s, gamma = 0.9, 1.4
    got = gaussian_profile_normal_mean(0.0, 2 * s * s, gamma)
    assert float(got) == pytest.approx(gamma / math.sqrt(gamma**2 + 4 * s**2), rel=1e-12)


def test_gaussian_kernel_pair_expectation_against_monte_carlo():
    s, gamma = 0.9, 1.4
    rng = np.random.default_rng(0)
    a = rng.normal(1.0, s, 1_000_000)
    b = rng.normal(1.0, s, 1_000_000)
    vals = np.exp(-(((a - b) / gamma) ** 2))
    se = vals.std() / math.sqrt(len(vals))
    got = float(gaussian_profile_normal_mean(0.0, 2 * s * s, gamma))
    assert abs(got - vals.mean()) < 3 * se


@pytest.mark.parametrize("d,sigma,gamma", [
    (0.0, 1.0, 1.0),
    (2.5, 0.7, 1.3),
    (-4.0, 2.0, 0.5),
    (1.0, 100.0, 1.0),     # sigma >> gamma exercises the erfcx branch
    (0.3, 0.01, 1.0),
    (50.0, 1.0, 0.2),
])
def test_laplace_kernel_expectation_against_quadrature(d, sigma, gamma):
    """E exp(-|X - y| / gamma) for X ~ N(m, sigma^2), d = m - y."""
    got = float(laplace_profile_normal_mean(np.array([d]), sigma, gamma)[0]
                if np.ndim(laplace_profile_normal_mean(np.array([d]), sigma, gamma)) else
                laplace_profile_normal_mean(np.array([d]), sigma, gamma))
    want, _ = integrate.quad(
        lambda t: stats.norm(d, sigma).pdf(t) * math.exp(-abs(t) / gamma),
        -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13, limit=400,
    )
    assert got == pytest.approx(want, rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("d,sigma,gamma", [(0.5, 1.2, 0.9), (3.0, 0.4, 2.0)])
def test_profile_gradients_match_finite_differences(d, sigma, gamma):
    h = 1e-6
    _, dg_dd, dg_dvar = gaussian_profile_normal_mean(np.array([d]), sigma**2, gamma, True)
    fd_d = (gaussian_profile_normal_mean(np.array([d + h]), sigma**2, gamma)
            - gaussian_profile_normal_mean(np.array([d - h]), sigma**2, gamma)) / (2 * h)
    fd_v = (gaussian_profile_normal_mean(np.array([d]), sigma**2 + h, gamma)
            - gaussian_profile_normal_mean(np.array([d]), sigma**2 - h, gamma)) / (2 * h)
    assert dg_dd[0] == pytest.approx(float(fd_d[0]), rel=1e-6, abs=1e-10)
    assert dg_dvar[0] == pytest.approx(float(fd_v[0]), rel=1e-6, abs=1e-10)

    _, dl_dd, dl_dsig = laplace_profile_normal_mean(np.array([d]), sigma, gamma, True)
    fd_d = (laplace_profile_normal_mean(np.array([d + h]), sigma, gamma)
            - laplace_profile_normal_mean(np.array([d - h]), sigma, gamma)) / (2 * h)
    fd_s = (laplace_profile_normal_mean(np.array([d]), sigma + h, gamma)
            - laplace_profile_normal_mean(np.array([d]), sigma - h, gamma)) / (2 * h)
    assert dl_dd[0] == pytest.approx(float(fd_d[0]), rel=1e-6, abs=1e-10)
    assert dl_dsig[0] == pytest.approx(float(fd_s[0]), rel=1e-6, abs=1e-10)


# ---------------------------------------------------------------------------
# every closed-form (model, kernel) pair against Monte Carlo
# ---------------------------------------------------------------------------

CLOSED_FORM_PAIRS = [
    ("Gaussian", kernels.GAUSSIAN), ("Gaussian", kernels.LAPLACE),
    ("Gaussian.loc", kernels.GAUSSIAN), ("Gaussian.loc", kernels.LAPLACE),
    ("Gaussian.scale", kernels.GAUSSIAN), ("Gaussian.scale", kernels.LAPLACE),
    ("Dirac", kernels.GAUSSIAN), ("Dirac", kernels.LAPLACE), ("Dirac", kernels.CAUCHY),
    ("discrete.uniform", kernels.GAUSSIAN), ("discrete.uniform", kernels.LAPLACE),
    ("discrete.uniform", kernels.CAUCHY),
    ("binomial.prob", kernels.GAUSSIAN), ("binomial.prob", kernels.LAPLACE),
    ("binomial.prob", kernels.CAUCHY),
    ("multidim.Gaussian", kernels.GAUSSIAN),
    ("multidim.Gaussian.loc", kernels.GAUSSIAN),
    ("multidim.Gaussian.scale", kernels.GAUSSIAN),
    ("multidim.Dirac", kernels.LAPLACE),
]


def _jittered(model_id, rng):
    params = make_params(model_id)
    if model_id.startswith("multidim.Gaussian"):
        params["par1"] = params["par1"] + rng.normal(0, 0.5, 2)
        if model_id.endswith(".loc"):
            params["par2"] = float(params["par2"] * rng.uniform(0.7, 1.4))
        else:
            params["par2"] = params["par2"] * rng.uniform(0.7, 1.4, 3)
    elif model_id == "multidim.Dirac":
        params["par1"] = params["par1"] + rng.normal(0, 0.5, 2)
    elif model_id == "binomial.prob":
        params["par2"] = float(rng.uniform(0.15, 0.85))
    elif model_id == "discrete.uniform":
        params["par1"] = int(rng.integers(2, 12))
    else:
        for k in params:
            params[k] = float(params[k] * rng.uniform(0.7, 1.4))
    return params


@pytest.mark.parametrize("model_id,kfamily", CLOSED_FORM_PAIRS)
def test_closed_forms_match_monte_carlo(model_id, kfamily):
    """e_kk and each e_kx within 4 standard errors of a big paired-draw average."""
    fam = get_family(model_id)
    rng = np.random.default_rng(abs(hash((model_id, kfamily))) % 2**32)
    n_pairs = 200_000
    for trial in range(10):
        params = _jittered(model_id, rng)
        gamma = float(rng.uniform(0.6, 2.5))
        spec = KernelSpec(kfamily, gamma)
        data = fam.sample(params, 4, rng)
        ke = fam.kernel_expectations(params, spec, data)

        a = fam.sample(params, n_pairs, rng)
        b = fam.sample(params, n_pairs, rng)
        if fam.multivariate:
            d_ab = np.linalg.norm(a - b, axis=1)
        else:
            d_ab = np.abs(a - b)
        vals = kernels.profile(kfamily, d_ab / gamma)
        se = max(vals.std() / math.sqrt(n_pairs), 1e-12)
        assert abs(ke.e_kk - vals.mean()) < 4 * se, \
            f"{model_id}/{kfamily} trial {trial}: e_kk {ke.e_kk} vs MC {vals.mean()}"

        g = kernels.gram(spec, a, data)
        se_x = np.maximum(g.std(axis=0) / math.sqrt(n_pairs), 1e-12)
        assert np.all(np.abs(ke.e_kx - g.mean(axis=0)) < 4 * se_x), \
            f"{model_id}/{kfamily} trial {trial}: e_kx {ke.e_kx} vs {g.mean(axis=0)}"


GRAD_PAIRS = [p for p in CLOSED_FORM_PAIRS
              if not p[0].startswith(("Dirac", "discrete", "multidim.Dirac"))]


@pytest.mark.parametrize("model_id,kfamily", GRAD_PAIRS)
def test_expectation_gradients_match_finite_differences(model_id, kfamily):
    """want_grad output against central differences in the natural parameters."""
    fam = get_family(model_id)
    rng = np.random.default_rng(abs(hash(("grad", model_id, kfamily))) % 2**32)
    free = [s.name for s in fam.free_slots()]
    for _ in range(5):
        params = _jittered(model_id, rng)
        gamma = float(rng.uniform(0.7, 2.0))
        spec = KernelSpec(kfamily, gamma)
        data = fam.sample(params, 3, rng)
        ke = fam.kernel_expectations(params, spec, data, want_grad=True)

        col = 0
        for name in free:
            width = np.size(params[name])
            for j in range(width):
                h = 1e-6 * max(1.0, float(np.max(np.abs(params[name]))))
                hi, lo = dict(params), dict(params)
                if width == 1 and np.ndim(params[name]) == 0:
                    hi[name] = params[name] + h
                    lo[name] = params[name] - h
                else:
                    hi[name] = np.array(params[name], dtype=float)
                    lo[name] = np.array(params[name], dtype=float)
                    hi[name][j] += h
                    lo[name][j] -= h
                ke_hi = fam.kernel_expectations(hi, spec, data)
                ke_lo = fam.kernel_expectations(lo, spec, data)
                fd_kk = (ke_hi.e_kk - ke_lo.e_kk) / (2 * h)
                fd_kx = (ke_hi.e_kx - ke_lo.e_kx) / (2 * h)
                assert ke.d_e_kk[col] == pytest.approx(fd_kk, rel=2e-5, abs=1e-7), \
                    f"{model_id}/{kfamily} d_e_kk[{col}]"
                assert np.allclose(ke.d_e_kx[:, col], fd_kx, rtol=2e-5, atol=1e-7), \
                    f"{model_id}/{kfamily} d_e_kx[:, {col}]"
                col += 1


# ---------------------------------------------------------------------------
# capability boundaries
# ---------------------------------------------------------------------------

def test_gaussian_model_has_no_cauchy_kernel_closed_form():
    fam = get_family("Gaussian")
    assert not fam.has_closed_forms(kernels.CAUCHY)
    with pytest.raises(CapabilityError):
        fam.kernel_expectations(make_params("Gaussian"),
                                KernelSpec(kernels.CAUCHY, 1.0), np.array([0.0]))


def test_multivariate_closed_forms_are_gaussian_kernel_only():
    fam = get_family("multidim.Gaussian")
    assert not fam.has_closed_forms(kernels.LAPLACE)
    with pytest.raises(CapabilityError):
        fam.kernel_expectations(make_params("multidim.Gaussian"),
                                KernelSpec(kernels.LAPLACE, 1.0), np.zeros((2, 2)))


def test_integer_size_parameter_has_no_gradient():
    fam = get_family("discrete.uniform")
    with pytest.raises(CapabilityError):
        fam.kernel_expectations({"par1": 5}, KernelSpec(kernels.GAUSSIAN, 1.0),
                                np.array([1.0, 2.0]), want_grad=True)
