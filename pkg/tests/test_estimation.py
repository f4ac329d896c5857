import math
import warnings

import numpy as np
import pytest

from mmdfit import kernels
from mmdfit.errors import CapabilityError, ConfigurationError, InputError
from mmdfit.estimation import (
    choose_method,
    fit,
    fit_exact,
    grad_mmd2_mc,
    objective_and_grad,
    objective_mmd2,
)
from mmdfit.kernels import KernelSpec
from mmdfit.models import ENUM_WINDOW, get_family
from mmdfit.optim import MAXIT_MESSAGE, OptimizerConfig

import _oracles as oracles
import _sweeps as sweeps


# ---------------------------------------------------------------------------
# objective values
# ---------------------------------------------------------------------------

def test_point_mass_on_its_own_atom_has_zero_discrepancy():
    fam = get_family("Dirac")
    spec = KernelSpec(kernels.GAUSSIAN, 1.0)
    v = objective_mmd2(fam, {"par1": 2.0}, spec, np.array([2.0]))
    assert abs(v) <= 1e-12


def test_point_mass_against_shifted_atom():
    fam = get_family("Dirac")
    spec = KernelSpec(kernels.GAUSSIAN, 1.0)
    v = objective_mmd2(fam, {"par1": 0.0}, spec, np.array([1.0]))
    assert v == pytest.approx(2.0 - 2.0 * math.exp(-1.0), rel=1e-12)


def test_model_close_to_its_own_sample():
    fam = get_family("Gaussian")
    rng = np.random.default_rng(8)
    data = rng.normal(0, 1, 500)
    spec = KernelSpec(kernels.GAUSSIAN, 1.0)
    v = objective_mmd2(fam, {"par1": 0.0, "par2": 1.0}, spec, data)
    assert 0.0 <= v < 0.01


def test_objective_matches_quadrature_reference():
    fam = get_family("Gaussian")
    params = {"par1": 0.3, "par2": 1.4}
    data = np.array([-0.5, 0.2, 1.1])
    spec = KernelSpec(kernels.LAPLACE, 1.2)
    got = objective_mmd2(fam, params, spec, data)
    data_term = float(np.mean([[oracles.kernel_value(kernels.LAPLACE, 1.2, a, b)
                                for b in data] for a in data]))
    want = (oracles.partial_objective_ref("Gaussian", params, kernels.LAPLACE,
                                          1.2, data, False) + data_term)
    assert got == pytest.approx(want, rel=1e-9)


def test_symmetric_data_has_zero_location_gradient():
    fam = get_family("Gaussian.loc")
    spec = KernelSpec(kernels.GAUSSIAN, 1.0)
    data = np.array([-1.5, -0.5, 0.5, 1.5])
    data_term = kernels.mean_gram(spec, data)
    _, g = objective_and_grad(fam, {"par1": 0.0, "par2": 1.0}, spec, data, data_term)
    assert abs(g[0]) <= 1e-12


def test_objective_without_closed_forms_warns_and_estimates():
    fam = get_family("Cauchy")
    spec = KernelSpec(kernels.GAUSSIAN, 1.0)
    with pytest.warns(UserWarning, match="Monte-Carlo"):
        v = objective_mmd2(fam, {"par1": 0.0, "par2": 1.0}, spec,
                           np.array([0.0, 1.0]), rng=np.random.default_rng(0))
    assert np.isfinite(v)


# ---------------------------------------------------------------------------
# gradient correctness (the full sweeps run in the acceptance suite)
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("model_id,kfamily", [
    ("Gaussian", kernels.GAUSSIAN),
    ("Gaussian", kernels.LAPLACE),
    ("binomial.prob", kernels.CAUCHY),
    ("multidim.Gaussian", kernels.GAUSSIAN),
])
def test_exact_gradients_match_finite_differences(model_id, kfamily):
    sweeps.fd_gradient_check(model_id, kfamily, n_points=8, seed=5)


@pytest.mark.parametrize("model_id,kfamily", [
    ("Gaussian.loc", kernels.LAPLACE),
    ("Poisson", kernels.GAUSSIAN),
])
def test_mc_gradient_is_unbiased(model_id, kfamily):
    sweeps.mc_unbiasedness_check(model_id, kfamily, n_points=1, seed=6)


def test_pathwise_gradient_is_unbiased():
    sweeps.pathwise_unbiasedness_check("continuous.uniform.loc",
                                       kernels.GAUSSIAN, n_points=1, seed=6)


def test_mc_gradient_draw_count_validation():
    fam = get_family("Gaussian")
    spec = KernelSpec(kernels.GAUSSIAN, 1.0)
    params = {"par1": 0.0, "par2": 1.0}
    with pytest.raises(ConfigurationError):
        grad_mmd2_mc(fam, params, spec, np.array([0.0]), 3, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        grad_mmd2_mc(fam, params, spec, np.array([0.0]), 0, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# method dispatch
# ---------------------------------------------------------------------------

DISPATCH = [
    ("Gaussian", kernels.GAUSSIAN, "GD"),
    ("Gaussian", kernels.LAPLACE, "GD"),
    ("Gaussian", kernels.CAUCHY, "SGD"),
    ("Gaussian.loc", kernels.LAPLACE, "GD"),
    ("Gaussian.scale", kernels.GAUSSIAN, "GD"),
    ("Cauchy", kernels.GAUSSIAN, "SGD"),
    ("Pareto", kernels.LAPLACE, "SGD"),
    ("exponential", kernels.GAUSSIAN, "SGD"),
    ("gamma", kernels.GAUSSIAN, "SGD"),
    ("gamma.shape", kernels.CAUCHY, "SGD"),
    ("gamma.rate", kernels.LAPLACE, "SGD"),
    ("continuous.uniform.loc", kernels.GAUSSIAN, "SGD"),
    ("continuous.uniform.upper", kernels.LAPLACE, "SGD"),
    ("continuous.uniform.lower.upper", kernels.GAUSSIAN, "SGD"),
    ("Dirac", kernels.GAUSSIAN, "GD"),
    ("Dirac", kernels.CAUCHY, "GD"),
    ("discrete.uniform", kernels.GAUSSIAN, "exact"),
    ("binomial", kernels.LAPLACE, "exact"),
    ("binomial.size", kernels.GAUSSIAN, "exact"),
    ("binomial.prob", kernels.GAUSSIAN, "GD"),
    ("binomial.prob", kernels.CAUCHY, "GD"),
    ("geometric", kernels.LAPLACE, "SGD"),
    ("Poisson", kernels.GAUSSIAN, "SGD"),
    ("multidim.Gaussian", kernels.GAUSSIAN, "GD"),
    ("multidim.Gaussian", kernels.LAPLACE, "SGD"),
    ("multidim.Gaussian.loc", kernels.GAUSSIAN, "GD"),
    ("multidim.Gaussian.scale", kernels.GAUSSIAN, "GD"),
    ("multidim.Dirac", kernels.GAUSSIAN, "GD"),
]


@pytest.mark.parametrize("model_id,kfamily,expected", DISPATCH)
def test_auto_dispatch_prefers_exact_then_gd_then_sgd(model_id, kfamily, expected):
    fam = get_family(model_id)
    cfg = OptimizerConfig()
    assert choose_method(fam, KernelSpec(kfamily, 1.0), cfg) == expected


def test_forcing_an_unavailable_method_is_an_error():
    with pytest.raises(CapabilityError, match="closed-form"):
        choose_method(get_family("Cauchy"), KernelSpec(kernels.GAUSSIAN, 1.0),
                      OptimizerConfig(method="GD"))
    with pytest.raises(CapabilityError, match="integer"):
        choose_method(get_family("Gaussian"), KernelSpec(kernels.GAUSSIAN, 1.0),
                      OptimizerConfig(method="exact"))
    with pytest.raises(CapabilityError, match="score"):
        choose_method(get_family("Dirac"), KernelSpec(kernels.GAUSSIAN, 1.0),
                      OptimizerConfig(method="SGD"))
    with pytest.raises(CapabilityError):
        choose_method(get_family("discrete.uniform"), KernelSpec(kernels.GAUSSIAN, 1.0),
                      OptimizerConfig(method="SGD"))


def test_fit_reports_the_method_it_used():
    rng = np.random.default_rng(0)
    res = fit(rng.normal(0, 1, 40), "Gaussian")
    assert res.method == "GD"
    res = fit(rng.integers(1, 6, 40).astype(float), "discrete.uniform")
    assert res.method == "exact"


# ---------------------------------------------------------------------------
# gradient-descent fits
# ---------------------------------------------------------------------------

def test_fit_point_mass_recovers_single_atom():
    res = fit(np.array([1.0]), "Dirac")
    assert res.par1 == pytest.approx(1.0, abs=1e-6)
    assert res.mmd2 <= 1e-10
    assert res.converged


def test_fit_gaussian_location_close_to_truth():
    rng = np.random.default_rng(14)
    data = rng.normal(3.0, 1.0, 100)
    res = fit(data, "Gaussian.loc", par2=1.0)
    assert abs(res.par1 - 3.0) < 0.3


def test_start_override_lands_on_the_same_optimum():
    rng = np.random.default_rng(15)
    data = rng.normal(0.5, 1.0, 80)
    a = fit(data, "Gaussian.loc", par2=1.0)
    b = fit(data, "Gaussian.loc", par1=2.0, par2=1.0)
    assert a.par1 == pytest.approx(b.par1, abs=1e-3)
    assert b.init["par1"] == 2.0


def test_gd_trace_is_monotone_without_backtracking():
    rng = np.random.default_rng(16)
    data = rng.normal(0, 1, 60)
    cfg = OptimizerConfig(backtracking=False, fixed_step=0.02, maxit=400)
    res = fit(data, "Gaussian.loc", par2=1.0, config=cfg)
    diffs = np.diff(res.trace)
    assert np.all(diffs <= 1e-10)


def test_gd_reaches_a_stationary_point():
    rng = np.random.default_rng(17)
    data = rng.normal(1.0, 2.0, 120)
    res = fit(data, "Gaussian")
    fam = get_family("Gaussian")
    spec = res.kernel
    params = {"par1": res.par1, "par2": res.par2}
    data_term = kernels.mean_gram(spec, np.asarray(data, dtype=float))
    _, g = objective_and_grad(fam, params, spec, data, data_term)
    assert np.linalg.norm(g) < 1e-4


def test_location_fit_is_scale_equivariant():
    rng = np.random.default_rng(18)
    data = rng.normal(2.0, 1.0, 90)
    c = 7.0
    a = fit(data, "Gaussian.loc", par2=1.0, bandwidth=1.3)
    b = fit(c * data, "Gaussian.loc", par2=c, bandwidth=c * 1.3)
    assert b.par1 == pytest.approx(c * a.par1, rel=1e-6)


def test_fit_rejects_bad_inputs():
    with pytest.raises(InputError):
        fit(np.array([]), "Gaussian")
    with pytest.raises(ConfigurationError, match="valid ids"):
        fit(np.array([1.0]), "no.such.model")
    with pytest.raises(ConfigurationError):
        fit(np.array([1.0, 2.0]), "Gaussian", config=OptimizerConfig(maxit=0))


def test_optimizer_config_validation():
    with pytest.raises(ConfigurationError):
        OptimizerConfig(mc_samples=1)
    with pytest.raises(ConfigurationError):
        OptimizerConfig(step0=0.0)
    with pytest.raises(ConfigurationError):
        OptimizerConfig(tol=-1.0)
    with pytest.raises(ConfigurationError):
        OptimizerConfig(maxit=100, burnin=100)
    with pytest.raises(ConfigurationError):
        OptimizerConfig(method="newton")


# ---------------------------------------------------------------------------
# stochastic fits
# ---------------------------------------------------------------------------

def test_sgd_agrees_with_gd_on_clean_data():
    rng = np.random.default_rng(20)
    data = rng.normal(0.8, 1.0, 500)
    gd = fit(data, "Gaussian.loc", par2=1.0)
    cfg = OptimizerConfig(method="SGD", maxit=8000, mc_samples=64, seed=3)
    sgd = fit(data, "Gaussian.loc", par2=1.0, config=cfg)
    assert sgd.method == "SGD"
    assert sgd.par1 == pytest.approx(gd.par1, abs=0.01)


def test_sgd_fit_is_deterministic_given_seed():
    rng = np.random.default_rng(21)
    data = rng.standard_cauchy(60)
    cfg = OptimizerConfig(maxit=500, seed=9)
    a = fit(data, "Cauchy", par2=1.0, config=cfg)
    b = fit(data, "Cauchy", par2=1.0, config=cfg)
    assert a.par1 == b.par1
    assert np.array_equal(a.trace, b.trace)
    assert a.method == "SGD"
    assert a.seed == 9


def test_sgd_schedule_exhaustion_is_not_flagged():
    # for the stochastic path maxit is the planned schedule, not a failure
    rng = np.random.default_rng(22)
    data = rng.poisson(4.0, 50).astype(float)
    cfg = OptimizerConfig(maxit=300, seed=1)
    res = fit(data, "Poisson", config=cfg)
    assert res.n_iter == 300
    assert all(MAXIT_MESSAGE not in w for w in res.warnings)


def test_sgd_without_closed_forms_reports_mc_discrepancy():
    rng = np.random.default_rng(23)
    data = rng.standard_cauchy(50)
    cfg = OptimizerConfig(maxit=200, seed=2)
    res = fit(data, "Cauchy", par2=1.0, config=cfg)
    assert any("Monte-Carlo" in w for w in res.warnings)
    assert np.isfinite(res.mmd2)


def test_robust_location_beats_the_mean_under_contamination():
    """Absolute estimation error across contaminated replications."""
    rng = np.random.default_rng(24)
    err_mean, err_mmd = [], []
    for _ in range(30):
        data = rng.normal(-2.0, 1.0, 50)
        data[:3] = rng.standard_cauchy(3) * 10
        err_mean.append(abs(data.mean() + 2.0))
        res = fit(data, "Gaussian.loc", par2=1.0)
        err_mmd.append(abs(res.par1 + 2.0))
    assert np.mean(err_mmd) < np.mean(err_mean)
    assert np.median(err_mmd) < np.median(err_mean)


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

def test_exact_fit_recovers_support_size():
    data = np.tile([1.0, 2.0, 3.0], 10)
    res = fit(data, "discrete.uniform")
    assert res.par1 == 3
    assert res.method == "exact"


def test_exact_fit_single_point_respects_lower_bound():
    res = fit(np.array([7.0]), "discrete.uniform")
    assert res.par1 >= 7
    assert res.par1 <= 7 + ENUM_WINDOW


def test_exact_fit_matches_brute_force_scan():
    rng = np.random.default_rng(30)
    data = rng.integers(1, 10, 25).astype(float)
    spec = KernelSpec(kernels.LAPLACE, 2.0)
    res = fit_exact(data, "discrete.uniform", kernel=kernels.LAPLACE, bandwidth=2.0)

    lo = int(np.max(data))
    best_n, best_val = None, np.inf
    for n_sup in range(lo, lo + ENUM_WINDOW + 1):
        support = np.arange(1, n_sup + 1, dtype=float)
        ekk = np.mean([[oracles.kernel_value(kernels.LAPLACE, 2.0, i, j)
                        for j in support] for i in support])
        ekx = np.mean([np.mean([oracles.kernel_value(kernels.LAPLACE, 2.0, s, x)
                                for s in support]) for x in data])
        val = ekk - 2.0 * ekx
        if val < best_val:
            best_n, best_val = n_sup, val
    assert res.par1 == best_n


def test_exact_fit_recovery_rate_over_replications():
    """With 200 draws from U{1..10} the scan should find N=10 almost always."""
    hits = 0
    for rep in range(100):
        rng = np.random.default_rng(1000 + rep)
        data = rng.integers(1, 11, 200).astype(float)
        res = fit(data, "discrete.uniform")
        hits += int(res.par1 == 10)
    assert hits >= 95


def test_exact_fit_binomial_inner_probability():
    rng = np.random.default_rng(31)
    data = rng.binomial(8, 0.3, 300).astype(float)
    res = fit(data, "binomial")
    assert res.method == "exact"
    assert res.par1 >= data.max()
    assert 0.0 < res.par2 < 1.0
    # the fitted mean should track the sample mean reasonably well
    assert res.par1 * res.par2 == pytest.approx(data.mean(), abs=0.5)


def test_fit_exact_rejects_non_enumerable_models():
    with pytest.raises(CapabilityError):
        fit_exact(np.array([1.0, 2.0]), "Gaussian")


# ---------------------------------------------------------------------------
# result bookkeeping
# ---------------------------------------------------------------------------

def test_result_estimates_contains_only_free_slots():
    rng = np.random.default_rng(32)
    res = fit(rng.normal(0, 1, 30), "Gaussian.loc", par2=1.0)
    assert set(res.estimates()) == {"par1"}
    res = fit(rng.normal(0, 1, 30), "Gaussian")
    assert set(res.estimates()) == {"par1", "par2"}


def test_result_traces_align():
    rng = np.random.default_rng(33)
    res = fit(rng.normal(0, 1, 40), "Gaussian")
    assert res.theta_trace.shape[0] == res.trace.shape[0]
    assert res.n_iter == len(res.trace) - 1
    assert res.mmd == pytest.approx(math.sqrt(max(res.mmd2, 0.0)))


def test_default_kernel_and_bandwidth():
    rng = np.random.default_rng(34)
    data = rng.normal(0, 1, 50)
    res = fit(data, "Gaussian")
    assert res.kernel.family == kernels.GAUSSIAN
    assert res.kernel.bandwidth == pytest.approx(kernels.median_heuristic(data))
