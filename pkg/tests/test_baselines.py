"""The classical baselines must reproduce well-documented fits of the bundled
air quality data before they can serve as comparison points anywhere else."""
import numpy as np
import pytest

from mmdfit.baselines import ols, poisson_glm
from mmdfit.data_io import expand_poly
from mmdfit.datasets import airquality
from mmdfit.errors import InputError

# reference values computed with R 4.x: lm() and glm(family=poisson) on the
# complete rows, design poly(Solar.R,2) + poly(Wind,2) + poly(Temp,2)
OLS_FULL = [3.4159273, 2.6074060, -1.2034322, -2.2633108,
            1.2894833, 4.2120018, 0.4501812]
OLS_NO_OUTLIER = [3.4361465, 2.2885974, -0.8487403, -2.5209875,
                  1.1009511, 3.9218225, 0.8936152]
GLM_FULL = [3.5168945, 2.4621470, -0.8796456, -2.4753279,
            0.9498002, 4.0664346, -0.3247376]
GLM_NO_OUTLIER = [3.506950377, 2.332854309, -0.827578293, -2.167010600,
                  0.559589428, 4.289933463, -0.003300254]


@pytest.fixture(scope="module")
def air_design():
    data, names = airquality()
    x, _ = expand_poly(data[:, 1:4], names[1:4], 2)
    return data, x


def test_ols_is_exact_on_noiseless_data():
    rng = np.random.default_rng(80)
    x = rng.normal(0, 1, (30, 3))
    beta = np.array([0.5, 1.0, -2.0, 3.0])
    y = beta[0] + x @ beta[1:]
    b, sigma = ols(x, y)
    assert np.allclose(b, beta, atol=1e-12)
    assert sigma == pytest.approx(0.0, abs=1e-12)


def test_ols_solves_the_normal_equations():
    rng = np.random.default_rng(81)
    x = rng.normal(0, 1, (50, 2))
    y = rng.normal(0, 1, 50)
    b, sigma = ols(x, y)
    design = np.column_stack([np.ones(50), x])
    b_ref = np.linalg.solve(design.T @ design, design.T @ y)
    assert np.allclose(b, b_ref, atol=1e-12)
    resid = y - design @ b_ref
    assert sigma == pytest.approx(np.sqrt(resid @ resid / (50 - 3)), rel=1e-12)


def test_poisson_glm_satisfies_the_score_equations():
    rng = np.random.default_rng(82)
    x = rng.normal(0, 0.5, (200, 2))
    eta = 1.0 + x @ np.array([0.8, -0.5])
    y = rng.poisson(np.exp(eta)).astype(float)
    b = poisson_glm(x, y)
    design = np.column_stack([np.ones(200), x])
    score = design.T @ (y - np.exp(design @ b))
    assert np.allclose(score, 0.0, atol=1e-6)
    assert np.allclose(b, [1.0, 0.8, -0.5], atol=0.2)


def test_poisson_glm_rejects_negative_responses():
    with pytest.raises(InputError):
        poisson_glm(np.zeros((3, 1)), np.array([1.0, -1.0, 2.0]))


def test_ols_reproduces_the_reference_air_quality_fits(air_design):
    data, x = air_design
    y = np.log(data[:, 0])

    b_full, _ = ols(x, y)
    assert np.allclose(b_full, OLS_FULL, atol=1e-6)

    keep = y >= 1.0
    assert np.sum(~keep) == 1
    b_clean, _ = ols(x[keep], y[keep])
    assert np.allclose(b_clean, OLS_NO_OUTLIER, atol=1e-6)


def test_poisson_glm_reproduces_the_reference_air_quality_fits(air_design):
    data, x = air_design
    y = data[:, 0]

    b_full = poisson_glm(x, y)
    assert np.allclose(b_full, GLM_FULL, atol=1e-6)

    keep = y <= 150.0
    assert np.sum(~keep) == 1
    b_clean = poisson_glm(x[keep], y[keep])
    assert np.allclose(b_clean, GLM_NO_OUTLIER, atol=1e-6)
