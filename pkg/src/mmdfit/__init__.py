"""Minimum kernel-discrepancy estimation for parametric and regression models."""

from .errors import (BudgetError, CapabilityError, ConfigurationError,
                     InitializationError, InputError, MMDFitError)
from .estimation import FitResult, fit, fit_exact
from .kernels import KernelSpec, median_heuristic, mmd2_empirical
from .models import MODEL_IDS, ModelSpec
from .optim import OptimizerConfig
from .regression import REG_MODEL_IDS, RegFitResult, fit_regression

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "CapabilityError",
    "ConfigurationError",
    "FitResult",
    "InitializationError",
    "InputError",
    "KernelSpec",
    "MMDFitError",
    "MODEL_IDS",
    "ModelSpec",
    "OptimizerConfig",
    "REG_MODEL_IDS",
    "RegFitResult",
    "fit",
    "fit_exact",
    "fit_regression",
    "median_heuristic",
    "mmd2_empirical",
    "__version__",
]
