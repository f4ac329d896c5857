"""Exception types shared across the package."""


class MMDFitError(Exception):
    """Base class for package errors."""


class InputError(MMDFitError, ValueError):
    """Bad data: wrong shapes, non-finite values, unparseable cells, domain violations."""


class ConfigurationError(MMDFitError, ValueError):
    """Bad configuration: unknown model/kernel ids, missing fixed parameters, invalid options."""


class CapabilityError(MMDFitError, RuntimeError):
    """A requested operation is not available for this model/kernel combination."""


class BudgetError(MMDFitError, RuntimeError):
    """Problem size exceeds a configured computational budget."""


class InitializationError(MMDFitError, RuntimeError):
    """The objective is non-finite at the starting point."""
