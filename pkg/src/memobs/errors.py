"""Exception types shared across the package."""


class MemobsError(Exception):
    """Base class for all package errors."""


class ValidationError(MemobsError, ValueError):
    """Malformed input: bad parameters, bad configuration, out-of-range arguments."""


class NumericalError(MemobsError, ArithmeticError):
    """A computation failed or left its guaranteed accuracy regime."""


class StabilityError(NumericalError):
    """Step size outside the stability region of the time integrator."""


class SeriesDivergenceError(NumericalError):
    """The kernel series failed to reach the requested tolerance."""
