"""Exception hierarchy.

Validation errors cover bad inputs (files, schemas, parameters); numerical
errors cover conditions where a statistic cannot be computed from the data at
hand. The CLI maps these to exit codes 2 and 3 respectively.
"""


class MirrorFdrError(Exception):
    """Base class for all package errors."""


class ValidationError(MirrorFdrError):
    """Bad input data, schema, or configuration."""


class NumericalError(MirrorFdrError):
    """A computation failed for numerical reasons."""


class DegenerateSampleError(NumericalError):
    """Sample has zero dispersion (all values equal)."""


class IllConditionedError(NumericalError):
    """Density or bandwidth too small to divide by safely."""


class EmptyNullError(NumericalError):
    """No responses at or below the estimated center; mirror null is empty."""
