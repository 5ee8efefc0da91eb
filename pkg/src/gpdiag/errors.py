"""Exception hierarchy shared across the toolkit."""


class GpdiagError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(GpdiagError):
    """A column named in the schema is missing or the schema is malformed."""


class ParseError(GpdiagError):
    """A cell could not be parsed; carries the offending row index."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ValidationError(GpdiagError):
    """Data violates a dataset invariant (duplicates, non-finite values, ...)."""


class DimensionError(GpdiagError):
    """Shape or size mismatch between operands."""


class ParameterError(GpdiagError):
    """Unsupported or out-of-range model parameter."""


class DegenerateColumnError(GpdiagError):
    """A column with zero variance where variation is required."""


class RankError(GpdiagError):
    """A design or cross-product matrix is rank deficient."""


class NumericalError(GpdiagError):
    """A factorization or solve failed after all fallbacks."""

    def __init__(self, message: str, params=None):
        super().__init__(message)
        self.params = params


class PreconditionError(GpdiagError):
    """An operation was invoked on data that does not satisfy its preconditions."""


class OptimizationError(GpdiagError):
    """No optimizer start converged; carries the per-start trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class InfluenceDegenerateWarning(UserWarning):
    """A single point carries all leverage in a through-origin regression."""
