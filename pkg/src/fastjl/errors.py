"""Exception types shared across the package."""


class FastJlError(Exception):
    """Base class for all fastjl errors."""


class DimensionError(FastJlError, ValueError):
    """A vector or matrix has an incompatible or unsupported shape."""


class ParameterError(FastJlError, ValueError):
    """A numeric parameter is outside its admissible range."""


class DomainError(FastJlError, ValueError):
    """Hypotheses of an analytic bound or check are violated."""


class InstanceError(FastJlError, ValueError):
    """A test instance cannot be constructed from the given parameters."""


class DatasetFormatError(FastJlError, ValueError):
    """A vector file is malformed (bad magic, truncated, unparsable row)."""


class DimensionMismatchError(DatasetFormatError):
    """A record in a vector file disagrees with the declared dimension."""
