class ParameterError(ValueError):
    """Raised when an argument is outside the domain an operation accepts."""


class FixpointError(RuntimeError):
    """Raised when a pool is used before it is fit for the requested map."""
