"""Exception types raised across the package."""


class ConvergenceError(RuntimeError):
    """An iterative numerical routine failed within its budget or went non-finite."""


class DataFormatError(ValueError):
    """Input data on disk does not match the expected layout."""
