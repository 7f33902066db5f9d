"""Exception types shared across the package."""


class SlowfastError(Exception):
    """Base class for all package errors."""


class ModelError(SlowfastError):
    """Invalid model, scaling assignment, or other user-supplied input."""


class ChartError(ModelError):
    """A requested coordinate chart cannot host the graph (singular block)."""


class NumericalError(SlowfastError):
    """A numerical procedure failed (Newton divergence, step underflow, ...)."""
