"""Shared exception types."""


class CapacityError(RuntimeError):
    """State space (or neighbor enumeration) exceeds the configured cap."""


class NumericError(RuntimeError):
    """An iterative numerical routine failed to converge."""
