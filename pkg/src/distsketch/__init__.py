"""Discrete summaries of item value distributions for stochastic set valuations."""

__version__ = "0.1.0"

from .exceptions import CapacityError, DomainError, SketchError  # noqa: E402

__all__ = ["CapacityError", "DomainError", "SketchError", "__version__"]
