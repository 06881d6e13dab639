"""Numerical toolkit for Hardy spaces of the Ornstein-Uhlenbeck semigroup on Gaussian space."""

from .errors import ConstructionError, PreconditionError, ResourceLimitError

__version__ = "0.1.0"

__all__ = ["ConstructionError", "PreconditionError", "ResourceLimitError", "__version__"]
