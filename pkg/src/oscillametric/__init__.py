"""Numerical workbench for nilpotent potential metrics, S3 spin algebra and measurement predictions."""

from .manifold import NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["NumericalError", "ValidationError", "__version__"]
