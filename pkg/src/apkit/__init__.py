"""Numerical toolkit for almost periodic functions on R^n."""

from .field import BoxGrid, FieldFunction, ParamFieldFunction
from .exprlang import function_from_source, parse
from .trigpoly import TrigPolynomial

__version__ = "0.1.0"

__all__ = ["BoxGrid", "FieldFunction", "ParamFieldFunction", "TrigPolynomial",
           "function_from_source", "parse", "__version__"]
