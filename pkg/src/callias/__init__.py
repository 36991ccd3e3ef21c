"""Numerical toolkit for Callias-type index formulas and Witten-regularized traces."""

from .index import IndexResult, callias_index
from .potential import Potential, builtin, load_potential

__all__ = ["IndexResult", "Potential", "builtin", "callias_index", "load_potential"]
__version__ = "0.1.0"
