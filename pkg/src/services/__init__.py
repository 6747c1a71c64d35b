"""
Service modules for switchrad.

This package contains the computational modules: small-matrix spectral
kernels, Diophantine approximation, the exact radius of singular-plus-rotation
systems, product enumeration and report emission.
"""

from .exact_radius import CanonicalParams, RadiusCase, RadiusResult, SingularRotationSystem
from .matrix_core import MatrixSet
from .product_search import ProductSearchReport

__all__ = [
    "CanonicalParams",
    "MatrixSet",
    "ProductSearchReport",
    "RadiusCase",
    "RadiusResult",
    "SingularRotationSystem",
]
