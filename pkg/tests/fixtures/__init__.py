"""
Test fixtures for switchrad.

This package contains the matrix sets of the worked examples and helpers
that write them as input documents.
"""

from .matrix_sets import (
    EXAMPLE4_PRODUCTS,
    example4_set,
    example7_set,
    example7_system,
    example8_set,
    image_reduction_set,
    projected_stanford_set,
    rotation,
    stanford_set,
    three_member_reduction_set,
    write_matrix_file,
)

__all__ = [
    "EXAMPLE4_PRODUCTS",
    "example4_set",
    "example7_set",
    "example7_system",
    "example8_set",
    "image_reduction_set",
    "projected_stanford_set",
    "rotation",
    "stanford_set",
    "three_member_reduction_set",
    "write_matrix_file",
]
