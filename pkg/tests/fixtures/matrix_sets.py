"""
Matrix sets of the worked examples.

Each factory returns fresh objects. Rotations use the clockwise form
[[cos, sin], [-sin, cos]] unless noted.
"""

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.services.exact_radius import SingularRotationSystem
from src.services.matrix_core import MatrixSet

# Newest-first labels in set indices (M1 = diagonal, M2 = rotation)
EXAMPLE4_PRODUCTS = ["M1M2", "M1M2M2", "M1M2M1", "M1M2M1M2", "M1M2M2M1"]


def rotation(alpha: float, rho: float = 1.0) -> List[List[float]]:
    """rho * [[cos(alpha*pi), sin(alpha*pi)], [-sin(alpha*pi), cos(alpha*pi)]]."""
    c = math.cos(alpha * math.pi)
    s = math.sin(alpha * math.pi)
    return [[rho * c, rho * s], [-rho * s, rho * c]]


def _y_rotation(alpha: float) -> List[List[float]]:
    c = math.cos(alpha * math.pi)
    s = math.sin(alpha * math.pi)
    return [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]


def example7_system(alpha: float) -> SingularRotationSystem:
    """diag(2, 0) with the rotation by alpha*pi."""
    return SingularRotationSystem.create([[2.0, 0.0], [0.0, 0.0]], rotation(alpha))


def example7_set(alpha: float) -> MatrixSet:
    return MatrixSet.from_nested([[[2.0, 0.0], [0.0, 0.0]], rotation(alpha)])


def stanford_set() -> MatrixSet:
    """diag(1/2, 2) with the counter-clockwise rotation by pi/6."""
    c = math.cos(math.pi / 6)
    s = math.sin(math.pi / 6)
    return MatrixSet.from_nested([[[0.5, 0.0], [0.0, 2.0]], [[c, -s], [s, c]]])


def projected_stanford_set() -> MatrixSet:
    """The 3x3 embedding with a projection onto the (x1, x2) plane."""
    c = math.cos(math.pi / 6)
    s = math.sin(math.pi / 6)
    return MatrixSet.from_nested([
        [[0.5, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]],
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    ])


def example4_set() -> MatrixSet:
    """diag(2, 1/2) with the clockwise rotation by pi/3."""
    return MatrixSet.from_nested([[[2.0, 0.0], [0.0, 0.5]], rotation(1.0 / 3.0)])


def image_reduction_set() -> MatrixSet:
    return MatrixSet.from_nested([
        [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        _y_rotation(0.2),
    ])


def three_member_reduction_set() -> MatrixSet:
    return MatrixSet.from_nested([
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
        [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        _y_rotation(0.2),
    ])


def example8_set() -> MatrixSet:
    return MatrixSet.from_nested([
        [[2.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]],
        [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        _y_rotation(0.2),
    ])


def write_matrix_file(
    directory: Path,
    name: str,
    matrices: Sequence,
    roles: Optional[Dict[str, int]] = None,
) -> Path:
    """Write a matrix-set document and return its path."""
    document: Dict = {"matrices": [np.asarray(m, dtype=float).tolist() for m in matrices]}
    if roles is not None:
        document["roles"] = roles
    path = Path(directory) / name
    path.write_text(json.dumps(document))
    return path
