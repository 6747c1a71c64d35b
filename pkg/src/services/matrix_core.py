"""Small dense matrix kernel for switchrad.

This module provides the eigenstructure, singular values, spectral radius
and real Jordan reduction used by the radius computations. Matrices up to
3x3 are handled with closed-form polynomial roots; larger ones (up to 8x8)
go through LAPACK. Every routine also has a batched form working on an
(N, n, n) stack so the product enumeration can evaluate whole depth levels
at once.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..utils.config import SolverConfig
from ..utils.exceptions import (
    NotComplexSpectrumError,
    UnsupportedSizeError,
    ValidationError,
)

logger = structlog.get_logger(__name__)

MAX_DIMENSION = 8
ABSOLUTE_FLOOR = 1e-200

# Relative root separation below which a closed-form cubic root is
# recomputed by the iterative solver.
CUBIC_CLUSTER_RTOL = 1e-5

_DEFAULT_CONFIG = SolverConfig()


def as_matrix(values: Iterable, name: str = "matrix") -> np.ndarray:
    """Convert nested values to a validated read-only square float matrix.

    Args:
        values: Nested sequence or array of numbers
        name: Label used in error messages

    Returns:
        Read-only float64 array of shape (n, n) with n >= 2

    Raises:
        ValidationError: If the values are not a finite square matrix
        UnsupportedSizeError: If n exceeds MAX_DIMENSION
    """
    try:
        matrix = np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name} is not a numeric matrix", invariant="numeric") from e

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(
            f"{name} must be square, got shape {matrix.shape}", invariant="square"
        )
    if matrix.shape[0] < 2:
        raise ValidationError(f"{name} must be at least 2x2", invariant="dimension")
    if matrix.shape[0] > MAX_DIMENSION:
        raise UnsupportedSizeError(
            f"{name} is {matrix.shape[0]}x{matrix.shape[0]}, the limit is {MAX_DIMENSION}",
            size=matrix.shape[0],
            limit=MAX_DIMENSION,
        )
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{name} has non-finite entries", invariant="finite")

    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class MatrixSet:
    """Ordered finite set of same-size real matrices.

    Member order is the index used by switching sequences: member ``i`` is
    written ``M{i+1}`` in reports.
    """
    members: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.members) == 0:
            raise ValidationError("Matrix set must contain at least one matrix", invariant="nonempty")
        n = self.members[0].shape[0]
        for index, member in enumerate(self.members):
            if member.shape != (n, n):
                raise ValidationError(
                    f"M{index + 1} has shape {member.shape}, expected {(n, n)}",
                    invariant="same-dimension",
                )

    @classmethod
    def from_nested(cls, matrices: Sequence[Iterable]) -> "MatrixSet":
        """Build a set from nested lists, validating every member."""
        return cls(tuple(as_matrix(m, name=f"M{i + 1}") for i, m in enumerate(matrices)))

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def n(self) -> int:
        return self.members[0].shape[0]

    def stack(self) -> np.ndarray:
        """Return the members as an (m, n, n) array."""
        return np.stack(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, index: int) -> np.ndarray:
        return self.members[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixSet) or other.m != self.m:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.members, other.members))

    def __hash__(self) -> int:
        return hash(tuple(m.tobytes() for m in self.members))


@dataclass(frozen=True, eq=False)
class EigenPair2:
    """Eigenvalue and unit eigenvector of a 2x2 matrix."""
    value: complex
    vector: np.ndarray

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


@dataclass(frozen=True)
class SvdSummary:
    """Ascending singular values plus the numerical kernel dimension."""
    singulars: Tuple[float, ...]
    kernel_dim: int

    @property
    def largest(self) -> float:
        return self.singulars[-1]

    @property
    def smallest(self) -> float:
        return self.singulars[0]

    @property
    def rank(self) -> int:
        return len(self.singulars) - self.kernel_dim


def rotation_block(rho: float, alpha: float) -> np.ndarray:
    """Return rho * [[cos(alpha*pi), sin(alpha*pi)], [-sin(alpha*pi), cos(alpha*pi)]]."""
    c = math.cos(alpha * math.pi)
    s = math.sin(alpha * math.pi)
    return np.array([[rho * c, rho * s], [-rho * s, rho * c]])


def _check_stack(stack: np.ndarray) -> np.ndarray:
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValidationError(f"Expected an (N, n, n) stack, got shape {stack.shape}", invariant="square")
    if stack.shape[1] > MAX_DIMENSION:
        raise UnsupportedSizeError(
            f"Dimension {stack.shape[1]} exceeds the limit {MAX_DIMENSION}",
            size=stack.shape[1],
            limit=MAX_DIMENSION,
        )
    return stack


def _minors3(stack: np.ndarray) -> np.ndarray:
    """All 2x2 minors of each 3x3 matrix; entry [i, j] deletes row i and column j."""
    keep = ((1, 2), (0, 2), (0, 1))
    minors = np.empty(stack.shape[:1] + (3, 3))
    for i, (r0, r1) in enumerate(keep):
        for j, (c0, c1) in enumerate(keep):
            minors[:, i, j] = (
                stack[:, r0, c0] * stack[:, r1, c1] - stack[:, r0, c1] * stack[:, r1, c0]
            )
    return minors


def _det3(stack: np.ndarray, minors: Optional[np.ndarray] = None) -> np.ndarray:
    if minors is None:
        minors = _minors3(stack)
    return (
        stack[:, 0, 0] * minors[:, 0, 0]
        - stack[:, 0, 1] * minors[:, 0, 1]
        + stack[:, 0, 2] * minors[:, 0, 2]
    )


def _sym3_max_eig(gram: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of symmetric 3x3 matrices by the trigonometric method."""
    p1 = gram[:, 0, 1] ** 2 + gram[:, 0, 2] ** 2 + gram[:, 1, 2] ** 2
    q = np.trace(gram, axis1=1, axis2=2) / 3.0
    p2 = (
        (gram[:, 0, 0] - q) ** 2
        + (gram[:, 1, 1] - q) ** 2
        + (gram[:, 2, 2] - q) ** 2
        + 2.0 * p1
    )
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0.0, p, 1.0)
    shifted = (gram - q[:, None, None] * np.eye(3)) / safe_p[:, None, None]
    r = np.clip(_det3(shifted) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    return np.where(p > 0.0, q + 2.0 * p * np.cos(phi), q)


def _singular_squares_2x2(stack: np.ndarray) -> np.ndarray:
    frob = np.einsum("nij,nij->n", stack, stack)
    det = stack[:, 0, 0] * stack[:, 1, 1] - stack[:, 0, 1] * stack[:, 1, 0]
    largest = (frob + np.sqrt(np.maximum(frob * frob - 4.0 * det * det, 0.0))) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        smallest = np.where(largest > 0.0, det * det / largest, 0.0)
    return np.column_stack([np.minimum(smallest, largest), largest])


def _singular_squares_3x3(stack: np.ndarray) -> np.ndarray:
    gram = np.einsum("nki,nkj->nij", stack, stack)
    largest = _sym3_max_eig(gram)
    minors = _minors3(stack)
    det = _det3(stack, minors)
    # Cauchy-Binet: the sum of squared 2x2 minors is e2 of the Gram spectrum
    e2 = np.einsum("nij,nij->n", minors, minors)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(largest > 0.0, largest, 1.0)
        product = det * det / safe
        total = np.maximum((e2 - product) / safe, 0.0)
        middle = (total + np.sqrt(np.maximum(total * total - 4.0 * product, 0.0))) / 2.0
        middle = np.minimum(middle, largest)
        smallest = np.where(middle > 0.0, product / np.where(middle > 0.0, middle, 1.0), 0.0)
    zero = largest <= 0.0
    middle = np.where(zero, 0.0, middle)
    smallest = np.where(zero, 0.0, np.minimum(smallest, middle))
    return np.column_stack([smallest, middle, np.maximum(largest, 0.0)])


def batch_singular_values(stack: np.ndarray) -> np.ndarray:
    """Ascending singular values of every matrix in an (N, n, n) stack.

    Closed forms are used for n <= 3: the largest eigenvalue of A^T A by the
    trigonometric cubic, the remaining ones from det(A) and the 2x2 minors,
    which keeps small singular values relatively accurate.
    """
    stack = _check_stack(stack)
    n = stack.shape[1]
    if n == 2:
        return np.sqrt(_singular_squares_2x2(stack))
    if n == 3:
        return np.sqrt(_singular_squares_3x3(stack))
    return np.linalg.svd(stack, compute_uv=False)[:, ::-1]


def batch_operator_norm(stack: np.ndarray) -> np.ndarray:
    """Euclidean operator norm of every matrix in a stack."""
    return batch_singular_values(stack)[:, -1]


def _cubic_roots(b: np.ndarray, c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Roots of the monic cubics x^3 + b x^2 + c x + d, shape (N, 3) complex."""
    d0 = b * b - 3.0 * c
    d1 = 2.0 * b ** 3 - 9.0 * b * c + 27.0 * d
    root = np.sqrt((d1 * d1 - 4.0 * d0 ** 3).astype(complex))
    big = np.where(np.abs(d1 + root) >= np.abs(d1 - root), d1 + root, d1 - root)
    xi = np.exp(2j * math.pi / 3.0)

    roots = np.empty(b.shape + (3,), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = (big / 2.0) ** (1.0 / 3.0)
        for k in range(3):
            ck = base * xi ** k
            safe = np.where(ck != 0, ck, 1.0)
            roots[:, k] = np.where(ck != 0, -(b + ck + d0 / safe) / 3.0, -b / 3.0)

        for _ in range(2):
            value = ((roots + b[:, None]) * roots + c[:, None]) * roots + d[:, None]
            slope = (3.0 * roots + 2.0 * b[:, None]) * roots + c[:, None]
            step = np.where(np.abs(slope) > 0, value / np.where(slope != 0, slope, 1.0), 0.0)
            roots = roots - np.where(np.isfinite(step), step, 0.0)
    return roots


def batch_spectral_radius(stack: np.ndarray, config: Optional[SolverConfig] = None) -> np.ndarray:
    """Spectral radius of every matrix in an (N, n, n) stack.

    The numerical rank decides the formula: rank-one matrices report |trace|
    (their only nonzero eigenvalue), rank-two 3x3 matrices drop the zero root
    and solve the remaining quadratic, and full-rank matrices use the
    quadratic or cubic characteristic polynomial. Values at or below
    tau_sv * ||A|| are reported as exactly 0.
    """
    config = config or _DEFAULT_CONFIG
    stack = _check_stack(stack)
    count, n = stack.shape[0], stack.shape[1]
    if count == 0:
        return np.zeros(0)

    singulars = batch_singular_values(stack)
    norm = singulars[:, -1]
    rank = np.sum(singulars > config.tau_sv * norm[:, None], axis=1)
    rank = np.where(norm <= ABSOLUTE_FLOOR, 0, rank)
    trace = np.trace(stack, axis1=1, axis2=2)

    if n == 2:
        a, b = stack[:, 0, 0], stack[:, 0, 1]
        c, d = stack[:, 1, 0], stack[:, 1, 1]
        disc = (a - d) ** 2 + 4.0 * b * c
        det = a * d - b * c
        full = np.where(
            disc < 0.0,
            np.sqrt(np.maximum(det, 0.0)),
            (np.abs(trace) + np.sqrt(np.maximum(disc, 0.0))) / 2.0,
        )
        radius = np.where(rank >= 2, full, np.abs(trace))
    elif n == 3:
        minors = _minors3(stack)
        principal = minors[:, 0, 0] + minors[:, 1, 1] + minors[:, 2, 2]
        det = _det3(stack, minors)

        disc = trace * trace - 4.0 * principal
        deflated = np.where(
            disc < 0.0,
            np.sqrt(np.maximum(principal, 0.0)),
            (np.abs(trace) + np.sqrt(np.maximum(disc, 0.0))) / 2.0,
        )

        roots = _cubic_roots(-trace, principal, -det)
        full = np.max(np.abs(roots), axis=1)
        gaps = np.min(
            np.abs(roots[:, [0, 0, 1]] - roots[:, [1, 2, 2]]), axis=1
        )
        clustered = (rank == 3) & ((gaps <= CUBIC_CLUSTER_RTOL * (full + ABSOLUTE_FLOOR))
                                   | ~np.isfinite(full))
        if np.any(clustered):
            full = full.copy()
            full[clustered] = np.max(np.abs(np.linalg.eigvals(stack[clustered])), axis=1)

        radius = np.where(rank <= 1, np.abs(trace), np.where(rank == 2, deflated, full))
    else:
        full = np.max(np.abs(np.linalg.eigvals(stack)), axis=1)
        radius = np.where(rank <= 1, np.abs(trace), full)

    radius = np.where(rank == 0, 0.0, radius)
    return np.where(radius <= config.tau_sv * norm, 0.0, radius)


def singular_values(matrix: Iterable, config: Optional[SolverConfig] = None) -> SvdSummary:
    """Singular values of a square matrix with the kernel dimension.

    Args:
        matrix: Square matrix, n <= 8
        config: Tolerances (tau_sv sets the kernel test)

    Returns:
        SvdSummary with ascending singular values
    """
    config = config or _DEFAULT_CONFIG
    a = as_matrix(matrix)
    values = batch_singular_values(a[None])[0]
    largest = values[-1]
    if largest <= ABSOLUTE_FLOOR:
        kernel_dim = len(values)
    else:
        kernel_dim = int(np.sum(values <= config.tau_sv * largest))
    return SvdSummary(tuple(float(v) for v in values), kernel_dim)


def matrix_rank(matrix: Iterable, config: Optional[SolverConfig] = None) -> int:
    """Numerical rank under the tau_sv relative test."""
    return singular_values(matrix, config).rank


def operator_norm(matrix: Iterable) -> float:
    """Euclidean operator norm (largest singular value)."""
    return singular_values(matrix).largest


def spectral_radius(matrix: Iterable, config: Optional[SolverConfig] = None) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    a = as_matrix(matrix)
    return float(batch_spectral_radius(a[None], config)[0])


def _eigenvector2(matrix: np.ndarray, value: complex) -> Optional[np.ndarray]:
    a, b = matrix[0]
    c, d = matrix[1]
    first = np.array([b, value - a], dtype=complex)
    second = np.array([value - d, c], dtype=complex)
    vector = first if np.linalg.norm(first) >= np.linalg.norm(second) else second
    scale = np.linalg.norm(matrix) + abs(value)
    if np.linalg.norm(vector) <= 1e-14 * max(scale, ABSOLUTE_FLOOR):
        return None
    return vector / np.linalg.norm(vector)


def _orient(vector: np.ndarray) -> np.ndarray:
    """Fix the free scalar of an eigenvector: first component real and >= 0."""
    pivot = next((x for x in vector if abs(x) > 1e-14), 1.0)
    vector = vector * (abs(pivot) / pivot)
    if np.all(np.abs(vector.imag) <= 1e-15):
        return vector.real.copy()
    return vector


def eigen2x2(matrix: Iterable) -> Tuple[EigenPair2, EigenPair2]:
    """Both eigenpairs of a 2x2 matrix from its characteristic quadratic.

    Pairs are ordered by |value| descending, then real part descending,
    then imaginary part descending.
    """
    m = as_matrix(matrix)
    if m.shape != (2, 2):
        raise ValidationError(f"eigen2x2 needs a 2x2 matrix, got {m.shape}", invariant="dimension")

    a, b = m[0]
    c, d = m[1]
    trace = a + d
    det = a * d - b * c
    disc = (a - d) ** 2 + 4.0 * b * c

    if disc >= 0.0:
        root = math.sqrt(disc)
        first = (trace + math.copysign(root, trace)) / 2.0
        second = det / first if first != 0.0 else 0.0
        values = [complex(first), complex(second)]
    else:
        half = math.sqrt(-disc) / 2.0
        values = [complex(trace / 2.0, half), complex(trace / 2.0, -half)]

    values.sort(key=lambda v: (-abs(v), -v.real, -v.imag))

    pairs = []
    basis = iter((np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    for value in values:
        vector = _eigenvector2(m, value)
        if vector is None:
            vector = next(basis)
        pairs.append(EigenPair2(value, _orient(np.asarray(vector, dtype=complex))))

    return pairs[0], pairs[1]


def real_jordan_2x2(
    matrix: Iterable, config: Optional[SolverConfig] = None
) -> Tuple[np.ndarray, float, float]:
    """Reduce a 2x2 matrix with complex spectrum to a scaled rotation.

    Returns P, rho and alpha with matrix = P J P^-1, where
    J = rho * [[cos(alpha*pi), sin(alpha*pi)], [-sin(alpha*pi), cos(alpha*pi)]]
    and alpha lies in (0, 1). P has columns (Re w, -Im w) for the eigenvector
    w of the eigenvalue with negative imaginary part, scaled so |det P| = 1.

    Raises:
        NotComplexSpectrumError: If the discriminant is not below -tau_eig
    """
    config = config or _DEFAULT_CONFIG
    m = as_matrix(matrix)
    if m.shape != (2, 2):
        raise ValidationError(f"real_jordan_2x2 needs a 2x2 matrix, got {m.shape}", invariant="dimension")

    a, b = m[0]
    c, d = m[1]
    disc = (a - d) ** 2 + 4.0 * b * c
    scale = max(float(np.sum(m * m)), ABSOLUTE_FLOOR)
    if not disc < -config.tau_eig * scale:
        raise NotComplexSpectrumError(
            f"Matrix has real or repeated eigenvalues (discriminant {disc:.3e})",
            discriminant=disc,
        )

    rho = math.sqrt(a * d - b * c)
    real = (a + d) / 2.0
    imag = math.sqrt(-disc) / 2.0

    # w = (b, lambda - a) with lambda = real - i*imag; b != 0 since b*c < 0
    p = np.array([[b, 0.0], [real - a, imag]])
    p /= math.sqrt(abs(b * imag))
    alpha = math.acos(max(-1.0, min(1.0, real / rho))) / math.pi

    logger.debug("Real Jordan form computed", rho=rho, alpha=alpha)
    return p, rho, alpha
