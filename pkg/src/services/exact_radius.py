"""Exact stabilizability radius of singular-plus-rotation systems.

This module reduces a pair (M1 singular, M2 with complex spectrum) to its
canonical parameters (lambda2, rho3, alpha, beta) and evaluates the radius

    rho3 * inf_l ( |lambda2|/rho3 * |sin((l*alpha - beta)*pi)| / sin(beta*pi) )^(1/(l+1))

exactly for rational alpha and by best inhomogeneous approximations for
irrational alpha.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..utils.config import SolverConfig
from ..utils.exceptions import (
    BudgetExceededError,
    InsufficientExpansionError,
    NilpotentSystemError,
    NotSingularError,
    ValidationError,
)
from .diophantine import (
    RealInput,
    RealKind,
    best_approx_sequence,
    cf_expand,
    distance_table,
    inhom_distance,
    nearest_integer_distance,
    recognize_rational,
)
from .matrix_core import (
    ABSOLUTE_FLOOR,
    MatrixSet,
    as_matrix,
    eigen2x2,
    real_jordan_2x2,
    rotation_block,
    spectral_radius,
)

logger = structlog.get_logger(__name__)

EXACT_TIE_RTOL = 1e-12
ZERO_DISTANCE_TOL = 1e-12
CONSISTENCY_TOL = 1e-9

_DEFAULT_CONFIG = SolverConfig()


class RadiusCase(Enum):
    """How a radius value was obtained."""
    EXACT_ZERO = "ExactZero"
    FINITE_ATTAINED = "FiniteAttained"
    TRUNCATED = "Truncated"


@dataclass(frozen=True, eq=False)
class SingularRotationSystem:
    """The pair (M1, M2): M1 singular, M2 with a complex-conjugate spectrum."""
    m1: np.ndarray
    m2: np.ndarray

    @classmethod
    def create(
        cls, m1: Iterable, m2: Iterable, config: Optional[SolverConfig] = None
    ) -> "SingularRotationSystem":
        """Validate the pair and build the system.

        Raises:
            NotSingularError: If det(M1) exceeds tau_sv * ||M1||^2
            NotComplexSpectrumError: If M2 fails the strict discriminant test
        """
        config = config or _DEFAULT_CONFIG
        a = as_matrix(m1, name="M1")
        b = as_matrix(m2, name="M2")
        if a.shape != (2, 2) or b.shape != (2, 2):
            raise ValidationError("System matrices must both be 2x2", invariant="dimension")

        det = float(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
        if abs(det) > config.tau_sv * float(np.sum(a * a)):
            raise NotSingularError(f"M1 is not singular (det = {det:.6g})", determinant=det)

        # Raises NotComplexSpectrumError on real or repeated eigenvalues
        real_jordan_2x2(b, config)
        return cls(a, b)

    def as_set(self) -> MatrixSet:
        return MatrixSet((self.m1, self.m2))


@dataclass(frozen=True)
class CanonicalParams:
    """Reduced parameters (lambda2, rho3, alpha, beta) of a system.

    ``alpha_exact``/``beta_exact`` hold rationals for the angles. When
    ``snapped`` is set they were recognized from floating-point matrices
    and only choose the finite scan; an exact zero is never claimed then.
    """
    lambda2: float
    rho3: float
    alpha: float
    beta: float
    alpha_exact: Optional[Fraction] = None
    beta_exact: Optional[Fraction] = None
    snapped: bool = False

    def __post_init__(self) -> None:
        if not self.rho3 > 0:
            raise ValidationError(f"rho3 must be positive, got {self.rho3}", invariant="rho3")
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}", invariant="alpha-range")
        if not 0 < self.beta < 1 or math.sin(self.beta * math.pi) <= 0:
            raise ValidationError(f"beta must lie in (0, 1), got {self.beta}", invariant="beta-range")

    def with_alpha(self, alpha: RealInput) -> "CanonicalParams":
        """Copy with the rotation angle replaced by an exact input."""
        return replace(
            self,
            alpha=float(alpha.fractional),
            alpha_exact=alpha.fractional if alpha.is_rational else None,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda2": self.lambda2,
            "rho3": self.rho3,
            "alpha": self.alpha,
            "beta": self.beta,
            "alpha_exact": str(self.alpha_exact) if self.alpha_exact is not None else None,
            "beta_exact": str(self.beta_exact) if self.beta_exact is not None else None,
            "snapped": self.snapped,
        }


@dataclass(frozen=True)
class RadiusResult:
    """Stabilizability radius with the case that produced it.

    ``witness_l`` is the cycle length parameter l* (J applied l* times, then
    M'_1). For Truncated results ``l_sequence`` lists the evaluated best
    approximations and ``value`` is an upper bound.
    """
    value: float
    case: RadiusCase
    witness_l: int
    l_sequence: Tuple[int, ...] = field(default_factory=tuple)
    certified_upper: bool = False
    advisory: Optional[str] = None

    @property
    def finiteness(self) -> bool:
        return self.case is not RadiusCase.TRUNCATED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "case": self.case.value,
            "witness_l": self.witness_l,
            "l_sequence": list(self.l_sequence),
            "certified_upper": self.certified_upper,
            "finiteness": self.finiteness,
            "advisory": self.advisory,
        }


def canonicalize(
    system: SingularRotationSystem, config: Optional[SolverConfig] = None
) -> CanonicalParams:
    """Reduce System 1 to the canonical parameters of System 2.

    beta is the angle between the kernel and image directions of
    M'_1 = P^-1 M1 P, measured in coordinates where J rotates by -alpha*pi.
    When that signed angle exceeds pi/2 the mirror form is returned
    (beta -> 1 - angle/pi, alpha -> 1 - alpha), which leaves every
    |sin((l*alpha - beta)*pi)| unchanged and keeps beta in (0, 1/2].

    Raises:
        NilpotentSystemError: If M1 has no nonzero eigenvalue
    """
    config = config or _DEFAULT_CONFIG
    p, rho3, alpha = real_jordan_2x2(system.m2, config)

    lambda2 = float(np.trace(system.m1))
    if abs(lambda2) <= config.tau_sv * max(float(np.linalg.norm(system.m1)), ABSOLUTE_FLOOR):
        raise NilpotentSystemError("M1 is nilpotent; the system reaches 0 in two steps", lambda2=lambda2)

    transformed = np.linalg.solve(p, system.m1 @ p)
    image_pair, kernel_pair = eigen2x2(transformed)
    v2 = np.real(image_pair.vector)
    v1 = np.real(kernel_pair.vector)

    gamma = (math.atan2(v2[1], v2[0]) - math.atan2(v1[1], v1[0])) % math.pi
    if gamma <= math.pi / 2:
        beta = gamma / math.pi
    else:
        beta = 1.0 - gamma / math.pi
        alpha = 1.0 - alpha

    params = CanonicalParams(
        lambda2=lambda2,
        rho3=rho3,
        alpha=alpha,
        beta=beta,
        alpha_exact=recognize_rational(alpha),
        beta_exact=recognize_rational(beta),
        snapped=True,
    )
    logger.info("System canonicalized", **params.to_dict())
    return params


def canonical_matrices(params: CanonicalParams) -> Tuple[np.ndarray, np.ndarray]:
    """Return (M'_1, J): kernel on the x axis, image at angle beta*pi."""
    s = math.sin(params.beta * math.pi)
    c = math.cos(params.beta * math.pi)
    m1 = params.lambda2 / s * np.array([[0.0, c], [0.0, s]])
    return m1, rotation_block(params.rho3, params.alpha)


def system_from_params(params: CanonicalParams) -> SingularRotationSystem:
    m1, j = canonical_matrices(params)
    return SingularRotationSystem(m1, j)


def _angle_distance(params: CanonicalParams, l: int) -> float:
    if params.alpha_exact is not None and params.beta_exact is not None:
        return float(nearest_integer_distance(l * params.alpha_exact - params.beta_exact))
    alpha = params.alpha_exact if params.alpha_exact is not None else Fraction(params.alpha)
    beta = params.beta_exact if params.beta_exact is not None else Fraction(params.beta)
    return float(nearest_integer_distance(l * alpha - beta))


def _factors(params: CanonicalParams, ls: np.ndarray, distances: np.ndarray) -> np.ndarray:
    base = abs(params.lambda2) / params.rho3 * np.sin(np.pi * distances) / math.sin(params.beta * math.pi)
    with np.errstate(divide="ignore"):
        logs = np.where(base > 0.0, np.log(np.where(base > 0.0, base, 1.0)), -np.inf)
    return params.rho3 * np.exp(logs / (ls + 1.0))


def per_step_factor(params: CanonicalParams, l: int, distance: Optional[float] = None) -> float:
    """Per-step decay rate of the cycle "J applied l times, then M'_1".

    Args:
        params: Canonical parameters
        l: Number of rotation steps per cycle
        distance: Precomputed ||l*alpha - beta|| (optional)

    Returns:
        rho3 * (|lambda2|/rho3 * |sin((l*alpha - beta)*pi)| / sin(beta*pi))^(1/(l+1))
    """
    if l < 0:
        raise ValidationError(f"l must be nonnegative, got {l}", invariant="nonnegative")
    if distance is None:
        distance = _angle_distance(params, l)
    return float(_factors(params, np.array([float(l)]), np.array([distance]))[0])


def cycle_rate(params: CanonicalParams, l: int) -> float:
    """Per-step rate of M'_1 J^l from its spectral radius."""
    m1, j = canonical_matrices(params)
    product = m1 @ np.linalg.matrix_power(j, l)
    return spectral_radius(product) ** (1.0 / (l + 1))


def _tie_argmin(values: np.ndarray, rtol: float) -> int:
    best = float(np.min(values))
    return int(np.flatnonzero(values <= best * (1.0 + rtol))[0])


def _alpha_input(params: CanonicalParams, alpha_input: Optional[RealInput]) -> RealInput:
    if alpha_input is None:
        if params.alpha_exact is not None:
            return RealInput.rational(params.alpha_exact.numerator, params.alpha_exact.denominator)
        return RealInput.from_float(params.alpha)

    alpha = float(alpha_input.fractional)
    if abs(alpha - params.alpha) <= CONSISTENCY_TOL:
        return alpha_input
    if abs((1.0 - alpha) - params.alpha) <= CONSISTENCY_TOL:
        return mirror_input(alpha_input)
    raise ValidationError(
        f"alpha input {alpha} does not match the system angle {params.alpha}",
        invariant="alpha-consistency",
    )


def mirror_input(x: RealInput) -> RealInput:
    """Exact 1 - x for x in (0, 1), in the same spelling."""
    if x.kind is RealKind.CF_DIGITS:
        a = list(x.digits)
        if a[0] > 1:
            mirrored = [1, a[0] - 1] + a[1:]
        elif len(a) > 1:
            mirrored = [a[1] + 1] + a[2:]
        else:
            raise ValidationError("Cannot mirror cf:[1] (value 1)", invariant="alpha-range")
        return RealInput.cf(mirrored)
    value = 1 - x.fractional
    if x.kind is RealKind.RATIONAL:
        return RealInput.rational(value.numerator, value.denominator)
    return RealInput(RealKind.DECIMAL, fraction=value, precision_digits=x.precision_digits,
                     text=f"1-({x.text})")


def _zero_within_tolerance(l: int) -> RadiusResult:
    logger.warning("Distance vanishes within tolerance; exact zero is undecidable here", witness_l=l)
    return RadiusResult(
        value=0.0,
        case=RadiusCase.TRUNCATED,
        witness_l=l,
        l_sequence=(l,),
        certified_upper=True,
        advisory="zero_within_tolerance",
    )


def _above_rotation_rate(params: CanonicalParams, best: float) -> bool:
    return best > params.rho3 * (1.0 + EXACT_TIE_RTOL)


def _rotation_limit(params: CanonicalParams, best: float, best_l: int, evaluated: Sequence[int]) -> RadiusResult:
    """Every cycle decays slower than rho3; cycles l + kq approach it as k grows.

    The infimum rho3 is not attained by any finite cycle. ``witness_l`` is
    the best finite cycle found.
    """
    logger.info("No finite cycle beats the rotation rate", rho3=params.rho3, best_cycle=best, witness_l=best_l)
    return RadiusResult(
        params.rho3,
        RadiusCase.TRUNCATED,
        best_l,
        tuple(evaluated),
        certified_upper=True,
        advisory="rotation_limit",
    )


def _rational_radius(
    params: CanonicalParams,
    alpha: Fraction,
    beta: Fraction,
    beta_exact: bool,
    allow_exact_zero: bool,
    config: SolverConfig,
) -> RadiusResult:
    p, q = alpha.numerator, alpha.denominator
    if q > config.enumeration_guard:
        raise BudgetExceededError(
            f"Rational angle with denominator {q} exceeds the scan guard {config.enumeration_guard}",
            requested=q,
            limit=config.enumeration_guard,
        )

    if beta_exact:
        r, s = beta.numerator, beta.denominator
        modulus = q * s
        if q * modulus < 2**62:
            ls = np.arange(q, dtype=np.int64)
            residues = (ls * (p * s % modulus) - r * q) % modulus
        else:
            ls = np.arange(q, dtype=object)
            residues = (ls * (p * s) - r * q) % modulus
        numerators = np.minimum(residues, modulus - residues)
        zeros = np.flatnonzero(numerators == 0)
        if zeros.size:
            witness = int(zeros[0])
            if not allow_exact_zero:
                return _zero_within_tolerance(witness)
            logger.info("Exact zero found", alpha=str(alpha), beta=str(beta), witness_l=witness)
            return RadiusResult(0.0, RadiusCase.EXACT_ZERO, witness)
        distances = np.asarray(numerators, dtype=float) / modulus
    else:
        distances = distance_table(alpha, beta, q)
        if float(np.min(distances)) <= ZERO_DISTANCE_TOL:
            return _zero_within_tolerance(int(np.argmin(distances)))

    values = _factors(params, np.arange(q, dtype=float), distances)
    witness = _tie_argmin(values, EXACT_TIE_RTOL)
    best = float(values[witness])
    if _above_rotation_rate(params, best):
        return _rotation_limit(params, best, witness, ())
    logger.info("Rational angle scanned", q=q, witness_l=witness, value=best)
    return RadiusResult(best, RadiusCase.FINITE_ATTAINED, witness)


def _cannot_improve(params: CanonicalParams, best: float, l: int, config: SolverConfig) -> bool:
    """True once no remainder above 10^-precision at index >= l could beat best."""
    if best <= 0.0:
        return True
    if best >= params.rho3:
        return False
    log_threshold = (
        (l + 1) * math.log(best / params.rho3)
        + math.log(params.rho3 * math.sin(params.beta * math.pi) / abs(params.lambda2))
    )
    return log_threshold < -config.precision_digits * math.log(10.0)


def _irrational_radius(
    params: CanonicalParams, alpha_input: RealInput, beta: Fraction, config: SolverConfig
) -> RadiusResult:
    cf = cf_expand(alpha_input, config=config)

    distances = distance_table(cf.value, beta, config.l_cap + 1)
    if float(np.min(distances)) <= ZERO_DISTANCE_TOL:
        return _zero_within_tolerance(int(np.argmin(distances)))

    ls = np.arange(config.l_cap + 1, dtype=float)
    values = _factors(params, ls, distances)
    best_l = _tie_argmin(values, EXACT_TIE_RTOL)
    best = float(values[best_l])

    if _cannot_improve(params, best, config.l_cap, config):
        logger.info("Minimum certified inside the direct scan", witness_l=best_l, value=best)
        return RadiusResult(best, RadiusCase.FINITE_ATTAINED, best_l)

    try:
        sequence = best_approx_sequence(cf, beta, config)
    except InsufficientExpansionError:
        sequence = []

    evaluated: List[int] = []
    for l in sequence:
        if l <= config.l_cap:
            continue
        evaluated.append(l)
        distance = inhom_distance(l, cf, beta)
        if distance <= ZERO_DISTANCE_TOL:
            return _zero_within_tolerance(l)
        value = per_step_factor(params, l, distance)
        if value < best * (1.0 - EXACT_TIE_RTOL):
            best, best_l = value, l
        if _cannot_improve(params, best, l, config):
            logger.info("Minimum certified by the stopping rule", witness_l=best_l, checked_up_to=l)
            return RadiusResult(best, RadiusCase.FINITE_ATTAINED, best_l, tuple(evaluated))

    if _above_rotation_rate(params, best):
        return _rotation_limit(params, best, best_l, evaluated)

    logger.warning(
        "Best-approximation sequence exhausted before certification",
        terms=len(sequence),
        value=best,
        witness_l=best_l,
    )
    return RadiusResult(
        best,
        RadiusCase.TRUNCATED,
        best_l,
        tuple(sequence),
        certified_upper=True,
    )


def exact_radius(
    params: CanonicalParams,
    alpha_input: Optional[RealInput] = None,
    config: Optional[SolverConfig] = None,
) -> RadiusResult:
    """Stabilizability radius of the canonical system.

    Rational alpha = p/q is scanned over l = 0 .. q-1. An exact zero is
    reported only for an exact p/q angle with a beta that was not recognized
    from floating-point matrices; decimals that terminate and recognized
    angles take the same scan but report a zero as zero within tolerance.
    Irrational alpha scans l <= l_cap directly and then walks the best
    inhomogeneous approximations of beta until the stopping rule certifies
    the minimum or the expansion runs out. When no finite cycle decays
    faster than the rotation itself the result is rho3, not attained.

    Args:
        params: Canonical parameters
        alpha_input: Exact spelling of alpha (defaults to params.alpha)
        config: Solver configuration

    Returns:
        RadiusResult
    """
    config = config or _DEFAULT_CONFIG
    if params.lambda2 == 0.0:
        return RadiusResult(0.0, RadiusCase.EXACT_ZERO, 0)

    alpha_input = _alpha_input(params, alpha_input)
    allow_exact_zero = alpha_input.kind is RealKind.RATIONAL and not params.snapped
    finite_scan = alpha_input.is_rational
    if alpha_input.kind is RealKind.DECIMAL:
        cf = cf_expand(alpha_input, config=config)
        finite_scan = cf.exact and cf.value.denominator <= config.enumeration_guard

    beta_exact = params.beta_exact is not None
    beta = params.beta_exact if params.beta_exact is not None else Fraction(params.beta)

    if finite_scan:
        return _rational_radius(params, alpha_input.fractional, beta, beta_exact, allow_exact_zero, config)
    return _irrational_radius(params, alpha_input, beta, config)


def system_radius(
    system: SingularRotationSystem,
    alpha_input: Optional[RealInput] = None,
    config: Optional[SolverConfig] = None,
) -> Tuple[Optional[CanonicalParams], RadiusResult]:
    """Canonicalize a system and compute its radius; nilpotent M1 gives 0."""
    try:
        params = canonicalize(system, config)
    except NilpotentSystemError:
        logger.info("Nilpotent singular member, radius is 0")
        return None, RadiusResult(0.0, RadiusCase.EXACT_ZERO, 0)
    return params, exact_radius(params, alpha_input, config)


def example7_params(alpha: RealInput) -> CanonicalParams:
    """Parameters of the diag(2, 0) plus rotation family (lambda2 = 2, rho3 = 1, beta = 1/2)."""
    return CanonicalParams(
        lambda2=2.0,
        rho3=1.0,
        alpha=float(alpha.fractional),
        beta=0.5,
        alpha_exact=alpha.fractional if alpha.is_rational else None,
        beta_exact=Fraction(1, 2),
    )


def radius_example7(alpha: RealInput, config: Optional[SolverConfig] = None) -> RadiusResult:
    """Radius of the diag(2, 0) plus rotation-by-alpha*pi system."""
    return exact_radius(example7_params(alpha), alpha, config)


def periodic_law(l: int, cycles: int) -> List[int]:
    """Oldest-first member indices of (J^l, then M'_1) repeated; 0 is M'_1, 1 is J."""
    return ([1] * l + [0]) * cycles


def simulate_law(
    system: Union[SingularRotationSystem, CanonicalParams],
    sigma: Sequence[int],
    x0: Iterable[float],
) -> List[float]:
    """Iterate x(t+1) = M_sigma(t) x(t) and return ||x(t)|| for t = 0 .. len(sigma).

    Index 0 selects M1 (or M'_1), index 1 selects M2 (or J).
    """
    if isinstance(system, CanonicalParams):
        matrices = canonical_matrices(system)
    else:
        matrices = (system.m1, system.m2)

    x = np.asarray(list(x0), dtype=float)
    if x.shape != (2,) or not np.any(x):
        raise ValidationError("x0 must be a nonzero 2-vector", invariant="x0")

    norms = [float(np.linalg.norm(x))]
    for step, index in enumerate(sigma):
        if index not in (0, 1):
            raise ValidationError(f"sigma[{step}] = {index} is not 0 or 1", invariant="sigma")
        x = matrices[index] @ x
        norms.append(float(np.linalg.norm(x)))
    return norms
