"""Continued fractions and Ostrowski representations for switchrad.

This module expands rotation angles into continued fractions, writes
integers and reals in the Ostrowski numeration built on the convergents,
and measures inhomogeneous approximation distances ||l*alpha - theta||.
All digit arithmetic is exact (integers and Fractions); floats only appear
at the boundary, in returned distances and the vectorised distance table.
"""

import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..utils.config import SolverConfig
from ..utils.exceptions import (
    InsufficientExpansionError,
    InvalidConfigError,
    NumericFailureError,
    ParseError,
    ThetaRangeError,
    ValidationError,
)

logger = structlog.get_logger(__name__)

Number = Union[int, float, Fraction]

MIN_DECIMAL_DIGITS = 15
CROSS_CHECK_ATOL = 1e-12
FIXED_POINT_BITS = 64

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*/\s*(\d+)\s*$")
_CF_RE = re.compile(r"^\s*cf:\s*\[(.*)\]\s*$", re.IGNORECASE)
_DECIMAL_RE = re.compile(r"^\s*[+-]?(\d*)\.?(\d*)(?:[eE][+-]?\d+)?\s*$")

_DEFAULT_CONFIG = SolverConfig()


class RealKind(Enum):
    """Spellings of a real parameter."""
    RATIONAL = "rational"
    DECIMAL = "decimal"
    CF_DIGITS = "cf_digits"


def _cf_value(digits: Sequence[int]) -> Fraction:
    value = Fraction(0)
    for a in reversed(digits):
        value = 1 / (a + value)
    return value


def _significant_digits(text: str) -> int:
    mantissa = re.split(r"[eE]", text.strip().lstrip("+-"))[0]
    return len(mantissa.replace(".", "").lstrip("0"))


@dataclass(frozen=True)
class RealInput:
    """An angle or target given as p/q, a decimal string or CF digits.

    ``fraction`` is the exact value reduced into [0, 1) for rational and
    decimal inputs; ``a0`` keeps the integer part that was removed.
    """
    kind: RealKind
    a0: int = 0
    fraction: Optional[Fraction] = None
    precision_digits: Optional[int] = None
    digits: Tuple[int, ...] = ()
    text: str = ""

    def __post_init__(self) -> None:
        if self.kind is RealKind.CF_DIGITS:
            if not self.digits:
                raise ValidationError("CF digit list must not be empty", invariant="cf-digits")
            if any(a < 1 for a in self.digits):
                raise ValidationError(
                    f"CF digits must be positive, got {list(self.digits)}", invariant="cf-digits"
                )
            return

        if self.fraction is None or not 0 <= self.fraction < 1:
            raise ValidationError(
                f"Reduced value must lie in [0, 1), got {self.fraction}", invariant="range"
            )
        if self.kind is RealKind.DECIMAL and (self.precision_digits or 0) < MIN_DECIMAL_DIGITS:
            raise ValidationError(
                f"Decimal input carries {self.precision_digits} significant digits, at least "
                f"{MIN_DECIMAL_DIGITS} are needed; spell short values as p/q",
                invariant="precision",
            )

    @classmethod
    def rational(cls, p: int, q: int) -> "RealInput":
        if q <= 0:
            raise ValidationError(f"Denominator must be positive, got {q}", invariant="denominator")
        value = Fraction(p, q)
        a0 = math.floor(value)
        return cls(RealKind.RATIONAL, a0=a0, fraction=value - a0, text=f"{p}/{q}")

    @classmethod
    def decimal(cls, text: str) -> "RealInput":
        try:
            value = Fraction(text.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise ParseError(f"Cannot read {text!r} as a decimal number") from e
        a0 = math.floor(value)
        return cls(
            RealKind.DECIMAL,
            a0=a0,
            fraction=value - a0,
            precision_digits=_significant_digits(text),
            text=text.strip(),
        )

    @classmethod
    def from_float(cls, x: float, precision_digits: int = MIN_DECIMAL_DIGITS) -> "RealInput":
        """Wrap a float as a decimal input carrying its exact binary value."""
        if not math.isfinite(x):
            raise ValidationError(f"Value {x} is not finite", invariant="finite")
        value = Fraction(x)
        a0 = math.floor(value)
        return cls(
            RealKind.DECIMAL,
            a0=a0,
            fraction=value - a0,
            precision_digits=precision_digits,
            text=repr(x),
        )

    @classmethod
    def cf(cls, digits: Sequence[int], a0: int = 0) -> "RealInput":
        digits = tuple(int(a) for a in digits)
        text = "cf:[" + ",".join(str(a) for a in digits) + "]"
        return cls(RealKind.CF_DIGITS, a0=a0, digits=digits, text=text)

    @classmethod
    def parse(cls, text: str) -> "RealInput":
        """Parse "p/q", "cf:[a1,a2,...]" or a decimal string."""
        match = _RATIONAL_RE.match(text)
        if match:
            return cls.rational(int(match.group(1)), int(match.group(2)))

        match = _CF_RE.match(text)
        if match:
            body = match.group(1).strip()
            try:
                digits = [int(part) for part in body.split(",")] if body else []
            except ValueError as e:
                raise ParseError(f"CF digits in {text!r} must be integers") from e
            return cls.cf(digits)

        match = _DECIMAL_RE.match(text)
        if match and (match.group(1) or match.group(2)):
            return cls.decimal(text)

        raise ParseError(f"Cannot read {text!r}; use p/q, a decimal or cf:[a1,a2,...]")

    @property
    def is_rational(self) -> bool:
        return self.kind is RealKind.RATIONAL

    @property
    def fractional(self) -> Fraction:
        """Exact value of the input reduced into [0, 1)."""
        if self.kind is RealKind.CF_DIGITS:
            return _cf_value(self.digits)
        assert self.fraction is not None
        return self.fraction

    @property
    def value(self) -> Fraction:
        return self.a0 + self.fractional

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class ContinuedFraction:
    """Continued fraction of alpha in [0, 1) with its convergents.

    ``convergents[k]`` is (p_k, q_k) starting at k = 0 with (0, 1), so
    ``digits[k]`` is a_{k+1}. ``value`` is the exact alpha the errors
    D_k = q_k*alpha - p_k are measured against.
    """
    a0: int
    digits: Tuple[int, ...]
    convergents: Tuple[Tuple[int, int], ...]
    value: Fraction
    exact: bool

    @property
    def depth(self) -> int:
        """Index K of the last convergent."""
        return len(self.convergents) - 1

    @property
    def denominators(self) -> List[int]:
        return [q for _, q in self.convergents]

    @cached_property
    def errors(self) -> Tuple[Fraction, ...]:
        return tuple(q * self.value - p for p, q in self.convergents)

    def float_errors(self) -> List[float]:
        return [float(d) for d in self.errors]


def _convergents(digits: Sequence[int]) -> List[Tuple[int, int]]:
    pairs = [(0, 1)]
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    for a in digits:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        pairs.append((p, q))
    return pairs


def cf_expand(
    x: RealInput,
    max_terms: Optional[int] = None,
    max_q: Optional[int] = None,
    config: Optional[SolverConfig] = None,
) -> ContinuedFraction:
    """Expand a real input into its continued fraction.

    Rationals expand exactly by the Euclidean algorithm whatever the budget.
    Decimals stop once q_k^2 would exceed 10^precision_digits or the budget
    runs out. CF-digit inputs pass through with their last convergent
    dropped, so the expansion reads as a truncated irrational.

    Args:
        x: Value to expand (its integer part goes to a0)
        max_terms: Largest number of digits (defaults to config.max_terms)
        max_q: Largest convergent denominator (defaults to config.max_q)
        config: Solver configuration

    Returns:
        ContinuedFraction of the fractional part of x
    """
    config = config or _DEFAULT_CONFIG
    max_terms = config.max_terms if max_terms is None else max_terms
    max_q = config.max_q if max_q is None else max_q
    if max_terms <= 0 or max_q <= 0:
        raise InvalidConfigError(
            f"Expansion budget must be positive (max_terms={max_terms}, max_q={max_q})",
            field="max_terms" if max_terms <= 0 else "max_q",
        )

    alpha = x.fractional

    if x.kind is RealKind.CF_DIGITS:
        digits = x.digits[: max_terms + 1]
        kept = digits[:-1]
        return ContinuedFraction(x.a0, tuple(kept), tuple(_convergents(kept)), _cf_value(digits), False)

    limit_sq = 10 ** x.precision_digits if x.kind is RealKind.DECIMAL else None
    digits: List[int] = []
    num, den = alpha.numerator, alpha.denominator
    q_prev, q = 0, 1
    exact = True
    while num != 0:
        a = den // num
        q_next = a * q + q_prev
        if limit_sq is not None and (
            len(digits) >= max_terms or q_next > max_q or q_next * q_next > limit_sq
        ):
            exact = False
            break
        digits.append(a)
        q_prev, q = q, q_next
        den, num = num, den - a * num

    cf = ContinuedFraction(x.a0, tuple(digits), tuple(_convergents(digits)), alpha, exact)
    logger.debug("Continued fraction expanded", kind=x.kind.value, terms=len(digits), exact=exact)
    return cf


@dataclass(frozen=True)
class OstrowskiDigits:
    """Ostrowski digits of an integer (base q_k) or a real (base D_k).

    ``digits[k]`` is the digit attached to level k, i.e. c_{k+1} or b_{k+1}.
    """
    digits: Tuple[int, ...]
    target: Fraction
    base: ContinuedFraction
    integer: bool

    def reconstruct(self) -> Fraction:
        if self.integer:
            return Fraction(sum(c * q for c, q in zip(self.digits, self.base.denominators)))
        return sum((b * d for b, d in zip(self.digits, self.base.errors)), Fraction(0))

    def admissible(self) -> bool:
        """Check 0 <= d_1 < a_1, d_{k+1} <= a_{k+1} and d_k = 0 after a maximal digit."""
        a = self.base.digits
        for k, d in enumerate(self.digits):
            if d < 0:
                return False
            if k >= len(a):
                if d != 0:
                    return False
                continue
            if k == 0 and d >= a[0]:
                return False
            if d > a[k]:
                return False
            if k > 0 and d == a[k] and self.digits[k - 1] != 0:
                return False
        return True

    def partial_sums(self) -> List[int]:
        """Running sums sum_{j<=k} d_{j+1} q_j for k = 0, 1, ..."""
        sums, total = [], 0
        for d, q in zip(self.digits, self.base.denominators):
            total += d * q
            sums.append(total)
        return sums


def ostrowski_integer(l: int, cf: ContinuedFraction) -> OstrowskiDigits:
    """Greedy Ostrowski digits c_{k+1} of a nonnegative integer l < q_K."""
    if l < 0:
        raise ValidationError(f"l must be nonnegative, got {l}", invariant="nonnegative")
    q = cf.denominators
    if l >= q[-1]:
        raise InsufficientExpansionError(
            f"l = {l} needs a convergent denominator above q_{cf.depth} = {q[-1]}",
            requested=l,
            limit=q[-1],
        )

    digits = [0] * len(q)
    remainder = l
    for k in range(len(q) - 1, -1, -1):
        digits[k], remainder = divmod(remainder, q[k])
    return OstrowskiDigits(tuple(digits), Fraction(l), cf, integer=True)


def ostrowski_real(theta: Number, cf: ContinuedFraction) -> OstrowskiDigits:
    """Greedy Ostrowski digits b_{k+1} of theta in [-alpha, 1-alpha).

    Digits are produced for levels k = 0 .. K-1, so the partial sum
    reproduces theta within |D_{K-1}|.

    Raises:
        ThetaRangeError: If theta is outside [-alpha, 1-alpha)
        InsufficientExpansionError: If the expansion has no usable level
    """
    theta = Fraction(theta)
    alpha = cf.value
    if not -alpha <= theta < 1 - alpha:
        raise ThetaRangeError(
            f"theta = {float(theta)} is outside [-alpha, 1-alpha) for alpha = {float(alpha)}",
            theta=float(theta),
            lower=float(-alpha),
            upper=float(1 - alpha),
        )
    if cf.depth < 1:
        raise InsufficientExpansionError(
            "Ostrowski expansion of a real needs at least two convergents",
            requested=2,
            limit=cf.depth + 1,
        )

    errors = cf.errors
    a = cf.digits
    digits: List[int] = []
    remainder = theta
    previous = 0
    for k in range(cf.depth):
        size = abs(errors[k])
        next_size = abs(errors[k + 1])
        signed = remainder if errors[k] > 0 else -remainder
        digit = 0 if signed < next_size else math.floor((signed - next_size) / size) + 1

        if k == 0:
            cap = a[0] - 1
        else:
            cap = a[k] - 1 if previous > 0 else a[k]
        digit = max(0, min(digit, cap))

        digits.append(digit)
        remainder -= digit * errors[k]
        previous = digit

    return OstrowskiDigits(tuple(digits), theta, cf, integer=False)


def nearest_integer_distance(x: Number) -> Number:
    """Distance from x to the nearest integer; exact for Fractions."""
    frac = x - math.floor(x)
    return min(frac, 1 - frac)


def recognize_rational(x: float, max_denominator: int = 1000, tol: float = 1e-12) -> Optional[Fraction]:
    """Return the small-denominator rational within tol of x, if any."""
    candidate = Fraction(x).limit_denominator(max_denominator)
    if abs(float(candidate) - x) <= tol:
        return candidate
    return None


def inhom_distance(
    l: int, cf: ContinuedFraction, theta: Number, cross_check: Optional[bool] = None
) -> float:
    """Return ||l*alpha - theta|| computed in exact arithmetic.

    For an inexact expansion the value is also computed from the Ostrowski
    digits of l and of theta reduced into [-alpha, 1-alpha), as
    ||sum_k (c_{k+1} - b_{k+1}) D_k||. The two paths differ by at most the
    exact digit remainder |theta - sum_k b_{k+1} D_k|; a gap beyond that
    plus 1e-12 raises NumericFailureError. ``cross_check`` defaults to on
    for inexact expansions; l >= q_K has no digits and skips the check.
    """
    theta = Fraction(theta)
    naive = nearest_integer_distance(l * cf.value - theta)

    if cross_check is None:
        cross_check = not cf.exact
    if not cross_check or cf.depth < 1:
        return float(naive)
    if l >= cf.denominators[-1]:
        logger.debug("Distance cross-check skipped beyond the expansion", l=l, q_last=cf.denominators[-1])
        return float(naive)

    target = target_for(cf.value, theta - math.floor(theta))
    c = ostrowski_integer(l, cf).digits
    expansion = ostrowski_real(target, cf)
    b = expansion.digits + (0,)
    total = sum(((ci - bi) * d for ci, bi, d in zip(c, b, cf.errors)), Fraction(0))
    digit_path = nearest_integer_distance(total)
    remainder = abs(target - expansion.reconstruct())
    if abs(digit_path - naive) > remainder + Fraction(CROSS_CHECK_ATOL):
        raise NumericFailureError(
            f"Distance paths disagree for l = {l}: {float(naive)} vs {float(digit_path)}",
            operation="inhom_distance",
        )
    return float(naive)


def _to_fixed(x: Number) -> int:
    return math.floor(Fraction(x) * (1 << FIXED_POINT_BITS)) % (1 << FIXED_POINT_BITS)


def _fixed_point_distances(alpha: Number, theta: Number, count: int) -> np.ndarray:
    """||l*alpha - theta|| for l = 0 .. count-1 as 64-bit fixed-point integers.

    uint64 arithmetic wraps modulo 2^64, which is reduction modulo 1.
    """
    ls = np.arange(count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        shifted = ls * np.uint64(_to_fixed(alpha)) - np.uint64(_to_fixed(theta))
        mirrored = np.uint64(0) - shifted
    return np.minimum(shifted, mirrored)


def distance_table(alpha: Number, theta: Number, count: int) -> np.ndarray:
    """Vectorised ||l*alpha - theta|| for l = 0 .. count-1 (absolute error ~ l * 2^-64)."""
    return _fixed_point_distances(alpha, theta, count).astype(float) / float(1 << FIXED_POINT_BITS)


def target_for(alpha: Number, beta: Number) -> Fraction:
    """Ostrowski target: beta when alpha < 1 - beta, otherwise beta - 1."""
    beta = Fraction(beta)
    return beta if Fraction(alpha) < 1 - beta else beta - 1


def ostrowski_partial_sums(cf: ContinuedFraction, theta: Number) -> List[int]:
    """Partial sums l_n = sum_{k<=n} b_{k+1} q_k, consecutive repeats removed."""
    sums = ostrowski_real(theta, cf).partial_sums()
    return [l for i, l in enumerate(sums) if i == 0 or l != sums[i - 1]]


def best_approx_sequence(
    cf: ContinuedFraction, beta: Number, config: Optional[SolverConfig] = None
) -> List[int]:
    """Best inhomogeneous approximations of beta by multiples of alpha.

    Candidates are the Ostrowski partial sums of the target (beta, or
    beta - 1 when alpha >= 1 - beta). A candidate is kept only when it is a
    record: no l <= min(l_n, dominance_cap) gets closer to beta, and beyond
    the cap it beats every earlier kept term. Early partial sums can fail
    this (alpha = pi - 3, beta = 0.3: l = 3 loses to l = 2) and are dropped.

    Args:
        cf: Inexact expansion of alpha
        beta: Target in (0, 1)
        config: Solver configuration (dominance_cap)

    Returns:
        Increasing list of l_n >= 1
    """
    config = config or _DEFAULT_CONFIG
    if cf.exact:
        raise ValidationError(
            "best_approx_sequence needs an irrational angle; rational angles use the finite scan",
            invariant="irrational",
        )
    beta = Fraction(beta)
    if not 0 < beta < 1:
        raise ValidationError(f"beta must lie in (0, 1), got {float(beta)}", invariant="beta-range")

    sums = [l for l in ostrowski_partial_sums(cf, target_for(cf.value, beta)) if l > 0]
    if not sums:
        return []

    limit = min(config.dominance_cap, sums[-1])
    table = _fixed_point_distances(cf.value, beta, limit + 1)
    prefix_min = np.minimum.accumulate(table[1:])
    scale = 1 << FIXED_POINT_BITS
    scan_min = Fraction(int(prefix_min[-1]), scale)

    emitted: List[int] = []
    incumbent: Optional[Fraction] = None
    for l in sums:
        if l <= limit:
            keep = table[l] <= prefix_min[l - 1]
            distance = Fraction(int(table[l]), scale)
        else:
            distance = nearest_integer_distance(l * cf.value - beta)
            keep = distance <= scan_min and (incumbent is None or distance <= incumbent)
        if keep:
            emitted.append(l)
            incumbent = distance

    if len(emitted) < len(sums):
        logger.debug(
            "Non-record partial sums dropped",
            candidates=len(sums),
            kept=len(emitted),
        )
    return emitted
