"""Exhaustive exploration of matrix products.

Products are enumerated level by level: the depth-t product for the
oldest-first sequence (s_1, ..., s_t) is M_{s_t} ... M_{s_1}, stored at
index sum_k s_k * m^(t-k), so array order is lexicographic order of the
sequences. Work is partitioned by the first (oldest) member and each
branch runs on a worker thread; reductions merge branch candidates so the
result does not depend on the worker count.
"""

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import integrate, special

from ..utils.config import SolverConfig
from ..utils.exceptions import BudgetExceededError, ParseError, ValidationError
from .matrix_core import (
    MatrixSet,
    batch_operator_norm,
    batch_spectral_radius,
    matrix_rank,
    operator_norm,
    spectral_radius,
)

logger = structlog.get_logger(__name__)

OBJECTIVES = ("sr", "norm")
MAX_REPORTED_TIES = 64
_LABEL_RE = re.compile(r"M(\d+)")

_DEFAULT_CONFIG = SolverConfig()


def product_of(matrix_set: MatrixSet, sequence: Sequence[int]) -> np.ndarray:
    """Return M_{s_t} ... M_{s_1} for the oldest-first 0-based sequence s."""
    result = np.eye(matrix_set.n)
    for index in sequence:
        if not 0 <= index < matrix_set.m:
            raise ValidationError(
                f"Member index {index} is outside the set of {matrix_set.m} matrices",
                invariant="member-index",
            )
        result = matrix_set[index] @ result
    return result


def newest_first(sequence: Sequence[int]) -> Tuple[int, ...]:
    """1-based member indices with the most recent matrix first."""
    return tuple(i + 1 for i in reversed(sequence))


def format_sequence(sequence: Sequence[int]) -> str:
    """Render a sequence in product notation, e.g. "M3 M2 M1"."""
    return " ".join(f"M{i}" for i in newest_first(sequence))


def parse_product_label(label: str, m: Optional[int] = None) -> Tuple[int, ...]:
    """Parse a newest-first product label such as "M1M2M2" into a sequence.

    Returns:
        Oldest-first 0-based member indices
    """
    compact = label.replace(" ", "").replace("*", "")
    if not compact or _LABEL_RE.sub("", compact):
        raise ParseError(f"Cannot read product label {label!r}; expected e.g. M1M2M2")
    indices = [int(token) for token in _LABEL_RE.findall(compact)]
    for index in indices:
        if index < 1 or (m is not None and index > m):
            raise ValidationError(
                f"Product label {label!r} refers to M{index}, which is not in the set",
                invariant="member-index",
            )
    return tuple(i - 1 for i in reversed(indices))


def _decode(index: int, depth: int, m: int) -> Tuple[int, ...]:
    digits = []
    for _ in range(depth):
        index, digit = divmod(index, m)
        digits.append(digit)
    return tuple(reversed(digits))


@dataclass
class _LevelCandidates:
    """Extremum of one level plus every index inside its tie window."""
    best: float
    values: np.ndarray
    indices: np.ndarray


def _window(values: np.ndarray, offset: int, minimize: bool, slack: float) -> _LevelCandidates:
    if minimize:
        best = float(values.min())
        mask = values <= best * slack
    else:
        best = float(values.max())
        mask = values >= best / slack
    indices = np.flatnonzero(mask)
    return _LevelCandidates(best, values[indices], indices + offset)


def _merge(parts: Sequence[_LevelCandidates], minimize: bool, slack: float) -> _LevelCandidates:
    best = min(p.best for p in parts) if minimize else max(p.best for p in parts)
    values = np.concatenate([p.values for p in parts])
    indices = np.concatenate([p.indices for p in parts])
    mask = values <= best * slack if minimize else values >= best / slack
    order = np.argsort(indices[mask], kind="stable")
    return _LevelCandidates(best, values[mask][order], indices[mask][order])


@dataclass
class _BranchResult:
    sr_min: List[_LevelCandidates] = field(default_factory=list)
    sr_max: List[_LevelCandidates] = field(default_factory=list)
    norm_min: Optional[_LevelCandidates] = None
    norm_max: Optional[_LevelCandidates] = None
    visited: List[int] = field(default_factory=list)


def _explore_branch(
    stack: np.ndarray, first: int, depth: int, config: SolverConfig, spectral: bool
) -> _BranchResult:
    """Enumerate every product whose oldest member is ``first``."""
    m = stack.shape[0]
    result = _BranchResult()
    products = stack[first:first + 1]
    for t in range(1, depth + 1):
        if t > 1:
            products = np.einsum("jab,pbc->pjac", stack, products).reshape(-1, *stack.shape[1:])
        offset = first * m ** (t - 1)
        slack = (1.0 + config.tie_rtol) ** t
        result.visited.append(products.shape[0])
        if spectral:
            radii = batch_spectral_radius(products, config)
            result.sr_min.append(_window(radii, offset, True, slack))
            result.sr_max.append(_window(radii, offset, False, slack))
        if t == depth:
            norms = batch_operator_norm(products)
            result.norm_min = _window(norms, offset, True, slack)
            result.norm_max = _window(norms, offset, False, slack)
    return result


def _explore(
    matrix_set: MatrixSet, depth: int, config: SolverConfig, spectral: bool = True
) -> List[_BranchResult]:
    if depth < 1:
        raise ValidationError(f"Depth must be at least 1, got {depth}", invariant="depth")
    requested = matrix_set.m ** depth
    if requested > config.enumeration_guard:
        raise BudgetExceededError(
            f"{matrix_set.m}^{depth} = {requested} products exceed the enumeration guard "
            f"{config.enumeration_guard}; use a smaller depth",
            requested=requested,
            limit=config.enumeration_guard,
        )

    stack = matrix_set.stack()
    logger.info(
        "Enumerating products",
        members=matrix_set.m,
        dimension=matrix_set.n,
        depth=depth,
        workers=config.workers,
    )
    branches = range(matrix_set.m)
    if config.workers == 1:
        return [_explore_branch(stack, b, depth, config, spectral) for b in branches]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda b: _explore_branch(stack, b, depth, config, spectral), branches))


@dataclass(frozen=True)
class RateExtremum:
    """An extremal per-step rate and the sequence attaining it.

    ``sequence`` is oldest-first with 0-based member indices; ``ties`` counts
    the sequences within the tie tolerance of ``rate``.
    """
    rate: float
    sequence: Tuple[int, ...]
    ties: int = 1

    @property
    def depth(self) -> int:
        return len(self.sequence)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rate": self.rate,
            "depth": self.depth,
            "sequence": list(newest_first(self.sequence)),
            "label": format_sequence(self.sequence),
            "ties": self.ties,
        }


def _level_extremum(candidates: _LevelCandidates, depth: int, m: int) -> RateExtremum:
    rate = candidates.best ** (1.0 / depth)
    return RateExtremum(rate, _decode(int(candidates.indices[0]), depth, m), len(candidates.indices))


def _across_levels(
    levels: Sequence[_LevelCandidates], m: int, minimize: bool, rtol: float
) -> RateExtremum:
    rates = [c.best ** (1.0 / t) for t, c in enumerate(levels, start=1)]
    best = min(rates) if minimize else max(rates)
    winners: List[Tuple[int, ...]] = []
    ties = 0
    for t, candidates in enumerate(levels, start=1):
        level_rates = candidates.values ** (1.0 / t)
        inside = level_rates <= best * (1.0 + rtol) if minimize else level_rates >= best / (1.0 + rtol)
        hits = candidates.indices[inside]
        if hits.size:
            ties += int(hits.size)
            winners.append(_decode(int(hits[0]), t, m))
    return RateExtremum(best, min(winners), ties)


@dataclass(frozen=True)
class ProductSearchReport:
    """Joint-spectral estimates from an exhaustive enumeration to depth T.

    Norm rates are taken over the depth-T products; spectral-radius rates
    over every depth 1 <= t <= T. ``s_t`` is the smallest operator norm at
    depth T.
    """
    depth: int
    min_norm: RateExtremum
    max_norm: RateExtremum
    min_sr: RateExtremum
    max_sr: RateExtremum
    s_t: float
    products_visited: Tuple[int, ...]

    @property
    def min_norm_rate(self) -> float:
        return self.min_norm.rate

    @property
    def max_norm_rate(self) -> float:
        return self.max_norm.rate

    @property
    def min_sr_rate(self) -> float:
        return self.min_sr.rate

    @property
    def max_sr_rate(self) -> float:
        return self.max_sr.rate

    def to_dict(self) -> Dict[str, Any]:
        return {
            "depth": self.depth,
            "min_norm_rate": self.min_norm.to_dict(),
            "max_norm_rate": self.max_norm.to_dict(),
            "min_sr_rate": self.min_sr.to_dict(),
            "max_sr_rate": self.max_sr.to_dict(),
            "S_T": self.s_t,
            "products_visited": list(self.products_visited),
        }


def enumerate_rates(
    matrix_set: MatrixSet, depth: int, config: Optional[SolverConfig] = None
) -> ProductSearchReport:
    """Exhaustive joint-spectral estimates over all products up to ``depth``.

    Args:
        matrix_set: Matrices to switch between
        depth: Largest product length T (m^T must fit the enumeration guard)
        config: Solver configuration

    Returns:
        ProductSearchReport with lexicographically smallest argmin/argmax
    """
    config = config or _DEFAULT_CONFIG
    branches = _explore(matrix_set, depth, config)
    m = matrix_set.m
    rtol = config.tie_rtol
    sr_min = [_merge([b.sr_min[t - 1] for b in branches], True, (1.0 + rtol) ** t) for t in range(1, depth + 1)]
    sr_max = [_merge([b.sr_max[t - 1] for b in branches], False, (1.0 + rtol) ** t) for t in range(1, depth + 1)]
    norm_min = _merge([b.norm_min for b in branches if b.norm_min is not None], True, (1.0 + rtol) ** depth)
    norm_max = _merge([b.norm_max for b in branches if b.norm_max is not None], False, (1.0 + rtol) ** depth)
    visited = tuple(sum(b.visited[t] for b in branches) for t in range(depth))

    report = ProductSearchReport(
        depth=depth,
        min_norm=_level_extremum(norm_min, depth, m),
        max_norm=_level_extremum(norm_max, depth, m),
        min_sr=_across_levels(sr_min, m, True, rtol),
        max_sr=_across_levels(sr_max, m, False, rtol),
        s_t=norm_min.best,
        products_visited=visited,
    )
    logger.info(
        "Enumeration finished",
        depth=depth,
        min_sr_rate=report.min_sr_rate,
        min_norm_rate=report.min_norm_rate,
        visited=sum(visited),
    )
    return report


def S_of_T(matrix_set: MatrixSet, depth: int, config: Optional[SolverConfig] = None) -> float:
    """Smallest largest-singular-value over the depth-T products."""
    config = config or _DEFAULT_CONFIG
    branches = _explore(matrix_set, depth, config, spectral=False)
    return min(b.norm_min.best for b in branches if b.norm_min is not None)


def theorem1_lower_bound(subradius_estimate: float, m: int) -> float:
    """Lower bound rho_check / m on the stabilizability radius.

    The result bounds the radius from below only when ``subradius_estimate``
    is a valid lower estimate of the joint spectral subradius; finite-depth
    enumeration rates bound the subradius from above.
    """
    if m < 1:
        raise ValidationError(f"The set must have at least one member, got m = {m}", invariant="m")
    if subradius_estimate < 0 or not math.isfinite(subradius_estimate):
        raise ValidationError(
            f"Subradius estimate must be a nonnegative real, got {subradius_estimate}",
            invariant="nonnegative",
        )
    return subradius_estimate / m


@dataclass(frozen=True)
class SequenceSearchResult:
    """Optimal depth-t switching sequence for one objective."""
    sequence: Tuple[int, ...]
    value: float
    objective: str
    ties: Tuple[Tuple[int, ...], ...] = ()
    tie_count: int = 1

    @property
    def rate(self) -> float:
        return self.value ** (1.0 / len(self.sequence))

    @property
    def newest_first(self) -> Tuple[int, ...]:
        return newest_first(self.sequence)

    @property
    def label(self) -> str:
        return format_sequence(self.sequence)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "objective": self.objective,
            "length": len(self.sequence),
            "sequence": list(self.newest_first),
            "label": self.label,
            "value": self.value,
            "rate": self.rate,
            "tie_count": self.tie_count,
            "ties": [format_sequence(s) for s in self.ties],
        }


def optimal_sequence_search(
    matrix_set: MatrixSet,
    length: int,
    objective: str = "sr",
    config: Optional[SolverConfig] = None,
) -> SequenceSearchResult:
    """Exhaustive argmin of the spectral radius or norm over depth-t products.

    Ties within tie_rtol resolve to the lexicographically smallest
    oldest-first sequence; every tied sequence is listed (up to 64).
    """
    config = config or _DEFAULT_CONFIG
    if objective not in OBJECTIVES:
        raise ValidationError(f"Objective must be one of {OBJECTIVES}, got {objective!r}", invariant="objective")

    spectral = objective == "sr"
    branches = _explore(matrix_set, length, config, spectral=spectral)
    slack = (1.0 + config.tie_rtol) ** length
    if spectral:
        merged = _merge([b.sr_min[length - 1] for b in branches], True, slack)
    else:
        merged = _merge([b.norm_min for b in branches if b.norm_min is not None], True, slack)

    ties = tuple(_decode(int(i), length, matrix_set.m) for i in merged.indices[:MAX_REPORTED_TIES])
    result = SequenceSearchResult(
        sequence=ties[0],
        value=merged.best,
        objective=objective,
        ties=ties,
        tie_count=len(merged.indices),
    )
    if result.tie_count > 1:
        logger.info("Optimal value shared by several sequences", ties=result.tie_count, chosen=result.label)
    return result


def reg_inc_beta(h: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I(h; a, b).

    The integral of t^(a-1) (1-t)^(b-1) over [0, h] is computed with the
    substitution u = t^a, which removes the singularity at 0. For h > 1/2
    the symmetry I(h; a, b) = 1 - I(1-h; b, a) keeps the integration away
    from the singularity at 1.
    """
    if not 0.0 <= h <= 1.0:
        raise ValidationError(f"h must lie in [0, 1], got {h}", invariant="unit-interval")
    if a <= 0 or b <= 0:
        raise ValidationError(f"Shape parameters must be positive, got a={a}, b={b}", invariant="positive")
    if h == 0.0:
        return 0.0
    if h == 1.0:
        return 1.0
    if h > 0.5:
        return 1.0 - reg_inc_beta(1.0 - h, b, a)

    integral, _ = integrate.quad(
        lambda u: (1.0 - u ** (1.0 / a)) ** (b - 1.0),
        0.0,
        h ** a,
        epsabs=1e-14,
        epsrel=1e-12,
        limit=200,
    )
    return min(1.0, max(0.0, integral / (a * special.beta(a, b))))


def sphere_area(n: int) -> float:
    """Surface area 2 pi^(n/2) / Gamma(n/2) of the unit sphere in R^n."""
    if n < 1:
        raise ValidationError(f"Dimension must be positive, got {n}", invariant="dimension")
    return float(2.0 * math.pi ** (n / 2.0) / special.gamma(n / 2.0))


def cap_segment_area(r: float, s_n: float, n: int) -> float:
    """Upper bound |S^(n-1)| I(r^2/s_n^2; 1/2, (n-1)/2) on the area of the
    unit vectors a matrix with largest singular value s_n maps into the
    radius-r ball.
    """
    if n < 2:
        raise ValidationError(f"Dimension must be at least 2, got {n}", invariant="dimension")
    if s_n <= 0 or r < 0:
        raise ValidationError(f"Need r >= 0 and s_n > 0, got r={r}, s_n={s_n}", invariant="positive")
    full = sphere_area(n)
    if r > s_n:
        logger.warning("Cap radius exceeds the largest singular value; clamped to the full sphere", r=r, s_n=s_n)
        return full
    return full * reg_inc_beta((r / s_n) ** 2, 0.5, (n - 1) / 2.0)


@dataclass(frozen=True)
class CertificateReport:
    """Per-angle check that some listed product maps x0(theta) inside the unit ball.

    ``winners`` holds the index (into ``products``) of the shortest-norm
    product per sample, or -1 when no product was given.
    """
    thetas: np.ndarray
    winners: np.ndarray
    norms: np.ndarray
    products: Tuple[Tuple[int, ...], ...]
    covered: bool
    uncovered_intervals: Tuple[Tuple[float, float], ...]
    margin: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid_size": int(self.thetas.size),
            "products": [format_sequence(p) for p in self.products],
            "margin": self.margin,
            "covered": self.covered,
            "worst_norm": float(np.max(self.norms)) if self.products else None,
            "uncovered_intervals": [list(iv) for iv in self.uncovered_intervals],
            "wins": {
                format_sequence(p): int(np.sum(self.winners == i)) for i, p in enumerate(self.products)
            },
        }


def _runs(mask: np.ndarray, thetas: np.ndarray) -> Tuple[Tuple[float, float], ...]:
    if not mask.any():
        return ()
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return tuple((float(thetas[s]), float(thetas[e])) for s, e in zip(starts, ends))


def stabilizability_certificate(
    matrix_set: MatrixSet,
    products: Sequence[Sequence[int]],
    grid_size: int,
    margin: Optional[float] = None,
    config: Optional[SolverConfig] = None,
) -> CertificateReport:
    """Check that for every x0 = (cos theta, sin theta), theta in [0, pi], one
    of the listed products has ||A x0|| < 1 - margin.

    Args:
        matrix_set: 2x2 matrix set
        products: Oldest-first 0-based sequences
        grid_size: Number of theta samples (endpoints included)
        margin: Required gap below 1 (defaults to config.certificate_margin)
        config: Solver configuration

    Returns:
        CertificateReport
    """
    config = config or _DEFAULT_CONFIG
    margin = config.certificate_margin if margin is None else margin
    if matrix_set.n != 2:
        raise ValidationError("Certificates are defined for 2x2 sets only", invariant="dimension")
    if grid_size < 2:
        raise ValidationError(f"Grid size must be at least 2, got {grid_size}", invariant="grid")
    if not 0.0 <= margin < 1.0:
        raise ValidationError(f"Margin must lie in [0, 1), got {margin}", invariant="margin")

    thetas = np.linspace(0.0, math.pi, grid_size)
    products = tuple(tuple(p) for p in products)
    if not products:
        logger.warning("No products given; certificate is trivially uncovered")
        return CertificateReport(
            thetas=thetas,
            winners=np.full(grid_size, -1),
            norms=np.full(grid_size, np.inf),
            products=(),
            covered=False,
            uncovered_intervals=((0.0, math.pi),),
            margin=margin,
        )

    points = np.vstack([np.cos(thetas), np.sin(thetas)])
    matrices = np.stack([product_of(matrix_set, p) for p in products])
    norms = np.linalg.norm(matrices @ points, axis=1)
    winners = np.argmin(norms, axis=0)
    best = norms[winners, np.arange(grid_size)]
    uncovered = best >= 1.0 - margin

    report = CertificateReport(
        thetas=thetas,
        winners=winners,
        norms=best,
        products=products,
        covered=not bool(uncovered.any()),
        uncovered_intervals=_runs(uncovered, thetas),
        margin=margin,
    )
    logger.info(
        "Certificate evaluated",
        products=len(products),
        grid=grid_size,
        covered=report.covered,
        worst_norm=float(best.max()),
    )
    return report


def image_dimension_profile(
    matrix_set: MatrixSet, sequence: Sequence[int], config: Optional[SolverConfig] = None
) -> List[int]:
    """Rank of each partial product M_{s_k} ... M_{s_1}, k = 1 .. t."""
    profile = []
    for k in range(1, len(sequence) + 1):
        profile.append(matrix_rank(product_of(matrix_set, sequence[:k]), config))
    return profile


@dataclass(frozen=True)
class SubsetConsistency:
    """Depth-T minimal spectral rate of the full set against each proper subset.

    A member is essential when every subset without it has a strictly larger
    rate.
    """
    depth: int
    full_rate: float
    subset_rates: Tuple[Tuple[Tuple[int, ...], float], ...]
    essential: Tuple[int, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "depth": self.depth,
            "full_rate": self.full_rate,
            "subsets": [
                {"members": [f"M{i + 1}" for i in members], "min_sr_rate": rate}
                for members, rate in self.subset_rates
            ],
            "essential": [f"M{i + 1}" for i in self.essential],
        }


def subset_consistency(
    matrix_set: MatrixSet, depth: int, config: Optional[SolverConfig] = None
) -> SubsetConsistency:
    """Compare the min spectral rate of every proper nonempty subset with the full set."""
    config = config or _DEFAULT_CONFIG
    full_rate = enumerate_rates(matrix_set, depth, config).min_sr_rate

    rates = []
    for size in range(1, matrix_set.m):
        for members in combinations(range(matrix_set.m), size):
            subset = MatrixSet(tuple(matrix_set[i] for i in members))
            rates.append((members, enumerate_rates(subset, depth, config).min_sr_rate))

    threshold = full_rate * (1.0 + config.tie_rtol)
    essential = tuple(
        i for i in range(matrix_set.m)
        if all(rate > threshold for members, rate in rates if i not in members)
    )
    return SubsetConsistency(depth, full_rate, tuple(rates), essential)


@dataclass(frozen=True)
class PointwiseTrajectory:
    """State-dependent law: per cycle, the product that most shrinks the state."""
    choices: Tuple[int, ...]
    norms: Tuple[float, ...]
    steps: int

    @property
    def rate(self) -> float:
        """Average per-step rate over the whole trajectory."""
        if self.steps == 0 or self.norms[0] == 0.0:
            return 0.0
        return (self.norms[-1] / self.norms[0]) ** (1.0 / self.steps)


def pointwise_law_trajectory(
    matrix_set: MatrixSet,
    products: Sequence[Sequence[int]],
    x0: Iterable[float],
    cycles: int,
) -> PointwiseTrajectory:
    """Repeatedly apply whichever listed product gives the smallest ||A x||.

    Stops early once the state reaches 0. ``norms`` starts with ||x0||.
    """
    if not products:
        raise ValidationError("At least one product is needed", invariant="products")
    x = np.asarray(list(x0), dtype=float)
    if x.shape != (matrix_set.n,) or not np.any(x):
        raise ValidationError(f"x0 must be a nonzero {matrix_set.n}-vector", invariant="x0")

    matrices = [product_of(matrix_set, p) for p in products]
    lengths = [len(p) for p in products]
    choices: List[int] = []
    norms = [float(np.linalg.norm(x))]
    steps = 0
    for _ in range(cycles):
        candidates = [a @ x for a in matrices]
        sizes = [float(np.linalg.norm(c)) for c in candidates]
        choice = int(np.argmin(sizes))
        x = candidates[choice]
        choices.append(choice)
        norms.append(sizes[choice])
        steps += lengths[choice]
        if sizes[choice] == 0.0:
            break
    return PointwiseTrajectory(tuple(choices), tuple(norms), steps)


def replay_rate(matrix_set: MatrixSet, sequence: Sequence[int], objective: str = "sr") -> float:
    """Recompute the per-step rate of one sequence from its product."""
    product = product_of(matrix_set, sequence)
    value = spectral_radius(product) if objective == "sr" else operator_norm(product)
    return value ** (1.0 / len(sequence))
