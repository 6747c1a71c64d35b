"""
Input parsing and report emission for switchrad.

This module reads matrix-set documents, builds the alpha grids for radius
scans and writes the JSON and CSV outputs of every command. Floats are
written with fixed formatting so identical runs give byte-identical files.
"""

import csv
import io
import json
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import structlog

from .. import __version__
from ..utils.config import SolverConfig
from ..utils.exceptions import InvalidConfigError, ParseError, ValidationError
from .diophantine import RealInput
from .exact_radius import (
    CanonicalParams,
    RadiusResult,
    SingularRotationSystem,
    example7_params,
    exact_radius,
)
from .matrix_core import MatrixSet
from .product_search import CertificateReport, newest_first, parse_product_label

logger = structlog.get_logger(__name__)

SCHEMA_VERSION = 1
TOOL_NAME = "switchrad"
SCAN_HEADER = ("alpha", "value", "case", "witness_l", "certified")
CERTIFICATE_HEADER = ("theta", "best_product", "norm")

_ALPHA_TOKEN_RE = re.compile(r"\s*cf:\s*\[[^\]]*\]|[^,]+", re.IGNORECASE)


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _read_document(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e.strerror}") from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(document, dict) or "matrices" not in document:
        raise ParseError(f"{path}: expected an object with a \"matrices\" array")
    if not isinstance(document["matrices"], list):
        raise ParseError(f"{path}: \"matrices\" must be an array of matrices")
    return document


def _role_index(roles: Dict[str, Any], name: str, m: int) -> int:
    value = roles.get(name)
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= m:
        raise ValidationError(
            f"roles.{name} must be a member number between 1 and {m}, got {value!r}",
            invariant="roles",
        )
    return value - 1


def parse_matrix_set(
    path: Union[str, Path],
    with_roles: bool = True,
    config: Optional[SolverConfig] = None,
) -> Union[MatrixSet, SingularRotationSystem]:
    """Read a matrix-set document.

    The document is {"matrices": [[[row], ...], ...]} with an optional
    {"roles": {"singular": i, "rotation": j}} naming 1-based members.

    Args:
        path: JSON file
        with_roles: Return a SingularRotationSystem when roles are present
        config: Tolerances for the System 1 checks

    Returns:
        MatrixSet, or SingularRotationSystem for role-annotated files
    """
    document = _read_document(path)
    try:
        matrix_set = MatrixSet.from_nested(document["matrices"])
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{path}: matrices must be nested arrays of numbers ({e})", invariant="shape") from e

    roles = document.get("roles")
    logger.debug("Matrix set parsed", path=str(path), members=matrix_set.m, dimension=matrix_set.n)
    if roles is None or not with_roles:
        return matrix_set
    if not isinstance(roles, dict):
        raise ValidationError("roles must be an object", invariant="roles")

    singular = _role_index(roles, "singular", matrix_set.m)
    rotation = _role_index(roles, "rotation", matrix_set.m)
    if singular == rotation:
        raise ValidationError("roles.singular and roles.rotation must differ", invariant="roles")
    return SingularRotationSystem.create(matrix_set[singular], matrix_set[rotation], config)


def emit_matrix_set(
    matrices: Union[MatrixSet, SingularRotationSystem],
    path: Optional[Union[str, Path]] = None,
) -> str:
    """Serialize a set (or a system with roles 1 and 2) to the input format."""
    document: Dict[str, Any]
    if isinstance(matrices, SingularRotationSystem):
        document = {
            "matrices": [matrices.m1.tolist(), matrices.m2.tolist()],
            "roles": {"singular": 1, "rotation": 2},
        }
    else:
        document = {"matrices": [member.tolist() for member in matrices.members]}
    text = json.dumps(document, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def build_report(command: str, config: SolverConfig, result: Dict[str, Any]) -> Dict[str, Any]:
    """Wrap a command result with the schema header and the config echo."""
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL_NAME,
        "version": __version__,
        "command": command,
        "config": config.to_dict(),
        "result": result,
    }


def render_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_output(text: str, out: Optional[Union[str, Path]], stream: Optional[TextIO] = None) -> None:
    """Write data to ``out`` or, when no path is given, to ``stream``."""
    if out is not None:
        Path(out).write_text(text)
        logger.info("Output written", path=str(out), size=len(text))
    elif stream is not None:
        stream.write(text)


def parse_products(text: str, m: Optional[int] = None) -> List[Tuple[int, ...]]:
    """Parse "M1M2,M1M2M2,..." into oldest-first 0-based sequences."""
    return [parse_product_label(part.strip(), m) for part in text.split(",") if part.strip()]


def compact_label(sequence: Sequence[int]) -> str:
    return "".join(f"M{i}" for i in newest_first(sequence))


@dataclass(frozen=True)
class ScanRow:
    """One alpha of a radius scan."""
    alpha: RealInput
    result: RadiusResult

    def cells(self) -> Tuple[str, str, str, str, str]:
        return (
            _fmt(float(self.alpha.fractional)),
            _fmt(self.result.value),
            self.result.case.value,
            str(self.result.witness_l),
            "true" if self.result.finiteness else "false",
        )


def scan_alphas(
    grid: Optional[int] = None,
    alphas: Optional[str] = None,
    random: Optional[int] = None,
    seed: int = 0,
    max_denominator: int = 199,
    decimal: bool = False,
) -> List[RealInput]:
    """Build the alpha list of a scan from exactly one source.

    ``grid`` gives k/(N+1) for k = 1..N; ``alphas`` is a comma-separated
    list of p/q, decimal or cf:[...] spellings; ``random`` draws N rationals
    with odd denominators up to ``max_denominator`` (or N uniform floats
    with ``decimal``).
    """
    sources = [s for s in (grid, alphas, random) if s is not None]
    if len(sources) != 1:
        raise InvalidConfigError("Give exactly one of --grid, --alphas or --random", field="alpha_grid")

    if grid is not None:
        if grid <= 0:
            raise InvalidConfigError(f"Grid size must be positive, got {grid}", field="grid")
        return [RealInput.rational(k, grid + 1) for k in range(1, grid + 1)]

    if alphas is not None:
        tokens = (part.strip() for part in _ALPHA_TOKEN_RE.findall(alphas))
        values = [RealInput.parse(token) for token in tokens if token]
        if not values:
            raise InvalidConfigError("The alpha list is empty", field="alphas")
        return values

    assert random is not None
    if random <= 0:
        raise InvalidConfigError(f"Sample count must be positive, got {random}", field="random")
    rng = np.random.default_rng(seed)
    if decimal:
        draws = rng.uniform(0.0, 1.0, size=random)
        return [RealInput.from_float(float(x)) for x in draws if 0.0 < x < 1.0]

    if max_denominator < 3:
        raise InvalidConfigError(
            f"max_denominator must be at least 3, got {max_denominator}", field="max_denominator"
        )
    odd = np.arange(3, max_denominator + 1, 2)
    denominators = rng.choice(odd, size=random)
    samples = []
    for q in denominators:
        value = Fraction(int(rng.integers(1, q)), int(q))
        samples.append(RealInput.rational(value.numerator, value.denominator))
    return samples


def run_scan(
    alphas: Sequence[RealInput],
    template: Optional[CanonicalParams] = None,
    config: Optional[SolverConfig] = None,
) -> List[ScanRow]:
    """Compute the radius for every alpha, keeping lambda2, rho3 and beta of the template.

    Without a template the diag(2, 0) plus rotation family is used.
    """
    if not alphas:
        raise InvalidConfigError("The alpha grid is empty", field="alpha_grid")
    rows = []
    for alpha in alphas:
        params = template.with_alpha(alpha) if template is not None else example7_params(alpha)
        rows.append(ScanRow(alpha, exact_radius(params, alpha, config)))
    logger.info("Scan finished", rows=len(rows), zeros=sum(1 for r in rows if r.result.value == 0.0))
    return rows


def scan_csv(rows: Sequence[ScanRow]) -> str:
    return render_csv(SCAN_HEADER, (row.cells() for row in rows))


def certificate_csv(report: CertificateReport) -> str:
    """Per-theta winner rows: theta,best_product,norm."""
    labels = [compact_label(p) for p in report.products]
    rows = (
        (_fmt(float(theta)), labels[winner] if winner >= 0 else "", _fmt(float(norm)) if winner >= 0 else "")
        for theta, winner, norm in zip(report.thetas, report.winners, report.norms)
    )
    return render_csv(CERTIFICATE_HEADER, rows)
