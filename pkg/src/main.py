"""
Main entry point for switchrad.

This module configures logging and provides the ``switchrad`` command
group: radius, scan, estimate, search and certify. Data goes to stdout
(or --out); logs and diagnostics go to stderr.
"""

import logging
import os
import sys
from functools import wraps
from typing import Any, Callable, Dict, Optional

import click
import structlog
from dotenv import load_dotenv

from src import __version__
from src.services.diophantine import RealInput
from src.services.exact_radius import (
    RadiusCase,
    RadiusResult,
    SingularRotationSystem,
    canonicalize,
    radius_example7,
    system_radius,
)
from src.services.matrix_core import MatrixSet
from src.services.product_search import (
    enumerate_rates,
    format_sequence,
    optimal_sequence_search,
    stabilizability_certificate,
    subset_consistency,
    theorem1_lower_bound,
)
from src.services.reporting import (
    SCAN_HEADER,
    ScanRow,
    build_report,
    certificate_csv,
    parse_matrix_set,
    parse_products,
    render_csv,
    render_json,
    run_scan,
    scan_alphas,
    scan_csv,
    write_output,
)
from src.utils.config import SolverConfig, load_config
from src.utils.exceptions import InvalidConfigError, NilpotentSystemError, SwitchRadError, ValidationError


def setup_logging(level: Optional[str] = None) -> None:
    """Configure structured JSON logging on stderr."""
    log_level = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    numeric = getattr(logging, log_level, None)
    if not isinstance(numeric, int):
        raise InvalidConfigError(f"Unknown log level {log_level!r}", field="log_level")

    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(numeric),
        logger_factory=lambda *args: structlog.PrintLogger(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def handle_errors(command: Callable[..., None]) -> Callable[..., None]:
    """Map SwitchRadError to its exit code with the message on stderr."""

    @wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            command(*args, **kwargs)
        except SwitchRadError as e:
            structlog.get_logger(__name__).error(
                "Command failed", error=str(e), error_type=type(e).__name__, exit_code=e.exit_code
            )
            click.echo(f"Error: {e}", err=True)
            sys.exit(e.exit_code)

    return wrapper


def _config(ctx: click.Context, **overrides: Any) -> SolverConfig:
    return load_config(**ctx.obj, **overrides)


def _emit(command: str, config: SolverConfig, result: Dict[str, Any],
          out: Optional[str], csv_text: Optional[str] = None) -> None:
    if csv_text is not None:
        text = csv_text
    else:
        text = render_json(build_report(command, config, result))
    write_output(text, out, click.get_text_stream("stdout"))


def _load_set(path: str, config: SolverConfig) -> MatrixSet:
    matrix_set = parse_matrix_set(path, with_roles=False, config=config)
    assert isinstance(matrix_set, MatrixSet)
    return matrix_set


FORMAT_OPTION = click.option(
    "--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True,
    help="Output format.",
)
OUT_OPTION = click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
                          help="Write data to FILE instead of stdout.")
SET_OPTION = click.option("--set", "set_path", type=click.Path(exists=True, dir_okay=False), required=True,
                          help="JSON matrix-set file.")


@click.group()
@click.version_option(__version__, prog_name="switchrad")
@click.option("--precision", type=int, default=None, help="Decimal digits of working precision (>= 15).")
@click.option("--tau-sv", type=float, default=None, help="Relative singular-value tolerance.")
@click.option("--tau-eig", type=float, default=None, help="Eigenvalue discriminant tolerance.")
@click.option("--workers", type=int, default=None, help="Worker threads for product enumeration.")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default from LOG_LEVEL).")
@click.pass_context
def cli(ctx: click.Context, precision: Optional[int], tau_sv: Optional[float], tau_eig: Optional[float],
        workers: Optional[int], log_level: Optional[str]) -> None:
    """Stabilizability radius of switched linear systems with singular matrices."""
    load_dotenv()
    try:
        setup_logging(log_level)
    except InvalidConfigError as e:
        raise click.BadParameter(str(e), param_hint="--log-level") from e
    ctx.obj = {
        "precision_digits": precision,
        "tau_sv": tau_sv,
        "tau_eig": tau_eig,
        "workers": workers,
    }


@cli.command()
@click.option("--system", "system_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with roles {singular, rotation}.")
@click.option("--alpha", default=None, help="Rotation angle in units of pi: p/q, decimal or cf:[a1,...].")
@click.option("--l-cap", type=int, default=None, help="Direct-scan bound for irrational angles.")
@FORMAT_OPTION
@OUT_OPTION
@click.pass_context
@handle_errors
def radius(ctx: click.Context, system_path: Optional[str], alpha: Optional[str], l_cap: Optional[int],
           fmt: str, out: Optional[str]) -> None:
    """Exact stabilizability radius of a singular-plus-rotation pair.

    Without --system the diag(2, 0) plus rotation-by-alpha*pi system is used.
    """
    config = _config(ctx, l_cap=l_cap)
    alpha_input = RealInput.parse(alpha) if alpha is not None else None

    params = None
    if system_path is not None:
        system = parse_matrix_set(system_path, config=config)
        if not isinstance(system, SingularRotationSystem):
            raise ValidationError("--system needs a file with roles {singular, rotation}", invariant="roles")
        params, result = system_radius(system, alpha_input, config)
    elif alpha_input is not None:
        result = radius_example7(alpha_input, config)
    else:
        raise click.UsageError("Give --system FILE, --alpha VALUE or both")

    if alpha_input is None and params is not None:
        alpha_input = RealInput.from_float(params.alpha)

    csv_text = None
    if fmt == "csv":
        rows = [ScanRow(alpha_input, result).cells()] if alpha_input is not None else []
        csv_text = render_csv(SCAN_HEADER, rows)
    _emit("radius", config, {
        "alpha": alpha_input.text if alpha_input is not None else None,
        "params": params.to_dict() if params is not None else None,
        "radius": result.to_dict(),
    }, out, csv_text)


@cli.command()
@click.option("--grid", type=int, default=None, help="Use alpha = k/(N+1), k = 1..N.")
@click.option("--alphas", default=None, help="Comma-separated alpha list.")
@click.option("--random", "random_count", type=int, default=None, help="Draw N random angles.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-denominator", type=int, default=199, show_default=True,
              help="Largest odd denominator for --random.")
@click.option("--decimal", is_flag=True,
              help="With --random, draw uniform floats instead of odd-denominator rationals.")
@click.option("--system", "system_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Template system; its lambda2, rho3 and beta are kept.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv", show_default=True)
@OUT_OPTION
@click.pass_context
@handle_errors
def scan(ctx: click.Context, grid: Optional[int], alphas: Optional[str], random_count: Optional[int],
         seed: int, max_denominator: int, decimal: bool, system_path: Optional[str], fmt: str,
         out: Optional[str]) -> None:
    """Radius over a grid of rotation angles (CSV: alpha,value,case,witness_l,certified)."""
    config = _config(ctx)
    grid_alphas = scan_alphas(grid, alphas, random_count, seed, max_denominator, decimal)

    template = None
    nilpotent = False
    if system_path is not None:
        system = parse_matrix_set(system_path, config=config)
        if not isinstance(system, SingularRotationSystem):
            raise ValidationError("--system needs a file with roles {singular, rotation}", invariant="roles")
        try:
            template = canonicalize(system, config)
        except NilpotentSystemError:
            nilpotent = True

    if nilpotent:
        rows = [ScanRow(a, RadiusResult(0.0, RadiusCase.EXACT_ZERO, 0)) for a in grid_alphas]
    else:
        rows = run_scan(grid_alphas, template, config)

    csv_text = scan_csv(rows) if fmt == "csv" else None
    _emit("scan", config, {
        "template": template.to_dict() if template is not None else None,
        "rows": [{"alpha": r.alpha.text, **r.result.to_dict()} for r in rows],
    }, out, csv_text)


@cli.command()
@SET_OPTION
@click.option("--depth", type=int, required=True, help="Largest product length T.")
@click.option("--subsets", is_flag=True, help="Also compare every proper subset.")
@click.option("--subradius", type=float, default=None,
              help="Known lower estimate of the joint spectral subradius for the lower bound.")
@FORMAT_OPTION
@OUT_OPTION
@click.pass_context
@handle_errors
def estimate(ctx: click.Context, set_path: str, depth: int, subsets: bool, subradius: Optional[float],
             fmt: str, out: Optional[str]) -> None:
    """Joint-spectral rate estimates over all products up to --depth."""
    config = _config(ctx)
    matrix_set = _load_set(set_path, config)
    report = enumerate_rates(matrix_set, depth, config)

    result = report.to_dict()
    if subradius is not None:
        result["theorem1_lower_bound"] = theorem1_lower_bound(subradius, matrix_set.m)
    if subsets:
        result["subsets"] = subset_consistency(matrix_set, depth, config).to_dict()

    csv_text = None
    if fmt == "csv":
        extrema = (("min_norm_rate", report.min_norm), ("max_norm_rate", report.max_norm),
                   ("min_sr_rate", report.min_sr), ("max_sr_rate", report.max_sr))
        csv_text = render_csv(
            ("quantity", "rate", "depth", "sequence"),
            [(name, f"{e.rate:.12g}", e.depth, format_sequence(e.sequence)) for name, e in extrema],
        )
    _emit("estimate", config, result, out, csv_text)


@cli.command()
@SET_OPTION
@click.option("--length", type=int, required=True, help="Product length t.")
@click.option("--objective", type=click.Choice(["sr", "norm"]), default="sr", show_default=True)
@FORMAT_OPTION
@OUT_OPTION
@click.pass_context
@handle_errors
def search(ctx: click.Context, set_path: str, length: int, objective: str, fmt: str, out: Optional[str]) -> None:
    """Optimal switching sequence of a given length."""
    config = _config(ctx)
    matrix_set = _load_set(set_path, config)
    result = optimal_sequence_search(matrix_set, length, objective, config)

    csv_text = None
    if fmt == "csv":
        csv_text = render_csv(
            ("sequence", "value", "rate", "ties"),
            [(result.label, f"{result.value:.12g}", f"{result.rate:.12g}", result.tie_count)],
        )
    _emit("search", config, result.to_dict(), out, csv_text)


@cli.command()
@SET_OPTION
@click.option("--products", default="", help='Newest-first product labels, e.g. "M1M2,M1M2M2".')
@click.option("--grid", "grid_size", type=int, default=10_000, show_default=True, help="Theta samples on [0, pi].")
@click.option("--margin", type=float, default=None, help="Require norms below 1 - margin.")
@FORMAT_OPTION
@OUT_OPTION
@click.pass_context
@handle_errors
def certify(ctx: click.Context, set_path: str, products: str, grid_size: int, margin: Optional[float],
            fmt: str, out: Optional[str]) -> None:
    """Pointwise stabilizability certificate for a 2x2 set."""
    config = _config(ctx, certificate_margin=margin)
    matrix_set = _load_set(set_path, config)
    sequences = parse_products(products, matrix_set.m)
    report = stabilizability_certificate(matrix_set, sequences, grid_size, config=config)

    csv_text = certificate_csv(report) if fmt == "csv" else None
    _emit("certify", config, report.to_dict(), out, csv_text)


def main() -> None:
    """Console entry point."""
    cli(prog_name="switchrad")


if __name__ == "__main__":
    main()
