"""Solver configuration for switchrad.

This module provides the tolerance and budget settings shared by all
computations, and loads overrides from ``SWITCHRAD_*`` environment
variables.
"""

import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

import structlog

from .exceptions import InvalidConfigError

logger = structlog.get_logger(__name__)

# Environment variable -> (config field, parser)
ENV_FIELDS = {
    "SWITCHRAD_PRECISION": ("precision_digits", int),
    "SWITCHRAD_TAU_SV": ("tau_sv", float),
    "SWITCHRAD_TAU_EIG": ("tau_eig", float),
    "SWITCHRAD_L_CAP": ("l_cap", int),
    "SWITCHRAD_MAX_TERMS": ("max_terms", int),
    "SWITCHRAD_ENUM_GUARD": ("enumeration_guard", int),
    "SWITCHRAD_WORKERS": ("workers", int),
}


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and budgets for the radius computations."""
    tau_sv: float = 1e-10
    tau_eig: float = 1e-12
    precision_digits: int = 30
    tie_rtol: float = 1e-9
    max_terms: int = 200
    max_q: int = 10**40
    l_cap: int = 10_000
    dominance_cap: int = 100_000
    enumeration_guard: int = 10**7
    workers: int = 1
    certificate_margin: float = 0.0

    def __post_init__(self) -> None:
        for name in ("tau_sv", "tau_eig", "tie_rtol"):
            value = getattr(self, name)
            if not 0.0 < value < 1e-3:
                raise InvalidConfigError(
                    f"{name} must lie in (0, 1e-3), got {value}", field=name
                )

        for name in ("max_terms", "max_q", "l_cap", "dominance_cap",
                     "enumeration_guard", "workers"):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise InvalidConfigError(
                    f"{name} must be a positive integer, got {value!r}", field=name
                )

        if self.precision_digits < 15:
            raise InvalidConfigError(
                f"precision_digits must be at least 15, got {self.precision_digits}",
                field="precision_digits",
            )

        if not 0.0 <= self.certificate_margin < 1.0:
            raise InvalidConfigError(
                f"certificate_margin must lie in [0, 1), got {self.certificate_margin}",
                field="certificate_margin",
            )

    def to_dict(self) -> Dict[str, Any]:
        """Return the configuration as a plain dict for report echoes."""
        return asdict(self)


def get_config_from_env() -> Dict[str, Any]:
    """Load solver configuration from environment variables.

    Only variables that are set contribute; the rest fall back to the
    dataclass defaults.

    Returns:
        Dictionary with configuration values
    """
    config: Dict[str, Any] = {}
    for variable, (name, parse) in ENV_FIELDS.items():
        raw = os.getenv(variable)
        if raw is None or raw == "":
            continue
        try:
            config[name] = parse(raw)
        except ValueError as e:
            raise InvalidConfigError(
                f"Environment variable {variable}={raw!r} is not a valid {parse.__name__}",
                field=name,
            ) from e

    return config


def load_config(**overrides: Any) -> SolverConfig:
    """Build a SolverConfig from the environment plus explicit overrides.

    Overrides whose value is None are ignored so CLI options that were not
    given do not mask the environment.

    Args:
        **overrides: Field values that take precedence over the environment

    Returns:
        Validated SolverConfig
    """
    known = {f.name for f in fields(SolverConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise InvalidConfigError(
            f"Unknown configuration fields: {', '.join(sorted(unknown))}",
            field=sorted(unknown)[0],
        )

    values = get_config_from_env()
    values.update({k: v for k, v in overrides.items() if v is not None})

    config = SolverConfig(**values)
    logger.debug("Solver configuration loaded", **config.to_dict())
    return config
