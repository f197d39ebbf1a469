"""Scenario presets and the flat key=value scenario file loader."""

from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from dotenv import dotenv_values
from pydantic import ValidationError

from app.config import settings
from app.core.errors import InvalidArgumentError
from app.core.logging import get_logger
from app.core.schemas import InitCase, Scenario, SolverOptions

logger = get_logger(__name__)

SCENARIO_KEYS = ("name", "alpha", "beta", "case", "eps", "n_cells", "taus", "n_steps", "t_final")
SOLVER_KEYS = ("residual_tol", "max_iterations", "damping")
_LIST_KEYS = ("n_cells", "taus")


def fast_scenario(**overrides) -> Scenario:
    """Fast diffusion, alpha=2, beta=0.5."""
    fields = dict(
        name="fast",
        alpha=2.0,
        beta=0.5,
        case=InitCase.FAST,
        eps=0.25,
        n_cells=list(settings.default_n_cells),
        taus=list(settings.default_taus),
    )
    fields.update(overrides)
    return Scenario(**fields)


def slow_scenario(**overrides) -> Scenario:
    """Slow diffusion, alpha=3, beta=4."""
    fields = dict(
        name="slow",
        alpha=3.0,
        beta=4.0,
        case=InitCase.SLOW,
        eps=0.25,
        n_cells=list(settings.default_n_cells),
        taus=list(settings.default_taus),
    )
    fields.update(overrides)
    return Scenario(**fields)


def outside_slow_scenario(**overrides) -> Scenario:
    """alpha - beta = 3, outside the admissible set; the run still proceeds."""
    return slow_scenario(**{"name": "outside_slow", "alpha": 5.0, "beta": 2.0, **overrides})


def outside_fast_scenario(**overrides) -> Scenario:
    """alpha - beta = 3.5, outside the admissible set."""
    return fast_scenario(**{"name": "outside_fast", "alpha": 4.0, "beta": 0.5, **overrides})


PRESETS = {
    "fast": fast_scenario,
    "slow": slow_scenario,
    "outside_slow": outside_slow_scenario,
    "outside_fast": outside_fast_scenario,
}


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    """key=value strings to a dict with lower-case keys."""
    parsed = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise InvalidArgumentError(f"override must look like key=value, got {pair!r}")
        parsed[key.strip().lower()] = value.strip()
    return parsed


def _split_list(raw: str) -> list:
    return [item.strip() for item in str(raw).split(",") if item.strip()]


def scenario_from_mapping(raw: Dict[str, Optional[str]]) -> Tuple[Scenario, SolverOptions]:
    """Validate a flat mapping of scenario and solver keys."""
    scenario_fields, solver_fields = {}, {}
    for key, value in raw.items():
        key = key.lower()
        if value is None:
            raise InvalidArgumentError(f"key {key!r} has no value")
        if key in SCENARIO_KEYS:
            scenario_fields[key] = _split_list(value) if key in _LIST_KEYS else value
        elif key in SOLVER_KEYS:
            solver_fields[key] = value
        else:
            raise InvalidArgumentError(f"unknown scenario key {key!r}")

    try:
        return Scenario(**scenario_fields), SolverOptions(**solver_fields)
    except ValidationError as exc:
        raise InvalidArgumentError(f"invalid scenario: {exc}") from exc


def load_scenario(
    path, overrides: Optional[Dict[str, str]] = None
) -> Tuple[Scenario, SolverOptions]:
    """Read a scenario file; overrides are applied after the file is parsed."""
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"config file not found: {path}")

    raw = {key.lower(): value for key, value in dotenv_values(path).items()}
    raw.update(overrides or {})
    scenario, opts = scenario_from_mapping(raw)
    logger.info("scenario_loaded", path=str(path), name=scenario.name, overrides=len(overrides or {}))
    return scenario, opts
