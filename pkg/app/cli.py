"""Batch command-line front end.

Exit status: 0 on success, 1 for usage and validation errors, 2 when a run or
scan fails. Diagnostics go to standard error; results go to files only.
"""

import argparse
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.config import settings
from app.core.errors import (
    ConvergenceError,
    DegenerateInputError,
    InvalidArgumentError,
    LabError,
    OutputError,
    ScenarioError,
)
from app.core.logging import get_logger, setup_logging
from app.core.schemas import ABPoint, ScanDomain
from app.experiments.export import (
    certificate_frame,
    emit_mass_defect,
    write_artifact,
    write_frame,
    write_region_csv,
    write_sign_map_csv,
)
from app.experiments.runner import check_study_grid, mass_defect_study, run_scenario
from app.experiments.scenarios import load_scenario, parse_overrides
from app.inequality.lab import (
    c_shift,
    canonical_rho,
    effective_kappa_c,
    local_expansion_check,
    make_config,
    sbp_inequality_check,
    sign_map,
)
from app.inequality.regions import region_scan_ab, region_scan_alphabeta

logger = get_logger(__name__)

VERBS = (
    "simulate",
    "analyze",
    "scan-ab",
    "scan-alphabeta",
    "check-sbp",
    "check-local",
    "sign-map",
)
_VALUE_FLAGS = ("--a", "--b", "--alpha", "--beta", "--eps", "--tol")
_NEGATIVE = re.compile(r"^-[0-9.]")


class UsageError(InvalidArgumentError):
    """Unknown verb, unknown flag or malformed flag value."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (KEY=value lines)")
    common.add_argument("--out", default=settings.output_dir, help="output directory")
    common.add_argument("--eps", type=float, default=None)
    common.add_argument("--a", default=None, help="A value, or lo:hi:count for scans")
    common.add_argument("--b", default=None, help="B value, or lo:hi:count for scans")
    common.add_argument("--alpha", default=None, help="lo:hi:count")
    common.add_argument("--beta", default=None, help="lo:hi:count")
    common.add_argument("--workers", type=int, default=settings.workers)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("overrides", nargs="*", metavar="key=value")

    parser = _ArgumentParser(prog="pmelab", description="Porous-medium entropy lab")
    verbs = parser.add_subparsers(dest="verb", required=True, metavar="verb")
    helps = {
        "simulate": "run a scenario and write per-run tables and certificates",
        "analyze": "simulate plus mass-defect study and certificate summary",
        "scan-ab": "admissible region over (A, B)",
        "scan-alphabeta": "admissible region over (alpha, beta)",
        "check-sbp": "random-vector check of the summation-by-parts inequality",
        "check-local": "local expansion of T near (1, 1)",
        "sign-map": "first term, shift term and T over the (X, Y) grid",
    }
    for verb in VERBS:
        verbs.add_parser(verb, parents=[common], help=helps[verb])
    return parser


def _join_negative_values(argv: Sequence[str]) -> List[str]:
    """`--b -2:6:200` -> `--b=-2:6:200`; argparse would read -2:6:200 as a flag."""
    joined, i = [], 0
    while i < len(argv):
        token = argv[i]
        if token in _VALUE_FLAGS and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            joined.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        joined.append(token)
        i += 1
    return joined


def parse_range(text: Optional[str], default: str, name: str) -> np.ndarray:
    """`lo:hi:count` to an evenly spaced axis; a single number gives one point."""
    text = default if text is None else text
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InvalidArgumentError(f"--{name} expects lo:hi:count, got {text!r}") from None
    if count < 1 or (count > 1 and not lo < hi):
        raise InvalidArgumentError(f"--{name} needs lo < hi and count >= 1, got {text!r}")
    return np.linspace(lo, hi, count)


def _single(text: Optional[str], name: str) -> float:
    if text is None:
        raise InvalidArgumentError(f"--{name} is required")
    try:
        return float(text)
    except ValueError:
        raise InvalidArgumentError(f"--{name} expects a number, got {text!r}") from None


def _take(overrides: Dict[str, str], key: str, kind, default):
    if key not in overrides:
        return default
    raw = overrides.pop(key)
    try:
        return kind(raw)
    except ValueError:
        raise InvalidArgumentError(f"override {key} expects {kind.__name__}, got {raw!r}") from None


def _no_leftovers(overrides: Dict[str, str]) -> None:
    if overrides:
        raise InvalidArgumentError(f"unknown override(s): {', '.join(sorted(overrides))}")


def _eps(args) -> float:
    eps = 0.25 if args.eps is None else args.eps
    if not 0.0 < eps <= 1.0:
        raise InvalidArgumentError(f"--eps must lie in (0, 1], got {eps}")
    return eps


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------


def _load(args, overrides: Dict[str, str]):
    if not args.config:
        raise InvalidArgumentError(f"{args.verb} needs --config")
    if args.tol is not None:
        overrides["residual_tol"] = str(args.tol)
    if args.eps is not None:
        overrides["eps"] = str(_eps(args))
    if args.workers < 1:
        raise InvalidArgumentError(f"--workers must be positive, got {args.workers}")
    return load_scenario(args.config, overrides)


def _simulate(args, overrides: Dict[str, str]) -> int:
    states = _take(overrides, "states", int, 0)
    scenario, opts = _load(args, overrides)
    artifact = run_scenario(scenario, opts, workers=args.workers)
    write_artifact(artifact, args.out, states=bool(states))
    return 0


def _analyze(args, overrides: Dict[str, str]) -> int:
    scenario, opts = _load(args, overrides)
    check_study_grid(scenario)
    artifact = run_scenario(scenario, opts, workers=args.workers)
    rows = mass_defect_study(scenario, opts, artifact=artifact)
    out = Path(args.out)
    write_artifact(artifact, out)
    emit_mass_defect(rows, out / f"{scenario.name}_mass_defect.csv")
    write_frame(certificate_frame(artifact), out / f"{scenario.name}_certificates.csv")
    return 0


def _scan_domain(args, overrides: Dict[str, str]) -> ScanDomain:
    fields = {}
    for key, kind in (("resolution", int), ("x_min", float), ("x_max", float)):
        if key in overrides:
            fields[key] = _take(overrides, key, kind, None)
    if args.tol is not None:
        fields["tol"] = args.tol
    _no_leftovers(overrides)
    return ScanDomain(**fields)


def _scan_ab(args, overrides: Dict[str, str]) -> int:
    eps = _eps(args)
    A = parse_range(args.a, "0.02:3:150", "a")
    B = parse_range(args.b, "-2:6:200", "b")
    if np.any(A <= 0.0):
        raise InvalidArgumentError("A values must be positive")
    domain = _scan_domain(args, overrides)
    scan = region_scan_ab(A, B, eps, domain, workers=args.workers)
    write_region_csv(scan, Path(args.out) / f"region_ab_eps{eps:g}.csv")
    return 0


def _scan_alphabeta(args, overrides: Dict[str, str]) -> int:
    eps = _eps(args)
    alpha = parse_range(args.alpha, "1.05:5:80", "alpha")
    beta = parse_range(args.beta, "0.05:5:100", "beta")
    if np.any(beta <= 0.0):
        raise InvalidArgumentError("beta values must be positive")
    domain = _scan_domain(args, overrides)
    scan = region_scan_alphabeta(alpha, beta, eps, domain, workers=args.workers)
    write_region_csv(scan, Path(args.out) / f"region_alphabeta_eps{eps:g}.csv")
    return 0


def sbp_samples(n: int, samples: int, delta: float, mode: str, seed: int) -> np.ndarray:
    """Random nonnegative vectors; `near` ones are 1 + delta U(-1, 1), `wide` ones contain zeros."""
    rng = np.random.default_rng(seed)
    if mode == "near":
        return 1.0 + delta * rng.uniform(-1.0, 1.0, size=(samples, n))
    w = rng.uniform(0.0, 10.0, size=(samples, n))
    w[rng.random(size=(samples, n)) < 0.2] = 0.0
    return w


def _check_sbp(args, overrides: Dict[str, str]) -> int:
    ab = ABPoint(A=_single(args.a, "a"), B=_single(args.b, "b"))
    if ab.A <= 0.0:
        raise InvalidArgumentError("A must be positive")
    kappa = _take(overrides, "kappa", float, _eps(args) * ab.A)
    samples = _take(overrides, "samples", int, 1000)
    n = _take(overrides, "n", int, 16)
    delta = _take(overrides, "delta", float, 0.1)
    seed = _take(overrides, "seed", int, 0)
    mode = _take(overrides, "mode", str, "near")
    _no_leftovers(overrides)
    if samples < 1 or n < 2 or mode not in ("near", "wide"):
        raise InvalidArgumentError("need samples >= 1, n >= 2 and mode in {near, wide}")
    tol = 1e-12 if args.tol is None else args.tol

    vectors = sbp_samples(n, samples, delta, mode, seed)
    checks = [sbp_inequality_check(w, ab, kappa, tol) for w in vectors]
    out = Path(args.out)
    write_frame(
        pd.DataFrame(
            {
                "sample": np.arange(samples),
                "lhs": [c.lhs for c in checks],
                "rhs": [c.rhs for c in checks],
                "holds": ["true" if c.holds else "false" for c in checks],
            }
        ),
        out / "sbp_check.csv",
    )
    failed = [k for k, c in enumerate(checks) if not c.holds]
    if failed:
        write_frame(
            pd.DataFrame(
                {
                    "sample": np.repeat(failed, n),
                    "i": np.tile(np.arange(1, n + 1), len(failed)),
                    "w": vectors[failed].reshape(-1),
                }
            ),
            out / "sbp_counterexamples.csv",
        )
        logger.warning("sbp_counterexamples_found", A=ab.A, B=ab.B, kappa=kappa, count=len(failed))
    logger.info("sbp_check_completed", A=ab.A, B=ab.B, kappa=kappa, samples=samples, failures=len(failed))
    return 0


def _check_local(args, overrides: Dict[str, str]) -> int:
    ab = ABPoint(A=_single(args.a, "a"), B=_single(args.b, "b"))
    samples = _take(overrides, "samples", int, 10)
    seed = _take(overrides, "seed", int, 0)
    h_max = _take(overrides, "h_max", float, 1e-2)
    levels = _take(overrides, "levels", int, 8)
    _no_leftovers(overrides)
    if samples < 1 or levels < 2 or not 0.0 < h_max < 0.1:
        raise InvalidArgumentError("need samples >= 1, levels >= 2 and 0 < h_max < 0.1")
    kappa = effective_kappa_c(ab)
    c, rho = c_shift(ab, kappa), canonical_rho(ab)

    rng = np.random.default_rng(seed)
    h_values = h_max * 0.5 ** np.arange(levels)
    rows, converged = [], 0
    for sample in range(samples):
        u, v = rng.uniform(-1.0, 1.0, size=2)
        report = local_expansion_check(ab, kappa, c, rho, float(u), float(v), h_values)
        converged += report.converged
        for h, scaled, err in zip(report.h_values, report.scaled_t, report.errors):
            rows.append((sample, u, v, h, scaled, report.target, err, report.order))
    write_frame(
        pd.DataFrame(
            rows, columns=["sample", "u", "v", "h", "scaled_T", "target", "error", "order"]
        ),
        Path(args.out) / f"local_expansion_A{ab.A:g}_B{ab.B:g}.csv",
    )
    logger.info("local_check_completed", A=ab.A, B=ab.B, samples=samples, converged=converged)
    return 0


def _sign_map(args, overrides: Dict[str, str]) -> int:
    ab = ABPoint(A=_single(args.a, "a"), B=_single(args.b, "b"))
    eps = _eps(args)
    domain = _scan_domain(args, overrides)
    dense = sign_map(make_config(ab, eps), domain)
    write_sign_map_csv(dense, Path(args.out) / f"sign_map_A{ab.A:g}_B{ab.B:g}_eps{eps:g}.csv")
    return 0


_HANDLERS = {
    "simulate": _simulate,
    "analyze": _analyze,
    "scan-ab": _scan_ab,
    "scan-alphabeta": _scan_alphabeta,
    "check-sbp": _check_sbp,
    "check-local": _check_local,
    "sign-map": _sign_map,
}


def dispatch(argv: Sequence[str]) -> int:
    setup_logging(settings.log_level)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(list(argv)))
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        overrides = parse_overrides(args.overrides)
        return _HANDLERS[args.verb](args, overrides)
    except (InvalidArgumentError, ValidationError) as exc:
        logger.error("invalid_arguments", verb=args.verb, error=str(exc))
        return 1
    except (ConvergenceError, ScenarioError, DegenerateInputError, OutputError) as exc:
        logger.error("run_failed", verb=args.verb, error=str(exc))
        return 2
    except LabError as exc:
        logger.error("lab_error", verb=args.verb, error=str(exc))
        return 2
