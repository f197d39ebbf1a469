"""Admissible-region scans over (A, B) and (alpha, beta).

A cell is admissible when some shift c makes T(X, Y) >= -tol at every node of
the (X, Y) grid and also keeps the local quadratic form at (1, 1) nonnegative.
T is affine in c, so both conditions are intervals in c. The closed-form c is
used when it lies in their intersection and keeps T >= 0 on the grid. Otherwise
the cell uses the shift that maximizes the normalized grid margin. T is
symmetric, so only the upper triangle of the grid is evaluated.
"""


from typing import Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.errors import InvalidArgumentError
from app.core.logging import get_logger
from app.core.parallel import ordered_map
from app.core.schemas import (
    ABPoint,
    CellResult,
    RegionScan,
    ScanAxes,
    ScanDomain,
    Verdict,
)
from app.inequality.lab import (
    TTerms,
    argmin_on_pairs,
    c_shift,
    canonical_rho,
    local_shift_interval,
    map_ab,
    sc_membership,
    scan_grid,
)

logger = get_logger(__name__)

_BISECTIONS = 200


def t_scale(terms: TTerms, A: float) -> np.ndarray:
    """Pointwise size 1 + |first| + A * curvature; the rounding allowance is tol times this."""
    return 1.0 + np.abs(terms.first) + abs(A) * terms.curvature


def shift_feasible_interval(terms: TTerms, slack: np.ndarray) -> Tuple[float, float]:
    """Interval of c with base + c * shift >= -slack everywhere.

    Returns (inf, -inf) when no shift works.
    """
    need = -slack - terms.base
    shift = terms.shift
    pos = shift > 0.0
    neg = shift < 0.0
    if np.any(need[~pos & ~neg] > 0.0):
        return np.inf, -np.inf
    lo = float(np.max(need[pos] / shift[pos])) if np.any(pos) else -np.inf
    hi = float(np.min(need[neg] / shift[neg])) if np.any(neg) else np.inf
    return lo, hi


def best_shift(terms: TTerms, scale: np.ndarray, lo: float, hi: float) -> float:
    """c in [lo, hi] maximizing min (base + c * shift) / scale over the grid.

    The margin is concave and piecewise linear in c, so bisection on the slope
    of its active piece finds the maximizer. Nodes with shift = 0 do not move.
    """
    moving = terms.shift != 0.0
    base = terms.base[moving] / scale[moving]
    shift = terms.shift[moving] / scale[moving]
    if base.size == 0 or lo >= hi:
        return lo

    def slope(c: float) -> float:
        return float(shift[np.argmin(base + c * shift)])

    if slope(lo) <= 0.0:
        return lo
    if slope(hi) >= 0.0:
        return hi
    for _ in range(_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        active = slope(mid)
        if active > 0.0:
            lo = mid
        elif active < 0.0:
            hi = mid
        else:
            return mid
    return lo if np.min(base + lo * shift) >= np.min(base + hi * shift) else hi


def evaluate_cell(ab: ABPoint, eps: float, domain: ScanDomain) -> CellResult:
    A, B = ab.A, ab.B
    kappa = eps * A
    grid = scan_grid(domain)
    terms = TTerms.on_pairs(grid, A, B, kappa, canonical_rho(ab))

    c_formula = c_shift(ab, kappa)
    t_formula = terms.t(c_formula)
    min_t_formula = float(np.min(t_formula))
    scale = t_scale(terms, A)

    feasible = None
    if A > 0.0:
        local = local_shift_interval(ab, kappa)
        if local is not None:
            lo, hi = shift_feasible_interval(terms, domain.tol * scale)
            lo, hi = max(lo, local[0]), min(hi, local[1])
            if lo <= hi:
                feasible = (lo, hi)

    if feasible is None:
        chosen, t_chosen = c_formula, t_formula
    elif feasible[0] <= c_formula <= feasible[1] and min_t_formula >= 0.0:
        chosen, t_chosen = c_formula, t_formula
    else:
        chosen = best_shift(terms, scale, *feasible)
        t_chosen = terms.t(chosen)

    best = argmin_on_pairs(t_chosen, grid)
    tightest = argmin_on_pairs(t_chosen / scale, grid)
    if feasible is None:
        verdict = Verdict.INADMISSIBLE
    elif tightest.boundary_flag and tightest.min_value < -0.5 * domain.tol:
        # the window edge needs more than half of the rounding allowance
        verdict = Verdict.BOUNDARY_SUSPECT
    else:
        verdict = Verdict.ADMISSIBLE

    return CellResult(
        min_t=best.min_value,
        min_t_formula=min_t_formula,
        shift=chosen,
        shift_formula=c_formula,
        verdict=verdict,
        boundary_flag=best.boundary_flag,
    )


def _inadmissible_cell() -> CellResult:
    nan = float("nan")
    return CellResult(
        min_t=nan,
        min_t_formula=nan,
        shift=nan,
        shift_formula=nan,
        verdict=Verdict.INADMISSIBLE,
        boundary_flag=False,
    )


def _ab_task(task) -> CellResult:
    A, B, eps, domain = task
    return evaluate_cell(ABPoint(A=A, B=B), eps, domain)


def _alphabeta_task(task) -> CellResult:
    alpha, beta, eps, domain = task
    if alpha + beta - 1.0 == 0.0:
        return _inadmissible_cell()
    return evaluate_cell(map_ab(alpha, beta), eps, domain)


def _check_eps(eps: float) -> None:
    if not 0.0 < eps <= 1.0:
        raise InvalidArgumentError(f"eps must lie in (0, 1], got {eps}")


def _assemble(
    axes: ScanAxes,
    first: np.ndarray,
    second: np.ndarray,
    eps: float,
    domain: ScanDomain,
    cells: Sequence[CellResult],
) -> RegionScan:
    shape = (first.size, second.size)

    def field(name, dtype=float):
        return np.array([getattr(cell, name) for cell in cells], dtype=dtype).reshape(shape)

    verdict = np.array([cell.verdict.value for cell in cells], dtype=object).reshape(shape)
    scan = RegionScan(
        axes=axes,
        first_values=first,
        second_values=second,
        eps=eps,
        resolution=domain.resolution,
        x_min=domain.x_min,
        x_max=domain.x_max,
        tol=domain.tol,
        min_t=field("min_t"),
        min_t_formula=field("min_t_formula"),
        shift=field("shift"),
        verdict=verdict,
        boundary_flag=field("boundary_flag", dtype=bool),
    )
    logger.info(
        "region_scan_completed",
        axes=axes.value,
        eps=eps,
        cells=len(cells),
        admissible=int(scan.admissible_mask().sum()),
        boundary_suspect=int((verdict == Verdict.BOUNDARY_SUSPECT.value).sum()),
    )
    return scan


def region_scan_ab(
    A_values,
    B_values,
    eps: float,
    domain: Optional[ScanDomain] = None,
    workers: int = settings.workers,
) -> RegionScan:
    """Verdict for every (A, B) cell with kappa = eps A."""
    _check_eps(eps)
    domain = domain or ScanDomain()
    A_values = np.asarray(A_values, dtype=float).reshape(-1)
    B_values = np.asarray(B_values, dtype=float).reshape(-1)
    tasks = [(float(A), float(B), eps, domain) for A in A_values for B in B_values]
    logger.info("region_scan_started", axes="ab", cells=len(tasks), workers=workers)
    cells = ordered_map(_ab_task, tasks, workers)
    return _assemble(ScanAxes.AB, A_values, B_values, eps, domain, cells)


def region_scan_alphabeta(
    alpha_values,
    beta_values,
    eps: float,
    domain: Optional[ScanDomain] = None,
    workers: int = settings.workers,
) -> RegionScan:
    """Verdict for every (alpha, beta) cell through its (A, B) image."""
    _check_eps(eps)
    domain = domain or ScanDomain()
    alpha_values = np.asarray(alpha_values, dtype=float).reshape(-1)
    beta_values = np.asarray(beta_values, dtype=float).reshape(-1)
    tasks = [(float(a), float(b), eps, domain) for a in alpha_values for b in beta_values]
    logger.info("region_scan_started", axes="alphabeta", cells=len(tasks), workers=workers)
    cells = ordered_map(_alphabeta_task, tasks, workers)
    return _assemble(ScanAxes.ALPHABETA, alpha_values, beta_values, eps, domain, cells)


def theorem_region_flags(
    alpha: float, beta: float, eps: float, domain: Optional[ScanDomain] = None
) -> Tuple[bool, bool]:
    """(alpha, beta) in the continuous set S_c, and in the scanned set S."""
    _check_eps(eps)
    cell = _alphabeta_task((alpha, beta, eps, domain or ScanDomain()))
    return sc_membership(alpha, beta), cell.verdict != Verdict.INADMISSIBLE
