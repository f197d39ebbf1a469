"""Closed forms and pointwise evaluation for the nonlinear summation-by-parts inequality.

T(X, Y) = (X^A + Y^A - 2)(X + Y - 2)
        + c / rho^3 (M(X,1)^(A+B+1-3 rho) (X^rho - 1)^3 + M(Y,1)^(A+B+1-3 rho) (Y^rho - 1)^3)
        - kappa min{1, X^(A+B-1), Y^(A+B-1)} (X + Y - 2)^2

Every power is taken through log X and X - 1 so that T stays accurate when
(X, Y) approaches (1, 1), where it vanishes to fourth order.
"""

import math
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple

import numpy as np

from app.core.errors import DomainError, InvalidArgumentError
from app.core.schemas import (
    ABPoint,
    InequalityConfig,
    LocalExpansionReport,
    MeanKind,
    SbpCheck,
    ScanDomain,
    ScanMin,
)
from app.scheme.grid import nonneg_power

_ZERO_EXPONENT = 1e-12


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def rc_membership(ab: ABPoint) -> bool:
    """A > 0 and (2A - B - 1)(A + B - 2) < 0."""
    A, B = ab.A, ab.B
    return A > 0.0 and (2.0 * A - B - 1.0) * (A + B - 2.0) < 0.0


def _on_kappa_a_line(ab: ABPoint) -> bool:
    return math.isclose(ab.A + ab.B, 2.0, rel_tol=0.0, abs_tol=1e-12)


def kappa_c(ab: ABPoint) -> float:
    A, B = ab.A, ab.B
    if A > 0.0 and _on_kappa_a_line(ab):
        return A
    if not rc_membership(ab):
        raise DomainError(f"(A, B) = ({A}, {B}) lies outside the continuous region")
    return -A * (2.0 * A - B - 1.0) / (A + B - 2.0)


def effective_kappa_c(ab: ABPoint) -> float:
    """kappa_c capped at A; above A the xi_2^2 coefficient of the local form turns negative."""
    return min(kappa_c(ab), ab.A)


def c_shift(ab: ABPoint, kappa: float) -> float:
    """c = -(A/9)(A - 2B + 1) - (2/9) kappa (A + B - 2)."""
    A, B = ab.A, ab.B
    return -(A / 9.0) * (A - 2.0 * B + 1.0) - (2.0 / 9.0) * kappa * (A + B - 2.0)


def canonical_rho(ab: ABPoint) -> float:
    return (ab.A + ab.B + 1.0) / 3.0


def quadratic_coefficients(ab: ABPoint, kappa: float, c: float) -> Tuple[float, float, float]:
    """Coefficients of xi_2^2, xi_2 xi_1^2 and xi_1^4 in the local form."""
    A, B = ab.A, ab.B
    return A - kappa, A * A - A + 3.0 * c, c * (A + B - 2.0)


def quadratic_form_check(ab: ABPoint, kappa: float, c: float, tol: float = 1e-12) -> bool:
    """a2 s^2 + a1 s t + a0 t^2 >= 0 for all real s and t >= 0.

    Since s ranges over all reals this is positive semidefiniteness of the
    2x2 form: a2 >= 0, a0 >= 0 and a1^2 <= 4 a2 a0.
    """
    a2, a1, a0 = quadratic_coefficients(ab, kappa, c)
    scale = 1.0 + a1 * a1 + abs(4.0 * a2 * a0)
    return a2 >= -tol and a0 >= -tol and a1 * a1 - 4.0 * a2 * a0 <= tol * scale


def local_shift_interval(
    ab: ABPoint, kappa: float, tol: float = 1e-12
) -> Optional[Tuple[float, float]]:
    """Shifts c for which the local form is nonnegative, or None."""
    A, B = ab.A, ab.B
    a2 = A - kappa
    D = A + B - 2.0
    e = A * A - A
    if a2 < -tol:
        return None
    if abs(a2) <= tol or abs(D) <= 1e-12:
        # the mixed coefficient must vanish: c = -(A^2 - A)/3
        c = -e / 3.0
        if c * D < -tol:
            return None
        return c, c

    # discriminant 9 c^2 + b c + e^2 <= 0
    b = 6.0 * e - 4.0 * a2 * D
    disc = b * b - 36.0 * e * e
    if disc < 0.0:
        if disc < -tol * (b * b + 36.0 * e * e):
            return None
        disc = 0.0
    root = math.sqrt(disc)
    lo, hi = (-b - root) / 18.0, (-b + root) / 18.0
    width = tol * (1.0 + abs(lo) + abs(hi))
    return lo - width, hi + width


def map_ab(alpha: float, beta: float) -> ABPoint:
    """A = 2 beta / (alpha+beta-1), B = (alpha+beta-3) / (alpha+beta-1)."""
    s = alpha + beta - 1.0
    if s == 0.0:
        raise DomainError("map to (A, B) is undefined for alpha + beta = 1")
    return ABPoint(A=2.0 * beta / s, B=(s - 2.0) / s)


def sc_membership(alpha: float, beta: float) -> bool:
    """alpha + beta > 1 and -1 < alpha - beta < 2."""
    return alpha + beta > 1.0 and -1.0 < alpha - beta < 2.0


def lambda_c_continuous(alpha: float, beta: float, min_u: float) -> float:
    """16 pi^2 alpha beta kappa_c / (alpha+beta-1) * min_u^(beta-1)."""
    if beta == 1.0:
        raise DomainError("continuous rate is stated for beta != 1")
    if not sc_membership(alpha, beta):
        raise DomainError(f"(alpha, beta) = ({alpha}, {beta}) violates the rate hypotheses")
    if min_u < 0.0:
        raise InvalidArgumentError("min_u must be nonnegative")
    s = alpha + beta - 1.0
    kc = -4.0 * beta * (alpha - beta - 2.0) / (s * (alpha - beta + 1.0))
    return 16.0 * math.pi**2 * alpha * beta * kc / s * float(nonneg_power(min_u, beta - 1.0))


# ---------------------------------------------------------------------------
# pointwise T
# ---------------------------------------------------------------------------


def mean_value(x, y, kind: MeanKind):
    """Symmetric, one-homogeneous mean M(x, y) of nonnegative scalars or arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0.0) or np.any(y < 0.0):
        raise InvalidArgumentError("mean arguments must be nonnegative")
    if MeanKind(kind) == MeanKind.GEOMETRIC:
        out = np.sqrt(x * y)
    else:
        # the canonical exponent is zero, so any mean works; use the arithmetic one
        out = 0.5 * (x + y)
    return float(out) if out.ndim == 0 else out


def make_config(
    ab: ABPoint,
    eps: float,
    mean: MeanKind = MeanKind.CANONICAL,
    kappa: Optional[float] = None,
    c: Optional[float] = None,
    rho: Optional[float] = None,
) -> InequalityConfig:
    """Config with kappa = eps A, c from the closed form and canonical rho unless given."""
    kappa = eps * ab.A if kappa is None else kappa
    mean = MeanKind(mean)
    if rho is None:
        rho = canonical_rho(ab) if mean == MeanKind.CANONICAL else 1.0
    return InequalityConfig(
        ab=ab,
        kappa=kappa,
        eps=eps,
        c=c_shift(ab, kappa) if c is None else c,
        rho=rho,
        mean=mean,
        c_overridden=c is not None,
    )


class ScanGrid(NamedTuple):
    """Log-spaced axis with the upper-triangle index pairs (i <= j) of the (X, Y) grid."""

    xs: np.ndarray
    logs: np.ndarray
    d: np.ndarray
    i: np.ndarray
    j: np.ndarray


@lru_cache(maxsize=8)
def scan_grid(domain: ScanDomain) -> ScanGrid:
    xs = scan_axis(domain)
    i, j = np.triu_indices(xs.size)
    arrays = (xs, np.log(xs), xs - 1.0, i, j)
    # shared by every cell a worker evaluates
    for array in arrays:
        array.setflags(write=False)
    return ScanGrid(*arrays)


def _node_factors(logs, d, A, B, rho, mean):
    """X^A - 1, min{1, X^(A+B-1)} and the shift piece at every node."""
    power = np.expm1(A * logs)
    floor = np.exp(np.minimum((A + B - 1.0) * logs, 0.0))
    return power, floor, _shift_piece(logs, d, A, B, rho, mean)


class TTerms:
    """The two c-independent pieces of T on broadcast (X, Y) arrays.

    T = base + c * shift, where base already contains the kappa term.
    T is symmetric in X and Y and every piece factors through per-node values.
    """

    def __init__(self, x_factors, y_factors, dx, dy, kappa: float):
        power_x, floor_x, shift_x = x_factors
        power_y, floor_y, shift_y = y_factors
        s = dx + dy
        self.first = (power_x + power_y) * s
        self.weight = np.minimum(floor_x, floor_y)
        self.curvature = self.weight * s * s
        self.base = self.first - kappa * self.curvature
        self.shift = shift_x + shift_y

    @classmethod
    def at(
        cls,
        log_x: np.ndarray,
        log_y: np.ndarray,
        dx: np.ndarray,
        dy: np.ndarray,
        A: float,
        B: float,
        kappa: float,
        rho: float,
        mean: MeanKind = MeanKind.CANONICAL,
    ) -> "TTerms":
        return cls(
            _node_factors(log_x, dx, A, B, rho, mean),
            _node_factors(log_y, dy, A, B, rho, mean),
            dx,
            dy,
            kappa,
        )

    @classmethod
    def on_grid(
        cls,
        xs: np.ndarray,
        A: float,
        B: float,
        kappa: float,
        rho: float,
        mean: MeanKind = MeanKind.CANONICAL,
    ) -> "TTerms":
        """Dense evaluation: X along axis 0, Y along axis 1."""
        d = xs - 1.0
        factors = _node_factors(np.log(xs), d, A, B, rho, mean)
        return cls(
            tuple(f[:, None] for f in factors),
            tuple(f[None, :] for f in factors),
            d[:, None],
            d[None, :],
            kappa,
        )

    @classmethod
    def on_pairs(
        cls,
        grid: ScanGrid,
        A: float,
        B: float,
        kappa: float,
        rho: float,
        mean: MeanKind = MeanKind.CANONICAL,
    ) -> "TTerms":
        """Flat evaluation over the upper triangle of the grid."""
        factors = _node_factors(grid.logs, grid.d, A, B, rho, mean)
        return cls(
            tuple(f[grid.i] for f in factors),
            tuple(f[grid.j] for f in factors),
            grid.d[grid.i],
            grid.d[grid.j],
            kappa,
        )

    def t(self, c: float) -> np.ndarray:
        return self.base + c * self.shift


def _shift_piece(log_x, dx, A, B, rho, mean) -> np.ndarray:
    """M(X,1)^(A+B+1-3 rho) ((X^rho - 1)/rho)^3."""
    q = log_x if rho == 0.0 else np.expm1(rho * log_x) / rho
    exponent = A + B + 1.0 - 3.0 * rho
    if MeanKind(mean) == MeanKind.CANONICAL or abs(exponent) <= _ZERO_EXPONENT * (
        1.0 + abs(A) + abs(B)
    ):
        return q**3
    log_m = np.log(mean_value(1.0 + dx, 1.0, mean))
    return np.exp(exponent * log_m) * q**3


def t_value(X, Y, cfg: InequalityConfig):
    """T(X, Y) for scalars or broadcastable arrays of positive reals."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if np.any(X <= 0.0) or np.any(Y <= 0.0):
        raise DomainError("T is defined for X, Y > 0")
    terms = TTerms.at(
        np.log(X), np.log(Y), X - 1.0, Y - 1.0, cfg.ab.A, cfg.ab.B, cfg.kappa, cfg.rho, cfg.mean
    )
    out = terms.t(cfg.c)
    return float(out) if out.ndim == 0 else out


def scan_axis(domain: ScanDomain) -> np.ndarray:
    """Log-spaced nodes of the (X, Y) grid with X = 1 inserted."""
    xs = np.geomspace(domain.x_min, domain.x_max, domain.resolution)
    return np.unique(np.append(xs, 1.0))


def argmin_on_pairs(values: np.ndarray, grid: ScanGrid) -> ScanMin:
    k = int(np.argmin(values))
    return _scan_min(float(values[k]), grid.xs, int(grid.i[k]), int(grid.j[k]))


def _scan_min(value: float, xs: np.ndarray, i: int, j: int) -> ScanMin:
    last = xs.size - 1
    return ScanMin(
        min_value=value,
        argmin_x=float(xs[i]),
        argmin_y=float(xs[j]),
        boundary_flag=bool(i in (0, last) or j in (0, last)),
    )


def scan_t_min(cfg: InequalityConfig, domain: Optional[ScanDomain] = None) -> ScanMin:
    """Minimum of T over the log grid; flags an argmin on the truncation edge."""
    grid = scan_grid(domain or ScanDomain())
    terms = TTerms.on_pairs(grid, cfg.ab.A, cfg.ab.B, cfg.kappa, cfg.rho, cfg.mean)
    return argmin_on_pairs(terms.t(cfg.c), grid)


def sign_map(cfg: InequalityConfig, domain: Optional[ScanDomain] = None) -> dict:
    """Dense first term, shift term (times c) and T over the log grid."""
    domain = domain or ScanDomain()
    xs = scan_axis(domain)
    terms = TTerms.on_grid(xs, cfg.ab.A, cfg.ab.B, cfg.kappa, cfg.rho, cfg.mean)
    return {
        "x": xs,
        "first_term": terms.first,
        "shift_term": cfg.c * terms.shift,
        "t": terms.t(cfg.c),
    }


# ---------------------------------------------------------------------------
# vector-level and local checks
# ---------------------------------------------------------------------------


def _periodic_second_difference(w: np.ndarray) -> np.ndarray:
    return np.roll(w, -1) - 2.0 * w + np.roll(w, 1)


def sbp_inequality_check(w, ab: ABPoint, kappa: float, tol: float = 1e-12) -> SbpCheck:
    """Both sides of the discrete inequality with min-weighted right-hand side.

    lhs = sum (D2 w)(D2 w^A) w^B,  rhs = kappa sum min_{j=i,i+-1} w_j^(A+B-1) (D2 w)^2.
    A term vanishes when its second difference does, even if a weight is infinite.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size < 2:
        raise InvalidArgumentError("need at least two entries")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise InvalidArgumentError("entries must be finite and nonnegative")
    A, B = ab.A, ab.B

    d2w = _periodic_second_difference(w)
    d2wa = _periodic_second_difference(nonneg_power(w, A))
    pair = d2w * d2wa
    with np.errstate(invalid="ignore"):
        lhs_terms = np.where(pair == 0.0, 0.0, pair * nonneg_power(w, B))
        weights = nonneg_power(w, A + B - 1.0)
        neighbour_min = np.minimum(np.minimum(np.roll(weights, -1), weights), np.roll(weights, 1))
        sq = d2w * d2w
        rhs_terms = np.where(sq == 0.0, 0.0, neighbour_min * sq)

    lhs = math.fsum(lhs_terms)
    rhs = 0.0 if kappa == 0.0 else kappa * math.fsum(rhs_terms)
    if math.isinf(lhs) or math.isinf(rhs):
        holds = lhs >= rhs
    else:
        holds = lhs >= rhs - tol * max(abs(lhs), abs(rhs))
    return SbpCheck(lhs=lhs, rhs=rhs, holds=bool(holds))


def local_quadratic(ab: ABPoint, kappa: float, c: float, u: float, v: float) -> float:
    """(A-kappa) u^2 + (A(A-1)+3c) u v^2 + c(A+B-2) v^4."""
    a2, a1, a0 = quadratic_coefficients(ab, kappa, c)
    return a2 * u * u + a1 * u * v * v + a0 * v**4


def local_expansion_check(
    ab: ABPoint,
    kappa: float,
    c: float,
    rho: float,
    u: float,
    v: float,
    h_values,
    min_order: float = 0.8,
) -> LocalExpansionReport:
    """T(X, Y) / h^4 along X = 1 + h v + h^2 u / 2, Y = 1 - h v + h^2 u / 2."""
    h = np.asarray(h_values, dtype=float)
    if h.size == 0 or np.any(np.diff(h) >= 0.0) or np.any(h <= 0.0):
        raise InvalidArgumentError("h_values must be positive and strictly decreasing")
    dx = h * v + 0.5 * h * h * u
    dy = -h * v + 0.5 * h * h * u
    if dx.min() <= -1.0 or dy.min() <= -1.0:
        raise DomainError("X or Y is nonpositive for the largest h")

    mean = MeanKind.CANONICAL if rho == canonical_rho(ab) else MeanKind.ARITHMETIC
    terms = TTerms.at(np.log1p(dx), np.log1p(dy), dx, dy, ab.A, ab.B, kappa, rho, mean)
    scaled = terms.t(c) / h**4
    target = local_quadratic(ab, kappa, c, u, v)
    errors = np.abs(scaled - target)

    # errors at rounding level carry no order information
    noise = 1e-9 * (1.0 + abs(target))
    orders = [
        float(np.log(errors[k] / errors[k + 1]) / np.log(h[k] / h[k + 1]))
        for k in range(h.size - 1)
        if errors[k] > noise and errors[k + 1] > noise
    ]
    if errors[-1] > noise:
        # order from each level down to the finest; one cancellation dip does not decide
        slopes = [
            float(np.log(errors[k] / errors[-1]) / np.log(h[k] / h[-1]))
            for k in range(h.size - 1)
            if errors[k] > noise
        ]
        order = max(slopes, default=float("nan"))
        converged = order >= min_order
    else:
        order = float("nan")
        converged = True
    return LocalExpansionReport(
        h_values=h.tolist(),
        scaled_t=scaled.tolist(),
        target=target,
        errors=errors.tolist(),
        orders=orders,
        order=order,
        converged=bool(converged),
    )
