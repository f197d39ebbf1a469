"""Discrete Bakry-Emery checks: constants, assumption tests and the decay bound."""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.errors import DegenerateInputError, InvalidArgumentError
from app.core.logging import get_logger
from app.core.schemas import (
    BoundCheck,
    DecayCertificate,
    FunctionalRecord,
    SandwichCheck,
    Trajectory,
)
from app.analysis.functionals import gamma_exponent, poincare_discrete
from app.scheme.grid import nonneg_power

logger = get_logger(__name__)


def a1_constants(alpha: float, beta: float) -> Tuple[float, float]:
    """C_m = 4 alpha beta / (alpha+beta-1)^2 and C_M = alpha / (alpha-1)."""
    if not alpha > 1.0:
        raise InvalidArgumentError(f"alpha must exceed 1, got {alpha}")
    if not beta > 0.0 or not alpha + beta > 1.0:
        raise InvalidArgumentError(f"need beta > 0 and alpha + beta > 1, got beta = {beta}")
    s = alpha + beta - 1.0
    return 4.0 * alpha * beta / s**2, alpha / (alpha - 1.0)


def min_weight(u_values, beta: float) -> float:
    """min_i u_i^(beta-1); for beta < 1 it sits at the largest u."""
    weights = nonneg_power(np.asarray(u_values, dtype=float).reshape(-1), beta - 1.0)
    if weights.size == 0:
        raise InvalidArgumentError("no nodal values supplied")
    return float(np.min(weights))


def informative_mask(
    records: Sequence[FunctionalRecord],
    f_floor_rel: float = settings.f_floor_rel,
    noise_factor: float = settings.noise_factor,
) -> np.ndarray:
    """Steps whose Fisher information sits above both the floor and the residual noise."""
    if not records:
        raise InvalidArgumentError("empty record sequence")
    fisher = np.array([r.fisher_F for r in records])
    noise = np.array([r.production_tol for r in records])
    return (fisher > 0.0) & (fisher > f_floor_rel * fisher[0]) & (fisher >= noise_factor * noise)


def informative_prefix(mask: np.ndarray) -> int:
    """Length of the leading run of informative steps."""
    off = np.flatnonzero(~np.asarray(mask, dtype=bool))
    return int(off[0]) if off.size else int(len(mask))


def check_a1(
    records: Sequence[FunctionalRecord],
    C_m: float,
    C_M: float,
    slack: float = settings.bound_slack,
    f_floor_rel: float = settings.f_floor_rel,
) -> SandwichCheck:
    """C_m F <= P <= C_M F at every step with F above the floor.

    Each step is granted its residual-induced uncertainty on P.
    """
    if not records:
        raise InvalidArgumentError("empty record sequence")
    fisher = np.array([r.fisher_F for r in records])
    production = np.array([r.production_P for r in records])
    noise = np.array([r.production_tol for r in records])

    floor = f_floor_rel * (fisher[0] if fisher[0] > 0.0 else fisher.max())
    idx = np.flatnonzero(fisher > floor)
    if idx.size == 0:
        return SandwichCheck(passed=True, checked_steps=0)

    F, P, tol = fisher[idx], production[idx], noise[idx]
    below = C_m * F * (1.0 - slack) - tol - P
    above = P - C_M * F * (1.0 + slack) - tol
    excess = np.maximum(below, above) / F
    worst = int(np.argmax(excess))
    ratios = P / F
    return SandwichCheck(
        passed=bool(excess[worst] <= 0.0),
        checked_steps=int(idx.size),
        worst_index=int(idx[worst]),
        worst_excess=float(excess[worst]),
        min_ratio=float(ratios.min()),
        max_ratio=float(ratios.max()),
    )


def empirical_a1_constants(
    records: Sequence[FunctionalRecord], mask: Optional[np.ndarray] = None
) -> Tuple[float, float]:
    """(min P/F, max P/F) over informative steps."""
    if mask is None:
        mask = informative_mask(records)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise DegenerateInputError("no informative steps for the A1 constants")
    ratios = np.array([records[k].production_P / records[k].fisher_F for k in idx])
    return float(ratios.min()), float(ratios.max())


def estimate_kappa(
    F_values: Sequence[float], tau: float, f_floor_rel: float = settings.f_floor_rel
) -> float:
    """min over k of (F_{k-1}/F_k - 1)/tau over steps with F_k above the floor."""
    F = np.asarray(F_values, dtype=float)
    if F.size < 2:
        raise InvalidArgumentError("need at least two Fisher values")
    if not tau > 0.0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    if np.any(F < 0.0):
        raise InvalidArgumentError("Fisher values must be nonnegative")

    usable = np.flatnonzero(F[1:] > f_floor_rel * F[0]) + 1
    if F[0] <= 0.0 or usable.size == 0:
        raise DegenerateInputError("all Fisher values below floor; trajectory is at equilibrium")
    return float(np.min((F[usable - 1] / F[usable] - 1.0) / tau))


def kappa0_from_weight(alpha: float, beta: float, eps: float, C_p: float, weight: float) -> float:
    """2 C_p^-1 alpha gamma (eps A) weight with A = 2 beta / (alpha+beta-1)."""
    if not (alpha > 0.0 and beta > 0.0 and alpha + beta > 1.0):
        raise InvalidArgumentError(f"invalid exponents alpha={alpha}, beta={beta}")
    if not 0.0 < eps <= 1.0:
        raise InvalidArgumentError(f"eps must lie in (0, 1], got {eps}")
    if not C_p > 0.0:
        raise InvalidArgumentError(f"C_p must be positive, got {C_p}")
    if weight < 0.0:
        raise InvalidArgumentError("weight must be nonnegative")
    A = 2.0 * beta / (alpha + beta - 1.0)
    return 2.0 / C_p * alpha * gamma_exponent(alpha, beta) * (eps * A) * weight


def kappa0_theoretical(alpha: float, beta: float, eps: float, C_p: float, min_u: float) -> float:
    if min_u < 0.0:
        raise InvalidArgumentError("min_u must be nonnegative")
    return kappa0_from_weight(alpha, beta, eps, C_p, float(nonneg_power(min_u, beta - 1.0)))


def decay_params(C_m: float, C_M: float, kappa: float, tau: float) -> Tuple[float, float]:
    """lambda = (C_m/C_M) kappa and eta = log(1 + tau lambda) / (tau lambda).

    kappa = 0 gives (0, 1), the limit of eta.
    """
    if not (C_m > 0.0 and C_M > 0.0 and tau > 0.0):
        raise InvalidArgumentError("C_m, C_M and tau must be positive")
    if kappa < 0.0:
        raise InvalidArgumentError(f"kappa must be nonnegative, got {kappa}")
    lam = C_m / C_M * kappa
    x = tau * lam
    eta = 1.0 if x == 0.0 else math.log1p(x) / x
    return lam, eta


def verify_decay_bound(
    H_values: Sequence[float],
    lam: float,
    eta: float,
    tau: float,
    slack: float = settings.bound_slack,
    floor: float = 0.0,
    atol: float = 0.0,
) -> BoundCheck:
    """H_k - floor <= (H_0 - floor) exp(-eta lam k tau) (1 + slack) + atol for all k."""
    H = np.asarray(H_values, dtype=float)
    if H.size == 0:
        raise InvalidArgumentError("empty entropy sequence")
    k = np.arange(H.size)
    bound = (H[0] - floor) * np.exp(-eta * lam * tau * k)
    excess = H - floor - (bound * (1.0 + slack) + atol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0.0, (H - floor) / bound, np.where(H - floor > 0.0, np.inf, 0.0))
    worst = int(np.argmax(excess))
    return BoundCheck(
        passed=bool(np.all(excess <= 0.0)),
        checked_steps=int(H.size),
        worst_index=worst,
        worst_ratio=float(np.max(ratio)),
    )


def fit_rate(H_values: Sequence[float], tau: float) -> float:
    """Negative least-squares slope of log H against time."""
    H = np.asarray(H_values, dtype=float)
    if H.size < 2:
        raise InvalidArgumentError("need at least two entropy values")
    if np.any(H <= 0.0):
        raise InvalidArgumentError("entropy values must be positive; truncate at the noise floor")
    t = tau * np.arange(H.size)
    slope, _ = np.polyfit(t, np.log(H), 1)
    return float(-slope)


def check_a3(H_values: Sequence[float], a3_tol: float = settings.a3_tol) -> bool:
    """The run ends near equilibrium: H_last <= a3_tol H_0."""
    H = np.asarray(H_values, dtype=float)
    if H.size == 0:
        raise InvalidArgumentError("empty entropy sequence")
    return bool(H[-1] <= a3_tol * abs(H[0]))


def build_certificate(
    trajectory: Trajectory, records: List[FunctionalRecord], eps: float
) -> DecayCertificate:
    """Theoretical and empirical decay constants and assumption checks for one run."""
    params = trajectory.params
    alpha, beta, tau = params.alpha, params.beta, params.tau
    grid = trajectory.grid

    C_m, C_M = a1_constants(alpha, beta)
    u_all = nonneg_power(trajectory.values, 1.0 / alpha)
    weight = min_weight(u_all, beta)
    if not math.isfinite(weight):
        weight = 0.0
    kappa0 = kappa0_from_weight(alpha, beta, eps, poincare_discrete(grid), weight)
    lam_th, eta_th = decay_params(C_m, C_M, kappa0, tau)

    H = np.array([r.entropy_H for r in records])
    mask = informative_mask(records)
    n_inf = informative_prefix(mask)
    insufficient = trajectory.n_steps == 0 or n_inf < 2

    nan = float("nan")
    C_m_emp = C_M_emp = kappa_emp = fitted = nan
    lam_emp, eta_emp = 0.0, 1.0
    if not insufficient:
        prefix = records[:n_inf]
        C_m_emp, C_M_emp = empirical_a1_constants(prefix, mask[:n_inf])
        kappa_emp = estimate_kappa([r.fisher_F for r in prefix], tau)
        if C_m_emp > 0.0:
            lam_emp, eta_emp = decay_params(C_m_emp, C_M_emp, max(kappa_emp, 0.0), tau)
        ent = np.array([r.relative_entropy for r in records[: max(2, n_inf // 2)]])
        if ent.size >= 2 and np.all(ent > 0.0):
            fitted = fit_rate(ent, tau)

    # the run ends at k_max, so the proof gives H_k - H_last <= (1+lam tau)^-k (H_0 - H_last);
    # steps past the informative prefix enter only through their summed production
    checked = max(n_inf, 1)
    tail = tau * sum(max(r.production_P, 0.0) for r in records[checked:])
    noise = tau * sum(r.production_tol for r in records)
    floor = float(H[-1])
    bound = verify_decay_bound(H[:checked], lam_emp, eta_emp, tau, floor=floor, atol=tail + noise)
    bound_th = verify_decay_bound(
        H[:checked], lam_th, eta_th, tau, floor=floor, atol=tail + noise
    )

    a1 = check_a1(records, C_m, C_M)
    gamma = gamma_exponent(alpha, beta)
    cert = DecayCertificate(
        alpha=alpha,
        beta=beta,
        tau=tau,
        eps=eps,
        n_cells=grid.n_cells,
        k_max=trajectory.n_steps,
        C_m_theoretical=C_m,
        C_M_theoretical=C_M,
        C_m_empirical=C_m_emp,
        C_M_empirical=C_M_emp,
        kappa_empirical=kappa_emp,
        kappa0_theoretical=kappa0,
        lambda_empirical=lam_emp,
        eta_empirical=eta_emp,
        lambda_theoretical=lam_th,
        eta_theoretical=eta_th,
        fitted_rate=fitted,
        a1_pass=a1.passed,
        a2_pass=bool(not insufficient and kappa_emp > 0.0),
        a3_pass=check_a3(H),
        bound_pass=bound.passed,
        theoretical_bound_pass=bound_th.passed,
        constants_ordered=C_m <= C_M,
        U=records[-1].mass_u,
        min_u=float(np.min(u_all)),
        min_weight=weight,
        informative_steps=n_inf,
        insufficient_data=insufficient,
        gamma_range_ok=0.5 <= gamma <= 1.0,
        theorem_hypotheses_met=params.theorem_hypotheses_met,
    )
    if not cert.constants_ordered:
        logger.warning("a1_constants_unordered", C_m=C_m, C_M=C_M, alpha=alpha, beta=beta)
    logger.info(
        "certificate_built",
        n_cells=grid.n_cells,
        tau=tau,
        a1=cert.a1_pass,
        a2=cert.a2_pass,
        a3=cert.a3_pass,
        bound=cert.bound_pass,
        informative_steps=n_inf,
    )
    return cert


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return settings.float_format % value
    return str(value)


def certificate_items(cert: DecayCertificate) -> List[Tuple[str, str]]:
    """Flat, ordered key/value pairs."""
    return [(key, _format_value(value)) for key, value in cert.model_dump().items()]


def certificate_text(cert: DecayCertificate) -> str:
    return "".join(f"{key}={value}\n" for key, value in certificate_items(cert))
