import math

import numpy as np
import pytest

from app.analysis import build_certificate, build_records, certificate_text
from app.analysis.bakry_emery import (
    a1_constants,
    check_a1,
    check_a3,
    decay_params,
    empirical_a1_constants,
    estimate_kappa,
    fit_rate,
    informative_mask,
    informative_prefix,
    kappa0_theoretical,
    min_weight,
    verify_decay_bound,
)
from app.core.errors import DegenerateInputError, InvalidArgumentError
from app.core.schemas import DecayCertificate, FunctionalRecord, SchemeParams
from app.scheme import simulate
from tests.conftest import make_state


def make_records(F, P, H=None, tau=0.01, production_tol=0.0):
    H = H if H is not None else np.zeros(len(F))
    return [
        FunctionalRecord(
            step_index=k,
            time=k * tau,
            entropy_H=float(H[k]),
            relative_entropy=float(H[k]),
            fisher_F=float(F[k]),
            production_P=float(P[k]),
            production_sbp=float(P[k]),
            production_tol=production_tol,
            mass_u=1.0,
            mass_v=1.0,
        )
        for k in range(len(F))
    ]


def test_a1_constants_for_the_slow_case():
    C_m, C_M = a1_constants(3.0, 4.0)
    assert C_m == pytest.approx(4.0 / 3.0)
    assert C_M == pytest.approx(1.5)


def test_a1_constants_reject_alpha_at_most_one():
    with pytest.raises(InvalidArgumentError):
        a1_constants(1.0, 2.0)


def test_decay_params_limit_at_zero_kappa():
    assert decay_params(1.0, 2.0, 0.0, 0.1) == (0.0, 1.0)


def test_decay_params_eta_matches_log_ratio():
    lam, eta = decay_params(1.0, 2.0, 4.0, 0.1)
    assert lam == pytest.approx(2.0)
    assert eta == pytest.approx(math.log(1.2) / 0.2)


def test_tight_geometric_sequence_meets_the_bound_with_equality():
    tau, kappa = 0.01, 3.0
    lam, eta = decay_params(1.0, 1.0, kappa, tau)
    k = np.arange(60)
    H = 2.5 * (1.0 + lam * tau) ** (-k)
    F = 0.7 * (1.0 + kappa * tau) ** (-k)
    records = make_records(F, F, H, tau)

    assert estimate_kappa(F, tau) == pytest.approx(kappa, rel=1e-10)
    assert empirical_a1_constants(records) == pytest.approx((1.0, 1.0))
    check = verify_decay_bound(H, lam, eta, tau)
    assert check.passed
    assert check.worst_ratio == pytest.approx(1.0, rel=1e-12)


def test_bound_detects_slower_decay():
    tau = 0.01
    lam, eta = decay_params(1.0, 1.0, 5.0, tau)
    H = 1.0 * (1.0 + 0.5 * lam * tau) ** (-np.arange(30))
    check = verify_decay_bound(H, lam, eta, tau)
    assert not check.passed
    assert check.worst_index > 0


def test_bound_floor_and_tolerance():
    H = np.array([1.0, 0.6, 0.5, 0.5])
    assert not verify_decay_bound(H, 10.0, 1.0, 0.1).passed
    assert verify_decay_bound(H, 10.0, 1.0, 0.1, floor=0.5, atol=0.1).passed


def test_check_a1_passes_inside_the_sandwich():
    F = np.array([1.0, 0.5, 0.25])
    result = check_a1(make_records(F, 1.4 * F), 4.0 / 3.0, 1.5)
    assert result.passed
    assert result.checked_steps == 3
    assert result.min_ratio == pytest.approx(1.4)


def test_check_a1_reports_the_worst_step():
    F = np.array([1.0, 0.5, 0.25])
    P = np.array([1.4, 0.7, 0.75])
    result = check_a1(make_records(F, P), 4.0 / 3.0, 1.5)
    assert not result.passed
    assert result.worst_index == 2


def test_informative_mask_drops_floor_and_noise():
    F = np.array([1.0, 1e-3, 1e-20])
    mask = informative_mask(make_records(F, F))
    assert mask.tolist() == [True, True, False]
    noisy = informative_mask(make_records(F, F, production_tol=1e-8))
    assert noisy.tolist() == [True, False, False]
    assert informative_prefix(noisy) == 1


def test_estimate_kappa_on_degenerate_input():
    with pytest.raises(DegenerateInputError):
        estimate_kappa([1.0, 0.0, 0.0], 0.1)
    with pytest.raises(DegenerateInputError):
        estimate_kappa([0.0, 0.0], 0.1)
    with pytest.raises(InvalidArgumentError):
        estimate_kappa([1.0], 0.1)


def test_estimate_kappa_takes_the_worst_step():
    assert estimate_kappa([4.0, 2.0, 1.5], 0.5) == pytest.approx((2.0 / 1.5 - 1.0) / 0.5)


def test_fit_rate_recovers_the_exponent():
    t = 0.01 * np.arange(50)
    assert fit_rate(np.exp(-3.0 * t) * 2.0, 0.01) == pytest.approx(3.0, rel=1e-10)


def test_fit_rate_rejects_nonpositive_entropy():
    with pytest.raises(InvalidArgumentError):
        fit_rate([1.0, 0.0], 0.1)


def test_check_a3():
    assert check_a3([1.0, 0.5, 1e-4])
    assert not check_a3([1.0, 0.5, 0.1])


def test_min_weight_for_both_cases():
    assert min_weight([0.5, 2.0], 0.5) == pytest.approx(2.0**-0.5)
    assert min_weight([0.0, 2.0], 4.0) == 0.0


def test_kappa0_is_zero_for_compact_support():
    assert kappa0_theoretical(3.0, 4.0, 0.25, 0.02, 0.0) == 0.0
    assert kappa0_theoretical(2.0, 0.5, 0.25, 0.02, 1.0) > 0.0


def test_certificate_of_the_slow_run(slow_trajectory):
    records = build_records(slow_trajectory)
    cert = build_certificate(slow_trajectory, records, 0.25)
    assert cert.k_max == slow_trajectory.n_steps
    assert cert.constants_ordered
    assert cert.a1_pass
    assert cert.bound_pass
    assert not cert.insufficient_data
    assert cert.gamma_range_ok
    assert cert.kappa0_theoretical == 0.0
    assert cert.C_m_theoretical <= cert.C_m_empirical * (1.0 + 1e-5)
    assert cert.C_M_empirical <= cert.C_M_theoretical * (1.0 + 1e-5)
    # in_region_s was never set, so the theorem is not claimed
    assert not cert.theorem_hypotheses_met


def test_certificate_of_the_fast_run(fast_trajectory):
    records = build_records(fast_trajectory)
    cert = build_certificate(fast_trajectory, records, 0.25)
    assert cert.a1_pass
    assert cert.bound_pass
    assert not cert.gamma_range_ok
    assert cert.fitted_rate > 0.0


def test_certificate_flags_insufficient_data():
    v0 = make_state([0.5, 1.0, 1.5, 1.0])
    traj = simulate(v0, SchemeParams(alpha=2.0, beta=1.0, tau=1e-3), 0)
    cert = build_certificate(traj, build_records(traj), 0.25)
    assert cert.insufficient_data
    assert cert.k_max == 0
    assert not cert.a2_pass
    assert math.isnan(cert.fitted_rate)


def test_certificate_text_is_flat_key_value(slow_trajectory):
    cert = build_certificate(slow_trajectory, build_records(slow_trajectory), 0.25)
    lines = certificate_text(cert).splitlines()
    assert len(lines) == len(DecayCertificate.model_fields)
    assert "a1_pass=true" in lines
    assert "theorem_hypotheses_met=false" in lines
    assert f"n_cells={slow_trajectory.grid.n_cells}" in lines
    assert certificate_text(cert) == certificate_text(cert)


def test_kappa0_for_the_slow_exponents():
    # gamma = 1 and A = 4/3, so 2 * 16 * 3 * (1/4 * 4/3) = 32
    assert kappa0_theoretical(3.0, 4.0, 0.25, 1.0 / 16.0, 1.0) == pytest.approx(32.0)


def test_rate_identity_for_random_parameters(rng):
    for _ in range(50):
        alpha, beta = rng.uniform(1.1, 5.0), rng.uniform(0.1, 5.0)
        eps, C_p, min_u = rng.uniform(0.01, 1.0), rng.uniform(0.02, 0.1), rng.uniform(0.1, 2.0)
        C_m, C_M = a1_constants(alpha, beta)
        lam = C_m / C_M * kappa0_theoretical(alpha, beta, eps, C_p, min_u)
        s = alpha + beta - 1.0
        expected = 8.0 * eps * (alpha - 1.0) * beta**2 / (C_p * s**2) * min_u ** (beta - 1.0)
        assert lam == pytest.approx(expected, rel=1e-12)


def test_estimate_kappa_ignores_the_scale_of_f(rng):
    F = np.cumprod(rng.uniform(0.5, 0.95, size=20))
    assert estimate_kappa(3.7 * F, 0.01) == pytest.approx(estimate_kappa(F, 0.01), rel=1e-12)


def test_weaker_kappa_keeps_the_bound():
    tau, kappa = 0.01, 3.0
    lam, _ = decay_params(1.0, 1.0, kappa, tau)
    H = 2.5 * (1.0 + lam * tau) ** (-np.arange(60))
    for weaker in (0.0, 0.5, 1.5, 2.9, 3.0):
        lam_w, eta_w = decay_params(1.0, 1.0, weaker, tau)
        assert verify_decay_bound(H, lam_w, eta_w, tau).passed
