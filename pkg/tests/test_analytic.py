import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from discobond import analytic
from discobond.analytic import (
    QuadratureConfig,
    a_tilde,
    analytic_last_interval,
    b_tilde,
    d_plus_minus,
    norm_cdf,
    phi,
    sigma_sq,
    zcb_price,
)
from discobond.errors import QuadratureError
from discobond.model import FirmDynamics, VasicekParams, reference_model

SPEC = reference_model()
VAS = SPEC.vasicek
FIRM = SPEC.firm

# Richardson-extrapolated RK4 solve of dB/dt = a2 B - 1 backward from B(T) = 0
B_TILDE_1Y = 0.8323334758272662
# standard Vasicek log-level (theta - s^2/2k^2)(B - tau) - s^2 B^2 / 4k, tau = 1
A_TILDE_1Y = -0.015680398403522984
Z_004_1Y = 0.9522061367446356
PHI_0 = 11.452043492513583
N1_ONE = 0.841344746068543
# adaptive quadrature of sigma^2 over [0.5, 1] with rho = 0, x = 2
D_PLUS = 1.2983292085593565
D_MINUS = 0.5910705310523223


def test_b_tilde_examples():
    assert b_tilde(1.0, 1.0, VAS) == 0
    assert b_tilde(0.0, 1.0, VAS) == pytest.approx(B_TILDE_1Y, abs=1e-10)
    big = VasicekParams(1.0, 1e4, 0.1)
    assert b_tilde(0.0, 1.0, big) == pytest.approx(1e-4, rel=1e-12)


def test_b_tilde_rejects_reversed_times():
    with pytest.raises(ValueError):
        b_tilde(1.1, 1.0, VAS)


@given(st.floats(0, 5), st.floats(0.01, 3))
def test_b_tilde_bounds(tau, a2):
    val = b_tilde(0.0, tau, VasicekParams(0.0, a2, 0.1))
    assert 0 <= val <= tau + 1e-15


def test_a_tilde_examples():
    assert a_tilde(1.0, 1.0, VAS) == 0
    assert a_tilde(0.3, 1.0, VasicekParams(0.0, 0.5, 0.0)) == 0
    assert a_tilde(0.0, 1.0, VAS) == pytest.approx(A_TILDE_1Y, abs=1e-10)


def test_a_tilde_matches_fixed_2048_panel_rule():
    u = np.linspace(0.0, 1.0, 2049)
    bt = (1 - np.exp(-VAS.a2 * (1 - u))) / VAS.a2
    f = VAS.a1 * bt - 0.5 * VAS.Sr**2 * bt**2
    h = 1 / 2048
    ref = -h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())
    assert a_tilde(0.0, 1.0, VAS) == pytest.approx(ref, abs=1e-10)


def test_a_tilde_broadcasts_over_time():
    ts = np.array([0.0, 0.25, 0.5, 1.0])
    vec = a_tilde(ts, 1.0, VAS)
    assert vec == pytest.approx([a_tilde(t, 1.0, VAS) for t in ts], abs=1e-13)


def test_simpson_reports_non_convergence():
    quad = QuadratureConfig(panels=2, abs_tol=1e-14, max_panels=8)
    with pytest.raises(QuadratureError):
        analytic.simpson(lambda s: np.sqrt(s), 0.0, 1.0, quad)


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(panels=3)
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=0)


def test_zcb_examples():
    assert zcb_price(0.3, 2.0, 2.0, VAS) == 1.0
    assert zcb_price(0.04, 0.0, 1.0, VAS) == pytest.approx(Z_004_1Y, abs=1e-10)
    with pytest.raises(ValueError):
        zcb_price(0.04, 1.5, 1.0, VAS)


def test_zcb_stationary_rate_limit():
    # a1 = a2 r with Sr = 0 pins the rate at r; Z -> exp(-r tau) exactly
    r = 0.05
    for a2 in (0.5, 5.0, 50.0):
        p = VasicekParams(a2 * r, a2, 0.0)
        assert zcb_price(r, 0.0, 2.0, p) == pytest.approx(math.exp(-0.1), rel=1e-10)


@pytest.mark.slow
def test_zcb_against_monte_carlo():
    rng = np.random.default_rng(20240607)
    n_paths, n_steps, T, r0 = 1_000_000, 200, 1.0, 0.04
    dt = T / n_steps
    r = np.full(n_paths, r0)
    integral = np.zeros(n_paths)
    decay = math.exp(-VAS.a2 * dt)
    sd = VAS.Sr * math.sqrt((1 - decay**2) / (2 * VAS.a2))
    mean_level = VAS.a1 / VAS.a2
    for _ in range(n_steps):
        r_next = mean_level + (r - mean_level) * decay + sd * rng.standard_normal(n_paths)
        integral += 0.5 * (r + r_next) * dt
        r = r_next
    disc = np.exp(-integral)
    est, err = disc.mean(), disc.std() / math.sqrt(n_paths)
    assert abs(est - zcb_price(r0, 0.0, T, VAS)) < 3 * err + 2e-6


def test_zcb_solves_its_pde_at_second_order():
    tight = QuadratureConfig(panels=64, abs_tol=1e-15)
    res = []
    for h in (0.04, 0.02, 0.01):
        Z = lambda rr, tt: zcb_price(rr, tt, 1.0, VAS, tight)  # noqa: E731
        r, t = 0.04, 0.3
        z_t = (Z(r, t + h) - Z(r, t - h)) / (2 * h)
        z_r = (Z(r + h, t) - Z(r - h, t)) / (2 * h)
        z_rr = (Z(r + h, t) - 2 * Z(r, t) + Z(r - h, t)) / h**2
        res.append(abs(z_t + 0.5 * VAS.Sr**2 * z_rr + VAS.drift(r) * z_r - r * Z(r, t)))
    assert res[0] / res[1] == pytest.approx(4, rel=0.1)
    assert res[1] / res[2] == pytest.approx(4, rel=0.1)


@given(st.floats(-0.05, 0.3), st.floats(0.001, 0.2), st.floats(0.1, 3))
def test_zcb_decreasing_in_rate(r, dr, T):
    assert zcb_price(r + dr, 0.0, T, VAS) < zcb_price(r, 0.0, T, VAS)


def test_zcb_decreasing_in_maturity():
    Ts = np.linspace(0.1, 5, 30)
    vals = [zcb_price(0.04, 0.0, T, VAS) for T in Ts]
    assert np.all(np.diff(vals) < 0)


def test_phi_examples():
    assert phi(0.123, 1.0, 1, SPEC) == pytest.approx(11.0, abs=1e-14)
    assert phi(0.04, 0.0, 0, SPEC) == pytest.approx(PHI_0, abs=1e-9)
    r = 0.03
    flat = type(SPEC)(VasicekParams(0.5 * r, 0.5, 0.0), SPEC.firm, SPEC.schedule)
    expected = math.exp(-r * 0.4) + 11 * math.exp(-r * 0.9)
    assert phi(r, 0.1, 0, flat) == pytest.approx(expected, rel=1e-12)


def test_phi_rejects_time_outside_life():
    with pytest.raises(ValueError):
        phi(0.04, -0.1, 0, SPEC)
    with pytest.raises(ValueError):
        phi(0.04, 1.2, 1, SPEC)


@given(st.floats(-0.02, 0.2), st.floats(0.001, 0.1), st.floats(0, 0.5))
def test_phi_monotone(r, dr, t):
    assert phi(r + dr, t, 0, SPEC) < phi(r, t, 0, SPEC)
    assert phi(r, t, 1, SPEC) < phi(r, t, 0, SPEC)


def test_sigma_sq_examples():
    assert sigma_sq(1.0, 1.0, VAS, FIRM) == 1.0
    assert sigma_sq(0.0, 1.0, VAS, FIRM) == pytest.approx(1.004107486779707, abs=1e-12)
    v = VasicekParams(0.0, 0.5, 0.2)
    bt = b_tilde(0.0, 1.0, v)
    firm = FirmDynamics(0.2 * bt, 0.0, -1.0, 0.5)
    assert sigma_sq(0.0, 1.0, v, firm) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        sigma_sq(1.5, 1.0, VAS, FIRM)


@given(st.floats(-1, 1), st.floats(0, 1))
def test_sigma_sq_lower_bound(rho, u):
    firm = FirmDynamics(0.3, 0.0, rho, 0.5)
    bt = b_tilde(u, 1.0, VAS)
    assert sigma_sq(u, 1.0, VAS, firm) >= (0.3 - VAS.Sr * bt) ** 2 - 1e-15


def test_d_plus_minus_examples():
    dp, dm = d_plus_minus(2.0, 0.5, 1.0, VAS, FIRM)
    assert dp == pytest.approx(D_PLUS, abs=1e-10)
    assert dm == pytest.approx(D_MINUS, abs=1e-10)
    dp, dm = d_plus_minus(math.exp(FIRM.b * 0.5), 0.5, 1.0, VAS, FIRM)
    assert dp == pytest.approx(-dm, abs=1e-12)
    zero_payout = FirmDynamics(1.0, 0.0, 0.0, 0.5)
    dp, dm = d_plus_minus(1.0, 0.0, 1.0, VAS, zero_payout)
    assert dp == pytest.approx(-dm, abs=1e-14)
    with pytest.raises(ValueError):
        d_plus_minus(0.0, 0.0, 1.0, VAS, FIRM)
    with pytest.raises(ValueError):
        d_plus_minus(1.0, 1.0, 1.0, VAS, FIRM)


@settings(max_examples=50)
@given(st.floats(0.05, 20), st.floats(0, 0.9), st.floats(-0.49, 0.49), st.floats(0.1, 2))
def test_d_gap_is_volatility(x, t, rho, SV):
    firm = FirmDynamics(SV, 0.05, rho, 0.5)
    dp, dm = d_plus_minus(x, t, 1.0, VAS, firm)
    v = analytic.integrated_variance(t, 1.0, 1.0, VAS, firm)
    assert dp - dm == pytest.approx(math.sqrt(v), abs=1e-10)
    dp2, _ = d_plus_minus(x * 1.1, t, 1.0, VAS, firm)
    assert dp2 > dp


def test_norm_cdf():
    assert norm_cdf(0.0) == 0.5
    assert abs(norm_cdf(40.0) - 1.0) <= 1e-15
    assert norm_cdf(1.0) == pytest.approx(N1_ONE, abs=1e-12)


@given(st.floats(-30, 30))
def test_norm_cdf_symmetry(x):
    assert 0 <= norm_cdf(x) <= 1
    assert norm_cdf(-x) == pytest.approx(1 - norm_cdf(x), abs=1e-15)


def test_last_interval_converges_to_payoff():
    near = analytic_last_interval(20.0, 0.04, 1.0 - 1e-8, SPEC)
    assert near == pytest.approx(11.0, abs=1e-5)
    low = analytic_last_interval(5.0, 0.04, 1.0 - 1e-8, SPEC)
    assert low == pytest.approx(2.5, abs=1e-5)


def test_last_interval_rejects_outside_interval():
    with pytest.raises(ValueError):
        analytic_last_interval(10.0, 0.04, 0.2, SPEC)
    with pytest.raises(ValueError):
        analytic_last_interval(10.0, 0.04, 1.0, SPEC)
    with pytest.raises(ValueError):
        analytic_last_interval(0.0, 0.04, 0.7, SPEC)


def test_last_interval_bounds_and_monotone():
    V = np.linspace(1, 60, 40)
    vals = analytic_last_interval(V, 0.04, 0.6, SPEC)
    assert np.all(vals > 0)
    assert np.all(vals <= 11.0 + 0.5 * V)
    assert np.all(np.diff(vals) >= -1e-12)


def test_last_interval_without_intensity_is_leading_term_only():
    spec = SPEC.with_schedule(intensities=(0.1, 0.0))
    V, r, t = 14.0, 0.05, 0.7
    Z = zcb_price(r, t, 1.0, VAS)
    x = V / Z
    dp, dm = d_plus_minus(x / 11.0, t, 1.0, VAS, FIRM)
    lead = Z * (11.0 * norm_cdf(dm) + 0.5 * x * math.exp(-0.05 * 0.3) * norm_cdf(-dp))
    for variant in analytic.SOURCE_VARIANTS:
        assert analytic_last_interval(V, r, t, spec, variant=variant) == pytest.approx(lead, rel=1e-13)


def flat_digital_spec(r=0.04, SV=0.3):
    base = reference_model()
    return type(base)(
        VasicekParams(0.5 * r, 0.5, 0.0),
        FirmDynamics(SV, 0.0, 0.0, 0.0),
        base.schedule.__class__((0.5, 1.0), (1.0, 1.0), 10.0, (0.0, 0.0)),
    )


def test_last_interval_is_cash_or_nothing_digital():
    spec = flat_digital_spec()
    V, r, t = 12.0, 0.04, 0.6
    tau = 0.4
    d2 = (math.log(V / 11.0) + (r - 0.045) * tau) / (0.3 * math.sqrt(tau))
    expected = 11.0 * math.exp(-r * tau) * norm_cdf(d2)
    assert analytic_last_interval(V, r, t, spec) == pytest.approx(expected, rel=1e-10)


@pytest.mark.slow
def test_last_interval_digital_monte_carlo():
    spec = flat_digital_spec()
    V, r, t, tau = 12.0, 0.04, 0.6, 0.4
    rng = np.random.default_rng(7)
    z = rng.standard_normal(1_000_000)
    VT = V * np.exp((r - 0.045) * tau + 0.3 * math.sqrt(tau) * z)
    pay = np.where(VT >= 11.0, 11.0, 0.0) * math.exp(-r * tau)
    est, err = pay.mean(), pay.std() / 1000.0
    assert abs(analytic_last_interval(V, r, t, spec) - est) < 3 * err
