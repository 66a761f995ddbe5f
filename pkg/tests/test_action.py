import csv
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad

from anisoprop.action import (
    COEFFICIENT_COLUMNS,
    CROSS_FACTOR,
    D_scale,
    action_boundary,
    action_closed,
    action_form,
    arbitrate_cross_factor,
    caustics,
    check_caustic,
    coefficients,
    first_caustic,
    write_coefficients_csv,
)
from anisoprop.classical import Endpoints, solve_modes, trajectory
from anisoprop.errors import CalibrationError, CausticError
from anisoprop.model import OscillatorConfig, derive
from anisoprop.oracle import lagrangian_action

from conftest import FLAGSHIP, any_configs, coordinate, coupled_configs, fraction, frequency


def test_flagship_coefficients_at_pi_over_5():
    k = coefficients(FLAGSHIP, math.pi / 5)
    assert k.a1 == pytest.approx(0.0, abs=1e-14)
    assert k.c1 == pytest.approx(12 * math.sin(3 * math.pi / 10), rel=1e-15)
    assert k.c2 == 0.0
    assert k.f1 == pytest.approx(14.4, rel=1e-15)
    assert k.f2 == pytest.approx(-14.4, rel=1e-15)
    assert k.D == pytest.approx(9.6, rel=1e-15)


@given(any_configs(), st.floats(min_value=1e-3, max_value=50.0))
def test_c2_equals_f1_plus_f2(cfg, T):
    k = coefficients(cfg, T)
    assert abs(k.c2 - k.f1 - k.f2) <= 1e-14 * max(abs(k.c2) + abs(k.f1) + abs(k.f2), 1e-300)


def test_field_free_cross_coefficients_vanish():
    k = coefficients(OscillatorConfig(1.4, 0.6, 0.0), 0.8)
    assert (k.c1, k.c2, k.f1, k.f2) == (0.0, 0.0, 0.0, 0.0)


def test_flagship_caustics():
    found = caustics(FLAGSHIP, 0.0, 4 * math.pi)
    assert found == pytest.approx([2 * math.pi * k / 5 for k in range(1, 11)], abs=1e-12)
    assert first_caustic(FLAGSHIP) == pytest.approx(2 * math.pi / 5, abs=1e-12)


def test_decoupled_isotropic_caustics():
    w = 1.7
    found = caustics(OscillatorConfig(w, w, 0.0), 0.0, 10.0)
    assert found == pytest.approx([k * math.pi / w for k in range(1, 6)], abs=1e-12)


def test_anisotropic_caustics_match_dense_scan():
    cfg = OscillatorConfig(3.0, 1.0, 2.0)
    found = caustics(cfg, 0.0, 20.0)
    t = np.linspace(1e-6, 20.0, 2_000_001)
    D = coefficients(cfg, t).D
    flips = t[:-1][np.sign(D[:-1]) != np.sign(D[1:])]
    assert len(found) == len(flips) > 3
    np.testing.assert_allclose(found, flips, atol=2e-5)
    for r in found:
        assert abs(coefficients(cfg, r).D) < 1e-11 * D_scale(cfg)


def test_tangential_caustics_found():
    # isotropic: D = (w1+w2)^2 (O-/O+) sin^2(O+ t / 2) touches zero without a sign change
    found = caustics(OscillatorConfig(1.0, 1.0, 0.5), 0.0, 10.0)
    op = derive(OscillatorConfig(1.0, 1.0, 0.5)).omega_plus
    want = [2 * math.pi * k / op for k in range(1, int(10 * op / (2 * math.pi)) + 1)]
    assert found == pytest.approx(want, abs=1e-9)


@given(coupled_configs())
def test_D_positive_before_first_caustic(cfg):
    tc = first_caustic(cfg)
    t = np.linspace(1e-4 * tc, 0.999 * tc, 500)
    assert np.all(coefficients(cfg, t).D > 0)
    assert first_caustic(cfg) <= 2 * math.pi / derive(cfg).omega_plus * (1 + 1e-9)


def test_check_caustic_lists_neighbours():
    T = 4 * math.pi / 5
    with pytest.raises(CausticError) as info:
        check_caustic(coefficients(FLAGSHIP, T), FLAGSHIP, T)
    assert any(abs(t - T) < 1e-9 for t in info.value.caustic_times)
    assert any(abs(t - 2 * math.pi / 5) < 1e-9 for t in info.value.caustic_times)


def test_zero_endpoints_zero_action():
    assert action_boundary(Endpoints(0, 0, 0, 0, 0.4), FLAGSHIP) == 0.0
    assert action_closed(Endpoints(0, 0, 0, 0, 0.4), FLAGSHIP) == 0.0


@given(frequency, frequency, coordinate, coordinate, coordinate, coordinate, fraction)
def test_decoupled_action_is_sum_of_1d_actions(w1, w2, x1, y1, x2, y2, frac):
    cfg = OscillatorConfig(w1, w2, 0.0)
    T = frac * first_caustic(cfg)

    def one_d(w, a, b):
        return w / (2 * math.sin(w * T)) * ((a * a + b * b) * math.cos(w * T) - 2 * a * b)

    want = one_d(w1, x1, x2) + one_d(w2, y1, y2)
    ep = Endpoints(x1, y1, x2, y2, T)
    tol = 1e-9 * max(1.0, abs(want))
    assert action_boundary(ep, cfg) == pytest.approx(want, abs=tol)
    assert action_closed(ep, cfg) == pytest.approx(want, abs=tol)


@given(any_configs(), coordinate, coordinate, coordinate, coordinate, fraction)
def test_closed_equals_boundary(cfg, x1, y1, x2, y2, frac):
    ep = Endpoints(x1, y1, x2, y2, frac * first_caustic(cfg))
    sb = action_boundary(ep, cfg)
    size = cfg.m * derive(cfg).Omega1 * float(ep.vector @ ep.vector) + 1e-300
    assert abs(action_closed(ep, cfg) - sb) <= 1e-9 * max(abs(sb), 1e-3 * size)


@given(coupled_configs(), coordinate, fraction)
def test_collinear_endpoints_independent_of_cross_factor(cfg, s, frac):
    ep = Endpoints(0.7 * s, -0.3 * s, 1.4, -0.6, frac * first_caustic(cfg))
    assert action_closed(ep, cfg, 2) == pytest.approx(action_closed(ep, cfg, 4), rel=1e-12, abs=1e-12)


@given(coupled_configs(), coordinate, coordinate, coordinate, coordinate, fraction)
def test_time_reversal_flips_cross_term(cfg, x1, y1, x2, y2, frac):
    T = frac * first_caustic(cfg)
    f = action_form(cfg, T)
    fwd = f(x1, y1, x2, y2)
    rev = f(x2, y2, x1, y1)
    # swapping the ends flips the sign of both antisymmetric pieces
    cross = 0.5 * cfg.m * f.cross * (x1 * y2 - x2 * y1)
    mixed = 0.5 * cfg.m * f.mixed * (x2 * y2 - x1 * y1)
    assert rev == pytest.approx(fwd - 2 * cross - 2 * mixed, rel=1e-12, abs=1e-12)


@given(frequency, st.floats(min_value=0.05, max_value=10.0), fraction)
def test_isotropic_landau_reduction(w, w0, frac):
    cfg = OscillatorConfig(w, w, w0)
    T = frac * first_caustic(cfg)
    f = action_form(cfg, T)
    om = math.sqrt(w * w + w0 * w0 / 4)  # = O+ / 2
    s = math.sin(om * T)
    assert f.xx == pytest.approx(om * math.cos(om * T) / s, rel=1e-10)
    assert f.yy == pytest.approx(f.xx, rel=1e-12)
    assert f.bx == pytest.approx(om * math.cos(w0 * T / 2) / s, rel=1e-10)
    assert f.cross == pytest.approx(2 * om * math.sin(w0 * T / 2) / s, rel=1e-10)
    assert f.mixed == 0.0


def test_arbitration_isotropic_and_anisotropic_agree():
    iso = arbitrate_cross_factor([FLAGSHIP, OscillatorConfig(1.2, 1.2, 0.3)], n_points=60, seed=1)
    aniso = arbitrate_cross_factor([OscillatorConfig(3.0, 1.0, 2.0), OscillatorConfig(0.4, 5.0, 7.0)],
                                   n_points=60, seed=2)
    assert iso["cross_factor"] == aniso["cross_factor"] == CROSS_FACTOR
    assert abs(iso["k_fit"] - 4) < 1e-8 and abs(aniso["k_fit"] - 4) < 1e-8
    assert float(iso["residuals"]["4"]) < 1e-8 < float(iso["residuals"]["2"])
    assert set(iso) >= {"cross_factor", "k_fit", "residuals", "n_points", "configs"}


def test_arbitration_without_signal_fails():
    with pytest.raises(CalibrationError):
        arbitrate_cross_factor([OscillatorConfig(1.0, 2.0, 0.0)])


def test_invalid_cross_factor():
    with pytest.raises(CalibrationError):
        action_closed(Endpoints(1, 0, 0, 1, 0.3), FLAGSHIP, cross_factor=3)


def _first_order_variation(ep, cfg, eps, a, b):
    """S[q + eps eta] - S[q - eps eta] with eta = (a, b) sin(pi t / T), as one integral."""
    mc = solve_modes(ep, cfg)
    T = ep.T

    def lag(p, e, t):
        s, c = math.sin(math.pi * t / T), math.pi / T * math.cos(math.pi * t / T)
        x, y = p.x + e * a * s, p.y + e * b * s
        vx, vy = p.vx + e * a * c, p.vy + e * b * c
        return 0.5 * cfg.m * (vx * vx + vy * vy - cfg.omega1**2 * x * x - cfg.omega2**2 * y * y
                              + cfg.omega0 * (x * vy - y * vx))

    def diff(t):
        p = trajectory(mc, cfg, t)
        return lag(p, eps, t) - lag(p, -eps, t)

    return quad(diff, 0.0, T, epsabs=1e-16, epsrel=1e-10, limit=200)[0]


@pytest.mark.parametrize("cfg", [FLAGSHIP, OscillatorConfig(3.0, 1.0, 2.0), OscillatorConfig(1.3, 0.7, 0.0)])
def test_classical_path_is_stationary(cfg):
    ep = Endpoints(0.4, -0.2, 0.9, 0.5, 0.6 * first_caustic(cfg))
    eps = 1e-4
    s0 = lagrangian_action(ep, cfg)
    slope = _first_order_variation(ep, cfg, eps, 1.0, -0.7) / (2 * eps)
    assert abs(slope) < 1e-8 * abs(s0)


def test_small_omega_minus_is_stable():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    w1, w2, w0 = 1.0, 1.0 + 1e-9, 1e-6
    cfg = OscillatorConfig(w1, w2, w0)
    T = 0.5
    k = coefficients(cfg, T)
    W1, W2, W0, TT = (mpmath.mpf(v) for v in (w1, w2, w0, T))
    op = mpmath.sqrt(W0**2 + (W1 + W2) ** 2)
    om = mpmath.sqrt(W0**2 + (W1 - W2) ** 2)
    D = (W1 + W2) ** 2 * om / op * mpmath.sin(op * TT / 2) ** 2 - (W1 - W2) ** 2 * op / om * mpmath.sin(
        om * TT / 2
    ) ** 2
    f1 = W0 * (W2 * (W1 - W2) * op / om * mpmath.sin(om * TT / 2) ** 2
               + W2 * (W1 + W2) * om / op * mpmath.sin(op * TT / 2) ** 2)
    assert k.D == pytest.approx(float(D), rel=1e-13)
    assert k.f1 == pytest.approx(float(f1), rel=1e-12)


def test_coefficients_csv(tmp_path):
    path = tmp_path / "k.csv"
    assert write_coefficients_csv(path, FLAGSHIP, [0.1, 0.2, math.pi / 5]) == 3
    rows = list(csv.DictReader(path.open()))
    assert tuple(rows[0]) == COEFFICIENT_COLUMNS
    assert float(rows[2]["D"]) == pytest.approx(9.6, rel=1e-15)


@given(any_configs(), coordinate, coordinate, coordinate, coordinate, fraction)
def test_lagrangian_oracle_agrees(cfg, x1, y1, x2, y2, frac):
    assume(abs(x1) + abs(y1) + abs(x2) + abs(y2) > 0.1)
    ep = Endpoints(x1, y1, x2, y2, frac * first_caustic(cfg))
    sl = lagrangian_action(ep, cfg)
    size = cfg.m * derive(cfg).Omega1 * float(ep.vector @ ep.vector)
    assert abs(action_closed(ep, cfg) - sl) <= 1e-7 * max(abs(sl), 1e-3 * size)
