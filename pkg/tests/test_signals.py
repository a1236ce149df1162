"""Carrier waveforms, parameter validation, and phase bookkeeping."""

import math
import random
from fractions import Fraction

import pytest

from celleq.signals import (
    EqualizerParams,
    PhaseAssignment,
    Role,
    SwitchCommand,
    gate_state,
    phase_fraction,
    sq,
    tr,
)

T_S = EqualizerParams().T_s


def test_square_wave_levels():
    assert sq(0.0, T_S) == 1.0
    assert sq(0.49 * T_S, T_S) == 1.0
    assert sq(0.5 * T_S, T_S) == -1.0
    assert sq(0.99 * T_S, T_S) == -1.0
    assert sq(T_S, T_S) == 1.0


def test_triangle_anchor_points():
    assert tr(0.0, T_S) == -1.0
    assert tr(0.25 * T_S, T_S) == 0.0
    assert tr(0.5 * T_S, T_S) == 1.0
    assert tr(0.75 * T_S, T_S) == pytest.approx(0.0)
    assert tr(T_S, T_S) == -1.0


def test_carriers_have_exact_zero_mean():
    # Sample sums are rational when the grid divides the period into a
    # multiple of 4; the mean must vanish exactly, not approximately.
    for n_samples in (4, 8, 64, 100):
        s_sq = Fraction(0)
        s_tr = Fraction(0)
        for j in range(n_samples):
            p = Fraction(j, n_samples)
            s_sq += 1 if p < Fraction(1, 2) else -1
            s_tr += 4 * p - 1 if p <= Fraction(1, 2) else 3 - 4 * p
        assert s_sq == 0, f"square-wave sample sum {s_sq} at N={n_samples}"
        assert s_tr == 0, f"triangle sample sum {s_tr} at N={n_samples}"


def test_triangle_is_integral_of_square():
    # tr(t) = (4/T_s) * integral of sq over [0, t] - 1, checked by
    # midpoint quadrature on segments that never straddle the step.
    rng = random.Random(81)
    for _ in range(200):
        t = rng.uniform(0.0, T_S)
        acc = 0.0
        for lo, hi in ((0.0, min(t, 0.5 * T_S)), (min(t, 0.5 * T_S), t)):
            if hi > lo:
                acc += sq(0.5 * (lo + hi), T_S) * (hi - lo)
        want = 4.0 * acc / T_S - 1.0
        got = tr(t, T_S)
        assert abs(got - want) < 1e-12, f"t={t}: tr={got}, integral gives {want}"


def test_carriers_are_periodic():
    rng = random.Random(82)
    for _ in range(300):
        t = rng.uniform(-3.0 * T_S, 3.0 * T_S)
        shift = rng.randint(-5, 5) * T_S
        assert sq(t, T_S) == sq(t + shift, T_S)
        assert abs(tr(t, T_S) - tr(t + shift, T_S)) < 1e-9


def test_phase_fraction_wraps_negative_times():
    assert phase_fraction(0.0, T_S) == 0.0
    assert phase_fraction(-0.125 * T_S, T_S) == pytest.approx(0.875)
    assert phase_fraction(2.25 * T_S, T_S) == pytest.approx(0.25)
    assert 0.0 <= phase_fraction(-1e-18, T_S) < 1.0


def test_triangle_at_charge_phase_offset():
    # Value seen by a charging converter at its own switching instant.
    params = EqualizerParams()
    d = params.delta
    assert tr(-d * params.T_s, params.T_s) == pytest.approx(-1.0 + 4.0 * d)


def test_default_parameters():
    p = EqualizerParams()
    assert p.n == 4
    assert p.T_s == pytest.approx(1.0 / 30e3)
    assert p.C_s_eff_min == pytest.approx(4.7e-9 + 1.2e-9)
    assert p.C_s_eff_max == pytest.approx(4.7e-9 + 4.3e-9)


@pytest.mark.parametrize("bad", [
    dict(n=1),
    dict(L=0.0),
    dict(f_s=-30e3),
    dict(delta=0.0),
    dict(delta=0.25),
    dict(dead_time=-1e-9),
    dict(V_bmin=14.4, V_bmax=10.5),
    dict(V_tol=0.0),
    dict(C_s_parasitic_range=(4.3e-9, 1.2e-9)),
    dict(P_rated=0.0),
])
def test_parameter_validation(bad):
    with pytest.raises(ValueError):
        EqualizerParams(**bad)


def test_dead_time_must_fit_inside_phase_shift():
    p = EqualizerParams()
    with pytest.raises(ValueError):
        EqualizerParams(dead_time=p.delta * p.T_s)


def test_phase_assignment_from_roles():
    roles = (Role.DISCHARGE, Role.DISCHARGE, Role.CHARGE, Role.IDLE)
    a = PhaseAssignment.from_roles(roles, 0.125)
    assert a.delta_k == (0.0, 0.0, -0.125, 0.0)
    assert a.n == 4
    assert a.active_indices == (0, 1, 2)
    assert a.n_active == 3
    assert a.m_discharge == 2
    assert a.m_charge == 1


def test_role_values_are_stable_strings():
    assert Role("discharge") is Role.DISCHARGE
    assert Role("charge") is Role.CHARGE
    assert Role("idle") is Role.IDLE


def test_gate_state_half_periods():
    params = EqualizerParams()
    dt = params.dead_time
    # discharging converter, no phase lag
    assert gate_state(dt + 1e-9, 0.0, params) is SwitchCommand.TOP_ON
    assert gate_state(0.5 * T_S + dt + 1e-9, 0.0, params) is SwitchCommand.BOTTOM_ON
    # both devices blanked right after each edge
    assert gate_state(0.5 * dt, 0.0, params) is SwitchCommand.BOTH_OFF
    assert gate_state(0.5 * T_S + 0.5 * dt, 0.0, params) is SwitchCommand.BOTH_OFF


def test_gate_state_charge_lag():
    params = EqualizerParams()
    d = params.delta
    # a charging leg switches delta * T_s after the discharging legs
    t = (d + 0.01) * T_S
    assert gate_state(t, -d, params) is SwitchCommand.TOP_ON
    assert gate_state(t - 0.02 * T_S, -d, params) is SwitchCommand.BOTTOM_ON
