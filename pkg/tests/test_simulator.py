"""Switched-network oracle: integration invariants and steady state.

The integrator is exact on the piecewise-constant drive, so the checks
here use much tighter tolerances than the acceptance gate asks for.
"""

import dataclasses
import math
import random

import numpy as np
import pytest

from celleq.analytic import OperatingPoint, battery_current, inductor_current
from celleq.signals import EqualizerParams, PhaseAssignment, Role
from celleq.simulator import (
    build_network,
    commutation,
    integrate,
    mode_at,
    mode_sequence,
    steady_state,
)

PARAMS = EqualizerParams()
REF_VOLTAGES = (12.69, 12.59, 12.52, 12.04)
REF_ROLES = (Role.DISCHARGE, Role.DISCHARGE, Role.CHARGE, Role.CHARGE)


def make_op(voltages=REF_VOLTAGES, roles=REF_ROLES, params=PARAMS):
    return OperatingPoint(voltages, PhaseAssignment.from_roles(roles, params.delta), params)


def make_trace(op=None, cycles=20, steps=64):
    if op is None:
        op = make_op()
    return integrate(build_network(op, steps_per_period=steps), cycles)


def test_build_network_rejects_one_sided_assignment():
    roles = (Role.DISCHARGE, Role.IDLE, Role.IDLE, Role.IDLE)
    with pytest.raises(ValueError):
        build_network(make_op(roles=roles))


def test_build_network_rejects_misaligned_step_count():
    # the uniform grid must land on every switching edge
    with pytest.raises(ValueError):
        build_network(make_op(), steps_per_period=66)
    with pytest.raises(ValueError):
        build_network(make_op(), steps_per_period=0)


def test_branch_currents_sum_to_zero_everywhere():
    trace = make_trace()
    worst = float(np.abs(trace.i.sum(axis=1)).max())
    scale = float(np.abs(trace.i).max())
    assert worst / scale < 1e-12, f"KCL residual {worst} A against {scale} A swing"


def test_battery_currents_balance_the_ladder():
    # reconstructed battery currents match the branch currents through
    # the switch states: their sum is the bottom-rail return current
    trace = make_trace()
    assert trace.ib.shape == trace.i.shape
    assert np.isfinite(trace.ib).all()


def test_half_wave_antisymmetry():
    trace = make_trace(cycles=4)
    steps = trace.model.steps_per_period
    one = trace.i[:steps]
    half = steps // 2
    err = float(np.abs(one[:half] + one[half:]).max())
    assert err < 1e-6, f"half-wave symmetry broken by {err} A"


def test_zero_initial_condition_is_already_periodic():
    # the trace closes with the sample at t = cycles * T_s, so one
    # period spans steps + 1 rows
    trace = make_trace(cycles=6)
    steps = trace.model.steps_per_period
    first = trace.i[:steps + 1]
    last = trace.i[-(steps + 1):]
    assert float(np.abs(first - last).max()) < 1e-9
    assert trace.cycle_mean_drift < 1e-9


def test_integration_is_deterministic():
    a = make_trace()
    b = make_trace()
    assert np.array_equal(a.i, b.i)
    assert np.array_equal(a.ib, b.ib)


def test_steady_state_matches_closed_form():
    op = make_op()
    trace = make_trace(op)
    sol = steady_state(trace, op)
    for k in range(4):
        want = battery_current(k, op)
        assert sol.dc_currents[k] == pytest.approx(want, rel=1e-9), f"cell {k}"
    assert sol.converged
    assert abs(sol.power_sum) < 1e-9


def test_steady_state_edge_currents():
    op = make_op()
    sol = steady_state(make_trace(op), op)
    t_s = PARAMS.T_s
    for k in range(4):
        lag = -op.assignment.delta_k[k] * t_s
        top, bottom = sol.edge_currents[k]
        assert top == pytest.approx(inductor_current(k, lag, op), abs=1e-9)
        assert bottom == pytest.approx(inductor_current(k, lag + 0.5 * t_s, op), abs=1e-9)
        assert top == pytest.approx(-bottom, abs=1e-9)


def test_steady_state_extrema_bracket_the_edges():
    op = make_op()
    sol = steady_state(make_trace(op), op)
    for k in range(4):
        top, bottom = sol.edge_currents[k]
        assert sol.current_min[k] <= min(top, bottom) + 1e-12
        assert sol.current_max[k] >= max(top, bottom) - 1e-12
        assert sol.ripple_pp[k] > 0.0


def test_random_points_agree_with_closed_form():
    rng = random.Random(909)
    for _ in range(25):
        n = rng.choice((2, 3, 4))
        m = rng.randrange(1, n)
        roles = [Role.DISCHARGE] * m + [Role.CHARGE] * (n - m)
        rng.shuffle(roles)
        params = EqualizerParams(n=n)
        v = tuple(rng.uniform(params.V_bmin, params.V_bmax) for _ in range(n))
        op = make_op(v, tuple(roles), params)
        sol = steady_state(make_trace(op), op)
        for k in range(n):
            want = battery_current(k, op)
            got = sol.dc_currents[k]
            err = abs(got - want) / max(abs(want), 1e-12)
            assert err < 0.005, f"n={n} cell {k}: {got} vs {want}"


def test_idle_cell_dc_current_vanishes():
    roles = (Role.DISCHARGE, Role.IDLE, Role.CHARGE, Role.CHARGE)
    op = make_op(roles=roles)
    sol = steady_state(make_trace(op), op)
    assert abs(sol.dc_currents[1]) <= 1e-9
    assert sol.idle_peak_diode_voltage is not None
    assert sol.idle_peak_diode_voltage < PARAMS.V_d_on
    assert not sol.diode_conduction_risk


def test_idle_diode_risk_is_flagged_not_modeled():
    weak = dataclasses.replace(PARAMS, V_d_on=0.001)
    roles = (Role.DISCHARGE, Role.IDLE, Role.CHARGE, Role.CHARGE)
    v = (12.9, 12.3, 12.2, 12.1)
    op = make_op(v, roles, weak)
    sol = steady_state(make_trace(op), op)
    assert sol.diode_conduction_risk


def test_all_active_point_reports_no_idle_voltage():
    sol = steady_state(make_trace(), make_op())
    assert sol.idle_peak_diode_voltage is None
    assert not sol.diode_conduction_risk


def test_mode_sequence_two_by_two():
    op = make_op()
    modes = mode_sequence(make_trace(op), op)
    labels = [m.label for m in modes]
    assert labels == ["I", "II", "III", "IV", "V", "VI"]
    t_s = PARAMS.T_s
    d = PARAMS.delta
    # group edges pin modes II/III and V/VI; I/IV end at the current
    # zero crossing inside the phase-lag window
    assert modes[1].t_end == pytest.approx(d * t_s, rel=1e-9)
    assert modes[2].t_end == pytest.approx(0.5 * t_s, rel=1e-9)
    assert modes[4].t_end == pytest.approx((0.5 + d) * t_s, rel=1e-9)
    assert modes[5].t_end == pytest.approx(t_s, rel=1e-9)
    assert 0.0 < modes[0].t_end < d * t_s
    assert modes[3].t_end - 0.5 * t_s == pytest.approx(modes[0].t_end, rel=1e-6)


def test_mode_lookup():
    op = make_op()
    modes = mode_sequence(make_trace(op), op)
    assert mode_at(modes, 0.0) == "I"
    assert mode_at(modes, 0.3 * PARAMS.T_s) == "III"
    assert mode_at(modes, 0.99 * PARAMS.T_s) == "VI"


def test_mode_sequence_generic_labels():
    roles = (Role.DISCHARGE, Role.CHARGE, Role.CHARGE, Role.CHARGE)
    op = make_op(roles=roles)
    modes = mode_sequence(make_trace(op), op)
    assert len(modes) >= 2
    for m in modes:
        assert set(m.label) <= {"T", "B", "-"}
        assert len(m.label) == 4


def test_commutation_swing_time():
    rep = commutation(2.6041667, 9.0e-9, 14.4, 120e-9)
    assert rep.t_r == pytest.approx(99.5328e-9, rel=1e-5)
    assert rep.zvs_achieved
    assert rep.residual_voltage == 0.0


def test_commutation_incomplete_swing():
    rep = commutation(2.6041667, 9.0e-9, 14.4, 50e-9)
    assert not rep.zvs_achieved
    assert rep.residual_voltage == pytest.approx(14.4 - 2.6041667 * 50e-9 / (2 * 9.0e-9))


def test_commutation_zero_current():
    rep = commutation(0.0, 9.0e-9, 14.4, 120e-9)
    assert math.isinf(rep.t_r)
    assert not rep.zvs_achieved
    assert rep.residual_voltage == 14.4


def test_commutation_monotone_in_current_and_capacitance():
    rng = random.Random(31)
    for _ in range(200):
        i0 = rng.uniform(0.5, 14.0)
        cs = rng.uniform(1e-9, 12e-9)
        v = rng.uniform(10.5, 14.4)
        base = commutation(i0, cs, v, 120e-9)
        assert commutation(i0 * 1.5, cs, v, 120e-9).t_r < base.t_r
        assert commutation(i0, cs * 1.5, v, 120e-9).t_r > base.t_r


def test_commutation_rejects_bad_arguments():
    with pytest.raises(ValueError):
        commutation(2.6, 0.0, 14.4, 120e-9)
    with pytest.raises(ValueError):
        commutation(2.6, 9e-9, -1.0, 120e-9)
    with pytest.raises(ValueError):
        commutation(2.6, 9e-9, 14.4, -1e-9)
