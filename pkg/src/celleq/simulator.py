"""Time-domain oracle for the switched equalizer network.

This module deliberately shares no formulas with the closed-form engine.
Each active converter is reduced to its ac model: a two-level source
(V_bk/2)*Sq(t + d_k T_s) behind the coupling inductor, all tied to one
common node whose voltage is the instantaneous average of the active
source voltages. The branch currents then obey

    L di_k/dt = V_k(t) - V_o(t)

with a piecewise-constant right-hand side, so the exact solution is
piecewise linear in time. The integrator advances closed-form segments
between switching edges instead of taking approximate ODE steps; the
only numerical error anywhere is float roundoff.

Battery currents are reconstructed from the branch currents and gate
states by node balance on the series stack:

    i_bk = S_k i_k - sum_{j<=k} i_j

with S_k = 1 while the top device conducts, else 0. Dead time is
invisible at this scale (about 0.4% of the period) and is handled
separately by `commutation`, which resolves a single edge: the inductor
current charges the two device capacitances in series with the pole, so
the voltage slews at |i0|/(2 C_s_eff) and either completes within the
dead time (zero-voltage turn-on) or leaves a residual.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .analytic import OperatingPoint, idle_diode_voltages
from .controller import is_active
from .signals import Role

# Residual pole voltage (V) below which a turn-on counts as zero-voltage.
ZVS_EPSILON = 1e-9

# Phase fractions closer than this are the same switching edge.
_PHASE_TOL = 1e-12

# Cycle-to-cycle drift of per-branch mean current (A) below which the
# trace counts as periodic. The lossless network settles immediately from
# zero initial currents; the check guards future loss models.
_DRIFT_TOL = 1e-9

# Largest idle-battery dc current (A) that still counts as zero while the
# diodes block. Trapezoid roundoff on the partial branch sums reaches a
# few 1e-12 A at n=8; anything past this is a modeling error, not dust.
_IDLE_DC_TOL = 1e-9


@dataclass(frozen=True)
class NetworkModel:
    """Active branches of the ac-coupled network plus the sampling grid.

    Only non-idle converters appear as branches; the common node voltage
    is defined as the mean of the active source voltages, which encodes
    the same-inductance current divider of the shared bus.
    """

    op: OperatingPoint
    active: tuple[int, ...]
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]
    L: float
    T_s: float
    steps_per_period: int
    edge_phases: tuple[float, ...]


@dataclass(frozen=True)
class Trace:
    """Sampled waveforms over the full run plus the exact final period.

    t, i, v_o, s, ib are uniform-grid samples (one row per grid point,
    cycles*steps_per_period + 1 rows, currents continuous throughout).
    Gate states s hold 1 (top device on), 0 (bottom device on) or -1
    (idle, both off). skeleton_phases/skeleton_i carry the exact
    piecewise-linear solution of the final period at its breakpoints,
    which is what the steady-state extractor evaluates.
    """

    t: np.ndarray
    i: np.ndarray
    v_o: np.ndarray
    s: np.ndarray
    ib: np.ndarray
    skeleton_phases: np.ndarray
    skeleton_i: np.ndarray
    cycles: int
    cycle_mean_drift: float
    model: NetworkModel


@dataclass(frozen=True)
class ModeInterval:
    """One labeled interval of the switching period, [t_start, t_end)."""

    label: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class SteadyStateSolution:
    """Steady-state figures extracted from the final simulated period."""

    dc_currents: tuple[float, ...]
    powers: tuple[float, ...]
    power_sum: float
    mean_currents: tuple[float, ...]
    edge_currents: tuple[tuple[float, float], ...]
    current_min: tuple[float, ...]
    current_max: tuple[float, ...]
    ripple_pp: tuple[float, ...]
    modes: tuple[ModeInterval, ...]
    converged: bool
    cycle_mean_drift: float
    idle_peak_diode_voltage: float | None
    diode_conduction_risk: bool


@dataclass(frozen=True)
class CommutationReport:
    """Outcome of one dead-time pole transition."""

    t_r: float
    zvs_achieved: bool
    residual_voltage: float


# =====================================================================
# Network construction and exact integration
# =====================================================================

def build_network(op: OperatingPoint, steps_per_period: int = 64) -> NetworkModel:
    """Reduce an operating point to the ac network of its active branches.

    Requires at least one discharging and one charging converter; with
    fewer the controller keeps all gates off and there is no circuit to
    integrate. steps_per_period sets the uniform reporting grid and must
    be a multiple of the number of distinct switching edges per period so
    the grid tiles the edge pattern evenly.
    """
    if not is_active(op.assignment):
        raise ValueError(
            "assignment has no discharge/charge pair; nothing to simulate"
        )
    active = op.active_indices
    amplitudes = tuple(0.5 * op.voltages[k] for k in active)
    phases = tuple(op.assignment.delta_k[k] for k in active)
    edges = _edge_phases(phases)
    if steps_per_period < len(edges) or steps_per_period % len(edges):
        raise ValueError(
            f"steps_per_period={steps_per_period} is not a positive multiple "
            f"of the {len(edges)} switching edges per period"
        )
    return NetworkModel(
        op=op,
        active=active,
        amplitudes=amplitudes,
        phases=phases,
        L=op.params.L,
        T_s=op.params.T_s,
        steps_per_period=steps_per_period,
        edge_phases=edges,
    )


def _edge_phases(deltas: tuple[float, ...]) -> tuple[float, ...]:
    """Distinct phase fractions in [0, 1) where any source voltage flips."""
    raw = sorted({(-d) % 1.0 for d in deltas} | {(0.5 - d) % 1.0 for d in deltas})
    out: list[float] = []
    for p in raw:
        if not out or p - out[-1] > _PHASE_TOL:
            out.append(p)
    if len(out) > 1 and 1.0 - out[-1] <= _PHASE_TOL:
        out.pop()
    return tuple(out)


def _merge_phases(steps: int, edges: tuple[float, ...]) -> tuple[list[float], list[int]]:
    """Union of the uniform grid and the switching edges, as sorted phases.

    Returns the merged breakpoint list and the index of each uniform grid
    point within it. Uniform points are kept verbatim so sampled values
    are exact breakpoint values, not interpolations.
    """
    merged = [j / steps for j in range(steps)]
    for e in edges:
        pos = bisect.bisect_left(merged, e)
        near = []
        if pos < len(merged):
            near.append(merged[pos])
        if pos > 0:
            near.append(merged[pos - 1])
        if all(abs(e - q) > _PHASE_TOL for q in near):
            merged.insert(pos, e)
    sample_idx = [bisect.bisect_left(merged, j / steps) for j in range(steps)]
    return merged, sample_idx


def integrate(model: NetworkModel, cycles: int) -> Trace:
    """Integrate the network over whole switching cycles from rest.

    The drive is piecewise constant between breakpoints (uniform grid
    plus switching edges), so each segment advances the currents exactly.
    The zero-initial-current solution of this lossless network is already
    periodic; what remains is its arbitrary dc level, fixed by the series
    dc-blocking capacitors which forbid any dc branch current. That level
    is removed by subtracting each branch's exact first-cycle mean, a
    constant shift that preserves continuity and KCL.
    """
    if cycles < 1:
        raise ValueError(f"cycles must be >= 1, got {cycles}")
    steps = model.steps_per_period
    phases, sample_idx = _merge_phases(steps, model.edge_phases)
    ps = np.asarray(phases)
    widths = np.diff(np.append(ps, 1.0))
    dts = widths * model.T_s
    mids = ps + 0.5 * widths
    nb = len(model.active)

    drive = np.empty((len(ps), nb))
    for b in range(nb):
        lit = ((mids + model.phases[b]) % 1.0) < 0.5
        drive[:, b] = model.amplitudes[b] * np.where(lit, 1.0, -1.0)
    v_o_seg = drive.mean(axis=1)
    di = (drive - v_o_seg[:, None]) / model.L * dts[:, None]

    samples = np.empty((cycles * steps + 1, nb))
    means = np.empty((cycles, nb))
    bp = np.empty((len(ps) + 1, nb))
    cur = np.zeros(nb)
    for c in range(cycles):
        bp[0] = cur
        np.cumsum(di, axis=0, out=bp[1:])
        bp[1:] += cur
        samples[c * steps:(c + 1) * steps] = bp[sample_idx]
        means[c] = (0.5 * (bp[:-1] + bp[1:]) * dts[:, None]).sum(axis=0) / model.T_s
        cur = bp[-1].copy()
    samples[-1] = cur

    mu = means[0]
    samples -= mu
    skeleton = bp - mu
    drift = float(np.abs(means[-1] - means[-2]).max()) if cycles > 1 else 0.0

    n = model.op.params.n
    count = cycles * steps + 1
    i_full = np.zeros((count, n))
    i_full[:, model.active] = samples
    skeleton_full = np.zeros((len(ps) + 1, n))
    skeleton_full[:, model.active] = skeleton

    # Gate states and common-node voltage are memoryless functions of the
    # phase, evaluated right-continuously at the sample instants.
    base = np.arange(steps) / steps
    s_period = np.full((steps, n), -1, dtype=np.int8)
    vals = np.empty((steps, nb))
    for b, k in enumerate(model.active):
        top = ((base + model.phases[b]) % 1.0) < 0.5
        s_period[:, k] = np.where(top, 1, 0)
        vals[:, b] = model.amplitudes[b] * np.where(top, 1.0, -1.0)
    v_o_period = vals.mean(axis=1)
    s = np.vstack([np.tile(s_period, (cycles, 1)), s_period[:1]])
    v_o = np.concatenate([np.tile(v_o_period, cycles), v_o_period[:1]])

    ib = np.where(s == 1, i_full, 0.0) - np.cumsum(i_full, axis=1)
    t = np.arange(count) * (model.T_s / steps)

    return Trace(
        t=t,
        i=i_full,
        v_o=v_o,
        s=s,
        ib=ib,
        skeleton_phases=np.append(ps, 1.0),
        skeleton_i=skeleton_full,
        cycles=cycles,
        cycle_mean_drift=drift,
        model=model,
    )


def _eval_skeleton(trace: Trace, p: float) -> np.ndarray:
    """Exact branch currents at phase fraction p of the final period."""
    ps = trace.skeleton_phases
    idx = int(np.searchsorted(ps, p))
    if idx < len(ps) and abs(float(ps[idx]) - p) <= _PHASE_TOL:
        return trace.skeleton_i[idx]
    if idx > 0 and abs(float(ps[idx - 1]) - p) <= _PHASE_TOL:
        return trace.skeleton_i[idx - 1]
    lo, hi = float(ps[idx - 1]), float(ps[idx])
    w = (p - lo) / (hi - lo)
    return (1.0 - w) * trace.skeleton_i[idx - 1] + w * trace.skeleton_i[idx]


# =====================================================================
# Steady-state extraction
# =====================================================================

def steady_state(trace: Trace, op: OperatingPoint) -> SteadyStateSolution:
    """Extract dc currents, powers, edge values and ripple from a trace.

    Everything is computed from the exact final-period skeleton: currents
    are piecewise linear, so trapezoid areas per segment are exact and
    the extrema sit on breakpoints. Edge currents are each converter's
    own values at its top and bottom turn-on instants.
    """
    model = trace.model
    params = op.params
    n = params.n
    ps = trace.skeleton_phases
    widths = np.diff(ps)
    mids = 0.5 * (ps[:-1] + ps[1:])
    left = trace.skeleton_i[:-1]
    right = trace.skeleton_i[1:]

    s_seg = np.zeros((len(mids), n))
    for b, k in enumerate(model.active):
        top = ((mids + model.phases[b]) % 1.0) < 0.5
        s_seg[:, k] = np.where(top, 1.0, 0.0)

    ib_left = s_seg * left - np.cumsum(left, axis=1)
    ib_right = s_seg * right - np.cumsum(right, axis=1)
    dc = (0.5 * (ib_left + ib_right) * widths[:, None]).sum(axis=0)
    mean_i = (0.5 * (left + right) * widths[:, None]).sum(axis=0)

    powers = tuple(float(op.voltages[k] * dc[k]) for k in range(n))

    edge_currents = []
    for k in range(n):
        if op.assignment.roles[k] is Role.IDLE:
            edge_currents.append((0.0, 0.0))
            continue
        d = op.assignment.delta_k[k]
        top_edge = float(_eval_skeleton(trace, (-d) % 1.0)[k])
        bottom_edge = float(_eval_skeleton(trace, (0.5 - d) % 1.0)[k])
        edge_currents.append((top_edge, bottom_edge))

    i_min = trace.skeleton_i.min(axis=0)
    i_max = trace.skeleton_i.max(axis=0)

    idle_peak: float | None = None
    risk = False
    idle_cells = [k for k in range(n) if op.assignment.roles[k] is Role.IDLE]
    if idle_cells:
        peak = 0.0
        for k in idle_cells:
            for pm in mids:
                vt, vb = idle_diode_voltages(k, float(pm) * params.T_s, op)
                peak = max(peak, vt, vb)
        idle_peak = peak
        if peak < params.V_d_on:
            bad = max(abs(float(dc[k])) for k in idle_cells)
            if bad > _IDLE_DC_TOL:
                raise RuntimeError(
                    f"idle battery dc current {bad:.3e} A should be zero "
                    "while the diodes block"
                )
        else:
            risk = True

    return SteadyStateSolution(
        dc_currents=tuple(float(x) for x in dc),
        powers=powers,
        power_sum=float(sum(powers)),
        mean_currents=tuple(float(x) for x in mean_i),
        edge_currents=tuple(edge_currents),
        current_min=tuple(float(x) for x in i_min),
        current_max=tuple(float(x) for x in i_max),
        ripple_pp=tuple(float(hi - lo) for lo, hi in zip(i_min, i_max)),
        modes=mode_sequence(trace, op),
        converged=trace.cycle_mean_drift < _DRIFT_TOL,
        cycle_mean_drift=trace.cycle_mean_drift,
        idle_peak_diode_voltage=idle_peak,
        diode_conduction_risk=risk,
    )


def mode_sequence(trace: Trace, op: OperatingPoint) -> tuple[ModeInterval, ...]:
    """Label the switching period by gate combination and current sign.

    The two-discharge/two-charge configuration gets the canonical six
    modes: the first and third gate intervals are split where the
    earliest discharging branch current crosses zero (freewheeling ends
    and forward transfer begins). Any other configuration is labeled
    generically by its gate pattern, one letter per converter: T (top
    on), B (bottom on), - (idle).
    """
    params = op.params
    T_s = params.T_s
    a = op.assignment
    if a.m_discharge == 2 and a.m_charge == 2:
        delta = params.delta
        p_cross = delta
        i_at_0 = _eval_skeleton(trace, 0.0)
        i_at_d = _eval_skeleton(trace, delta)
        for k in range(a.n):
            if a.roles[k] is not Role.DISCHARGE:
                continue
            i0, i1 = float(i_at_0[k]), float(i_at_d[k])
            if i0 >= 0.0:
                p = 0.0
            elif i1 <= 0.0:
                p = delta
            else:
                p = delta * (-i0) / (i1 - i0)
            p_cross = min(p_cross, p)
        t_z = p_cross * T_s
        half = 0.5 * T_s
        return (
            ModeInterval("I", 0.0, t_z),
            ModeInterval("II", t_z, delta * T_s),
            ModeInterval("III", delta * T_s, half),
            ModeInterval("IV", half, half + t_z),
            ModeInterval("V", half + t_z, half + delta * T_s),
            ModeInterval("VI", half + delta * T_s, T_s),
        )

    bounds = list(trace.model.edge_phases) + [1.0]
    intervals = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        pm = 0.5 * (lo + hi)
        label = []
        for k in range(a.n):
            if a.roles[k] is Role.IDLE:
                label.append("-")
            else:
                top = ((pm + a.delta_k[k]) % 1.0) < 0.5
                label.append("T" if top else "B")
        intervals.append(ModeInterval("".join(label), lo * T_s, hi * T_s))
    return tuple(intervals)


def mode_at(modes: tuple[ModeInterval, ...], t_in_period: float) -> str:
    """Label of the interval containing a time within [0, T_s)."""
    for m in modes:
        if m.t_start - 1e-15 <= t_in_period < m.t_end:
            return m.label
    return modes[-1].label if modes else ""


# =====================================================================
# Dead-time commutation
# =====================================================================

def commutation(i0: float, C_s_eff: float, V_b: float, dead_time: float) -> CommutationReport:
    """Resolve one dead-time pole transition at edge current i0.

    The inductor current divides between the outgoing device's snubber
    (charging) and the incoming device's (discharging), so the pole slews
    at |i0|/(2 C_s_eff) and needs t_r = 2 C_s_eff V_b / |i0| to swing the
    full cell voltage. Zero edge current means the pole never moves:
    t_r is reported as infinity and the full voltage remains.
    """
    if C_s_eff <= 0.0:
        raise ValueError(f"effective capacitance must be positive, got {C_s_eff}")
    if V_b <= 0.0:
        raise ValueError(f"cell voltage must be positive, got {V_b}")
    if dead_time < 0.0:
        raise ValueError(f"dead time must be nonnegative, got {dead_time}")
    mag = abs(i0)
    if mag == 0.0:
        return CommutationReport(t_r=math.inf, zvs_achieved=False, residual_voltage=V_b)
    t_r = 2.0 * C_s_eff * V_b / mag
    residual = max(0.0, V_b - mag * dead_time / (2.0 * C_s_eff))
    return CommutationReport(
        t_r=t_r,
        zvs_achieved=residual <= ZVS_EPSILON,
        residual_voltage=residual,
    )
