"""Closed-form analysis of the equalizer operating point.

All converters share one ac bus through their dc-blocking capacitors, so
with n_a active converters the bus voltage is the instantaneous average of
the active pole voltages and each inductor current is a weighted sum of
triangle carriers:

    i_k(t) = (T_s / (8 n_a L)) * [n_a V_bk Tr(t + d_k T_s)
                                  - sum_i V_bi Tr(t + d_i T_s)]

Averaging V_pk * i_k over a period collapses to the phase-shift power law

    P_k = (V_bk / (4 n_a L f_s)) * sum_i V_bi (d_k - d_i) (1 - 2|d_k - d_i|)

which is what everything else here builds on: battery currents, switching
current bounds, turn-off losses, dead-time sizing, and the snubber design
sweep. Idle converters are open branches: they drop out of the sums and
n_a counts only active converters.

Sign conventions: battery current and power are positive when the battery
discharges; phase shifts are fractions of the switching period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .signals import EqualizerParams, PhaseAssignment, Role, sq, tr


@dataclass(frozen=True)
class OperatingPoint:
    """Cell voltages plus the phase assignment they are driven with."""

    voltages: tuple[float, ...]
    assignment: PhaseAssignment
    params: EqualizerParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "voltages", tuple(self.voltages))
        if len(self.voltages) != len(self.assignment.roles):
            raise ValueError(
                f"{len(self.voltages)} voltages for {len(self.assignment.roles)} roles"
            )
        if len(self.voltages) != self.params.n:
            raise ValueError(
                f"{len(self.voltages)} voltages but params.n={self.params.n}"
            )

    @property
    def n_active(self) -> int:
        return self.assignment.n_active

    @property
    def active_indices(self) -> tuple[int, ...]:
        return self.assignment.active_indices


@dataclass(frozen=True)
class SoftSwitchReport:
    """Turn-off loss and dead-time figures for one switching current.

    i0        switch current at the transition (A, signed)
    P_soft    snubbed turn-off loss per transition pair (W)
    P_hard    hard-switched turn-off loss for the same edge (W)
    ratio     P_soft / P_hard
    t_r       pole voltage rise time through the snubber (s)
    t_d_min   minimum dead time for a complete zero-voltage swing (s),
              identical to t_r in this model
    """

    i0: float
    P_soft: float
    P_hard: float
    ratio: float
    t_r: float
    t_d_min: float


# =====================================================================
# Currents, powers, and capacitor voltages
# =====================================================================

def inductor_current(k: int, t: float, op: OperatingPoint) -> float:
    """Instantaneous inductor current of converter k (A).

    i_k = (T_s/(8 n_a L)) [n_a V_bk Tr(t+d_k T_s) - sum_act V_bi Tr(t+d_i T_s)]

    Idle converters are open and return 0. The current is zero-mean over
    one period because every Tr term is.
    """
    params = op.params
    if op.assignment.roles[k] is Role.IDLE:
        return 0.0
    T_s = params.T_s
    n_a = op.n_active
    acc = 0.0
    for i in op.active_indices:
        acc += op.voltages[i] * tr(t + op.assignment.delta_k[i] * T_s, T_s)
    own = op.voltages[k] * tr(t + op.assignment.delta_k[k] * T_s, T_s)
    return (T_s / (8.0 * n_a * params.L)) * (n_a * own - acc)


def battery_power(k: int, op: OperatingPoint) -> float:
    """Average power drawn from battery k (W, positive discharging).

    P_k = (V_bk / (4 n_a L f_s)) sum_act V_bi (d_k-d_i)(1 - 2|d_k-d_i|)

    The kernel is antisymmetric in (k, i), so the powers of all active
    converters sum to zero: the ideal equalizer is lossless.
    """
    if op.assignment.roles[k] is Role.IDLE:
        return 0.0
    return op.voltages[k] * battery_current(k, op)


def battery_current(k: int, op: OperatingPoint) -> float:
    """DC component of battery k's current (A, positive discharging).

    I_bk = P_k / V_bk; the i = k term vanishes, so I_bk does not depend
    on V_bk itself, only on the other cells' voltages and the shifts.
    """
    params = op.params
    if op.assignment.roles[k] is Role.IDLE:
        return 0.0
    d = op.assignment.delta_k
    acc = 0.0
    for i in op.active_indices:
        dd = d[k] - d[i]
        acc += op.voltages[i] * dd * (1.0 - 2.0 * abs(dd))
    return acc / (4.0 * op.n_active * params.L * params.f_s)


def dc_block_voltage(k: int, op: OperatingPoint, V_o_dc: float) -> float:
    """Average voltage across converter k's dc-blocking capacitor (V).

    V_Ck = sum_{i<k} V_bi + V_bk/2 - V_o_dc

    The capacitor absorbs the dc offset between the converter pole (which
    sits half a cell above the stack below it) and the common bus level
    V_o_dc. The bus dc level cancels out of every power and current
    result, so it is an explicit argument rather than a model output.
    """
    stack_below = sum(op.voltages[:k])
    return stack_below + 0.5 * op.voltages[k] - V_o_dc


# =====================================================================
# Idle-converter diode analysis
# =====================================================================

def idle_diode_voltages(k_idle: int, t: float, op: OperatingPoint) -> tuple[float, float]:
    """Forward voltages across the idle converter's top and bottom diodes (V).

    With converter k idle (both devices off), its pole floats and only the
    body diodes could conduct. Referencing the active-average ac bus:

        V_top    = (1/n_a) sum_act (V_bi/2) Sq(t + d_i T_s) - V_b,idle / 2
        V_bottom = -(1/n_a) sum_act (V_bi/2) Sq(t + d_i T_s) - V_b,idle / 2

    Positive values would forward-bias the diode. Both waveforms are
    piecewise constant over the period.
    """
    params = op.params
    if op.assignment.roles[k_idle] is not Role.IDLE:
        raise ValueError(f"converter {k_idle} is {op.assignment.roles[k_idle].value}, not idle")
    if op.n_active == 0:
        return (-0.5 * op.voltages[k_idle], -0.5 * op.voltages[k_idle])
    T_s = params.T_s
    avg = 0.0
    for i in op.active_indices:
        avg += 0.5 * op.voltages[i] * sq(t + op.assignment.delta_k[i] * T_s, T_s)
    avg /= op.n_active
    half_own = 0.5 * op.voltages[k_idle]
    return (avg - half_own, -avg - half_own)


def max_idle_diode_voltage(n: int, V_tol: float, idle_count: int = 1) -> float:
    """Worst-case forward voltage an idle converter's diode can see (V).

    The worst case puts the idle cell at the bottom of the band
    (V_avg - V_tol) with the active cells arranged to lift the bus peak,
    which yields (n / (2 (n - idle_count))) * V_tol. For a four-cell pack
    with one idle converter this is (2/3) V_tol.
    """
    if n < 2:
        raise ValueError(f"need at least two cells, got n={n}")
    if not 1 <= idle_count <= n - 1:
        raise ValueError(f"idle_count must lie in [1, n-1], got {idle_count}")
    return n * V_tol / (2.0 * (n - idle_count))


def diode_blocking_ok(params: EqualizerParams) -> bool:
    """True when idle-converter diodes can never conduct.

    Requires the diode drop to exceed the worst-case single-idle forward
    voltage, V_d_on > (n/(2(n-1))) V_tol. When this holds, an idle battery
    carries exactly zero current while the others exchange charge.
    """
    return params.V_d_on > max_idle_diode_voltage(params.n, params.V_tol)


# =====================================================================
# Switching current bounds
# =====================================================================

def min_turnon_current(params: EqualizerParams, n_active: int | None = None) -> float:
    """Guaranteed minimum switch current magnitude at discharge turn-on (A).

    |i_k(0)| >= delta * V_bmin / (2 n L f_s)

    for every discharging converter at every band-consistent operating
    point (cells ordered around the average by role). This is the current
    available to swing the pole during dead time, so it sizes the worst
    case for zero-voltage turn-on. The bound holds only for discharging
    converters' own edges; a charging converter's edge current can pass
    through zero at corner operating points.
    """
    n = params.n if n_active is None else n_active
    return params.delta * params.V_bmin / (2.0 * n * params.L * params.f_s)


def max_switch_current(params: EqualizerParams, n_active: int | None = None) -> float:
    """Upper bound on any switch current magnitude at the edges (A).

    |i_k(0)| <= (n-1) (T_s/(8 n L)) [V_bmax - (1 - 4 delta) V_bmin]

    maximized with a single discharging cell at V_bmax against n-1
    charging cells at V_bmin. Sizes the device current rating and the
    worst-case turn-off loss.
    """
    n = params.n if n_active is None else n_active
    return (n - 1) * params.T_s / (8.0 * n * params.L) * (
        params.V_bmax - (1.0 - 4.0 * params.delta) * params.V_bmin
    )


# =====================================================================
# Turn-off losses and dead time
# =====================================================================

def turnoff_loss_soft(i0: float, params: EqualizerParams, C_s_eff: float | None = None) -> float:
    """Average turn-off loss with the snubber (W).

    P = i0^2 t_f^2 f_s / (48 C_s)

    from a linear current fall over t_f into the effective per-device
    capacitance (nominal snubber plus device parasitic).
    """
    cs = params.C_s_eff_max if C_s_eff is None else C_s_eff
    if cs <= 0.0:
        raise ValueError(f"effective snubber capacitance must be positive, got {cs}")
    return i0 * i0 * params.t_f * params.t_f * params.f_s / (48.0 * cs)


def turnoff_loss_hard(V_b: float, i0: float, params: EqualizerParams) -> float:
    """Average turn-off loss of the same edge without a snubber (W).

    P = (1/2) V_b |i0| (t_vr + t_f) f_s

    Energy per transition times switching frequency; the voltage rises
    over t_vr while the full current still flows, then the current falls
    over t_f at full voltage.
    """
    return 0.5 * V_b * abs(i0) * (params.t_vr + params.t_f) * params.f_s


def loss_ratio(i0: float, V_b: float, params: EqualizerParams,
               C_s_eff: float | None = None) -> float:
    """Snubbed over hard-switched turn-off loss, |i0| t_f^2 / (24 C_s V_b (t_vr+t_f))."""
    cs = params.C_s_eff_max if C_s_eff is None else C_s_eff
    if cs <= 0.0:
        raise ValueError(f"effective snubber capacitance must be positive, got {cs}")
    return abs(i0) * params.t_f ** 2 / (24.0 * cs * V_b * (params.t_vr + params.t_f))


def min_dead_time(C_s_eff: float, V_b: float, i0_min: float) -> float:
    """Dead time needed for a full pole swing at the weakest edge (s).

    t_r = 2 C_s_eff V_b / i0_min

    The inductor current splits between the two leg capacitances, so the
    pole slews at i0/(2 C_s_eff); the gate must stay blanked until the
    swing completes or the device turns on with voltage still across it.
    """
    if i0_min <= 0.0:
        raise ValueError(f"need a positive minimum edge current, got {i0_min}")
    return 2.0 * C_s_eff * V_b / i0_min


def soft_switch_report(i0: float, V_b: float, params: EqualizerParams,
                       C_s_eff: float | None = None) -> SoftSwitchReport:
    """Bundle the turn-off loss and dead-time figures for one edge current."""
    cs = params.C_s_eff_max if C_s_eff is None else C_s_eff
    p_soft = turnoff_loss_soft(i0, params, cs)
    p_hard = turnoff_loss_hard(V_b, i0, params)
    t_r = min_dead_time(cs, V_b, abs(i0)) if i0 != 0.0 else math.inf
    return SoftSwitchReport(
        i0=i0,
        P_soft=p_soft,
        P_hard=p_hard,
        ratio=p_soft / p_hard if p_hard > 0.0 else 0.0,
        t_r=t_r,
        t_d_min=t_r,
    )


def cs_sweep(params: EqualizerParams,
             cs_grid: list[float]) -> list[tuple[float, float, float, float, float]]:
    """Design sweep over nominal snubber capacitance values.

    For each grid point returns

        (C_s, C_s_eff_min, C_s_eff_max, loss_ratio, t_d_min)

    pairing each output with its worst case: the loss ratio at minimum
    parasitics (smallest effective capacitance, largest ratio) with the
    maximum switch current at V_bmax, and the dead time at maximum
    parasitics (largest effective capacitance, slowest swing) with the
    minimum guaranteed turn-on current.
    """
    if not cs_grid:
        raise ValueError("capacitance grid is empty")
    i_max = max_switch_current(params)
    i_min = min_turnon_current(params)
    lo, hi = params.C_s_parasitic_range
    rows = []
    for cs in cs_grid:
        if cs <= 0.0:
            raise ValueError(f"capacitance grid values must be positive, got {cs}")
        eff_min = cs + lo
        eff_max = cs + hi
        rows.append((
            cs,
            eff_min,
            eff_max,
            loss_ratio(i_max, params.V_bmax, params, eff_min),
            min_dead_time(eff_max, params.V_bmax, i_min),
        ))
    return rows


# =====================================================================
# Efficiency accounting
# =====================================================================

def efficiency(powers: list[float] | tuple[float, ...],
               gate_drive: list[tuple[float, float]] | None = None) -> tuple[float, float]:
    """(power circuit efficiency, overall efficiency) from per-cell powers.

    Powers are signed, positive discharging. The power circuit efficiency
    is delivered over drawn power:

        eta_pc = sum(|P_k| for charging k) / sum(P_k for discharging k)

    With per-cell gate drive draw (current, supply voltage) the gate loss
    on each discharging cell adds to the power drawn from it, and the
    gate loss on each charging or idle cell subtracts from the power
    delivered, since every gate driver is fed from its own battery:

        eta_overall = (P_out - G_chg) / (P_in + G_dis)

    For the ideal lossless model (powers summing to zero, no gate data)
    both efficiencies are exactly 1.
    """
    p_in = sum(p for p in powers if p > 0.0)
    p_out = -sum(p for p in powers if p < 0.0)
    if p_in <= 0.0:
        raise ValueError("no discharging power; efficiency undefined")
    eta_pc = p_out / p_in
    if gate_drive is None:
        return eta_pc, eta_pc
    if len(gate_drive) != len(powers):
        raise ValueError(
            f"{len(gate_drive)} gate drive entries for {len(powers)} cells"
        )
    g_in = sum(i * v for (i, v), p in zip(gate_drive, powers) if p > 0.0)
    g_out = sum(i * v for (i, v), p in zip(gate_drive, powers) if p <= 0.0)
    return eta_pc, (p_out - g_out) / (p_in + g_in)
