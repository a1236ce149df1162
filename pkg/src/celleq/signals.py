"""Carrier waveforms, gate timing, and the shared electrical parameter types.

Every converter leg runs at a fixed 50% duty cycle. Power flow between
batteries is set purely by the phase shift delta between the square waves
of discharging and charging converters, so two periodic carriers describe
the whole modulation:

    sq(t): +1 on the first half period, -1 on the second.
    tr(t): triangle wave, the integral of sq scaled to [-1, +1]; it starts
           at -1 where sq goes high.

The inductor current of an active converter is proportional to a weighted
sum of tr() evaluations, which is why the exact phase alignment of tr
matters and is pinned down here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


def phase_fraction(t: float, T_s: float) -> float:
    """Reduce a time to its position within the period as a fraction in [0, 1)."""
    if T_s <= 0.0:
        raise ValueError(f"period must be positive, got T_s={T_s}")
    p = math.fmod(t, T_s) / T_s
    if p < 0.0:
        p += 1.0
    return p


def sq(t: float, T_s: float) -> int:
    """Square wave carrier: +1 on [0, T_s/2), -1 on [T_s/2, T_s), period T_s."""
    return 1 if phase_fraction(t, T_s) < 0.5 else -1


def tr(t: float, T_s: float) -> float:
    """Triangle wave carrier in [-1, +1].

    tr(0) = -1, rises with slope +4/T_s over the first half period,
    falls with slope -4/T_s over the second. Equals the running integral
    of sq scaled by 4/T_s minus 1, so tr is minimal exactly where sq
    switches high.
    """
    p = phase_fraction(t, T_s)
    if p <= 0.5:
        return 4.0 * p - 1.0
    return 3.0 - 4.0 * p


class Role(enum.Enum):
    """What the balancing controller decided for one battery."""

    DISCHARGE = "discharge"
    CHARGE = "charge"
    IDLE = "idle"


class SwitchCommand(enum.Enum):
    """Gate state of one half-bridge leg at an instant."""

    TOP_ON = "top_on"
    BOTTOM_ON = "bottom_on"
    BOTH_OFF = "both_off"


@dataclass(frozen=True)
class EqualizerParams:
    """Electrical design constants of the equalizer.

    Defaults describe the reference design this package was built around:
    a 48 W equalizer for four 12 V batteries (L = 2.1 uH, f_s = 30 kHz,
    delta = 1/8, C_s = 4.7 nF with 1.2 nF to 4.3 nF device parasitics).

    n                    number of series cells
    L                    per-converter inductance (H)
    C                    dc-blocking capacitance (F), treated as ideal
    C_dc                 dc bus capacitance (F), treated as ideal
    C_s                  snubber capacitance per device (F)
    C_s_parasitic_range  (min, max) device output capacitance (F)
    f_s                  switching frequency (Hz)
    delta                phase shift between roles as a fraction of T_s
    dead_time            blanking interval after each gate edge (s)
    V_tol                half-width of the voltage acceptance band (V)
    V_d_on               body diode forward drop (V)
    V_bmin, V_bmax       cell voltage window (V)
    t_f                  device current fall time (s)
    t_vr                 device voltage rise time in a hard-switched edge (s)
    P_rated              rated equalizer throughput (W), for loss percentages
    """

    n: int = 4
    L: float = 2.1e-6
    C: float = 670e-6
    C_dc: float = 640e-6
    C_s: float = 4.7e-9
    C_s_parasitic_range: tuple[float, float] = (1.2e-9, 4.3e-9)
    f_s: float = 30e3
    delta: float = 0.125
    dead_time: float = 120e-9
    V_tol: float = 0.025
    V_d_on: float = 0.4
    V_bmin: float = 10.5
    V_bmax: float = 14.4
    t_f: float = 10.6e-9
    t_vr: float = 45.4e-9
    P_rated: float = 48.0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.P_rated <= 0.0:
            raise ValueError(f"P_rated must be positive, got {self.P_rated}")
        for name in ("L", "f_s", "C", "C_dc", "C_s", "V_tol", "V_d_on"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.delta < 0.25:
            raise ValueError(f"delta must lie in (0, 0.25), got {self.delta}")
        if not 0.0 <= self.dead_time < self.delta / self.f_s:
            raise ValueError(
                f"dead_time must lie in [0, delta*T_s) = [0, {self.delta / self.f_s:.3e}), "
                f"got {self.dead_time}"
            )
        if self.V_bmin >= self.V_bmax:
            raise ValueError(
                f"cell voltage window is empty: V_bmin={self.V_bmin} >= V_bmax={self.V_bmax}"
            )
        lo, hi = self.C_s_parasitic_range
        if lo < 0.0 or hi < lo:
            raise ValueError(f"bad parasitic capacitance range {self.C_s_parasitic_range}")

    @property
    def T_s(self) -> float:
        """Switching period (s)."""
        return 1.0 / self.f_s

    @property
    def C_s_eff_min(self) -> float:
        """Effective per-device snubber capacitance at minimum parasitics (F)."""
        return self.C_s + self.C_s_parasitic_range[0]

    @property
    def C_s_eff_max(self) -> float:
        """Effective per-device snubber capacitance at maximum parasitics (F)."""
        return self.C_s + self.C_s_parasitic_range[1]


@dataclass(frozen=True)
class PhaseAssignment:
    """Per-converter role and phase shift, the controller's output.

    Discharging converters run at phase 0 and charging converters lag by
    delta * T_s (phase shift -delta). Idle converters keep both devices
    off; their delta_k entry is a placeholder and never used.
    """

    roles: tuple[Role, ...]
    delta_k: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.roles:
            raise ValueError("assignment must cover at least one converter")
        if self.delta_k and len(self.delta_k) != len(self.roles):
            raise ValueError(
                f"roles and delta_k lengths differ: {len(self.roles)} vs {len(self.delta_k)}"
            )

    @classmethod
    def from_roles(cls, roles: list[Role] | tuple[Role, ...], delta: float) -> "PhaseAssignment":
        """Build the assignment with the standard phase convention."""
        shifts = tuple(-delta if r is Role.CHARGE else 0.0 for r in roles)
        return cls(roles=tuple(roles), delta_k=shifts)

    @property
    def n(self) -> int:
        return len(self.roles)

    @property
    def active_indices(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r is not Role.IDLE)

    @property
    def n_active(self) -> int:
        return len(self.active_indices)

    @property
    def m_discharge(self) -> int:
        return sum(1 for r in self.roles if r is Role.DISCHARGE)

    @property
    def m_charge(self) -> int:
        return sum(1 for r in self.roles if r is Role.CHARGE)


def gate_state(t: float, delta_k: float, params: EqualizerParams) -> SwitchCommand:
    """Gate command of an active converter leg at time t.

    The top device conducts on the high half of sq(t + delta_k * T_s) and
    the bottom device on the low half, each delayed by dead_time at its
    turn-on edge, so both devices are off for dead_time after every edge.
    Idle converters never reach this function; the caller holds them at
    BOTH_OFF permanently.
    """
    p = phase_fraction(t + delta_k * params.T_s, params.T_s)
    df = params.dead_time * params.f_s
    if p < df or 0.5 <= p < 0.5 + df:
        return SwitchCommand.BOTH_OFF
    if p < 0.5:
        return SwitchCommand.TOP_ON
    return SwitchCommand.BOTTOM_ON
