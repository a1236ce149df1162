"""Tolerance-band balancing controller.

The control law is deliberately simple: compute the average cell voltage,
place an acceptance band of +/- V_tol around it, discharge every cell above
the band, charge every cell below it, and leave in-band cells alone. The
band provides the dead-zone that keeps converters from chattering near
convergence; no additional hysteresis is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

from .signals import EqualizerParams, PhaseAssignment, Role

#: Allowance beyond the cell voltage window before a reading is treated as
#: a sensor fault rather than a plausible cell voltage.
SENSOR_GUARD_V = 1.0


@dataclass(frozen=True)
class VoltageReading:
    """One synchronous sample of all cell terminal voltages."""

    voltages: tuple[float, ...]
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "voltages", tuple(self.voltages))


@dataclass(frozen=True)
class Band:
    """Acceptance band around the pack average voltage."""

    V_avg: float
    V_h: float
    V_l: float


def faulty_channels(reading: VoltageReading, params: EqualizerParams) -> tuple[int, ...]:
    """Indices of readings outside the plausible cell window plus guard."""
    lo = params.V_bmin - SENSOR_GUARD_V
    hi = params.V_bmax + SENSOR_GUARD_V
    return tuple(i for i, v in enumerate(reading.voltages) if not lo <= v <= hi)


def compute_band(reading: VoltageReading, V_tol: float) -> Band:
    """Acceptance band: V_avg +/- V_tol around the arithmetic mean."""
    if len(reading.voltages) < 2:
        raise ValueError(f"need at least two cells, got {len(reading.voltages)}")
    v_avg = sum(reading.voltages) / len(reading.voltages)
    return Band(V_avg=v_avg, V_h=v_avg + V_tol, V_l=v_avg - V_tol)


def classify(reading: VoltageReading, band: Band, delta: float) -> PhaseAssignment:
    """Assign a role to every cell from its position relative to the band.

    Strictly above V_h discharges, strictly below V_l charges, anything
    else (ties at the edges included) idles. The phase shift convention
    is baked in: dischargers at phase 0, chargers at -delta.
    """
    roles = []
    for v in reading.voltages:
        if v > band.V_h:
            roles.append(Role.DISCHARGE)
        elif v < band.V_l:
            roles.append(Role.CHARGE)
        else:
            roles.append(Role.IDLE)
    return PhaseAssignment.from_roles(roles, delta)


def is_active(assignment: PhaseAssignment) -> bool:
    """True when power can actually flow.

    Charge transfer needs at least one discharging and one charging
    converter; with either side missing, all gates should stay off.
    """
    return assignment.m_discharge >= 1 and assignment.m_charge >= 1
