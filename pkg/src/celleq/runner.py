"""Closed-loop pack equalization over minutes-to-hours horizons.

The converter settles in microseconds, the cells drift over minutes, so
the loop is quasi-static: once per control period the controller senses
terminal voltages, classifies the cells, and the resulting dc equalizer
currents are held constant while the cell states integrate forward one
period by coulomb counting.

Sensing model: terminal voltages are sampled during a short blanking
interval of the equalizer each control period, so the sensed value is
OCV(soc) minus the IR drop of the external string current only. Without
the blanking, each cell's own equalizer current would inject role-signed
IR offsets comparable to the tolerance band and chatter the classifier;
the external drop is common mode across matched cells and leaves the
classification unchanged.

The analytic dc currents of the lossless converter do not quite sum to
zero (energy balances, charge does not: the cells sit at different
voltages). A physical pack can only redistribute charge through the
shared bus, so the applied per-cell currents are the analytic values with
their mean over the active set removed, making the set sum exactly zero.
The correction is well under the analytic spread and never flips a cell's
role.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .analytic import OperatingPoint, battery_current
from .controller import VoltageReading, classify, compute_band, is_active
from .signals import EqualizerParams, PhaseAssignment, Role


class CellKind(enum.Enum):
    LEAD_ACID = "lead_acid"
    ULTRACAP = "ultracap"


@dataclass(frozen=True)
class CellModel:
    """One cell or rack under coulomb counting.

    Batteries carry capacity in Ah, soc as a fraction, and a linear OCV
    map from ocv_lo at soc=0 to ocv_hi at soc=1. Ultracapacitor racks
    carry capacity in farads and reuse the soc field for the stored
    charge in coulombs (V = Q/C). Currents are positive discharging.
    """

    kind: CellKind
    capacity: float
    soc: float
    r_int: float = 0.010
    ocv_lo: float = 11.8
    ocv_hi: float = 12.9

    def __post_init__(self) -> None:
        if self.capacity <= 0.0:
            raise ValueError(f"capacity must be positive, got {self.capacity}")
        if self.r_int < 0.0:
            raise ValueError(f"r_int must be nonnegative, got {self.r_int}")
        if self.kind is CellKind.LEAD_ACID:
            if not 0.0 <= self.soc <= 1.0:
                raise ValueError(f"battery soc must lie in [0, 1], got {self.soc}")
            if self.ocv_hi < self.ocv_lo:
                raise ValueError(
                    f"OCV map must be nondecreasing: {self.ocv_lo} > {self.ocv_hi}"
                )
        elif self.soc < 0.0:
            raise ValueError(f"rack charge must be nonnegative, got {self.soc}")

    @classmethod
    def battery_at_voltage(cls, voltage: float, capacity_ah: float,
                           r_int: float = 0.010, ocv_lo: float = 11.8,
                           ocv_hi: float = 12.9) -> "CellModel":
        """Battery whose rest terminal voltage equals the given value."""
        if not ocv_lo <= voltage <= ocv_hi:
            raise ValueError(
                f"voltage {voltage} outside the OCV map [{ocv_lo}, {ocv_hi}]"
            )
        soc = (voltage - ocv_lo) / (ocv_hi - ocv_lo) if ocv_hi > ocv_lo else 0.0
        return cls(CellKind.LEAD_ACID, capacity_ah, soc, r_int, ocv_lo, ocv_hi)

    @classmethod
    def rack_at_voltage(cls, voltage: float, capacity_f: float,
                        r_int: float = 0.001) -> "CellModel":
        """Ultracapacitor rack charged to the given voltage."""
        if voltage < 0.0:
            raise ValueError(f"rack voltage must be nonnegative, got {voltage}")
        return cls(CellKind.ULTRACAP, capacity_f, voltage * capacity_f, r_int)

    def ocv(self) -> float:
        if self.kind is CellKind.LEAD_ACID:
            return self.ocv_lo + (self.ocv_hi - self.ocv_lo) * self.soc
        return self.soc / self.capacity

    def terminal_voltage(self, current: float = 0.0) -> float:
        """Terminal voltage under the given current (A, positive discharging)."""
        return self.ocv() - current * self.r_int

    def charge_coulombs(self) -> float:
        if self.kind is CellKind.LEAD_ACID:
            return self.soc * self.capacity * 3600.0
        return self.soc


@dataclass(frozen=True)
class PackState:
    cells: tuple[CellModel, ...]
    time: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))
        if len(self.cells) < 2:
            raise ValueError(f"a pack needs at least two cells, got {len(self.cells)}")


@dataclass(frozen=True)
class CyclingProfile:
    """External string cycling: constant current with voltage turnaround."""

    current: float
    v_max: float
    v_min: float
    start_charging: bool = True

    def __post_init__(self) -> None:
        if self.current < 0.0:
            raise ValueError(f"cycling current must be nonnegative, got {self.current}")
        if self.v_min >= self.v_max:
            raise ValueError(
                f"voltage window is empty: v_min={self.v_min} >= v_max={self.v_max}"
            )


@dataclass(frozen=True)
class EqualizationLog:
    """Per-control-period samples of a runner scenario.

    times is seconds; voltages/currents are (rows, n); roles holds the
    classification of each sample; spread is max minus min sensed
    voltage. cycle_marks/cycle_spreads record the completion time and
    sensed spread of each external charge-discharge cycle.
    """

    times: np.ndarray
    voltages: np.ndarray
    roles: tuple[tuple[Role, ...], ...]
    currents: np.ndarray
    spread: np.ndarray
    saturated_cells: tuple[int, ...]
    terminated_all_idle: bool
    cycle_marks: tuple[float, ...] = ()
    cycle_spreads: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.times)


class _LogBuilder:
    def __init__(self) -> None:
        self.times: list[float] = []
        self.voltages: list[tuple[float, ...]] = []
        self.roles: list[tuple[Role, ...]] = []
        self.currents: list[tuple[float, ...]] = []
        self.saturated: set[int] = set()
        self.marks: list[float] = []
        self.mark_spreads: list[float] = []

    def add(self, t: float, v: tuple[float, ...], roles: tuple[Role, ...],
            i: tuple[float, ...]) -> None:
        self.times.append(t)
        self.voltages.append(v)
        self.roles.append(roles)
        self.currents.append(i)

    def build(self, all_idle: bool) -> EqualizationLog:
        v = np.asarray(self.voltages)
        return EqualizationLog(
            times=np.asarray(self.times),
            voltages=v,
            roles=tuple(self.roles),
            currents=np.asarray(self.currents),
            spread=v.max(axis=1) - v.min(axis=1),
            saturated_cells=tuple(sorted(self.saturated)),
            terminated_all_idle=all_idle,
            cycle_marks=tuple(self.marks),
            cycle_spreads=tuple(self.mark_spreads),
        )


def step_cell(cell: CellModel, current: float, dt: float) -> tuple[CellModel, bool]:
    """Advance one cell by coulomb counting; returns (cell, saturated).

    Batteries move soc by -current*dt/(3600*capacity) and clamp to [0, 1];
    racks move stored charge by -current*dt and clamp at zero. The
    saturation flag reports that a clamp actually bit.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if current == 0.0:
        return cell, False
    if cell.kind is CellKind.LEAD_ACID:
        soc = cell.soc - current * dt / (3600.0 * cell.capacity)
        clamped = min(1.0, max(0.0, soc))
        return replace(cell, soc=clamped), clamped != soc
    q = cell.soc - current * dt
    clamped = max(0.0, q)
    return replace(cell, soc=clamped), clamped != q


def equalizer_currents(voltages: tuple[float, ...], assignment: PhaseAssignment,
                       params: EqualizerParams) -> tuple[float, ...]:
    """Per-cell dc equalizer currents with the zero-sum correction applied.

    Idle cells get exactly zero; the active cells get the analytic dc
    currents shifted by their mean so the pack exchanges charge without
    creating or destroying any.
    """
    op = OperatingPoint(voltages, assignment, params)
    active = assignment.active_indices
    if not active or not is_active(assignment):
        return (0.0,) * len(voltages)
    raw = {k: battery_current(k, op) for k in active}
    shift = sum(raw.values()) / len(active)
    return tuple(raw[k] - shift if k in raw else 0.0 for k in range(len(voltages)))


def _next_voltage(cell: CellModel, total_current: float, i_ext: float,
                  dt: float) -> float:
    """Terminal voltage one step ahead, for the predictive turnaround."""
    if cell.kind is CellKind.LEAD_ACID:
        soc = cell.soc - total_current * dt / (3600.0 * cell.capacity)
        ocv = cell.ocv_lo + (cell.ocv_hi - cell.ocv_lo) * soc
    else:
        ocv = (cell.soc - total_current * dt) / cell.capacity
    return ocv - i_ext * cell.r_int


def _sense_and_classify(cells: tuple[CellModel, ...], i_ext: float, t: float,
                        params: EqualizerParams):
    sensed = tuple(c.terminal_voltage(i_ext) for c in cells)
    reading = VoltageReading(sensed, timestamp=t)
    band = compute_band(reading, params.V_tol)
    assignment = classify(reading, band, params.delta)
    return sensed, assignment


def run_equalization(pack: PackState, params: EqualizerParams, horizon: float,
                     control_period: float = 1.0, log_every: int = 1) -> EqualizationLog:
    """Run the tolerance-band loop until all cells are in band or time runs out.

    Samples the pack once per control period; terminates as soon as the
    classification is all-Idle (the equalized state), logging that final
    sample. A one-sided classification (cells out of band on one side
    only) keeps all gates off but does not terminate the run.
    """
    if control_period <= 0.0 or horizon <= control_period:
        raise ValueError(
            f"need horizon > control_period > 0, got {horizon} and {control_period}"
        )
    if len(pack.cells) != params.n:
        raise ValueError(f"{len(pack.cells)} cells for params.n={params.n}")
    if log_every < 1:
        raise ValueError(f"log_every must be at least 1, got {log_every}")

    log = _LogBuilder()
    cells = pack.cells
    n_steps = int(horizon / control_period)
    all_idle = False
    for step in range(n_steps + 1):
        t = pack.time + step * control_period
        sensed, assignment = _sense_and_classify(cells, 0.0, t, params)
        all_idle = assignment.n_active == 0
        active = is_active(assignment)
        currents = (
            equalizer_currents(sensed, assignment, params)
            if active else (0.0,) * params.n
        )
        if all_idle or step % log_every == 0 or step == n_steps:
            log.add(t, sensed, assignment.roles, currents)
        if all_idle or step == n_steps:
            break
        stepped = []
        for cell, i_k in zip(cells, currents):
            cell, sat = step_cell(cell, i_k, control_period)
            stepped.append(cell)
            if sat:
                log.saturated.add(len(stepped) - 1)
        cells = tuple(stepped)
    return log.build(all_idle)


def run_cycling(pack: PackState, params: EqualizerParams, profile: CyclingProfile,
                cycles: int, control_period: float = 1.0, log_every: int = 1,
                max_steps: int = 1_000_000) -> EqualizationLog:
    """Cycle the string at constant current while the equalizer runs.

    The external current is common to all cells (positive discharging)
    and superimposes on the per-cell equalizer currents. The profile
    turns around predictively: before a step would push any cell past a
    voltage limit, the direction flips and the step runs in the new
    direction. A completed discharge phase ends one cycle and its time
    and sensed spread are recorded. With zero profile current the run
    degenerates to plain equalization and terminates all-Idle.
    """
    if cycles < 1:
        raise ValueError(f"cycles must be at least 1, got {cycles}")
    if control_period <= 0.0:
        raise ValueError(f"control_period must be positive, got {control_period}")
    if log_every < 1:
        raise ValueError(f"log_every must be at least 1, got {log_every}")
    if len(pack.cells) != params.n:
        raise ValueError(f"{len(pack.cells)} cells for params.n={params.n}")

    log = _LogBuilder()
    cells = pack.cells
    charging = profile.start_charging
    completed = 0
    all_idle = False
    step = 0
    while True:
        if step > max_steps:
            raise RuntimeError(
                f"cycling did not complete {cycles} cycles within {max_steps} steps; "
                "check the profile current against the voltage window"
            )
        t = pack.time + step * control_period
        for _attempt in (0, 1):
            i_ext = -profile.current if charging else profile.current
            sensed, assignment = _sense_and_classify(cells, i_ext, t, params)
            currents = (
                equalizer_currents(sensed, assignment, params)
                if is_active(assignment) else (0.0,) * params.n
            )
            totals = tuple(i_ext + i_k for i_k in currents)
            if profile.current == 0.0:
                break
            v_next = [
                _next_voltage(c, i_k, i_ext, control_period)
                for c, i_k in zip(cells, totals)
            ]
            if charging and max(v_next) > profile.v_max:
                charging = False
                continue
            if not charging and min(v_next) < profile.v_min:
                charging = True
                completed += 1
                log.marks.append(t)
                log.mark_spreads.append(max(sensed) - min(sensed))
                continue
            break
        else:
            raise RuntimeError(
                "voltage window too narrow: both limits crossed within one "
                f"control step at t={t:.1f} s"
            )

        all_idle = assignment.n_active == 0
        done = completed >= cycles or (profile.current == 0.0 and all_idle)
        if done or step % log_every == 0:
            log.add(t, sensed, assignment.roles, currents)
        if done:
            break
        stepped = []
        for cell, i_k in zip(cells, totals):
            cell, sat = step_cell(cell, i_k, control_period)
            stepped.append(cell)
            if sat:
                log.saturated.add(len(stepped) - 1)
        cells = tuple(stepped)
        step += 1
    return log.build(all_idle)
