"""Rendering of analysis results: text tables, CSV files, and figures.

Text reports round to 6 significant digits; CSV carries full double
precision (shortest round-trip representation). Figures are rendered
headless to PNG files next to the CSV output.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytic import OperatingPoint, SoftSwitchReport
from .runner import EqualizationLog
from .simulator import Trace, mode_at, mode_sequence
from .signals import Role


def sig(x: float) -> str:
    """6-significant-digit rendering for human reports."""
    return f"{x:.6g}"


def full(x: float) -> str:
    """Shortest decimal that round-trips the exact double, for CSV."""
    return repr(float(x))


# =====================================================================
# CSV writers
# =====================================================================

def write_analysis_csv(op: OperatingPoint, currents: tuple[float, ...],
                       powers: tuple[float, ...], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "voltage_v", "role", "current_a", "power_w"])
        for k in range(op.params.n):
            w.writerow([
                k + 1,
                full(op.voltages[k]),
                op.assignment.roles[k].value,
                full(currents[k]),
                full(powers[k]),
            ])


def write_trace_csv(trace: Trace, op: OperatingPoint, path: Path) -> None:
    """One row per grid point: t_s, i_1..i_n, v_o, ib_1..ib_n, mode."""
    n = op.params.n
    modes = mode_sequence(trace, op)
    steps = trace.model.steps_per_period
    T_s = trace.model.T_s
    header = (["t_s"] + [f"i_{k + 1}" for k in range(n)] + ["v_o"]
              + [f"ib_{k + 1}" for k in range(n)] + ["mode"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for idx in range(len(trace.t)):
            t_in = ((idx % steps) / steps) * T_s
            w.writerow(
                [full(trace.t[idx])]
                + [full(x) for x in trace.i[idx]]
                + [full(trace.v_o[idx])]
                + [full(x) for x in trace.ib[idx]]
                + [mode_at(modes, t_in)]
            )


def write_log_csv(log: EqualizationLog, path: Path) -> None:
    """One row per logged control period: t_s, v_*, role_*, i_*, spread_v."""
    n = log.voltages.shape[1]
    header = (["t_s"] + [f"v_{k + 1}" for k in range(n)]
              + [f"role_{k + 1}" for k in range(n)]
              + [f"i_{k + 1}" for k in range(n)] + ["spread_v"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in range(len(log)):
            w.writerow(
                [full(log.times[r])]
                + [full(x) for x in log.voltages[r]]
                + [role.value for role in log.roles[r]]
                + [full(x) for x in log.currents[r]]
                + [full(log.spread[r])]
            )


def write_sweep_csv(rows: list[tuple[float, float, float, float, float]],
                    path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cs_f", "cs_eff_min_f", "cs_eff_max_f", "loss_ratio", "t_d_min_s"])
        for row in rows:
            w.writerow([full(x) for x in row])


# =====================================================================
# Text reports
# =====================================================================

def format_cell_table(op: OperatingPoint, currents: tuple[float, ...],
                      powers: tuple[float, ...]) -> str:
    lines = [f"{'cell':>4}  {'voltage/V':>10}  {'role':>9}  {'current/A':>11}  {'power/W':>10}"]
    for k in range(op.params.n):
        lines.append(
            f"{k + 1:>4}  {sig(op.voltages[k]):>10}  {op.assignment.roles[k].value:>9}  "
            f"{sig(currents[k]):>11}  {sig(powers[k]):>10}"
        )
    lines.append(f"{'':>4}  {'':>10}  {'sum':>9}  {sig(sum(currents)):>11}  {sig(sum(powers)):>10}")
    return "\n".join(lines)


def format_soft_switch(report: SoftSwitchReport, n: int, p_rated: float,
                       ratio_eff_min: float, cs_eff_min: float,
                       cs_eff_max: float, t_d_design: float,
                       i_design: float) -> str:
    pack = 2 * n * report.P_hard
    return "\n".join([
        f"worst-case edge current:        {sig(report.i0)} A",
        f"hard turn-off loss per device:  {sig(report.P_hard)} W",
        f"pack turn-off loss (2n devices): {sig(pack)} W "
        f"({sig(100.0 * pack / p_rated)}% of rated {sig(p_rated)} W)",
        f"snubbed/hard loss ratio:        {sig(100.0 * ratio_eff_min)}% "
        f"at C_s_eff={sig(cs_eff_min)} F, {sig(100.0 * report.ratio)}% "
        f"at C_s_eff={sig(cs_eff_max)} F",
        f"minimum dead time:              {sig(t_d_design)} s "
        f"at C_s_eff={sig(cs_eff_max)} F and the {sig(i_design)} A "
        "worst-case turn-on",
    ])


def format_sweep_table(rows: list[tuple[float, float, float, float, float]]) -> str:
    lines = [f"{'C_s/F':>10}  {'eff min/F':>10}  {'eff max/F':>10}  "
             f"{'loss ratio':>10}  {'t_d min/s':>11}"]
    for cs, lo, hi, ratio, td in rows:
        lines.append(
            f"{sig(cs):>10}  {sig(lo):>10}  {sig(hi):>10}  {sig(ratio):>10}  {sig(td):>11}"
        )
    return "\n".join(lines)


def format_equalization_summary(log: EqualizationLog) -> str:
    lines = [
        f"samples logged:        {len(log)}",
        f"duration:              {sig(log.times[-1] - log.times[0])} s",
        f"initial spread:        {sig(log.spread[0])} V",
        f"final spread:          {sig(log.spread[-1])} V",
        f"terminated all-idle:   {log.terminated_all_idle}",
    ]
    if log.cycle_marks:
        lines.append(f"cycles completed:      {len(log.cycle_marks)}")
        lines.append(
            f"spread at cycle ends:  {sig(log.cycle_spreads[0])} V first, "
            f"{sig(log.cycle_spreads[-1])} V last"
        )
    if log.saturated_cells:
        cells = ", ".join(str(k + 1) for k in log.saturated_cells)
        lines.append(f"saturation clamps hit: cells {cells}")
    return "\n".join(lines)


# =====================================================================
# Figures
# =====================================================================

def plot_analysis(op: OperatingPoint, currents: tuple[float, ...],
                  powers: tuple[float, ...], path: Path) -> None:
    cells = np.arange(1, op.params.n + 1)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    colors = ["tab:red" if r is Role.DISCHARGE else
              "tab:blue" if r is Role.CHARGE else "tab:gray"
              for r in op.assignment.roles]
    ax1.bar(cells, currents, color=colors)
    ax1.axhline(0.0, color="black", lw=0.8)
    ax1.set_ylabel("dc battery current / A")
    ax1.grid(True, alpha=0.3)
    ax2.bar(cells, powers, color=colors)
    ax2.axhline(0.0, color="black", lw=0.8)
    ax2.set_ylabel("battery power / W")
    ax2.set_xlabel("cell")
    ax2.set_xticks(cells)
    ax2.grid(True, alpha=0.3)
    fig.suptitle("Operating point (red discharging, blue charging)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trace(trace: Trace, op: OperatingPoint, path: Path) -> None:
    """Branch currents and common-node voltage over the last two periods."""
    steps = trace.model.steps_per_period
    tail = 2 * steps + 1 if len(trace.t) > 2 * steps else len(trace.t)
    t_us = trace.t[-tail:] * 1e6
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for k in range(op.params.n):
        if op.assignment.roles[k] is Role.IDLE:
            continue
        ax1.plot(t_us, trace.i[-tail:, k], label=f"i_{k + 1}")
    ax1.axhline(0.0, color="black", lw=0.8)
    ax1.set_ylabel("inductor current / A")
    ax1.legend(loc="upper right", ncol=2, fontsize=8)
    ax1.grid(True, alpha=0.3)
    ax2.step(t_us, trace.v_o[-tail:], where="post", color="tab:purple")
    ax2.set_ylabel("common node voltage / V")
    ax2.set_xlabel("time / µs")
    ax2.grid(True, alpha=0.3)
    fig.suptitle("Steady-state waveforms (final two periods)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_log(log: EqualizationLog, path: Path) -> None:
    t = log.times
    unit, scale = ("h", 3600.0) if t[-1] >= 7200.0 else ("s", 1.0)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for k in range(log.voltages.shape[1]):
        ax1.plot(t / scale, log.voltages[:, k], label=f"cell {k + 1}")
    ax1.set_ylabel("terminal voltage / V")
    ax1.legend(loc="best", ncol=2, fontsize=8)
    ax1.grid(True, alpha=0.3)
    ax2.plot(t / scale, log.spread * 1e3, color="tab:green")
    ax2.set_ylabel("spread / mV")
    ax2.set_xlabel(f"time / {unit}")
    ax2.grid(True, alpha=0.3)
    fig.suptitle("Pack equalization")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(rows: list[tuple[float, float, float, float, float]],
               path: Path) -> None:
    cs = np.array([r[0] for r in rows]) * 1e9
    ratio = np.array([r[3] for r in rows]) * 100.0
    td = np.array([r[4] for r in rows]) * 1e9
    fig, ax1 = plt.subplots(figsize=(7, 5))
    ax1.plot(cs, ratio, "o-", color="tab:red", label="loss ratio (worst case)")
    ax1.set_xlabel("nominal snubber capacitance / nF")
    ax1.set_ylabel("turn-off loss ratio / %", color="tab:red")
    ax1.tick_params(axis="y", labelcolor="tab:red")
    ax1.grid(True, alpha=0.3)
    ax2 = ax1.twinx()
    ax2.plot(cs, td, "s--", color="tab:blue", label="minimum dead time")
    ax2.set_ylabel("minimum dead time / ns", color="tab:blue")
    ax2.tick_params(axis="y", labelcolor="tab:blue")
    fig.suptitle("Snubber design sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
