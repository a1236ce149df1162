"""Command-line front end: analyze, simulate, equalize, sweep-cs.

Each subcommand reads a JSON scenario (or the built-in reference design),
writes machine-readable CSV plus rendered figures into the output
directory, and prints a human summary. Exit codes: 0 success, 2 config
error, 3 physics-violation flag, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import report
from .analytic import (
    OperatingPoint,
    battery_current,
    cs_sweep,
    diode_blocking_ok,
    loss_ratio,
    max_idle_diode_voltage,
    max_switch_current,
    min_dead_time,
    min_turnon_current,
    soft_switch_report,
)
from .config import ConfigError, ScenarioConfig, load_config, reference_config
from .controller import VoltageReading, classify, compute_band, faulty_channels, is_active
from .runner import PackState, run_cycling, run_equalization
from .signals import PhaseAssignment
from .simulator import build_network, integrate, steady_state
from .verify import crosscheck, verification_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_NO_CONVERGE = 4


class PhysicsFlag(RuntimeError):
    """A configured operating condition violates a design guarantee."""


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else reference_config()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return args.handler(cfg, args, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsFlag as e:
        print(f"physics violation: {e}", file=sys.stderr)
        return EXIT_PHYSICS
    except RuntimeError as e:
        print(f"did not converge: {e}", file=sys.stderr)
        return EXIT_NO_CONVERGE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="celleq",
        description="Design analysis and simulation for a multi-cell "
                    "to multi-cell battery voltage equalizer.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON scenario file (default: built-in reference design)")
    common.add_argument("--out", metavar="DIR", default="out",
                        help="output directory for CSV and figures (default: out)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress the text report")
    common.add_argument("--no-plot", action="store_true",
                        help="skip figure rendering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common],
                       help="closed-form currents, powers, bounds, losses")
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("simulate", parents=[common],
                       help="switched-network time-domain run and steady state")
    p.add_argument("--cycles", type=int, metavar="K",
                   help="override simulation.cycles")
    p.add_argument("--steps-per-period", type=int, metavar="K",
                   help="override simulation.steps_per_period")
    p.add_argument("--crosscheck", type=int, metavar="N", default=0,
                   help="also cross-check N randomized operating points")
    p.add_argument("--seed", type=int, metavar="U64", default=0,
                   help="seed for the randomized cross-check suite")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("equalize", parents=[common],
                       help="long-horizon pack equalization or cycling scenario")
    p.set_defaults(handler=_cmd_equalize)

    p = sub.add_parser("sweep-cs", parents=[common],
                       help="snubber capacitance design sweep")
    p.set_defaults(handler=_cmd_sweep)
    return parser


def _operating_point(cfg: ScenarioConfig) -> OperatingPoint:
    voltages = cfg.rest_voltages()
    reading = VoltageReading(voltages)
    bad = faulty_channels(reading, cfg.params)
    if bad:
        channels = ", ".join(str(k + 1) for k in bad)
        raise PhysicsFlag(f"sensed voltage out of range on channels {channels}")
    if cfg.roles is not None:
        assignment = PhaseAssignment.from_roles(cfg.roles, cfg.params.delta)
    else:
        band = compute_band(reading, cfg.params.V_tol)
        assignment = classify(reading, band, cfg.params.delta)
    return OperatingPoint(voltages, assignment, cfg.params)


def _cmd_analyze(cfg: ScenarioConfig, args: argparse.Namespace, out: Path) -> int:
    params = cfg.params
    op = _operating_point(cfg)
    currents = tuple(battery_current(k, op) for k in range(params.n))
    powers = tuple(op.voltages[k] * currents[k] for k in range(params.n))

    i_max = max_switch_current(params)
    i_min = min_turnon_current(params)
    soft = soft_switch_report(i_max, params.V_bmax, params, params.C_s_eff_max)
    ratio_min_cs = loss_ratio(i_max, params.V_bmax, params, params.C_s_eff_min)
    t_d_design = min_dead_time(params.C_s_eff_max, params.V_bmax, i_min)
    diode_margin = max_idle_diode_voltage(params.n, params.V_tol)
    diode_ok = diode_blocking_ok(params)

    report.write_analysis_csv(op, currents, powers, out / "analysis.csv")
    if not args.no_plot:
        report.plot_analysis(op, currents, powers, out / "analysis.png")

    if not args.quiet:
        print(report.format_cell_table(op, currents, powers))
        if not is_active(op.assignment):
            print("\nnote: assignment is one-sided; the controller would keep "
                  "all gates off at this point")
        print()
        print(f"minimum discharge-edge current: {report.sig(i_min)} A")
        print(f"maximum switch edge current:    {report.sig(i_max)} A")
        print(report.format_soft_switch(soft, params.n, params.P_rated,
                                        ratio_min_cs, params.C_s_eff_min,
                                        params.C_s_eff_max, t_d_design, i_min))
        print(f"idle diode worst forward bias:  {report.sig(diode_margin)} V "
              f"(diode drop {report.sig(params.V_d_on)} V)")
        print(f"wrote {out / 'analysis.csv'}")

    if not diode_ok:
        raise PhysicsFlag(
            f"idle-diode blocking margin violated: worst forward bias "
            f"{report.sig(diode_margin)} V is not below V_d_on "
            f"{report.sig(params.V_d_on)} V; idle cells would conduct"
        )
    return EXIT_OK


def _cmd_simulate(cfg: ScenarioConfig, args: argparse.Namespace, out: Path) -> int:
    params = cfg.params
    op = _operating_point(cfg)
    cycles = args.cycles if args.cycles else cfg.cycles
    steps = args.steps_per_period if args.steps_per_period else cfg.steps_per_period
    try:
        network = build_network(op, steps)
    except ValueError as e:
        raise PhysicsFlag(str(e)) from e
    trace = integrate(network, cycles)
    solution = steady_state(trace, op)

    report.write_trace_csv(trace, op, out / "trace.csv")
    if not args.no_plot:
        report.plot_trace(trace, op, out / "trace.png")

    analytic = tuple(battery_current(k, op) for k in range(params.n))
    worst = 0.0
    for k in op.active_indices:
        err = abs(solution.dc_currents[k] - analytic[k])
        worst = max(worst, err / abs(analytic[k]) if analytic[k] else err)
    if not args.quiet:
        print(report.format_cell_table(op, solution.dc_currents, solution.powers))
        print()
        print(f"cycles integrated:        {cycles} at {steps} steps/period")
        print(f"cycle-mean drift:         {report.sig(trace.cycle_mean_drift)} A")
        print(f"closed-form agreement:    {report.sig(100.0 * worst)}% worst cell")
        labels = " ".join(
            f"{m.label}[{report.sig(m.t_start * 1e6)},{report.sig(m.t_end * 1e6)})"
            for m in solution.modes
        )
        print(f"mode intervals (us):      {labels}")
        print(f"wrote {out / 'trace.csv'}")

    if args.crosscheck:
        points = verification_suite(args.crosscheck, args.seed, params)
        worst_suite = max(crosscheck(p, cycles, steps).max_rel_current_err
                          for p in points)
        if not args.quiet:
            print(f"cross-check of {args.crosscheck} random points "
                  f"(seed {args.seed}): worst current error "
                  f"{report.sig(100.0 * worst_suite)}%")
        if worst_suite > 0.005:
            raise RuntimeError(
                f"cross-check disagreement {report.sig(100.0 * worst_suite)}% "
                "exceeds 0.5%"
            )

    if solution.diode_conduction_risk:
        raise PhysicsFlag(
            f"idle diode peak forward bias "
            f"{report.sig(solution.idle_peak_diode_voltage or 0.0)} V reaches "
            f"the diode drop; idle cells would conduct"
        )
    if not solution.converged:
        raise RuntimeError(
            f"cycle-mean drift {report.sig(trace.cycle_mean_drift)} A "
            "has not settled"
        )
    return EXIT_OK


def _cmd_equalize(cfg: ScenarioConfig, args: argparse.Namespace, out: Path) -> int:
    pack = PackState(cfg.cells)
    if cfg.profile is not None:
        log = run_cycling(pack, cfg.params, cfg.profile, cfg.profile_cycles,
                          cfg.control_period, cfg.log_every)
    else:
        log = run_equalization(pack, cfg.params, cfg.horizon,
                               cfg.control_period, cfg.log_every)

    report.write_log_csv(log, out / "log.csv")
    if not args.no_plot:
        report.plot_log(log, out / "equalization.png")
    if not args.quiet:
        print(report.format_equalization_summary(log))
        print(f"wrote {out / 'log.csv'}")

    if cfg.profile is None and not log.terminated_all_idle:
        raise RuntimeError(
            f"pack not equalized within the {report.sig(cfg.horizon)} s horizon; "
            f"final spread {report.sig(log.spread[-1])} V"
        )
    return EXIT_OK


def _cmd_sweep(cfg: ScenarioConfig, args: argparse.Namespace, out: Path) -> int:
    rows = cs_sweep(cfg.params, list(cfg.cs_grid))
    report.write_sweep_csv(rows, out / "cs_sweep.csv")
    if not args.no_plot:
        report.plot_sweep(rows, out / "cs_sweep.png")
    if not args.quiet:
        print(report.format_sweep_table(rows))
        print(f"wrote {out / 'cs_sweep.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
