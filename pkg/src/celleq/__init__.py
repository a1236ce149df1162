"""Design analysis and simulation toolkit for a soft-switched multi-cell
to multi-cell battery voltage equalizer.

The package splits into a closed-form engine (steady-state currents,
powers, switching bounds, loss and dead-time sizing), an independent
switched-network time-domain oracle, a tolerance-band balancing
controller, and a long-horizon pack equalization runner, with a CLI
front end over JSON scenarios.
"""

from .analytic import (
    OperatingPoint,
    SoftSwitchReport,
    battery_current,
    battery_power,
    cs_sweep,
    dc_block_voltage,
    diode_blocking_ok,
    efficiency,
    idle_diode_voltages,
    inductor_current,
    loss_ratio,
    max_idle_diode_voltage,
    max_switch_current,
    min_dead_time,
    min_turnon_current,
    soft_switch_report,
    turnoff_loss_hard,
    turnoff_loss_soft,
)
from .config import ConfigError, ScenarioConfig, load_config, parse_config, reference_config
from .controller import (
    Band,
    VoltageReading,
    classify,
    compute_band,
    faulty_channels,
    is_active,
)
from .runner import (
    CellKind,
    CellModel,
    CyclingProfile,
    EqualizationLog,
    PackState,
    equalizer_currents,
    run_cycling,
    run_equalization,
    step_cell,
)
from .signals import (
    EqualizerParams,
    PhaseAssignment,
    Role,
    SwitchCommand,
    gate_state,
    phase_fraction,
    sq,
    tr,
)
from .simulator import (
    ZVS_EPSILON,
    CommutationReport,
    ModeInterval,
    NetworkModel,
    SteadyStateSolution,
    Trace,
    build_network,
    commutation,
    integrate,
    mode_at,
    mode_sequence,
    steady_state,
)
from .verify import (
    CrossCheck,
    SuitePoint,
    crosscheck,
    idle_suite,
    min_current_corner,
    random_consistent_point,
    random_idle_point,
    verification_suite,
)

__version__ = "0.1.0"

__all__ = [
    "Band",
    "CellKind",
    "CellModel",
    "CommutationReport",
    "ConfigError",
    "CrossCheck",
    "CyclingProfile",
    "EqualizationLog",
    "EqualizerParams",
    "ModeInterval",
    "NetworkModel",
    "OperatingPoint",
    "PackState",
    "PhaseAssignment",
    "Role",
    "ScenarioConfig",
    "SoftSwitchReport",
    "SteadyStateSolution",
    "SuitePoint",
    "SwitchCommand",
    "Trace",
    "VoltageReading",
    "ZVS_EPSILON",
    "battery_current",
    "battery_power",
    "build_network",
    "classify",
    "commutation",
    "compute_band",
    "crosscheck",
    "cs_sweep",
    "dc_block_voltage",
    "diode_blocking_ok",
    "efficiency",
    "equalizer_currents",
    "faulty_channels",
    "gate_state",
    "idle_diode_voltages",
    "idle_suite",
    "inductor_current",
    "integrate",
    "is_active",
    "load_config",
    "loss_ratio",
    "max_idle_diode_voltage",
    "max_switch_current",
    "min_current_corner",
    "min_dead_time",
    "min_turnon_current",
    "mode_at",
    "mode_sequence",
    "parse_config",
    "phase_fraction",
    "random_consistent_point",
    "random_idle_point",
    "reference_config",
    "run_cycling",
    "run_equalization",
    "soft_switch_report",
    "sq",
    "steady_state",
    "step_cell",
    "tr",
    "turnoff_loss_hard",
    "turnoff_loss_soft",
    "verification_suite",
    "__version__",
]
