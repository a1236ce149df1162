"""Scenario configuration: JSON parsing, validation, and defaults.

A scenario document is a single JSON object with a mandatory integer
"schema" field (this build reads version 1) and optional sections
"equalizer", "cells", "roles", "controller", "simulation", "sweep" and
"profile". Omitted sections fall back to the reference design: a
four-cell 12 V pack on the 2.1 uH / 30 kHz / delta = 1/8 equalizer.
Unknown keys are rejected rather than ignored, and every diagnostic
carries the path of the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from dataclasses import fields as dc_fields
from pathlib import Path

from .runner import CellKind, CellModel, CyclingProfile
from .signals import EqualizerParams, Role

SCHEMA_VERSION = 1

_REFERENCE_VOLTAGES = (12.69, 12.59, 12.52, 12.04)
_REFERENCE_CAPACITY_AH = 60.0
_DEFAULT_CS_GRID = (1.0e-9, 2.2e-9, 3.3e-9, 4.7e-9, 6.8e-9, 1.0e-8)

_TOP_KEYS = {"schema", "equalizer", "cells", "roles", "controller",
             "simulation", "sweep", "profile"}


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending field."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scenario with defaults applied."""

    params: EqualizerParams
    cells: tuple[CellModel, ...]
    roles: tuple[Role, ...] | None
    control_period: float
    log_every: int
    cycles: int
    steps_per_period: int
    horizon: float
    cs_grid: tuple[float, ...]
    profile: CyclingProfile | None
    profile_cycles: int

    def rest_voltages(self) -> tuple[float, ...]:
        """Open-circuit terminal voltages of the configured cells."""
        return tuple(c.terminal_voltage(0.0) for c in self.cells)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read and parse a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config(text)


def parse_config(text: str) -> ScenarioConfig:
    """Parse a JSON scenario document into a validated ScenarioConfig."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    for key in doc:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{key}: unknown key")
    if "schema" not in doc:
        raise ConfigError("schema: required field is missing")
    if doc["schema"] != SCHEMA_VERSION:
        raise ConfigError(
            f"schema: unsupported version {doc['schema']!r}; "
            f"this build reads version {SCHEMA_VERSION}"
        )

    params = _parse_equalizer(doc.get("equalizer", {}))
    cells = _parse_cells(doc.get("cells"), params)
    roles = _parse_roles(doc.get("roles"), params.n)

    controller = _section(doc.get("controller", {}), "controller",
                          {"control_period", "log_every"})
    control_period = _real(controller, "control_period", "controller", 1.0)
    if control_period <= 0.0:
        raise ConfigError(
            f"controller.control_period: must be positive, got {control_period}"
        )
    log_every = _int(controller, "log_every", "controller", 1)
    if log_every < 1:
        raise ConfigError(f"controller.log_every: must be at least 1, got {log_every}")

    simulation = _section(doc.get("simulation", {}), "simulation",
                          {"cycles", "steps_per_period", "horizon"})
    cycles = _int(simulation, "cycles", "simulation", 20)
    if cycles < 1:
        raise ConfigError(f"simulation.cycles: must be at least 1, got {cycles}")
    steps = _int(simulation, "steps_per_period", "simulation", 64)
    if steps < 4:
        raise ConfigError(
            f"simulation.steps_per_period: must be at least 4, got {steps}"
        )
    horizon = _real(simulation, "horizon", "simulation", 36000.0)
    if horizon <= 0.0:
        raise ConfigError(f"simulation.horizon: must be positive, got {horizon}")

    sweep = _section(doc.get("sweep", {}), "sweep", {"cs_grid"})
    cs_grid = _parse_cs_grid(sweep.get("cs_grid"))

    profile, profile_cycles = _parse_profile(doc.get("profile"))

    return ScenarioConfig(
        params=params,
        cells=cells,
        roles=roles,
        control_period=control_period,
        log_every=log_every,
        cycles=cycles,
        steps_per_period=steps,
        horizon=horizon,
        cs_grid=cs_grid,
        profile=profile,
        profile_cycles=profile_cycles,
    )


def reference_config() -> ScenarioConfig:
    """The built-in default scenario (used when no config file is given)."""
    return parse_config('{"schema": 1}')


# =====================================================================
# Section parsers
# =====================================================================

def _section(value: object, path: str, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in value:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")
    return value


def _as_real(value: object, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_int(value: object, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _real(section: dict, key: str, path: str, default: float) -> float:
    return _as_real(section[key], f"{path}.{key}") if key in section else default


def _int(section: dict, key: str, path: str, default: int) -> int:
    return _as_int(section[key], f"{path}.{key}") if key in section else default


def _parse_equalizer(value: object) -> EqualizerParams:
    path = "equalizer"
    allowed = {f.name for f in dc_fields(EqualizerParams)}
    section = _section(value, path, allowed)
    kwargs: dict[str, object] = {}
    for key, raw in section.items():
        if key == "n":
            kwargs[key] = _as_int(raw, f"{path}.n")
        elif key == "C_s_parasitic_range":
            if not isinstance(raw, list) or len(raw) != 2:
                raise ConfigError(
                    f"{path}.C_s_parasitic_range: expected [low, high] in farads"
                )
            kwargs[key] = (
                _as_real(raw[0], f"{path}.C_s_parasitic_range[0]"),
                _as_real(raw[1], f"{path}.C_s_parasitic_range[1]"),
            )
        else:
            kwargs[key] = _as_real(raw, f"{path}.{key}")
    try:
        return EqualizerParams(**kwargs)  # type: ignore[arg-type]
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_cells(value: object, params: EqualizerParams) -> tuple[CellModel, ...]:
    if value is None:
        if params.n != len(_REFERENCE_VOLTAGES):
            raise ConfigError(
                f"cells: required when equalizer.n is not {len(_REFERENCE_VOLTAGES)}"
            )
        return tuple(
            CellModel.battery_at_voltage(v, _REFERENCE_CAPACITY_AH)
            for v in _REFERENCE_VOLTAGES
        )
    if not isinstance(value, list):
        raise ConfigError("cells: expected a list")
    if len(value) != params.n:
        raise ConfigError(
            f"cells: expected {params.n} entries to match equalizer.n, got {len(value)}"
        )
    return tuple(_parse_cell(entry, f"cells[{i}]") for i, entry in enumerate(value))


def _parse_cell(entry: object, path: str) -> CellModel:
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected an object")
    kind = entry.get("kind")
    if kind == "lead_acid":
        section = _section(entry, path, {"kind", "capacity_ah", "voltage", "soc",
                                         "r_int", "ocv_lo", "ocv_hi"})
        if "capacity_ah" not in section:
            raise ConfigError(f"{path}.capacity_ah: required field is missing")
        capacity = _as_real(section["capacity_ah"], f"{path}.capacity_ah")
        r_int = _real(section, "r_int", path, 0.010)
        ocv_lo = _real(section, "ocv_lo", path, 11.8)
        ocv_hi = _real(section, "ocv_hi", path, 12.9)
        has_v = "voltage" in section
        has_soc = "soc" in section
        if has_v == has_soc:
            raise ConfigError(f"{path}: give exactly one of 'voltage' or 'soc'")
        try:
            if has_v:
                return CellModel.battery_at_voltage(
                    _as_real(section["voltage"], f"{path}.voltage"),
                    capacity, r_int, ocv_lo, ocv_hi,
                )
            return CellModel(CellKind.LEAD_ACID,
                             capacity,
                             _as_real(section["soc"], f"{path}.soc"),
                             r_int, ocv_lo, ocv_hi)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"{path}: {e}") from e
    if kind == "ultracap":
        section = _section(entry, path, {"kind", "capacity_f", "voltage",
                                         "charge_c", "r_int"})
        if "capacity_f" not in section:
            raise ConfigError(f"{path}.capacity_f: required field is missing")
        capacity = _as_real(section["capacity_f"], f"{path}.capacity_f")
        r_int = _real(section, "r_int", path, 0.001)
        has_v = "voltage" in section
        has_q = "charge_c" in section
        if has_v == has_q:
            raise ConfigError(f"{path}: give exactly one of 'voltage' or 'charge_c'")
        try:
            if has_v:
                return CellModel.rack_at_voltage(
                    _as_real(section["voltage"], f"{path}.voltage"), capacity, r_int,
                )
            return CellModel(CellKind.ULTRACAP, capacity,
                             _as_real(section["charge_c"], f"{path}.charge_c"), r_int)
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"{path}: {e}") from e
    raise ConfigError(f"{path}.kind: expected 'lead_acid' or 'ultracap', got {kind!r}")


def _parse_roles(value: object, n: int) -> tuple[Role, ...] | None:
    if value is None:
        return None
    if not isinstance(value, list):
        raise ConfigError("roles: expected a list of role names")
    if len(value) != n:
        raise ConfigError(f"roles: expected {n} entries, got {len(value)}")
    out = []
    for i, name in enumerate(value):
        try:
            out.append(Role(name))
        except ValueError:
            raise ConfigError(
                f"roles[{i}]: expected 'discharge', 'charge' or 'idle', got {name!r}"
            ) from None
    return tuple(out)


def _parse_cs_grid(value: object) -> tuple[float, ...]:
    if value is None:
        return _DEFAULT_CS_GRID
    if not isinstance(value, list) or not value:
        raise ConfigError("sweep.cs_grid: expected a nonempty list of capacitances")
    grid = []
    for i, raw in enumerate(value):
        x = _as_real(raw, f"sweep.cs_grid[{i}]")
        if x <= 0.0:
            raise ConfigError(f"sweep.cs_grid[{i}]: must be positive, got {x}")
        grid.append(x)
    return tuple(grid)


def _parse_profile(value: object) -> tuple[CyclingProfile | None, int]:
    if value is None:
        return None, 18
    section = _section(value, "profile",
                       {"current", "v_max", "v_min", "start_charging", "cycles"})
    for key in ("current", "v_max", "v_min"):
        if key not in section:
            raise ConfigError(f"profile.{key}: required field is missing")
    start = section.get("start_charging", True)
    if not isinstance(start, bool):
        raise ConfigError(
            f"profile.start_charging: expected true or false, got {start!r}"
        )
    cycles = _int(section, "cycles", "profile", 18)
    if cycles < 1:
        raise ConfigError(f"profile.cycles: must be at least 1, got {cycles}")
    try:
        profile = CyclingProfile(
            current=_as_real(section["current"], "profile.current"),
            v_max=_as_real(section["v_max"], "profile.v_max"),
            v_min=_as_real(section["v_min"], "profile.v_min"),
            start_charging=start,
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"profile: {e}") from e
    return profile, cycles
