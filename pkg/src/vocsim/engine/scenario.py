"""Scenario files: TOML schema, parsing and validation.

A scenario describes one run: the model variant, one or two inverters with
their oscillator parameters, output filter and line, load branches with
connect/disconnect times, and an optional dispatch schedule with PI settings.
Keys carry SI unit suffixes.  Minimal example:

    schema_version = 1

    [run]
    model = "actual"        # "actual" | "averaged" | "legacy"
    t_end_s = 3.0

    [[inverters]]
    sigma_S = 6.09
    alpha_A_per_V3 = 4.06
    C_F = 0.203
    k_v = 126.0
    k_i = 0.152
    omega_star_rad_s = 376.99

    [inverters.filter]
    R_f_ohm = 0.15
    L_f_H = 2.48e-3
    R_c_ohm = 3.3
    C_f_F = 4.7e-6
    R_g_ohm = 0.13
    L_g_H = 0.97e-3

    [inverters.line]
    R_ohm = 0.15
    L_H = 2.48e-3

    [[loads]]
    R_ohm = 22.1
    L_H = 14.4e-3
"""

from __future__ import annotations

import math

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field
from pathlib import Path

from ..oscillator import VocParams
from ..phasor import LclFilter, SeriesRlBranch

__all__ = [
    "SCHEMA_VERSION",
    "MODELS",
    "FEEDBACK_TAPS",
    "RunSettings",
    "InverterSpec",
    "LoadSpec",
    "SetpointSpec",
    "PiSettings",
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "load_scenario",
]

SCHEMA_VERSION = 1
MODELS = ("actual", "averaged", "legacy")
FEEDBACK_TAPS = ("post_filter", "pre_filter")

DEFAULT_DT_ACTUAL_S = 5e-6
DEFAULT_DT_AVERAGED_S = 5e-4
DEFAULT_TRACE_DECIMATION_S = 1e-3
DEFAULT_CONTROL_DT_S = 1e-3


class ScenarioError(ValueError):
    """A scenario file failed validation; the message names the field."""


@dataclass(frozen=True)
class RunSettings:
    model: str
    t_end_s: float
    dt_s: float
    trace_decimation_s: float
    feedback_tap: str = "post_filter"
    control_dt_s: float = DEFAULT_CONTROL_DT_S
    v_init_V: float = 2.0


@dataclass(frozen=True)
class InverterSpec:
    params: VocParams
    filter: LclFilter
    line: SeriesRlBranch


@dataclass(frozen=True)
class LoadSpec:
    branch: SeriesRlBranch
    connect_s: float = 0.0
    disconnect_s: float = math.inf


@dataclass(frozen=True)
class SetpointSpec:
    t_start_s: float
    P_W: float
    Q_var: float


@dataclass(frozen=True)
class PiSettings:
    Kp_p: float = -0.001
    Ki_p: float = -0.15
    Kp_q: float = 0.0001
    Ki_q: float = 0.01


@dataclass(frozen=True)
class Scenario:
    run: RunSettings
    inverters: tuple[InverterSpec, ...]
    loads: tuple[LoadSpec, ...]
    setpoints: tuple[SetpointSpec, ...] = ()
    pi: PiSettings = field(default_factory=PiSettings)


def _require(table: dict, key: str, kind, where: str):
    if key not in table:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    val = table[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind):
        raise ScenarioError(
            f"{where}.{key}: expected {kind.__name__}, got {type(val).__name__}"
        )
    return val


def _optional(table: dict, key: str, kind, default, where: str):
    if key not in table:
        return default
    return _require(table, key, kind, where)


def _check_unknown(table: dict, allowed: set, where: str):
    extra = set(table) - allowed
    if extra:
        raise ScenarioError(f"{where}: unknown key(s) {sorted(extra)}")


def parse_scenario(doc: dict) -> Scenario:
    """Validate a parsed TOML document and build a :class:`Scenario`."""
    _check_unknown(
        doc, {"schema_version", "run", "inverters", "loads", "setpoints", "pi"},
        "scenario",
    )
    version = _require(doc, "schema_version", int, "scenario")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario.schema_version: expected {SCHEMA_VERSION}, got {version}"
        )

    run_tbl = _require(doc, "run", dict, "scenario")
    _check_unknown(
        run_tbl,
        {"model", "t_end_s", "dt_s", "trace_decimation_s", "feedback_tap",
         "control_dt_s", "v_init_V"},
        "run",
    )
    model = _require(run_tbl, "model", str, "run")
    if model not in MODELS:
        raise ScenarioError(f"run.model: must be one of {MODELS}, got {model!r}")
    t_end = _require(run_tbl, "t_end_s", float, "run")
    if t_end <= 0:
        raise ScenarioError("run.t_end_s: must be positive")
    default_dt = DEFAULT_DT_ACTUAL_S if model == "actual" else DEFAULT_DT_AVERAGED_S
    dt = _optional(run_tbl, "dt_s", float, default_dt, "run")
    if dt <= 0 or dt > t_end:
        raise ScenarioError("run.dt_s: must be positive and no larger than t_end_s")
    dec = _optional(
        run_tbl, "trace_decimation_s", float, DEFAULT_TRACE_DECIMATION_S, "run"
    )
    if dec < dt:
        dec = dt
    tap = _optional(run_tbl, "feedback_tap", str, "post_filter", "run")
    if tap not in FEEDBACK_TAPS:
        raise ScenarioError(
            f"run.feedback_tap: must be one of {FEEDBACK_TAPS}, got {tap!r}"
        )
    control_dt = _optional(run_tbl, "control_dt_s", float, DEFAULT_CONTROL_DT_S, "run")
    if control_dt < dt:
        raise ScenarioError("run.control_dt_s: must be at least dt_s")
    v_init = _optional(run_tbl, "v_init_V", float, 2.0, "run")
    if v_init <= 0:
        raise ScenarioError("run.v_init_V: must be positive")
    run = RunSettings(model, t_end, dt, dec, tap, control_dt, v_init)

    inv_list = _require(doc, "inverters", list, "scenario")
    if not 1 <= len(inv_list) <= 2:
        raise ScenarioError("inverters: need one or two entries")
    inverters = tuple(
        _parse_inverter(tbl, f"inverters[{j}]") for j, tbl in enumerate(inv_list)
    )
    w0 = inverters[0].params.omega_star
    for j, inv in enumerate(inverters):
        if abs(inv.params.omega_star - w0) > 1e-9 * w0:
            raise ScenarioError(
                f"inverters[{j}].omega_star_rad_s: all inverters must share one "
                "nominal frequency"
            )

    load_list = _optional(doc, "loads", list, [], "scenario")
    loads = tuple(_parse_load(tbl, f"loads[{j}]") for j, tbl in enumerate(load_list))

    sp_list = _optional(doc, "setpoints", list, [], "scenario")
    setpoints = []
    prev = -math.inf
    for j, tbl in enumerate(sp_list):
        where = f"setpoints[{j}]"
        if not isinstance(tbl, dict):
            raise ScenarioError(f"{where}: expected a table")
        _check_unknown(tbl, {"t_start_s", "P_W", "Q_var"}, where)
        t_start = _require(tbl, "t_start_s", float, where)
        if not 0 <= t_start <= t_end:
            raise ScenarioError(f"{where}.t_start_s: outside [0, t_end_s]")
        if t_start <= prev:
            raise ScenarioError(f"{where}.t_start_s: must be strictly increasing")
        prev = t_start
        setpoints.append(
            SetpointSpec(
                t_start,
                _require(tbl, "P_W", float, where),
                _require(tbl, "Q_var", float, where),
            )
        )
    if setpoints and len(inverters) != 2:
        raise ScenarioError("setpoints: dispatch needs exactly two inverters")

    pi_tbl = _optional(doc, "pi", dict, {}, "scenario")
    _check_unknown(pi_tbl, {"Kp_p", "Ki_p", "Kp_q", "Ki_q"}, "pi")
    defaults = PiSettings()
    pi = PiSettings(
        _optional(pi_tbl, "Kp_p", float, defaults.Kp_p, "pi"),
        _optional(pi_tbl, "Ki_p", float, defaults.Ki_p, "pi"),
        _optional(pi_tbl, "Kp_q", float, defaults.Kp_q, "pi"),
        _optional(pi_tbl, "Ki_q", float, defaults.Ki_q, "pi"),
    )

    return Scenario(run, inverters, loads, tuple(setpoints), pi)


def _parse_inverter(tbl, where: str) -> InverterSpec:
    if not isinstance(tbl, dict):
        raise ScenarioError(f"{where}: expected a table")
    _check_unknown(
        tbl,
        {"sigma_S", "alpha_A_per_V3", "C_F", "k_v", "k_i", "omega_star_rad_s",
         "filter", "line"},
        where,
    )
    try:
        params = VocParams.from_oscillator_c(
            _require(tbl, "sigma_S", float, where),
            _require(tbl, "alpha_A_per_V3", float, where),
            _require(tbl, "C_F", float, where),
            _require(tbl, "k_v", float, where),
            _require(tbl, "k_i", float, where),
            _require(tbl, "omega_star_rad_s", float, where),
        )
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc

    f_tbl = _require(tbl, "filter", dict, where)
    fw = f"{where}.filter"
    _check_unknown(
        f_tbl, {"R_f_ohm", "L_f_H", "R_c_ohm", "C_f_F", "R_g_ohm", "L_g_H"}, fw
    )
    try:
        filt = LclFilter(
            _require(f_tbl, "R_f_ohm", float, fw),
            _require(f_tbl, "L_f_H", float, fw),
            _require(f_tbl, "R_c_ohm", float, fw),
            _require(f_tbl, "C_f_F", float, fw),
            _require(f_tbl, "R_g_ohm", float, fw),
            _require(f_tbl, "L_g_H", float, fw),
        )
    except ValueError as exc:
        raise ScenarioError(f"{fw}: {exc}") from exc

    l_tbl = _require(tbl, "line", dict, where)
    lw = f"{where}.line"
    _check_unknown(l_tbl, {"R_ohm", "L_H"}, lw)
    try:
        line = SeriesRlBranch(
            _require(l_tbl, "R_ohm", float, lw),
            _require(l_tbl, "L_H", float, lw),
            label="line",
        )
    except ValueError as exc:
        raise ScenarioError(f"{lw}: {exc}") from exc
    return InverterSpec(params, filt, line)


def _parse_load(tbl, where: str) -> LoadSpec:
    if not isinstance(tbl, dict):
        raise ScenarioError(f"{where}: expected a table")
    _check_unknown(tbl, {"R_ohm", "L_H", "connect_s", "disconnect_s", "label"}, where)
    try:
        branch = SeriesRlBranch(
            _require(tbl, "R_ohm", float, where),
            _require(tbl, "L_H", float, where),
            label=_optional(tbl, "label", str, "", where),
        )
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    connect = _optional(tbl, "connect_s", float, 0.0, where)
    disconnect = _optional(tbl, "disconnect_s", float, math.inf, where)
    if connect < 0:
        raise ScenarioError(f"{where}.connect_s: must be non-negative")
    if disconnect <= connect:
        raise ScenarioError(f"{where}.disconnect_s: must be after connect_s")
    return LoadSpec(branch, connect, disconnect)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario TOML file."""
    with open(Path(path), "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError(f"{path}: invalid TOML: {exc}") from exc
    return parse_scenario(doc)
