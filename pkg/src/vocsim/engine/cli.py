"""Command line interface.

Subcommands: ``design`` (parameter design from an ac spec), ``droop``
(steady-state droop table), ``simulate`` (run one scenario to CSV),
``compare`` (actual vs both averaged variants), ``dispatch`` (two-inverter
set-point equilibrium and gains) and ``check-setpoint`` (security test only).

Exit codes: 0 on success, 2 when a design or set-point is infeasible, 1 on
any other error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from pathlib import Path

from .. import dispatch as dispatch_mod
from ..design import C_RULES, MODES, AcSpec, design, droop_curve
from ..errors import (
    InfeasibleDesignError,
    InfeasibleSetpointError,
    SolverConvergenceError,
    VocsimError,
)
from ..phasor import LclFilter
from .scenario import ScenarioError, load_scenario
from .simulate import compare_models, run, write_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _load_toml(path) -> dict:
    with open(Path(path), "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError(f"{path}: invalid TOML: {exc}") from exc


def _design_inputs(path):
    doc = _load_toml(path)
    try:
        s = doc["spec"]
        spec = AcSpec(
            V_oc=float(s["V_oc_V"]),
            V_min=float(s["V_min_V"]),
            P_rated=float(s["P_rated_W"]),
            Q_rated=float(s["Q_rated_var"]),
            omega_star=float(s["omega_star_rad_s"]),
            d_omega_max=float(s["d_omega_max_rad_s"]),
            t_rise_max=float(s["t_rise_max_s"]),
            delta31_max=float(s["delta31_max"]),
        )
        f = doc["filter"]
        filt = LclFilter(
            float(f["R_f_ohm"]), float(f["L_f_H"]), float(f["R_c_ohm"]),
            float(f["C_f_F"]), float(f["R_g_ohm"]), float(f["L_g_H"]),
        )
    except KeyError as exc:
        raise ScenarioError(f"{path}: missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return spec, filt


def _cmd_design(args) -> int:
    spec, filt = _design_inputs(args.config)
    report = design(spec, filt, mode=args.mode, c_rule=args.c_rule)
    if not report.feasible:
        binding = ", ".join(report.window.binding_constraints())
        print(f"infeasible: empty capacitance window (binding: {binding})",
              file=sys.stderr)
        w = report.window
        print(f"  C_min_freq_F = {w.C_min_freq:.6g}", file=sys.stderr)
        print(f"  C_min_harm_F = {w.C_min_harm:.6g}", file=sys.stderr)
        print(f"  C_max_rise_F = {w.C_max_rise:.6g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    p = report.require_params()
    out = {
        "sigma_S": p.sigma,
        "alpha_A_per_V3": p.alpha,
        "L_H": p.L,
        "C_F": p.C,
        "k_v": p.k_v,
        "k_i": p.k_i,
        "omega_star_rad_s": p.omega_star,
        "epsilon": p.epsilon,
        "S_max_VA": report.S_max,
        "S_dmax_VA": report.S_dmax,
        "C_window_F": {
            "C_min_freq": report.window.C_min_freq,
            "C_min_harm": report.window.C_min_harm,
            "C_max_rise": report.window.C_max_rise,
        },
    }
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        for key, val in out.items():
            if isinstance(val, dict):
                print(f"{key}:")
                for k2, v2 in val.items():
                    print(f"  {k2} = {v2:.10g}")
            else:
                print(f"{key} = {val:.10g}")
    return EXIT_OK


def _cmd_droop(args) -> int:
    spec, filt = _design_inputs(args.config)
    report = design(spec, filt, mode=args.mode, c_rule=args.c_rule)
    params = report.require_params()
    rows = droop_curve(
        params, report.constants, args.axis,
        fixed_value=args.fixed, n_points=args.points,
    )
    header = ("P_W" if args.axis == "P" else "Q_var") + ",V_eq_V,freq_hz,exists"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['value']:.12g},{r['V_eq']:.12g},"
            f"{r['omega_eq'] / (2 * math.pi):.12g},{int(r['exists'])}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    report = run(scenario)
    write_csv(report, args.out)
    print(f"wrote {args.out} ({len(report.data)} rows, model={report.model})")
    return EXIT_OK


def _cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    result = compare_models(scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for model, rep in result.reports.items():
        write_csv(rep, out_dir / f"{model}.csv")
    print("window_lo_s,window_hi_s,mae_averaged_V,mae_legacy_V")
    for w in result.windows:
        print(f"{w.t_lo:.6g},{w.t_hi:.6g},{w.mae_averaged:.6g},{w.mae_legacy:.6g}")
    return EXIT_OK


def _two_inverter_system(path) -> dispatch_mod.TwoInverterSystem:
    scenario = load_scenario(path)
    if len(scenario.inverters) != 2:
        raise ScenarioError("dispatch needs a scenario with two inverters")
    if not scenario.loads:
        raise ScenarioError("dispatch needs at least one load branch")
    return dispatch_mod.TwoInverterSystem(
        params=tuple(inv.params for inv in scenario.inverters),
        filters=tuple(inv.filter for inv in scenario.inverters),
        lines=tuple(inv.line for inv in scenario.inverters),
        loads=tuple(ld.branch for ld in scenario.loads),
    )


def _cmd_dispatch(args) -> int:
    system = _two_inverter_system(args.scenario)
    try:
        eq = dispatch_mod.dispatch_equilibrium(args.p, args.q, system)
    except SolverConvergenceError as exc:
        print(f"set-point NOT achievable (no equilibrium: {exc})", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"V1_V = {eq.V1:.6f}")
    print(f"theta1_deg = {math.degrees(eq.theta1):.6f}")
    print(f"V2_V = {eq.V2:.6f}")
    print(f"P2_W = {eq.P2:.4f}")
    print(f"Q2_var = {eq.Q2:.4f}")
    print(f"freq_hz = {eq.omega / (2 * math.pi):.6f}")
    print(f"mu = {eq.mu:.6f}")
    print(f"margin = {eq.margin:.4f}")
    if not eq.achievable:
        print("set-point NOT achievable (security constraint violated)",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"kv1 = {eq.kv1:.6f}")
    print(f"ki1 = {eq.ki1:.6f}")
    return EXIT_OK


def _cmd_check_setpoint(args) -> int:
    system = _two_inverter_system(args.scenario)
    try:
        eq = dispatch_mod.dispatch_equilibrium(args.p, args.q, system)
    except SolverConvergenceError:
        print("no equilibrium found for this set-point")
        print("INSECURE")
        return EXIT_INFEASIBLE
    print(f"margin = {eq.margin:.4f}")
    if eq.achievable:
        print("SECURE")
        return EXIT_OK
    print("INSECURE")
    return EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vocsim",
        description="Virtual-oscillator inverter design and simulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="design oscillator parameters")
    p_design.add_argument("config", help="TOML file with [spec] and [filter]")
    p_design.add_argument("--mode", choices=MODES, default="rated_point")
    p_design.add_argument("--c-rule", choices=C_RULES, default="max")
    p_design.add_argument("--json", action="store_true", help="JSON output")
    p_design.set_defaults(func=_cmd_design)

    p_droop = sub.add_parser("droop", help="steady-state droop table")
    p_droop.add_argument("config", help="TOML file with [spec] and [filter]")
    p_droop.add_argument("--axis", choices=("P", "Q"), required=True)
    p_droop.add_argument("--fixed", type=float, default=0.0,
                         help="value of the non-swept power")
    p_droop.add_argument("--points", type=int, default=50)
    p_droop.add_argument("--mode", choices=MODES, default="rated_point")
    p_droop.add_argument("--c-rule", choices=C_RULES, default="max")
    p_droop.add_argument("--out", help="write CSV here instead of stdout")
    p_droop.set_defaults(func=_cmd_droop)

    p_sim = sub.add_parser("simulate", help="run one scenario")
    p_sim.add_argument("scenario", help="scenario TOML file")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(func=_cmd_simulate)

    p_cmp = sub.add_parser("compare", help="actual vs averaged vs legacy")
    p_cmp.add_argument("scenario", help="scenario TOML file")
    p_cmp.add_argument("--out-dir", required=True, help="directory for the CSVs")
    p_cmp.set_defaults(func=_cmd_compare)

    p_disp = sub.add_parser("dispatch", help="set-point equilibrium and gains")
    p_disp.add_argument("scenario", help="two-inverter scenario TOML file")
    p_disp.add_argument("--p", type=float, required=True, help="P set-point, W")
    p_disp.add_argument("--q", type=float, required=True, help="Q set-point, var")
    p_disp.set_defaults(func=_cmd_dispatch)

    p_chk = sub.add_parser("check-setpoint", help="security constraint test")
    p_chk.add_argument("scenario", help="two-inverter scenario TOML file")
    p_chk.add_argument("--p", type=float, required=True)
    p_chk.add_argument("--q", type=float, required=True)
    p_chk.set_defaults(func=_cmd_check_setpoint)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InfeasibleDesignError, InfeasibleSetpointError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (VocsimError, ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
