"""Scenario parsing, fixed-step integration, harmonic projection and the
simulation driver."""

import copy
import math

import numpy as np
import pytest

from vocsim.engine import parse_scenario, run, write_csv
from vocsim.engine.fourier import harmonic_amplitude, harmonic_ratio_31
from vocsim.engine.integrate import integrate_fixed, rk4_step
from vocsim.engine.scenario import ScenarioError, load_scenario
from vocsim.engine.simulate import (
    TRACE_DECIMATION_ENV,
    compare_models,
    csv_columns,
    measure_rise_time,
)
from vocsim.errors import SimulationAbort

from conftest import OMEGA_STAR, inverter_table


@pytest.fixture()
def base_doc(ref_params, lcl, line):
    inv = inverter_table(ref_params, lcl, line)
    return {
        "schema_version": 1,
        "run": {"model": "averaged", "t_end_s": 0.5},
        "inverters": [inv],
        "loads": [{"R_ohm": 22.1, "L_H": 14.4e-3}],
    }


@pytest.fixture()
def two_inv_doc(base_doc):
    doc = copy.deepcopy(base_doc)
    doc["inverters"].append(copy.deepcopy(doc["inverters"][0]))
    return doc


class TestScenarioParsing:
    def test_round_trip(self, base_doc):
        scn = parse_scenario(base_doc)
        assert scn.run.model == "averaged"
        assert scn.run.dt_s == 5e-4  # averaged default
        assert len(scn.inverters) == 1
        assert scn.loads[0].branch.R == 22.1
        assert math.isinf(scn.loads[0].disconnect_s)

    def test_actual_default_step(self, base_doc):
        base_doc["run"]["model"] = "actual"
        assert parse_scenario(base_doc).run.dt_s == 5e-6

    def test_load_from_file(self, base_doc, tmp_path):
        lines = [
            "schema_version = 1",
            "[run]",
            'model = "averaged"',
            "t_end_s = 0.5",
        ]
        inv = base_doc["inverters"][0]
        lines.append("[[inverters]]")
        for key in ("sigma_S", "alpha_A_per_V3", "C_F", "k_v", "k_i",
                    "omega_star_rad_s"):
            lines.append(f"{key} = {inv[key]!r}")
        lines.append("[inverters.filter]")
        for key, val in inv["filter"].items():
            lines.append(f"{key} = {val!r}")
        lines.append("[inverters.line]")
        for key, val in inv["line"].items():
            lines.append(f"{key} = {val!r}")
        path = tmp_path / "scn.toml"
        path.write_text("\n".join(lines) + "\n")
        scn = load_scenario(path)
        assert scn.inverters[0].params.sigma == inv["sigma_S"]

    @pytest.mark.parametrize(
        "mutate,match",
        [
            (lambda d: d.update(schema_version=2), "schema_version"),
            (lambda d: d.update(extra=1), "unknown"),
            (lambda d: d["run"].update(model="exact"), "run.model"),
            (lambda d: d["run"].update(t_end_s=-1.0), "t_end_s"),
            (lambda d: d["run"].update(dt_s=2.0), "dt_s"),
            (lambda d: d["run"].update(feedback_tap="mid"), "feedback_tap"),
            (lambda d: d["run"].update(v_init_V=0.0), "v_init_V"),
            (lambda d: d["inverters"][0].pop("k_v"), "k_v"),
            (lambda d: d["inverters"][0]["filter"].pop("C_f_F"), "C_f_F"),
            (lambda d: d["inverters"].clear(), "one or two"),
            (lambda d: d["loads"][0].update(R_ohm="big"), "R_ohm"),
        ],
    )
    def test_rejects_invalid_documents(self, base_doc, mutate, match):
        mutate(base_doc)
        with pytest.raises(ScenarioError, match=match):
            parse_scenario(base_doc)

    def test_setpoints_need_two_inverters(self, base_doc):
        base_doc["setpoints"] = [{"t_start_s": 0.1, "P_W": 500.0, "Q_var": 83.0}]
        with pytest.raises(ScenarioError, match="two inverters"):
            parse_scenario(base_doc)

    def test_setpoints_strictly_increasing(self, two_inv_doc):
        two_inv_doc["setpoints"] = [
            {"t_start_s": 0.1, "P_W": 500.0, "Q_var": 83.0},
            {"t_start_s": 0.1, "P_W": 400.0, "Q_var": 83.0},
        ]
        with pytest.raises(ScenarioError, match="increasing"):
            parse_scenario(two_inv_doc)

    def test_mismatched_nominal_frequency(self, two_inv_doc):
        inv = two_inv_doc["inverters"][1]
        w2 = OMEGA_STAR * 1.01
        inv["omega_star_rad_s"] = w2
        # keep the inverter self-consistent so only the cross check fires
        inv["C_F"] = inv["C_F"] * (OMEGA_STAR / w2)
        with pytest.raises(ScenarioError, match="nominal frequency"):
            parse_scenario(two_inv_doc)


class TestIntegrate:
    def test_rk4_fourth_order_convergence(self):
        f = lambda t, y: -y  # noqa: E731
        errs = []
        for dt in (0.1, 0.05):
            y = np.array([1.0])
            t = 0.0
            while t < 1.0 - 1e-12:
                y = rk4_step(f, t, y, dt)
                t += dt
            errs.append(abs(y[0] - math.exp(-1.0)))
        assert errs[0] / errs[1] > 14.0

    def test_integrate_fixed_records(self):
        t, ys = integrate_fixed(lambda t, y: -y, 0.0, np.array([2.0]), 0.01,
                                100, record_every=10)
        assert len(t) == 11
        assert t[-1] == pytest.approx(1.0)
        assert ys[-1, 0] == pytest.approx(2.0 * math.exp(-1.0), rel=1e-8)

    def test_integrate_fixed_aborts_on_nan(self):
        def f(t, y):
            with np.errstate(over="ignore"):
                return y * y  # finite-time blow-up

        with pytest.raises(SimulationAbort):
            integrate_fixed(f, 0.0, np.array([10.0]), 0.05, 200)


class TestFourier:
    def test_amplitudes_of_synthetic_signal(self):
        w = OMEGA_STAR
        t = np.arange(0.0, 0.4, 1e-5)
        y = 3.0 * np.cos(w * t + 0.4) + 0.25 * np.cos(3 * w * t - 1.1) + 1.7
        assert harmonic_amplitude(t, y, w, 1) == pytest.approx(3.0, rel=1e-5)
        assert harmonic_amplitude(t, y, w, 3) == pytest.approx(0.25, rel=1e-4)
        assert harmonic_ratio_31(t, y, w) == pytest.approx(0.25 / 3.0, rel=1e-4)

    def test_requires_minimum_cycles(self):
        w = OMEGA_STAR
        t = np.arange(0.0, 0.05, 1e-5)  # three cycles
        with pytest.raises(ValueError):
            harmonic_amplitude(t, np.cos(w * t), w, 1)


def test_measure_rise_time_linear_ramp():
    t = np.linspace(0.0, 1.0, 1001)
    v = np.clip(2.0 * t, 0.0, 1.0)  # reaches v_ref = 1 at t = 0.5
    assert measure_rise_time(t, v, 1.0) == pytest.approx(0.4, abs=1e-6)
    with pytest.raises(ValueError):
        measure_rise_time(t, v, -1.0)


class TestAveragedRuns:
    def test_settles_to_predicted_equilibrium(self, base_doc, ref_params,
                                              constants):
        from vocsim.averaged import equilibrium_voltage
        from vocsim.phasor import solve_network

        base_doc["run"]["t_end_s"] = 2.0  # several amplitude time constants
        scn = parse_scenario(base_doc)
        rep = run(scn)
        v_end = rep.samples["V_1"][-1]
        # cross-check against the phasor fixed point of the closed loop
        inv = scn.inverters[0]
        th = rep.samples["theta_1"][-1]
        e = v_end * complex(math.cos(th), math.sin(th))
        sol = solve_network([e], [inv.filter], [inv.line],
                            [scn.loads[0].branch], OMEGA_STAR)
        eq = equilibrium_voltage(sol.p_src[0], sol.q_src[0], ref_params,
                                 constants)
        assert v_end == pytest.approx(eq.V_high, rel=1e-6)

    def test_step_halving_agreement(self, base_doc):
        scn = parse_scenario(base_doc)
        rep1 = run(scn)
        base_doc["run"]["dt_s"] = 2.5e-4
        rep2 = run(parse_scenario(base_doc))
        assert rep2.column("inv1_V_rms_V")[-1] == pytest.approx(
            rep1.column("inv1_V_rms_V")[-1], rel=1e-3
        )

    def test_load_switch_changes_equilibrium(self, base_doc):
        base_doc["run"]["t_end_s"] = 1.0
        base_doc["loads"][0]["connect_s"] = 0.5
        rep = run(parse_scenario(base_doc))
        t = rep.column("t_s")
        v = rep.column("inv1_V_rms_V")
        v_open = v[np.searchsorted(t, 0.5) - 1]
        assert v[-1] < v_open - 1.0  # loading pulls the voltage down
        assert rep.column("load_P_W")[np.searchsorted(t, 0.25)] == pytest.approx(
            0.0, abs=1e-9
        )
        assert rep.column("load_P_W")[-1] > 100.0

    def test_margin_column_two_inverters(self, two_inv_doc):
        rep = run(parse_scenario(two_inv_doc))
        margin = rep.column("margin")
        assert np.all(np.isfinite(margin))
        assert np.all(margin > 0)

    def test_margin_nan_single_inverter(self, base_doc):
        rep = run(parse_scenario(base_doc))
        assert np.all(np.isnan(rep.column("margin")))


class TestCsv:
    def test_columns(self):
        cols = csv_columns(2)
        assert cols[0] == "t_s"
        assert cols[-1] == "margin"
        assert "inv2_freq_hz" in cols
        assert len(cols) == 1 + 2 * 7 + 3

    def test_write_and_determinism(self, base_doc, tmp_path):
        scn = parse_scenario(base_doc)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run(scn), p1)
        write_csv(run(scn), p2)
        text = p1.read_text()
        assert text == p2.read_text()
        header = text.splitlines()[0].split(",")
        assert header == list(csv_columns(1))
        body = np.loadtxt(p1, delimiter=",", skiprows=1, usecols=range(8))
        assert body.shape[0] == len(run(scn).data)

    def test_trace_decimation_env_override(self, base_doc, monkeypatch):
        scn = parse_scenario(base_doc)
        n_default = len(run(scn).data)
        monkeypatch.setenv(TRACE_DECIMATION_ENV, "0.01")
        n_coarse = len(run(scn).data)
        assert n_coarse < n_default
        monkeypatch.setenv(TRACE_DECIMATION_ENV, "-1")
        with pytest.raises(ValueError):
            run(scn)


class TestActualRuns:
    def test_unloaded_startup(self, base_doc):
        base_doc["run"].update(model="actual", t_end_s=0.6)
        base_doc["loads"] = []
        rep = run(parse_scenario(base_doc))
        v_oc = 126.0
        # the polar amplitude carries a percent-level double-frequency
        # ripple, so settle on its mean over the last nominal cycle
        t = rep.samples["t"]
        tail = t >= t[-1] - 2.0 * math.pi / OMEGA_STAR
        assert np.mean(rep.samples["V_1"][tail]) == pytest.approx(v_oc, rel=5e-3)
        assert rep.rise_time() == pytest.approx(0.2, rel=0.1)
        f_end = rep.column("inv1_freq_hz")[-1]
        assert f_end == pytest.approx(60.0, abs=0.05)

    def test_loaded_two_inverter_meters(self, two_inv_doc):
        two_inv_doc["run"].update(model="actual", t_end_s=0.6)
        rep = run(parse_scenario(two_inv_doc))
        t = rep.column("t_s")
        tail = t > 0.5
        p1 = rep.column("inv1_P_W")[tail]
        p_load = rep.column("load_P_W")[tail]
        # symmetric system: the two inverters share the load evenly
        assert np.allclose(p1, rep.column("inv2_P_W")[tail], rtol=1e-2)
        assert np.all(p_load > 0)
        # load power below total injection (line losses) but comparable
        assert np.all(p_load < 2 * p1)
        assert np.all(p_load > 1.6 * p1)
        assert np.all(rep.column("margin")[tail] > 0)
        assert np.max(np.abs(rep.samples["kcl_residual"])) < 1e-6


def test_compare_models_prefers_filter_aware(two_inv_doc):
    two_inv_doc["run"].update(model="actual", t_end_s=0.6)
    res = compare_models(parse_scenario(two_inv_doc))
    assert set(res.reports) == {"actual", "averaged", "legacy"}
    assert len(res.windows) == 1
    w = res.windows[0]
    assert w.mae_averaged < w.mae_legacy
