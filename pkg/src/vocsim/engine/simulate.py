"""Scenario execution: segmenting by events, driving the fixed-step kernels,
deriving measurement traces and writing the result table.

Three model variants share one scenario format.  ``actual`` integrates the
full electromagnetic network with the unaveraged oscillators; ``averaged``
closes the filter-aware slow model through a quasi-static phasor network;
``legacy`` is the same loop with the filter constants replaced by the
pre-filter-feedback values.  Event times (load switching, set-point changes)
are snapped to the integration step grid.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .. import dispatch as dispatch_mod
from .. import kernels
from ..errors import SimulationAbort
from ..oscillator import PowerMeter
from ..phasor import impedance_constants, terminal_admittance_reduction
from .scenario import Scenario

__all__ = [
    "RunReport",
    "ComparisonWindow",
    "ComparisonResult",
    "run",
    "compare_models",
    "write_csv",
    "csv_columns",
    "measure_rise_time",
    "TRACE_DECIMATION_ENV",
]

TRACE_DECIMATION_ENV = "VOC_TRACE_DECIMATION_S"
METER_SAMPLE_S = 5e-5  # sampling cadence fed to the power meters (actual mode)


def csv_columns(n_inv: int) -> tuple[str, ...]:
    cols = ["t_s"]
    for i in range(n_inv):
        p = f"inv{i + 1}_"
        cols += [p + "V_rms_V", p + "theta_rad", p + "freq_hz",
                 p + "P_W", p + "Q_var", p + "kv", p + "ki"]
    cols += ["load_P_W", "load_Q_var", "margin"]
    return tuple(cols)


@dataclass(frozen=True)
class RunReport:
    """One finished run: the decimated result table plus fine sample traces.

    ``data`` holds the table in ``columns`` order.  ``samples`` keeps the
    raw kernel-cadence traces the table was derived from (keys like ``t``,
    ``V_1``, ``v_term_1``), which the measurement helpers use.
    """

    scenario: Scenario
    model: str
    columns: tuple[str, ...]
    data: np.ndarray
    samples: dict

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def rise_time(self, inverter: int = 0, v_ref: float | None = None) -> float:
        """Measured 10 to 90 percent voltage build-up time of one inverter."""
        t = self.samples["t"]
        v = self.samples[f"V_{inverter + 1}"]
        if v_ref is None:
            v_ref = float(v[-1])
        return measure_rise_time(t, v, v_ref)

    def harmonic_ratio_31(self, inverter: int = 0, min_cycles: int = 10) -> float:
        """Third-to-first harmonic ratio of the terminal voltage tail.

        Only meaningful for the ``actual`` model, whose traces contain the
        instantaneous waveform.
        """
        from .fourier import harmonic_ratio_31

        if self.model != "actual":
            raise ValueError("harmonic content requires the actual model")
        t = self.samples["t"]
        v = self.samples[f"v_term_{inverter + 1}"]
        w = self.scenario.inverters[inverter].params.omega_star
        return harmonic_ratio_31(t, v, w, min_cycles)


def measure_rise_time(t, v, v_ref: float) -> float:
    """Time between the first 0.1*v_ref and 0.9*v_ref upward crossings."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if v_ref <= 0:
        raise ValueError("v_ref must be positive")
    times = []
    for level in (0.1 * v_ref, 0.9 * v_ref):
        idx = np.nonzero(v >= level)[0]
        if len(idx) == 0 or idx[0] == 0 and v[0] > level:
            raise ValueError(f"trace never crosses {level} from below")
        k = idx[0]
        if k == 0:
            times.append(t[0])
        else:
            frac = (level - v[k - 1]) / (v[k] - v[k - 1])
            times.append(t[k - 1] + frac * (t[k] - t[k - 1]))
    return times[1] - times[0]


def _trace_decimation(scn: Scenario) -> float:
    env = os.environ.get(TRACE_DECIMATION_ENV, "").strip()
    if env:
        val = float(env)
        if val <= 0:
            raise ValueError(f"{TRACE_DECIMATION_ENV} must be positive")
        return max(val, scn.run.dt_s)
    return scn.run.trace_decimation_s


def _step_boundaries(scn: Scenario, dt: float, n_total: int):
    """Map event times to step indices; returns sorted unique boundaries."""
    marks = {0, n_total}
    for ld in scn.loads:
        for tev in (ld.connect_s, ld.disconnect_s):
            if not math.isfinite(tev):
                continue
            k = int(round(tev / dt))
            if 0 < k < n_total:
                marks.add(k)
    for sp in scn.setpoints:
        k = int(round(sp.t_start_s / dt))
        if 0 <= k < n_total:
            marks.add(k)
    return sorted(marks)


def _snap(t: float, dt: float):
    """Event time as a step index, or None for non-finite times."""
    return int(round(t / dt)) if math.isfinite(t) else None


def _osc_array(scn: Scenario) -> np.ndarray:
    out = np.zeros((len(scn.inverters), 6))
    for i, inv in enumerate(scn.inverters):
        p = inv.params
        out[i] = (p.sigma, p.alpha, p.k_v, p.k_i, p.epsilon * p.omega_star, p.C)
    return out


def _active_setpoint(scn: Scenario, t: float):
    active = None
    for sp in scn.setpoints:
        if t >= sp.t_start_s - 1e-12:
            active = sp
    return active


def run(scenario: Scenario) -> RunReport:
    """Execute a scenario and build its report."""
    if scenario.run.model == "actual":
        return _run_actual(scenario)
    return _run_averaged(scenario)


# ---------------------------------------------------------------- averaged --


def _run_averaged(scn: Scenario) -> RunReport:
    rs = scn.run
    n = len(scn.inverters)
    dt = rs.dt_s
    dec = _trace_decimation(scn)
    n_total = int(round(rs.t_end_s / dt))
    rec_every = max(1, int(round(dec / dt)))
    w_star = scn.inverters[0].params.omega_star

    filters = [inv.filter for inv in scn.inverters]
    lines = [inv.line for inv in scn.inverters]
    if rs.model == "legacy":
        consts = np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (n, 1))
    else:
        consts = np.array(
            [
                [k.C_alpha, k.S_alpha, k.C_beta, k.S_beta]
                for k in (impedance_constants(f, w_star) for f in filters)
            ]
        )

    osc = _osc_array(scn)
    kv_des, ki_des = osc[0, 2], osc[0, 3]
    pi = scn.pi
    pi_gains = np.array([
        pi.Kp_p, pi.Ki_p, pi.Kp_q, pi.Ki_q,
        dispatch_mod.CLAMP_LO * kv_des, dispatch_mod.CLAMP_HI * kv_des,
        dispatch_mod.CLAMP_LO * ki_des, dispatch_mod.CLAMP_HI * ki_des,
    ])
    pi_state = np.array([kv_des, ki_des])
    setpoint = np.zeros(2)

    y = np.zeros(2 * n)
    for i in range(n):
        y[2 * i] = rs.v_init_V
    conn = np.array([ld.connect_s <= 0.0 for ld in scn.loads], dtype=bool)

    recs = []
    for k_lo, k_hi in zip(
        _step_boundaries(scn, dt, n_total)[:-1], _step_boundaries(scn, dt, n_total)[1:]
    ):
        t_lo = k_lo * dt
        for b, ld in enumerate(scn.loads):
            if _snap(ld.connect_s, dt) == k_lo and k_lo > 0:
                conn[b] = True
            if _snap(ld.disconnect_s, dt) == k_lo:
                conn[b] = False
        sp = _active_setpoint(scn, t_lo)
        pi_on = 1 if sp is not None else 0
        if sp is not None:
            setpoint[0], setpoint[1] = sp.P_W, sp.Q_var

        loads = [ld.branch for ld, c in zip(scn.loads, conn) if c]
        m_f, m_g, m_pcc = terminal_admittance_reduction(filters, lines, loads, w_star)
        rec, status = kernels.averaged_segment(
            y, k_hi - k_lo, dt, t_lo, osc, w_star, consts,
            m_f, m_g, m_pcc, pi_on, pi_gains, setpoint, pi_state, rec_every,
        )
        if status != 0:
            t_bad = rec[-1, 0] if len(rec) else t_lo
            raise SimulationAbort(
                f"averaged state became invalid near t={t_bad}", t=t_bad
            )
        recs.append(rec if not recs else rec[1:])
    rec = np.vstack(recs)

    samples = {"t": rec[:, 0]}
    for i in range(n):
        samples[f"V_{i + 1}"] = rec[:, 1 + 5 * i]
        samples[f"theta_{i + 1}"] = rec[:, 2 + 5 * i]
        samples[f"dtheta_{i + 1}"] = rec[:, 3 + 5 * i]
        samples[f"P_{i + 1}"] = rec[:, 4 + 5 * i]
        samples[f"Q_{i + 1}"] = rec[:, 5 + 5 * i]
    samples["kv_1"] = rec[:, 1 + 5 * n]
    samples["ki_1"] = rec[:, 2 + 5 * n]
    samples["load_P"] = rec[:, 3 + 5 * n]
    samples["load_Q"] = rec[:, 4 + 5 * n]

    t_dec = rec[:, 0]
    cols = csv_columns(n)
    data = np.full((len(t_dec), len(cols)), np.nan)
    data[:, 0] = t_dec
    for i in range(n):
        base = 1 + 7 * i
        data[:, base] = samples[f"V_{i + 1}"]
        data[:, base + 1] = samples[f"theta_{i + 1}"]
        data[:, base + 2] = (w_star + samples[f"dtheta_{i + 1}"]) / (2.0 * math.pi)
        data[:, base + 3] = samples[f"P_{i + 1}"]
        data[:, base + 4] = samples[f"Q_{i + 1}"]
        if i == 0:
            data[:, base + 5] = samples["kv_1"]
            data[:, base + 6] = samples["ki_1"]
        else:
            data[:, base + 5] = osc[i, 2]
            data[:, base + 6] = osc[i, 3]
    data[:, 1 + 7 * n] = samples["load_P"]
    data[:, 2 + 7 * n] = samples["load_Q"]
    data[:, 3 + 7 * n] = _margin_column(scn, data, n)
    return RunReport(scn, rs.model, cols, data, samples)


# ------------------------------------------------------------------ actual --


def _run_actual(scn: Scenario) -> RunReport:
    rs = scn.run
    n = len(scn.inverters)
    dt = rs.dt_s
    dec = _trace_decimation(scn)
    n_total = int(round(rs.t_end_s / dt))
    sample_s = min(dec, METER_SAMPLE_S)
    rec_every = max(1, int(round(sample_s / dt)))
    w_star = scn.inverters[0].params.omega_star
    tau = 10.0 * dt
    tap = 1 if rs.feedback_tap == "pre_filter" else 0

    osc = _osc_array(scn)
    kv_des, ki_des = osc[0, 2], osc[0, 3]
    filt = np.zeros((n, 6))
    for i, inv in enumerate(scn.inverters):
        f, ln = inv.filter, inv.line
        filt[i] = (f.R_f, f.L_f, f.R_c, f.C_f, f.R_g + ln.R, f.L_g + ln.L)
    n_br = len(scn.loads)
    br = np.zeros((max(n_br, 1), 2))
    for b, ld in enumerate(scn.loads):
        br[b] = (ld.branch.R, ld.branch.L)
    br = br[:n_br] if n_br else np.zeros((0, 2))

    y = np.zeros(5 * n + n_br)
    for i in range(n):
        y[5 * i] = rs.v_init_V
    conn = np.array([ld.connect_s <= 0.0 for ld in scn.loads], dtype=bool)
    pending = np.zeros(n_br, dtype=bool)

    gains = dispatch_mod.PiGains(
        scn.pi.Kp_p, scn.pi.Ki_p, scn.pi.Kp_q, scn.pi.Ki_q,
        dispatch_mod.CLAMP_LO * kv_des, dispatch_mod.CLAMP_HI * kv_des,
        dispatch_mod.CLAMP_LO * ki_des, dispatch_mod.CLAMP_HI * ki_des,
    )
    pi_state = dispatch_mod.PiState(kv_des, ki_des)
    control_every = max(1, int(round(rs.control_dt_s / dt)))
    pi_meter = PowerMeter(w_star)
    control_events = [(0.0, kv_des, ki_des)]

    boundaries = _step_boundaries(scn, dt, n_total)
    recs = []
    for k_lo, k_hi in zip(boundaries[:-1], boundaries[1:]):
        t_lo = k_lo * dt
        for b, ld in enumerate(scn.loads):
            if _snap(ld.connect_s, dt) == k_lo and k_lo > 0 and not conn[b]:
                conn[b] = True
                y[5 * n + b] = 0.0
            if _snap(ld.disconnect_s, dt) == k_lo and conn[b]:
                pending[b] = True
        sp = _active_setpoint(scn, t_lo)

        k = k_lo
        while k < k_hi:
            k_next = min(k_hi, k + control_every) if sp is not None else k_hi
            rec, status = kernels.emt_voc_segment(
                y, k_next - k, dt, k * dt, osc, w_star, filt, br, conn, pending,
                tap, rec_every, tau,
            )
            if status != 0:
                t_bad = rec[-1, 0] if len(rec) else k * dt
                raise SimulationAbort(
                    f"non-finite electrical state near t={t_bad}", t=t_bad
                )
            chunk = rec if not recs else rec[1:]
            recs.append(chunk)
            # keep the PI meter history warm so the first active read works
            if len(chunk):
                pi_meter.extend(chunk[:, 0], chunk[:, 3], chunk[:, 5])
            if sp is not None:
                reading = pi_meter.read(float(rec[-1, 0]))
                if reading is not None:
                    k_v, k_i, pi_state = dispatch_mod.pi_step(
                        pi_state, gains, reading[0], reading[1],
                        dispatch_mod.Setpoint(sp.P_W, sp.Q_var),
                        (k_next - k) * dt,
                    )
                    osc[0, 2], osc[0, 3] = k_v, k_i
                    control_events.append((k_next * dt, k_v, k_i))
            k = k_next
    rec = np.vstack(recs)

    samples = {"t": rec[:, 0], "v_pcc": rec[:, 1 + 5 * n],
               "kcl_residual": rec[:, 2 + 5 * n]}
    for i in range(n):
        samples[f"V_{i + 1}"] = rec[:, 1 + 5 * i]
        samples[f"phi_{i + 1}"] = rec[:, 2 + 5 * i]
        samples[f"v_term_{i + 1}"] = rec[:, 3 + 5 * i]
        samples[f"i_f_{i + 1}"] = rec[:, 4 + 5 * i]
        samples[f"i_g_{i + 1}"] = rec[:, 5 + 5 * i]

    t_s = rec[:, 0]
    n_rows = int(math.floor(rs.t_end_s / dec + 1e-9)) + 1
    t_dec = np.minimum(np.arange(n_rows) * dec, t_s[-1])

    cols = csv_columns(n)
    data = np.full((n_rows, len(cols)), np.nan)
    data[:, 0] = t_dec
    period0 = 2.0 * math.pi / w_star
    ctrl = np.array(control_events)
    for i in range(n):
        base = 1 + 7 * i
        data[:, base] = np.interp(t_dec, t_s, samples[f"V_{i + 1}"])
        phi = samples[f"phi_{i + 1}"]
        data[:, base + 1] = np.interp(t_dec, t_s, phi - w_star * t_s)
        freq = np.full(n_rows, np.nan)
        late = t_dec >= t_s[0] + period0
        freq[late] = (
            np.interp(t_dec[late], t_s, phi)
            - np.interp(t_dec[late] - period0, t_s, phi)
        ) / (2.0 * math.pi * period0)
        data[:, base + 2] = freq
        pq = _meter_trace(
            t_s, samples[f"v_term_{i + 1}"], samples[f"i_g_{i + 1}"], t_dec, w_star
        )
        data[:, base + 3] = pq[:, 0]
        data[:, base + 4] = pq[:, 1]
        if i == 0:
            idx = np.minimum(
                np.searchsorted(ctrl[:, 0], t_dec + 1e-12) - 1, len(ctrl) - 1
            )
            idx = np.maximum(idx, 0)
            data[:, base + 5] = ctrl[idx, 1]
            data[:, base + 6] = ctrl[idx, 2]
        else:
            data[:, base + 5] = osc[i, 2]
            data[:, base + 6] = osc[i, 3]
    i_load = sum(samples[f"i_g_{i + 1}"] for i in range(n)) - samples["kcl_residual"]
    pq_load = _meter_trace(t_s, samples["v_pcc"], i_load, t_dec, w_star)
    data[:, 1 + 7 * n] = pq_load[:, 0]
    data[:, 2 + 7 * n] = pq_load[:, 1]
    data[:, 3 + 7 * n] = _margin_column(scn, data, n)
    return RunReport(scn, rs.model, cols, data, samples)


def _meter_trace(t_s, v_s, i_s, t_query, omega_star) -> np.ndarray:
    """Power-meter (P, Q) at each query time, feeding samples chronologically."""
    meter = PowerMeter(omega_star)
    out = np.full((len(t_query), 2), np.nan)
    j = 0
    n_s = len(t_s)
    for row, tq in enumerate(t_query):
        while j < n_s and t_s[j] <= tq + 1e-12:
            meter.append(float(t_s[j]), float(v_s[j]), float(i_s[j]))
            j += 1
        reading = meter.read(float(tq))
        if reading is not None:
            out[row] = reading
    return out


def _margin_column(scn: Scenario, data: np.ndarray, n: int) -> np.ndarray:
    """Running security margin of inverter 1 (two-inverter runs only).

    Evaluated with the instantaneous gain product mu = kv1*ki1 and the
    measured terminal powers; NaN where the power trace is not ready or for
    single-inverter runs.
    """
    if n != 2:
        return np.full(len(data), np.nan)
    p1 = scn.inverters[0].params
    k1 = impedance_constants(scn.inverters[0].filter, p1.omega_star)
    v1 = data[:, 1]
    p_m = data[:, 4]
    q_m = data[:, 5]
    mu = data[:, 6] * data[:, 7]
    return p1.sigma * v1**2 - mu * (
        k1.C_alpha * p_m + k1.S_alpha * q_m + k1.C_beta * v1**2
    )


# ----------------------------------------------------------------- compare --


@dataclass(frozen=True)
class ComparisonWindow:
    t_lo: float
    t_hi: float
    mae_averaged: float
    mae_legacy: float


@dataclass(frozen=True)
class ComparisonResult:
    reports: dict
    windows: tuple[ComparisonWindow, ...]


def compare_models(scenario: Scenario, inverter: int = 0) -> ComparisonResult:
    """Run all three model variants and score them against the actual one.

    For every interval between scenario events, the second half (where the
    switching transient has settled) scores each averaged variant by the mean
    absolute deviation of inverter voltage magnitude from the actual run.
    """
    from dataclasses import replace

    reports = {}
    for model in ("actual", "averaged", "legacy"):
        scn = replace(scenario, run=replace(scenario.run, model=model))
        reports[model] = run(scn)

    act = reports["actual"]
    t_act = act.samples["t"]
    v_act = act.samples[f"V_{inverter + 1}"]

    dt = scenario.run.dt_s
    n_total = int(round(scenario.run.t_end_s / dt))
    marks = [k * dt for k in _step_boundaries(scenario, dt, n_total)]
    windows = []
    for lo, hi in zip(marks[:-1], marks[1:]):
        w_lo = 0.5 * (lo + hi)
        m = (t_act >= w_lo) & (t_act <= hi)
        if m.sum() < 8:
            continue
        maes = {}
        for model in ("averaged", "legacy"):
            rep = reports[model]
            v_m = np.interp(
                t_act[m], rep.samples["t"], rep.samples[f"V_{inverter + 1}"]
            )
            maes[model] = float(np.mean(np.abs(v_act[m] - v_m)))
        windows.append(
            ComparisonWindow(w_lo, hi, maes["averaged"], maes["legacy"])
        )
    return ComparisonResult(reports, tuple(windows))


# --------------------------------------------------------------------- csv --


def write_csv(report: RunReport, path) -> None:
    """Write the decimated result table; fixed column order, 12 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(report.columns) + "\n")
        for row in report.data:
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")
