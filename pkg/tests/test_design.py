"""Parameter design chain: reference values, analytic round trips and the
capacitance feasibility window."""

import math

import numpy as np
import pytest

from vocsim.averaged import (
    equilibrium_frequency,
    equilibrium_voltage,
    harmonic_ratio,
    rise_time,
    sigma_beta,
)
from vocsim.design import (
    AcSpec,
    capacitance_window,
    design,
    droop_curve,
    s_dmax,
    s_max,
    scaling_factors,
    sigma_alpha,
)
from vocsim.errors import InfeasibleDesignError
from vocsim.oscillator import VocParams

from conftest import (
    ALPHA_REF,
    C_REF,
    K_I_REF,
    K_V_REF,
    OMEGA_STAR,
    S_MAX_REF,
    SIGMA_REF,
)


def test_reference_design_chain(ac_spec, lcl, constants):
    """Frozen full-precision outputs of the complete pipeline."""
    report = design(ac_spec, lcl)
    assert report.feasible
    p = report.require_params()
    assert report.S_max == pytest.approx(S_MAX_REF, rel=1e-12)
    assert p.k_v == 126.0
    assert p.k_i == pytest.approx(K_I_REF, rel=1e-12)
    assert p.sigma == pytest.approx(SIGMA_REF, rel=1e-12)
    assert p.alpha == pytest.approx(ALPHA_REF, rel=1e-12)
    assert p.C == pytest.approx(C_REF, rel=1e-12)
    assert p.L == pytest.approx(1.0 / (C_REF * OMEGA_STAR**2), rel=1e-12)
    # frozen capacitance window bounds
    assert report.window.C_min_freq == pytest.approx(0.1813177271150501, rel=1e-10)
    assert report.window.C_min_harm == pytest.approx(0.20201286309015173, rel=1e-10)
    assert report.window.C_max_rise == pytest.approx(0.2030921052631579, rel=1e-10)


def test_rated_point_loading_constants(ac_spec, constants):
    assert s_max(ac_spec, constants) == pytest.approx(
        constants.C_alpha * ac_spec.P_rated, rel=1e-14
    )
    assert s_dmax(ac_spec, constants) == pytest.approx(
        constants.C_alpha * ac_spec.Q_rated, rel=1e-14
    )


def test_disc_mode_is_more_conservative(ac_spec, constants):
    """The disc maximizer covers the whole rated circle, so it can only ask
    for at least as much as the rated-point evaluation."""
    assert s_max(ac_spec, constants, "disc") >= s_max(ac_spec, constants)
    assert s_dmax(ac_spec, constants, "disc") >= s_dmax(ac_spec, constants)
    assert s_max(ac_spec, constants, "disc") == pytest.approx(
        ac_spec.s_rated * math.hypot(constants.C_alpha, constants.S_alpha),
        rel=1e-14,
    )


def test_scaling_factors(ac_spec):
    k_v, k_i = scaling_factors(ac_spec, S_MAX_REF)
    assert k_v == ac_spec.V_oc
    assert k_i == pytest.approx(ac_spec.V_min / S_MAX_REF, rel=1e-14)


def test_voltage_round_trip_at_rated(ac_spec, lcl, constants):
    """V_eq at the worst-case voltage loading equals V_min exactly.

    This is the defining property of the conductance selection.
    """
    report = design(ac_spec, lcl)
    p = report.require_params()
    # loading with C_a*P + S_a*Q = S_max, split arbitrarily
    p_bar = report.S_max / constants.C_alpha
    eq = equilibrium_voltage(p_bar, 0.0, p, constants)
    assert eq.V_high == pytest.approx(ac_spec.V_min, rel=1e-9)
    # and the unloaded high root equals V_oc
    eq0 = equilibrium_voltage(0.0, 0.0, p, constants)
    assert eq0.V_high == pytest.approx(ac_spec.V_oc, rel=1e-9)


def test_alpha_ties_open_circuit_voltage(ac_spec, lcl, constants):
    report = design(ac_spec, lcl)
    p = report.require_params()
    sb = sigma_beta(p, constants)
    assert p.alpha == pytest.approx(2.0 * sb / 3.0, rel=1e-12)


def test_rise_time_bound_active_at_c_max(ac_spec, lcl, constants):
    """c_rule = max puts the predicted rise time exactly at the limit."""
    report = design(ac_spec, lcl, c_rule="max")
    p = report.require_params()
    assert rise_time(p, constants) == pytest.approx(ac_spec.t_rise_max, rel=1e-9)


def test_frequency_bound_active_at_c_min_freq(ac_spec, lcl, constants):
    """Choosing C at the frequency-offset bound makes the worst-case
    frequency deviation hit the limit exactly."""
    report = design(ac_spec, lcl)
    c = report.window.C_min_freq
    p = VocParams.from_oscillator_c(
        SIGMA_REF, ALPHA_REF, c, K_V_REF, K_I_REF, OMEGA_STAR
    )
    # worst case: reactive loading with C_a*Q = S_dmax at V = V_min
    q_bar = report.S_dmax / constants.C_alpha
    w = equilibrium_frequency(0.0, q_bar, ac_spec.V_min, p, constants)
    assert abs(w - OMEGA_STAR) == pytest.approx(ac_spec.d_omega_max, rel=1e-9)


def test_harmonic_bound_active_at_c_min_harm(ac_spec, lcl):
    report = design(ac_spec, lcl)
    c = report.window.C_min_harm
    p = VocParams.from_oscillator_c(
        SIGMA_REF, ALPHA_REF, c, K_V_REF, K_I_REF, OMEGA_STAR
    )
    assert harmonic_ratio(p) == pytest.approx(ac_spec.delta31_max, rel=1e-9)


def test_infeasible_window(ac_spec, lcl):
    """A tight harmonic limit empties the window and names the binding bound."""
    tight = AcSpec(
        V_oc=ac_spec.V_oc, V_min=ac_spec.V_min, P_rated=ac_spec.P_rated,
        Q_rated=ac_spec.Q_rated, omega_star=ac_spec.omega_star,
        d_omega_max=ac_spec.d_omega_max, t_rise_max=ac_spec.t_rise_max,
        delta31_max=0.002,
    )
    report = design(tight, lcl)
    assert not report.feasible
    assert report.params is None
    assert "harmonic_ratio" in report.window.binding_constraints()
    with pytest.raises(InfeasibleDesignError) as exc_info:
        report.require_params()
    assert "harmonic_ratio" in exc_info.value.binding


def test_c_rules(ac_spec, lcl):
    w = design(ac_spec, lcl).window
    assert w.choose("max") == w.C_max_rise
    assert w.choose("min") == w.lower
    assert w.choose("midpoint") == pytest.approx(
        0.5 * (w.lower + w.C_max_rise), rel=1e-14
    )
    with pytest.raises(ValueError):
        w.choose("median")


def test_window_requires_positive_inputs(ac_spec, constants):
    with pytest.raises(ValueError):
        scaling_factors(ac_spec, 0.0)
    with pytest.raises(ValueError):
        AcSpec(126.0, 130.0, 750.0, 750.0, OMEGA_STAR, 3.14, 0.2, 0.01)


def test_droop_curve_structure(ref_params, constants):
    rows = droop_curve(ref_params, constants, "P", fixed_value=100.0, n_points=40)
    assert rows.shape == (40,)
    assert rows["value"][0] == 0.0
    assert np.all(rows["exists"])
    assert np.all(np.diff(rows["V_eq"]) < 0)
    over = droop_curve(
        ref_params, constants, "P", n_points=10,
        s_max_limit=1.05 * equilibrium_voltage(0, 0, ref_params, constants).S_cr,
    )
    assert not over["exists"][-1]
    assert math.isnan(over["V_eq"][-1])
    with pytest.raises(ValueError):
        droop_curve(ref_params, constants, "S")
