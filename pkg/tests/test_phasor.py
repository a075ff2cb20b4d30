"""Phasor network solver against independent mesh analysis, plus the
impedance-constant arithmetic."""

import cmath
import math

import numpy as np
import pytest

from vocsim.phasor import (
    ImpedanceConstants,
    LclFilter,
    SeriesRlBranch,
    impedance_constants,
    solve_network,
    terminal_admittance_reduction,
    terminal_power,
)

from conftest import (
    C_ALPHA_REF,
    C_BETA_REF,
    OMEGA_STAR,
    S_ALPHA_REF,
    S_BETA_REF,
)


def test_impedance_constants_reference_values(lcl):
    k = impedance_constants(lcl, OMEGA_STAR)
    assert k.C_alpha == pytest.approx(C_ALPHA_REF, rel=1e-12)
    assert k.S_alpha == pytest.approx(S_ALPHA_REF, rel=1e-12)
    assert k.C_beta == pytest.approx(C_BETA_REF, rel=1e-12)
    assert k.S_beta == pytest.approx(S_BETA_REF, rel=1e-12)


def test_impedance_constants_definition(lcl):
    # rectangular parts of (z_c + z_f)/z_c and -1/z_c, assembled by hand
    zf = lcl.R_f + 1j * OMEGA_STAR * lcl.L_f
    zc = lcl.R_c + 1.0 / (1j * OMEGA_STAR * lcl.C_f)
    k = impedance_constants(lcl, OMEGA_STAR)
    za = (zc + zf) / zc
    zb = -1.0 / zc
    assert abs(k.z_alpha - za) < 1e-14 * abs(za)
    assert abs(k.z_beta - zb) < 1e-14 * abs(zb)


def test_polar_rectangular_round_trip():
    k = ImpedanceConstants(2.0, 0.3, 0.5, -1.2)
    k2 = ImpedanceConstants.from_rectangular(k.z_alpha, k.z_beta)
    assert k2.C_alpha == pytest.approx(k.C_alpha, abs=1e-15)
    assert k2.S_beta == pytest.approx(k.S_beta, abs=1e-15)


def test_terminal_power_known_values():
    # V = 100 at 0 deg, I = 2 at -30 deg: S = 200 * exp(+j30deg)
    v = 100.0 + 0j
    i = cmath.rect(2.0, -math.pi / 6)
    p, q = terminal_power(v, i)
    assert p == pytest.approx(200.0 * math.cos(math.pi / 6), rel=1e-12)
    assert q == pytest.approx(200.0 * math.sin(math.pi / 6), rel=1e-12)


def _mesh_single(e, lcl, line, load, omega):
    """Independent mesh analysis of one inverter + one load branch."""
    zf = lcl.R_f + 1j * omega * lcl.L_f
    zc = lcl.R_c + 1.0 / (1j * omega * lcl.C_f)
    zgl = lcl.R_g + 1j * omega * lcl.L_g + line.R + 1j * omega * line.L
    zb = load.R + 1j * omega * load.L
    a = np.array([[zf + zc, -zc], [-zc, zc + zgl + zb]], dtype=complex)
    i1, i2 = np.linalg.solve(a, np.array([e, 0.0], dtype=complex))
    return {
        "i_f": i1,
        "i_g": i2,
        "v_o": e - i1 * zf,
        "v_pcc": i2 * zb,
    }


def test_single_inverter_vs_mesh_analysis(lcl, line, load_branch):
    e = cmath.rect(123.0, 0.21)
    sol = solve_network([e], [lcl], [line], [load_branch], OMEGA_STAR)
    ref = _mesh_single(e, lcl, line, load_branch, OMEGA_STAR)
    for key in ("i_f", "i_g", "v_o", "v_pcc"):
        got = getattr(sol, key)
        got = got[0] if isinstance(got, tuple) else got
        assert abs(got - ref[key]) < 1e-9 * max(1.0, abs(ref[key])), key
    assert sol.kcl_pcc_residual() < 1e-9


def _mesh_two(e1, e2, lcl, line, load, omega):
    """Three-mesh analysis of the symmetric two-inverter network."""
    zf = lcl.R_f + 1j * omega * lcl.L_f
    zc = lcl.R_c + 1.0 / (1j * omega * lcl.C_f)
    zgl = lcl.R_g + 1j * omega * lcl.L_g + line.R + 1j * omega * line.L
    zb = load.R + 1j * omega * load.L
    # four clockwise meshes along the chain
    # E1 | zf, zc | zc, zgl, zb | zb, zgl, zc | zc, zf | E2
    a = np.array(
        [
            [zf + zc, -zc, 0.0, 0.0],
            [-zc, zc + zgl + zb, -zb, 0.0],
            [0.0, -zb, zb + zgl + zc, -zc],
            [0.0, 0.0, -zc, zc + zf],
        ],
        dtype=complex,
    )
    rhs = np.array([e1, 0.0, 0.0, -e2], dtype=complex)
    m1, m2, m3, m4 = np.linalg.solve(a, rhs)
    return {
        "i_f": (m1, -m4),
        "i_g": (m2, -m3),
        "i_load": m2 - m3,
        "v_pcc": (m2 - m3) * zb,
    }


def test_two_inverter_vs_mesh_analysis(lcl, line, load_branch):
    e1 = cmath.rect(121.0, 0.05)
    e2 = cmath.rect(119.0, -0.02)
    sol = solve_network(
        [e1, e2], [lcl, lcl], [line, line], [load_branch], OMEGA_STAR
    )
    ref = _mesh_two(e1, e2, lcl, line, load_branch, OMEGA_STAR)
    for i in range(2):
        assert abs(sol.i_f[i] - ref["i_f"][i]) < 1e-9
        assert abs(sol.i_g[i] - ref["i_g"][i]) < 1e-9
    assert abs(sol.v_pcc - ref["v_pcc"]) < 1e-9
    assert abs(sum(sol.branch_currents) - ref["i_load"]) < 1e-9
    assert sol.kcl_pcc_residual() < 1e-9


def test_open_pcc_gives_zero_feedback(lcl, line):
    sol = solve_network([126.0 + 0j], [lcl], [line], [], OMEGA_STAR)
    assert sol.i_g == (0j,)
    # the filter shunt still draws current from the source
    assert abs(sol.i_f[0]) > 0.1
    zf = lcl.z_f(OMEGA_STAR)
    zc = lcl.z_c(OMEGA_STAR)
    assert abs(sol.v_o[0] - 126.0 * zc / (zf + zc)) < 1e-12 * 126.0


def test_powers_match_current_definitions(lcl, line, load_branch):
    e = cmath.rect(120.0, 0.1)
    sol = solve_network([e], [lcl], [line], [load_branch], OMEGA_STAR)
    p_g, q_g = terminal_power(e, sol.i_g[0])
    p_f, q_f = terminal_power(e, sol.i_f[0])
    assert sol.p[0] == pytest.approx(p_g, rel=1e-14)
    assert sol.q[0] == pytest.approx(q_g, rel=1e-14)
    assert sol.p_src[0] == pytest.approx(p_f, rel=1e-14)
    assert sol.q_src[0] == pytest.approx(q_f, rel=1e-14)


def test_admittance_reduction_matches_solver(lcl, line, load_branch):
    filters, lines = [lcl, lcl], [line, line]
    loads = [load_branch]
    m_f, m_g, m_pcc = terminal_admittance_reduction(
        filters, lines, loads, OMEGA_STAR
    )
    e = np.array([cmath.rect(124.0, 0.3), cmath.rect(118.0, -0.1)])
    sol = solve_network(list(e), filters, lines, loads, OMEGA_STAR)
    assert np.allclose(m_f @ e, sol.i_f, rtol=1e-12, atol=1e-12)
    assert np.allclose(m_g @ e, sol.i_g, rtol=1e-12, atol=1e-12)
    assert abs(m_pcc @ e - sol.v_pcc) < 1e-10


def test_input_validation(lcl, line, load_branch):
    with pytest.raises(ValueError):
        solve_network([1.0, 1.0, 1.0], [lcl] * 3, [line] * 3, [load_branch], OMEGA_STAR)
    with pytest.raises(ValueError):
        solve_network([1.0], [lcl, lcl], [line], [load_branch], OMEGA_STAR)
    with pytest.raises(ValueError):
        LclFilter(0.1, -1.0, 3.3, 4.7e-6, 0.1, 1e-3)
    with pytest.raises(ValueError):
        SeriesRlBranch(-0.1, 1e-3)
    with pytest.raises(ValueError):
        impedance_constants(lcl, 0.0)
