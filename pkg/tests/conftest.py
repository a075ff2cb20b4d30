"""Shared fixtures: the reference single-phase system used across the suite.

Numbers named ``*_REF`` are frozen outputs of the design chain, computed once
and pinned so regressions show up as value drift rather than silent
recalibration.
"""

import math

import pytest

from vocsim.design import AcSpec
from vocsim.oscillator import VocParams
from vocsim.phasor import LclFilter, SeriesRlBranch, impedance_constants

OMEGA_STAR = 2.0 * math.pi * 60.0

# frozen design-chain outputs for the reference spec + filter
SIGMA_REF = 6.092564415500749
ALPHA_REF = 4.061842105263158
C_REF = 0.2030921052631579
K_V_REF = 126.0
K_I_REF = 0.15225197198065335
S_MAX_REF = 748.7587747926574
EPSILON_REF = 0.01306098226431708

# frozen impedance constants of the reference filter at 60 Hz
C_ALPHA_REF = 0.9983450330568765
S_ALPHA_REF = 2.7545554907432336e-4
C_BETA_REF = -1.0359935353808513e-5
S_BETA_REF = -1.7717976807125604e-3


@pytest.fixture(scope="session")
def ac_spec():
    return AcSpec(
        V_oc=126.0,
        V_min=114.0,
        P_rated=750.0,
        Q_rated=750.0,
        omega_star=OMEGA_STAR,
        d_omega_max=2.0 * math.pi * 0.5,
        t_rise_max=0.2,
        delta31_max=0.01,
    )


@pytest.fixture(scope="session")
def lcl():
    return LclFilter(
        R_f=0.15, L_f=2.48e-3, R_c=3.3, C_f=4.7e-6, R_g=0.13, L_g=0.97e-3
    )


@pytest.fixture(scope="session")
def line():
    return SeriesRlBranch(0.15, 2.48e-3, label="line")


@pytest.fixture(scope="session")
def load_branch():
    return SeriesRlBranch(22.1, 14.4e-3, label="load")


@pytest.fixture(scope="session")
def constants(lcl):
    return impedance_constants(lcl, OMEGA_STAR)


@pytest.fixture(scope="session")
def ref_params():
    return VocParams.from_oscillator_c(
        SIGMA_REF, ALPHA_REF, C_REF, K_V_REF, K_I_REF, OMEGA_STAR
    )


def inverter_table(params: VocParams, lcl: LclFilter, line: SeriesRlBranch) -> dict:
    """Scenario-file inverter table for the given components."""
    return {
        "sigma_S": params.sigma,
        "alpha_A_per_V3": params.alpha,
        "C_F": params.C,
        "k_v": params.k_v,
        "k_i": params.k_i,
        "omega_star_rad_s": params.omega_star,
        "filter": {
            "R_f_ohm": lcl.R_f, "L_f_H": lcl.L_f, "R_c_ohm": lcl.R_c,
            "C_f_F": lcl.C_f, "R_g_ohm": lcl.R_g, "L_g_H": lcl.L_g,
        },
        "line": {"R_ohm": line.R, "L_H": line.L},
    }
