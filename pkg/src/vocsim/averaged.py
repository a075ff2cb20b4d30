"""Averaged oscillator model with the LCL filter embedded through the
impedance constants, its equilibria (the droop characteristics), and the
closed-form rise-time / harmonic-ratio figures of merit.

The power arguments (p_bar, q_bar) are the cycle-averaged powers the model
is derived in: inverter terminal voltage times the pre-filter current.  The
legacy model (no filter awareness) is the special case of unit constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OscillatorCollapseError
from .oscillator import VocParams
from .phasor import ImpedanceConstants

__all__ = [
    "AveragedState",
    "EquilibriumResult",
    "averaged_derivatives",
    "sigma_beta",
    "equilibrium_voltage",
    "equilibrium_frequency",
    "rise_time",
    "harmonic_ratio",
    "legacy_constants",
]

V_BAR_FLOOR = 1.0  # volts; the phase equation divides by V^2


@dataclass
class AveragedState:
    V_bar: float      # averaged RMS voltage magnitude
    theta_bar: float  # averaged phase offset w.r.t. omega*t

    def __post_init__(self):
        if self.V_bar <= 0:
            raise ValueError("V_bar must be positive")


def sigma_beta(p: VocParams, k: ImpedanceConstants) -> float:
    """Effective conductance sigma - k_v k_i C_beta."""
    return p.sigma - p.k_v * p.k_i * k.C_beta


def averaged_derivatives(
    s: AveragedState,
    p_bar: float,
    q_bar: float,
    p: VocParams,
    k: ImpedanceConstants,
    omega: float,
) -> tuple[float, float]:
    """Slow dynamics (dV_bar/dt, dtheta_bar/dt).

    ``omega`` is the frequency of the frame theta_bar is measured in;
    simulations fix it at omega_star so dtheta_bar/dt carries the full
    frequency deviation.
    """
    v = s.V_bar
    if v < V_BAR_FLOOR:
        raise OscillatorCollapseError(f"V_bar={v} below floor {V_BAR_FLOOR}")
    two_c = 2.0 * p.C
    dv = (p.sigma / two_c) * (v - 0.5 * p.beta * v**3) - (p.k_v * p.k_i / two_c) * (
        k.C_alpha * p_bar / v + k.S_alpha * q_bar / v + k.C_beta * v
    )
    dtheta = (p.omega_star - omega) + (p.k_v * p.k_i / two_c) * (
        k.C_alpha * q_bar / v**2 - k.S_alpha * p_bar / v**2 - k.S_beta
    )
    return dv, dtheta


@dataclass(frozen=True)
class EquilibriumResult:
    """Both amplitude equilibria and the critical constants.

    ``exists`` is the strict inequality of the critical-power test; when it
    fails the two roots are complex and V_high/V_low are NaN.
    """

    V_high: float
    V_low: float
    exists: bool
    S_cr: float
    V_cr: float
    V_oc: float


def equilibrium_voltage(
    p_bar_eq: float, q_bar_eq: float, p: VocParams, k: ImpedanceConstants
) -> EquilibriumResult:
    """Amplitude equilibria for a given averaged power loading."""
    sb = sigma_beta(p, k)
    loading = k.C_alpha * p_bar_eq + k.S_alpha * q_bar_eq
    s_cr = sb**2 / (6.0 * p.alpha * (p.k_i / p.k_v))
    v_cr = p.k_v * math.sqrt(sb / (3.0 * p.alpha))
    v_oc = p.k_v * math.sqrt(2.0 * sb / (3.0 * p.alpha))
    disc = sb**2 - 6.0 * p.alpha * (p.k_i / p.k_v) * loading
    exists = loading < s_cr
    if exists:
        root = math.sqrt(disc)
        v_high = p.k_v * math.sqrt((sb + root) / (3.0 * p.alpha))
        v_low_sq = (sb - root) / (3.0 * p.alpha)
        v_low = p.k_v * math.sqrt(v_low_sq) if v_low_sq >= 0.0 else float("nan")
    else:
        v_high = v_low = float("nan")
    return EquilibriumResult(v_high, v_low, exists, s_cr, v_cr, v_oc)


def equilibrium_frequency(
    p_bar_eq: float,
    q_bar_eq: float,
    v_bar_eq: float,
    p: VocParams,
    k: ImpedanceConstants,
) -> float:
    """Steady-state frequency omega_eq at an amplitude equilibrium."""
    if v_bar_eq <= 0:
        raise ValueError("v_bar_eq must be positive")
    return p.omega_star + (p.k_v * p.k_i / (2.0 * p.C)) * (
        k.C_alpha * q_bar_eq / v_bar_eq**2
        - k.S_alpha * p_bar_eq / v_bar_eq**2
        - k.S_beta
    )


def rise_time(p: VocParams, k: ImpedanceConstants) -> float:
    """Unloaded 0.1 V_oc -> 0.9 V_oc voltage build-up time, 6/(omega* eps sigma_beta)."""
    return 6.0 / (p.omega_star * p.epsilon * sigma_beta(p, k))


def harmonic_ratio(p: VocParams) -> float:
    """Third-to-first harmonic amplitude ratio of the steady waveform, eps*sigma/8."""
    return p.epsilon * p.sigma / 8.0


def legacy_constants() -> ImpedanceConstants:
    """Constants reducing the model to the pre-filter-feedback version:
    C_alpha = 1 and the rest zero."""
    return ImpedanceConstants(1.0, 0.0, 0.0, 0.0)
