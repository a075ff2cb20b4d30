"""Parameter design: scaling factors, conductance/cubic coefficients, and the
capacitance feasibility window, from an ac-performance specification and the
output filter.

Two evaluation modes exist for the worst-case power constants.  ``disc``
maximizes the linear functional over the whole rated-apparent-power disc
(the literal optimization); ``rated_point`` evaluates at the rated active
power for the voltage constant and at the rated reactive power for the
frequency constant.  ``rated_point`` is the default: it is the convention
that closes the design round-trip on the reference numbers; ``disc`` yields
a larger worst-case loading and therefore a more conservative design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import averaged
from .errors import InfeasibleDesignError
from .oscillator import VocParams
from .phasor import ImpedanceConstants, LclFilter, impedance_constants

__all__ = [
    "AcSpec",
    "CapacitanceWindow",
    "DesignReport",
    "s_max",
    "s_dmax",
    "scaling_factors",
    "sigma_alpha",
    "capacitance_window",
    "design",
    "droop_curve",
]

MODES = ("disc", "rated_point")
C_RULES = ("max", "min", "midpoint")


@dataclass(frozen=True)
class AcSpec:
    """AC performance specification driving the design."""

    V_oc: float          # RMS open-circuit voltage, V
    V_min: float         # RMS voltage at rated loading, V
    P_rated: float       # W
    Q_rated: float       # var
    omega_star: float    # rad/s
    d_omega_max: float   # max |frequency offset|, rad/s
    t_rise_max: float    # s
    delta31_max: float   # third-to-first harmonic ratio limit, dimensionless

    def __post_init__(self):
        if not 0 < self.V_min < self.V_oc:
            raise ValueError("require 0 < V_min < V_oc")
        for name in ("P_rated", "Q_rated", "omega_star", "d_omega_max",
                     "t_rise_max", "delta31_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def s_rated(self) -> float:
        return math.hypot(self.P_rated, self.Q_rated)


def s_max(spec: AcSpec, k: ImpedanceConstants, mode: str = "rated_point") -> float:
    """Worst-case voltage-channel loading constant C_alpha*P + S_alpha*Q."""
    _check_mode(mode)
    if mode == "disc":
        return spec.s_rated * math.hypot(k.C_alpha, k.S_alpha)
    return k.C_alpha * spec.P_rated


def s_dmax(spec: AcSpec, k: ImpedanceConstants, mode: str = "rated_point") -> float:
    """Worst-case frequency-channel loading constant C_alpha*Q - S_alpha*P."""
    _check_mode(mode)
    if mode == "disc":
        return spec.s_rated * math.hypot(k.C_alpha, k.S_alpha)
    return k.C_alpha * spec.Q_rated


def scaling_factors(spec: AcSpec, smax: float) -> tuple[float, float]:
    """(k_v, k_i) = (V_oc, V_min / S_max)."""
    if smax <= 0:
        raise ValueError("S_max must be positive")
    return spec.V_oc, spec.V_min / smax


def sigma_alpha(
    spec: AcSpec, smax: float, k: ImpedanceConstants
) -> tuple[float, float]:
    """Conductance sigma and cubic coefficient alpha = (2/3) sigma_beta."""
    voc, vmin = spec.V_oc, spec.V_min
    base = (voc / vmin) * voc**2 / (voc**2 - vmin**2)
    sigma = base + vmin * voc * k.C_beta / smax
    k_v, k_i = scaling_factors(spec, smax)
    sb = sigma - k_v * k_i * k.C_beta
    return sigma, 2.0 * sb / 3.0


@dataclass(frozen=True)
class CapacitanceWindow:
    C_min_freq: float
    C_min_harm: float
    C_max_rise: float

    @property
    def lower(self) -> float:
        return max(self.C_min_freq, self.C_min_harm)

    @property
    def feasible(self) -> bool:
        return self.lower <= self.C_max_rise

    def binding_constraints(self) -> tuple[str, ...]:
        """When infeasible, the lower bound(s) that exceed the rise-time cap."""
        out = []
        if self.C_min_freq > self.C_max_rise:
            out.append("frequency_offset")
        if self.C_min_harm > self.C_max_rise:
            out.append("harmonic_ratio")
        return tuple(out)

    def choose(self, c_rule: str) -> float:
        if c_rule not in C_RULES:
            raise ValueError(f"c_rule must be one of {C_RULES}")
        if not self.feasible:
            raise InfeasibleDesignError(
                "empty capacitance window; binding: "
                + ", ".join(self.binding_constraints()),
                binding=self.binding_constraints(),
            )
        if c_rule == "max":
            return self.C_max_rise
        if c_rule == "min":
            return self.lower
        return 0.5 * (self.lower + self.C_max_rise)


def capacitance_window(
    spec: AcSpec,
    smax: float,
    sigma: float,
    k: ImpedanceConstants,
    mode: str = "rated_point",
) -> CapacitanceWindow:
    """Permissible oscillator capacitance range from the three ac limits."""
    voc, vmin = spec.V_oc, spec.V_min
    sd = s_dmax(spec, k, mode)
    c_min_freq = (
        1.0
        / (2.0 * spec.d_omega_max)
        * (sd * voc / (vmin * smax) - k.S_beta * voc * vmin / smax)
    )
    c_max_rise = (
        spec.t_rise_max / 6.0 * (voc / vmin) * voc**2 / (voc**2 - vmin**2)
    )
    c_min_harm = sigma / (8.0 * spec.omega_star * spec.delta31_max)
    return CapacitanceWindow(c_min_freq, c_min_harm, c_max_rise)


@dataclass(frozen=True)
class DesignReport:
    params: VocParams | None
    constants: ImpedanceConstants
    S_max: float
    S_dmax: float
    window: CapacitanceWindow
    chosen_c_rule: str
    feasible: bool

    def require_params(self) -> VocParams:
        if self.params is None:
            raise InfeasibleDesignError(
                "design infeasible; binding: "
                + ", ".join(self.window.binding_constraints()),
                binding=self.window.binding_constraints(),
            )
        return self.params


def design(
    spec: AcSpec,
    filt: LclFilter,
    mode: str = "rated_point",
    c_rule: str = "max",
) -> DesignReport:
    """Full design pipeline: constants, gains, sigma/alpha, capacitance pick.

    An empty capacitance window yields ``feasible=False`` with ``params=None``
    rather than raising; callers that need parameters use
    :meth:`DesignReport.require_params`.
    """
    _check_mode(mode)
    k = impedance_constants(filt, spec.omega_star)
    smax = s_max(spec, k, mode)
    sd = s_dmax(spec, k, mode)
    k_v, k_i = scaling_factors(spec, smax)
    sigma, alpha = sigma_alpha(spec, smax, k)
    window = capacitance_window(spec, smax, sigma, k, mode)
    if not window.feasible:
        return DesignReport(None, k, smax, sd, window, c_rule, False)
    c = window.choose(c_rule)
    params = VocParams.from_oscillator_c(sigma, alpha, c, k_v, k_i, spec.omega_star)
    return DesignReport(params, k, smax, sd, window, c_rule, True)


def droop_curve(
    params: VocParams,
    k: ImpedanceConstants,
    sweep_axis: str,
    fixed_value: float = 0.0,
    n_points: int = 50,
    s_max_limit: float | None = None,
):
    """Steady-state droop table along a power sweep.

    Sweeps P (Q fixed) or Q (P fixed) from zero to the loading where
    C_alpha*P + S_alpha*Q reaches ``s_max_limit`` (defaults to just inside
    the critical power).  Returns a structured array with fields
    (value, V_eq, omega_eq, exists); rows past the critical power carry NaN
    equilibria and exists=False.
    """
    if sweep_axis not in ("P", "Q"):
        raise ValueError("sweep_axis must be 'P' or 'Q'")
    sb = averaged.sigma_beta(params, k)
    s_cr = sb**2 / (6.0 * params.alpha * (params.k_i / params.k_v))
    limit = s_max_limit if s_max_limit is not None else s_cr * (1.0 - 1e-9)
    coeff = k.C_alpha if sweep_axis == "P" else k.S_alpha
    other = k.S_alpha if sweep_axis == "P" else k.C_alpha
    if abs(coeff) < 1e-15:
        raise ValueError(f"{sweep_axis}-axis constant is zero; sweep unbounded")
    end = (limit - other * fixed_value) / coeff

    rows = np.zeros(
        n_points,
        dtype=[("value", float), ("V_eq", float), ("omega_eq", float), ("exists", bool)],
    )
    for j, val in enumerate(np.linspace(0.0, end, n_points)):
        p_bar, q_bar = (val, fixed_value) if sweep_axis == "P" else (fixed_value, val)
        eq = averaged.equilibrium_voltage(p_bar, q_bar, params, k)
        rows[j]["value"] = val
        rows[j]["exists"] = eq.exists
        if eq.exists:
            rows[j]["V_eq"] = eq.V_high
            rows[j]["omega_eq"] = averaged.equilibrium_frequency(
                p_bar, q_bar, eq.V_high, params, k
            )
        else:
            rows[j]["V_eq"] = np.nan
            rows[j]["omega_eq"] = np.nan
    return rows


def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
