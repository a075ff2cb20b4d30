"""Power dispatch of inverter 1: PI tuning of its (k_v, k_i), the security
constraint deciding whether a set-point is achievable, and the steady-state
equilibrium solver backing that decision.

Inverter 2 keeps its design parameters and supplies the residual load power.
Set-points are expressed in measured terminal power (voltage before the
filter times the post-filter current), matching what the PI loops regulate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import averaged
from .errors import InfeasibleSetpointError, SolverConvergenceError
from .oscillator import VocParams
from .phasor import (
    ImpedanceConstants,
    LclFilter,
    SeriesRlBranch,
    impedance_constants,
    solve_network,
)

__all__ = [
    "PiGains",
    "PiState",
    "Setpoint",
    "TwoInverterSystem",
    "DispatchEquilibrium",
    "pi_step",
    "symmetric_equilibrium",
    "dispatch_equilibrium",
    "security_margin",
    "control_inputs",
]

# PI output clamps relative to the design gains; keeps the oscillator away
# from the collapse region during transients.
CLAMP_LO = 0.2
CLAMP_HI = 3.0


@dataclass(frozen=True)
class PiGains:
    """Gains of the two dispatch PI loops plus the output clamp window."""

    Kp_p: float
    Ki_p: float
    Kp_q: float
    Ki_q: float
    kv_min: float
    kv_max: float
    ki_min: float
    ki_max: float

    @classmethod
    def from_design(cls, params: VocParams, Kp_p=-0.001, Ki_p=-0.15,
                    Kp_q=0.0001, Ki_q=0.01) -> "PiGains":
        return cls(
            Kp_p, Ki_p, Kp_q, Ki_q,
            CLAMP_LO * params.k_v, CLAMP_HI * params.k_v,
            CLAMP_LO * params.k_i, CLAMP_HI * params.k_i,
        )


@dataclass(frozen=True)
class PiState:
    """Integrator states; e_p lives in k_v units, e_q in k_i units."""

    e_p: float
    e_q: float

    @classmethod
    def at_design(cls, params: VocParams) -> "PiState":
        return cls(params.k_v, params.k_i)


@dataclass(frozen=True)
class Setpoint:
    P_star: float
    Q_star: float
    t_start: float = 0.0


def pi_step(
    pi: PiState,
    gains: PiGains,
    p_bar: float,
    q_bar: float,
    sp: Setpoint,
    dt: float,
) -> tuple[float, float, PiState]:
    """One controller step: returns (k_v, k_i, next integrator state).

    Outputs are clamped; integration freezes while the corresponding output
    is clamped and the error would push it further out (anti-windup).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    err_p = p_bar - sp.P_star
    err_q = q_bar - sp.Q_star

    k_v_raw = gains.Kp_p * err_p + pi.e_p
    k_i_raw = gains.Kp_q * err_q + pi.e_q
    k_v = min(max(k_v_raw, gains.kv_min), gains.kv_max)
    k_i = min(max(k_i_raw, gains.ki_min), gains.ki_max)

    de_p = gains.Ki_p * err_p
    de_q = gains.Ki_q * err_q
    if (k_v_raw > gains.kv_max and de_p > 0) or (k_v_raw < gains.kv_min and de_p < 0):
        de_p = 0.0
    if (k_i_raw > gains.ki_max and de_q > 0) or (k_i_raw < gains.ki_min and de_q < 0):
        de_q = 0.0
    return k_v, k_i, PiState(pi.e_p + dt * de_p, pi.e_q + dt * de_q)


@dataclass(frozen=True)
class TwoInverterSystem:
    """Two designed inverters and their shared network at nominal frequency."""

    params: tuple[VocParams, VocParams]
    filters: tuple[LclFilter, LclFilter]
    lines: tuple[SeriesRlBranch, SeriesRlBranch]
    loads: tuple[SeriesRlBranch, ...]

    def __post_init__(self):
        if not self.loads:
            raise ValueError("dispatch needs at least one load branch")

    @property
    def constants(self) -> tuple[ImpedanceConstants, ImpedanceConstants]:
        w = self.params[0].omega_star
        return tuple(impedance_constants(f, w) for f in self.filters)

    def solve(self, e1: complex, e2: complex):
        return solve_network(
            [e1, e2], self.filters, self.lines, self.loads,
            self.params[0].omega_star,
        )


@dataclass(frozen=True)
class DispatchEquilibrium:
    V1: float
    theta1: float
    V2: float
    P2: float          # inverter-2 terminal power
    Q2: float
    omega: float
    mu: float
    margin: float
    kv1: float
    ki1: float
    achievable: bool
    # model-convention (pre-filter-current) powers at the equilibrium
    P1_src: float
    Q1_src: float
    P2_src: float
    Q2_src: float


def security_margin(
    v1: float,
    p1_star: float,
    q1_star: float,
    mu: float,
    params1: VocParams,
    k1: ImpedanceConstants,
) -> float:
    """sigma_1 V1^2 - mu (C_alpha P* + S_alpha Q* + C_beta V1^2); > 0 is secure."""
    return params1.sigma * v1**2 - mu * (
        k1.C_alpha * p1_star + k1.S_alpha * q1_star + k1.C_beta * v1**2
    )


def control_inputs(
    mu: float,
    v1: float,
    p1_star: float,
    q1_star: float,
    params1: VocParams,
    k1: ImpedanceConstants,
) -> tuple[float, float]:
    """Gains (k_v1, k_i1) realizing the set-point; positive square root.

    Raises :class:`InfeasibleSetpointError` when the radicand is not positive
    (security constraint violated).
    """
    sb1 = params1.sigma - mu * k1.C_beta
    denom = sb1 * v1**2 - mu * (k1.C_alpha * p1_star + k1.S_alpha * q1_star)
    if denom <= 0 or sb1 <= 0:
        raise InfeasibleSetpointError(
            "set-point violates the security constraint (non-positive radicand)"
        )
    kv1 = math.sqrt(sb1 * v1**4 / denom)
    return kv1, mu / kv1


def symmetric_equilibrium(system: TwoInverterSystem, v0: float | None = None):
    """No-dispatch fixed point of two identical design-parameter inverters.

    Returns (V, solution) with both terminals at V angle 0.  Used to seed the
    Newton iteration and to define the natural power-sharing point.
    """
    p1, k1 = system.params[0], system.constants[0]
    v = v0 if v0 is not None else 0.95 * p1.k_v
    for _ in range(200):
        sol = system.solve(v, v)
        eq = averaged.equilibrium_voltage(sol.p_src[0], sol.q_src[0], p1, k1)
        if not eq.exists:
            raise SolverConvergenceError("no symmetric equilibrium (over critical power)")
        v_new = 0.5 * v + 0.5 * eq.V_high
        if abs(v_new - v) < 1e-12 * v:
            v = v_new
            break
        v = v_new
    else:
        raise SolverConvergenceError("symmetric equilibrium fixed point stalled")
    return v, system.solve(v, v)


def dispatch_equilibrium(
    p1_star: float,
    q1_star: float,
    system: TwoInverterSystem,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> DispatchEquilibrium:
    """Steady state with inverter 1 at (P1*, Q1*) and inverter 2 untuned.

    Damped Newton on (V1, theta1, V2) with theta2 = 0: inverter-1 terminal
    power pinned to the set-point and inverter 2 on its high-voltage
    amplitude root.  ``achievable`` reflects convergence plus a positive
    security margin and control-law radicand; an unachievable set-point is a
    result, not an exception.
    """
    p1, p2 = system.params
    k1, k2 = system.constants

    v_sym, _ = symmetric_equilibrium(system)
    x = np.array([v_sym, 0.0, v_sym])
    scale = max(1.0, abs(p1_star), abs(q1_star))

    def residual(xv):
        v1, th1, v2 = xv
        if v1 <= 0 or v2 <= 0:
            return None, None
        sol = system.solve(v1 * np.exp(1j * th1), v2)
        eq2 = averaged.equilibrium_voltage(sol.p_src[1], sol.q_src[1], p2, k2)
        if not eq2.exists:
            return None, None
        return (
            np.array([sol.p[0] - p1_star, sol.q[0] - q1_star, v2 - eq2.V_high]),
            sol,
        )

    r, sol = residual(x)
    if r is None:
        raise SolverConvergenceError("bad initial point for dispatch Newton")
    converged = False
    for _ in range(max_iter):
        if np.linalg.norm(r) < tol * scale:
            converged = True
            break
        jac = np.zeros((3, 3))
        for j in range(3):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            rp, _ = residual(xp)
            if rp is None:
                xp[j] -= 2 * h
                rp, _ = residual(xp)
                if rp is None:
                    raise SolverConvergenceError("Jacobian evaluation left the domain")
                jac[:, j] = (r - rp) / h
            else:
                jac[:, j] = (rp - r) / h
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverConvergenceError(f"singular dispatch Jacobian: {exc}") from exc
        # halve the step while it increases the residual
        lam = 1.0
        while lam >= 1e-6:
            rn, soln = residual(x + lam * dx)
            if rn is not None and np.linalg.norm(rn) < np.linalg.norm(r):
                x = x + lam * dx
                r, sol = rn, soln
                break
            lam *= 0.5
        else:
            break
    if not converged and np.linalg.norm(r) >= tol * scale:
        raise SolverConvergenceError(
            f"dispatch Newton stalled, residual {np.linalg.norm(r):.3e}",
            residual=float(np.linalg.norm(r)),
        )

    v1, th1, v2 = x
    p1s_src, q1s_src = sol.p_src[0], sol.q_src[0]
    p2s_src, q2s_src = sol.p_src[1], sol.q_src[1]
    omega = averaged.equilibrium_frequency(p2s_src, q2s_src, v2, p2, k2)
    num = (k2.C_alpha * q2s_src - k2.S_alpha * p2s_src) / v2**2 - k2.S_beta
    den = (k1.C_alpha * q1s_src - k1.S_alpha * p1s_src) / v1**2 - k1.S_beta
    mu = p2.k_v * p2.k_i * num / den
    margin = security_margin(v1, p1s_src, q1s_src, mu, p1, k1)
    try:
        kv1, ki1 = control_inputs(mu, v1, p1s_src, q1s_src, p1, k1)
        achievable = margin > 0 and mu > 0
    except InfeasibleSetpointError:
        kv1 = ki1 = float("nan")
        achievable = False
    return DispatchEquilibrium(
        V1=v1, theta1=th1, V2=v2,
        P2=sol.p[1], Q2=sol.q[1],
        omega=omega, mu=mu, margin=margin,
        kv1=kv1, ki1=ki1, achievable=achievable,
        P1_src=p1s_src, Q1_src=q1s_src, P2_src=p2s_src, Q2_src=q2s_src,
    )
