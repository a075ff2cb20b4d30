"""Complex-impedance arithmetic and quasi-static phasor solution of the
one- and two-inverter LCL networks.

Phasors use the RMS-magnitude convention throughout, so complex power is
S = V * conj(I) with no 1/2 factor.  All impedances are evaluated at a
single frequency (normally the nominal omega_star); the solver takes an
explicit ``omega`` so that choice can be revisited.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NetworkSolveError

__all__ = [
    "LclFilter",
    "SeriesRlBranch",
    "ImpedanceConstants",
    "PhasorSolution",
    "impedance_constants",
    "solve_network",
    "solve_two_inverter_phasor",
    "terminal_power",
    "terminal_admittance_reduction",
]


@dataclass(frozen=True)
class LclFilter:
    """LCL output filter: series (R_f, L_f), shunt (R_c, C_f), series (R_g, L_g)."""

    R_f: float
    L_f: float
    R_c: float
    C_f: float
    R_g: float
    L_g: float

    def __post_init__(self):
        if self.L_f <= 0 or self.C_f <= 0 or self.L_g <= 0:
            raise ValueError("L_f, C_f, L_g must be positive")
        if self.R_f < 0 or self.R_c < 0 or self.R_g < 0:
            raise ValueError("filter resistances must be non-negative")

    def z_f(self, omega: float) -> complex:
        return self.R_f + 1j * omega * self.L_f

    def z_c(self, omega: float) -> complex:
        return self.R_c + 1.0 / (1j * omega * self.C_f)

    def z_g(self, omega: float) -> complex:
        return self.R_g + 1j * omega * self.L_g


@dataclass(frozen=True)
class SeriesRlBranch:
    """Series RL branch (line or load leg)."""

    R: float
    L: float
    label: str = ""

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"branch {self.label!r}: L must be positive")
        if self.R < 0:
            raise ValueError(f"branch {self.label!r}: R must be non-negative")

    def z(self, omega: float) -> complex:
        return self.R + 1j * omega * self.L


@dataclass(frozen=True)
class ImpedanceConstants:
    """Rectangular and polar parts of z_alpha = (z_c+z_f)/z_c and z_beta = -1/z_c.

    These four scalars (C_alpha, S_alpha, C_beta, S_beta) are what carry the
    LCL filter into the averaged oscillator equations.
    """

    Z_alpha: float
    theta_alpha: float
    Z_beta: float
    theta_beta: float
    C_alpha: float = field(init=False)
    S_alpha: float = field(init=False)
    C_beta: float = field(init=False)
    S_beta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "C_alpha", self.Z_alpha * math.cos(self.theta_alpha))
        object.__setattr__(self, "S_alpha", self.Z_alpha * math.sin(self.theta_alpha))
        object.__setattr__(self, "C_beta", self.Z_beta * math.cos(self.theta_beta))
        object.__setattr__(self, "S_beta", self.Z_beta * math.sin(self.theta_beta))

    @classmethod
    def from_rectangular(cls, z_alpha: complex, z_beta: complex) -> "ImpedanceConstants":
        return cls(abs(z_alpha), cmath.phase(z_alpha), abs(z_beta), cmath.phase(z_beta))

    @property
    def z_alpha(self) -> complex:
        return cmath.rect(self.Z_alpha, self.theta_alpha)

    @property
    def z_beta(self) -> complex:
        return cmath.rect(self.Z_beta, self.theta_beta)


def impedance_constants(filt: LclFilter, omega_star: float) -> ImpedanceConstants:
    """Impedance constants of an LCL filter evaluated at ``omega_star``."""
    if omega_star <= 0:
        raise ValueError("omega_star must be positive")
    zc = filt.z_c(omega_star)
    z_alpha = (zc + filt.z_f(omega_star)) / zc
    z_beta = -1.0 / zc
    return ImpedanceConstants.from_rectangular(z_alpha, z_beta)


def terminal_power(v: complex, i: complex) -> tuple[float, float]:
    """Active/reactive power from RMS phasors: P = Re(V conj(I)), Q = Im(V conj(I))."""
    s = v * i.conjugate()
    return s.real, s.imag


@dataclass(frozen=True)
class PhasorSolution:
    """Node voltages, branch currents and powers of a solved network.

    ``p``/``q`` use the inverter terminal voltage and the post-filter feedback
    current i_g (the measured output power).  ``p_src``/``q_src`` use the
    pre-filter current i_f; they are the quantities the averaged model
    equations are exact in.
    """

    omega: float
    v: tuple[complex, ...]          # inverter terminal phasors
    v_o: tuple[complex, ...]        # filter capacitor node
    i_f: tuple[complex, ...]
    i_g: tuple[complex, ...]
    v_pcc: complex
    branch_currents: tuple[complex, ...]
    p: tuple[float, ...]
    q: tuple[float, ...]
    p_src: tuple[float, ...]
    q_src: tuple[float, ...]

    def kcl_pcc_residual(self) -> float:
        """|sum(i_g) - sum(branch currents)|, absolute amperes."""
        return abs(sum(self.i_g) - sum(self.branch_currents))


def solve_network(
    v_sources,
    filters,
    lines,
    load_branches,
    omega: float,
) -> PhasorSolution:
    """Solve the quasi-static phasor network for 1 or 2 inverters.

    Each inverter is an ideal source behind its LCL filter and series line,
    all meeting the load branches at the PCC.  With no load branch connected
    the network is treated as open at the PCC (i_g = 0); the filter shunt
    still draws current.
    """
    v_sources = [complex(vs) for vs in v_sources]
    n = len(v_sources)
    if n not in (1, 2):
        raise ValueError("solve_network supports 1 or 2 inverters")
    if len(filters) != n or len(lines) != n:
        raise ValueError("need one filter and one line per inverter")

    zf = [f.z_f(omega) for f in filters]
    zc = [f.z_c(omega) for f in filters]
    zgl = [f.z_g(omega) + ln.z(omega) for f, ln in zip(filters, lines)]
    zb = [b.z(omega) for b in load_branches]

    if not load_branches:
        # Open at the PCC: i_g = 0, source drives z_f in series with z_c.
        v_o = [v_sources[i] * zc[i] / (zf[i] + zc[i]) for i in range(n)]
        i_f = [(v_sources[i] - v_o[i]) / zf[i] for i in range(n)]
        i_g = [0j] * n
        v_pcc = v_o[0]  # no defined PCC; report the (single) open node
        return _finish(omega, v_sources, v_o, i_f, i_g, v_pcc, ())

    # Nodal unknowns: v_o per inverter, then v_pcc.
    m = n + 1
    a = np.zeros((m, m), dtype=complex)
    rhs = np.zeros(m, dtype=complex)
    for i in range(n):
        a[i, i] = 1.0 / zf[i] + 1.0 / zc[i] + 1.0 / zgl[i]
        a[i, n] = -1.0 / zgl[i]
        a[n, i] = -1.0 / zgl[i]
        rhs[i] = v_sources[i] / zf[i]
    a[n, n] = sum(1.0 / z for z in zgl) + sum(1.0 / z for z in zb)

    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NetworkSolveError(f"singular phasor network matrix: {exc}") from exc
    if not np.all(np.isfinite(sol.view(float))):
        raise NetworkSolveError("non-finite phasor network solution")

    v_o = [complex(sol[i]) for i in range(n)]
    v_pcc = complex(sol[n])
    i_f = [(v_sources[i] - v_o[i]) / zf[i] for i in range(n)]
    i_g = [(v_o[i] - v_pcc) / zgl[i] for i in range(n)]
    branch_i = tuple(v_pcc / z for z in zb)
    return _finish(omega, v_sources, v_o, i_f, i_g, v_pcc, branch_i)


def _finish(omega, v_sources, v_o, i_f, i_g, v_pcc, branch_i) -> PhasorSolution:
    p, q, p_src, q_src = [], [], [], []
    for vs, ifv, igv in zip(v_sources, i_f, i_g):
        pg, qg = terminal_power(vs, igv)
        pf, qf = terminal_power(vs, ifv)
        p.append(pg)
        q.append(qg)
        p_src.append(pf)
        q_src.append(qf)
    return PhasorSolution(
        omega=omega,
        v=tuple(v_sources),
        v_o=tuple(v_o),
        i_f=tuple(i_f),
        i_g=tuple(i_g),
        v_pcc=v_pcc,
        branch_currents=tuple(branch_i),
        p=tuple(p),
        q=tuple(q),
        p_src=tuple(p_src),
        q_src=tuple(q_src),
    )


def solve_two_inverter_phasor(
    v1: complex,
    v2,
    filters,
    lines,
    load_branches,
    omega: float,
) -> PhasorSolution:
    """Two-inverter solve; pass ``v2=None`` (with 1-element filter/line lists)
    for the single-inverter reduction."""
    if v2 is None:
        return solve_network([v1], filters, lines, load_branches, omega)
    return solve_network([v1, v2], filters, lines, load_branches, omega)


def terminal_admittance_reduction(filters, lines, load_branches, omega: float):
    """Linear reduction of the fixed network: maps terminal phasors E to currents.

    Returns ``(m_f, m_g, m_pcc)`` with ``i_f = m_f @ E``, ``i_g = m_g @ E`` and
    ``v_pcc = m_pcc @ E``.  Used by the averaged-model inner loop so each step
    costs a small matvec instead of a linear solve.
    """
    n = len(filters)
    m_f = np.zeros((n, n), dtype=complex)
    m_g = np.zeros((n, n), dtype=complex)
    m_pcc = np.zeros(n, dtype=complex)
    for j in range(n):
        basis = [1.0 + 0j if i == j else 0j for i in range(n)]
        sol = solve_network(basis, filters, lines, load_branches, omega)
        m_f[:, j] = sol.i_f
        m_g[:, j] = sol.i_g
        m_pcc[j] = sol.v_pcc if load_branches else 0j
    return m_f, m_g, m_pcc
