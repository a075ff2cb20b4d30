"""Electromagnetic-transient model of the LCL filters, lines and RL load
branches, in state-space form.

The PCC is an inductor cut-set (every branch meeting it is inductive), so the
node voltage is not a state: it is recovered each evaluation from the
differentiated KCL constraint, with a Baumgarte term to damp constraint
drift.  This module is the readable reference implementation; the fixed-step
inner loop lives in :mod:`vocsim.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phasor import LclFilter, SeriesRlBranch

__all__ = ["EmtNetwork", "EmtState", "emt_derivatives", "stored_energy"]


@dataclass(frozen=True)
class EmtNetwork:
    """Fixed topology: one filter+line per inverter, RL branches at the PCC."""

    filters: tuple[LclFilter, ...]
    lines: tuple[SeriesRlBranch, ...]
    branches: tuple[SeriesRlBranch, ...]

    def __post_init__(self):
        if len(self.filters) != len(self.lines):
            raise ValueError("need one line per inverter")
        if not self.filters:
            raise ValueError("need at least one inverter")

    @property
    def n_inv(self) -> int:
        return len(self.filters)


@dataclass
class EmtState:
    """Instantaneous electrical states.

    Per inverter: filter inductor current ``i_f``, capacitor internal voltage
    ``v_c`` (excludes the R_c drop), grid-side current ``i_g`` (shared by L_g
    and the line).  Per load branch: ``i_b``.
    """

    i_f: np.ndarray
    v_c: np.ndarray
    i_g: np.ndarray
    i_b: np.ndarray

    @classmethod
    def zeros(cls, n_inv: int, n_branches: int) -> "EmtState":
        return cls(
            np.zeros(n_inv), np.zeros(n_inv), np.zeros(n_inv), np.zeros(n_branches)
        )

    def kcl_residual(self, connected=None) -> float:
        ib = self.i_b if connected is None else self.i_b[np.asarray(connected, bool)]
        return float(abs(self.i_g.sum() - ib.sum()))


def emt_derivatives(
    state: EmtState,
    v_terminals,
    net: EmtNetwork,
    connected=None,
    stabilization_tau: float = 0.0,
):
    """Time derivatives of all electrical states.

    ``connected`` masks load branches (default all connected); disconnected
    branches get zero derivative.  ``stabilization_tau`` > 0 enables the
    Baumgarte correction that relaxes the PCC KCL residual with that time
    constant.  Returns an :class:`EmtState` of derivatives and the recovered
    PCC voltage.
    """
    n = net.n_inv
    v_terminals = np.asarray(v_terminals, dtype=float)
    if connected is None:
        connected = np.ones(len(net.branches), dtype=bool)
    else:
        connected = np.asarray(connected, dtype=bool)

    r_f = np.array([f.R_f for f in net.filters])
    l_f = np.array([f.L_f for f in net.filters])
    r_c = np.array([f.R_c for f in net.filters])
    c_f = np.array([f.C_f for f in net.filters])
    r_gl = np.array([f.R_g + ln.R for f, ln in zip(net.filters, net.lines)])
    l_gl = np.array([f.L_g + ln.L for f, ln in zip(net.filters, net.lines)])
    r_b = np.array([b.R for b in net.branches])
    l_b = np.array([b.L for b in net.branches])

    v_o = state.v_c + r_c * (state.i_f - state.i_g)

    # PCC voltage from the differentiated cut-set constraint
    # sum(di_g) - sum(di_b) = -residual/tau.
    num = np.sum((v_o - r_gl * state.i_g) / l_gl)
    den = np.sum(1.0 / l_gl)
    residual = state.i_g.sum()
    if connected.any():
        num += np.sum(r_b[connected] * state.i_b[connected] / l_b[connected])
        den += np.sum(1.0 / l_b[connected])
        residual -= state.i_b[connected].sum()
    if stabilization_tau > 0.0:
        num += residual / stabilization_tau
    v_pcc = num / den

    d_i_f = (v_terminals - r_f * state.i_f - v_o) / l_f
    d_v_c = (state.i_f - state.i_g) / c_f
    d_i_g = (v_o - r_gl * state.i_g - v_pcc) / l_gl
    d_i_b = np.where(connected, (v_pcc - r_b * state.i_b) / l_b, 0.0)

    return EmtState(d_i_f, d_v_c, d_i_g, d_i_b), float(v_pcc)


def stored_energy(state: EmtState, net: EmtNetwork, connected=None) -> float:
    """Total energy in all inductors and filter capacitors, joules."""
    if connected is None:
        connected = np.ones(len(net.branches), dtype=bool)
    connected = np.asarray(connected, dtype=bool)
    l_f = np.array([f.L_f for f in net.filters])
    c_f = np.array([f.C_f for f in net.filters])
    l_gl = np.array([f.L_g + ln.L for f, ln in zip(net.filters, net.lines)])
    l_b = np.array([b.L for b in net.branches])
    e = 0.5 * np.sum(l_f * state.i_f**2)
    e += 0.5 * np.sum(c_f * state.v_c**2)
    e += 0.5 * np.sum(l_gl * state.i_g**2)
    e += 0.5 * np.sum(l_b[connected] * state.i_b[connected] ** 2)
    return float(e)
