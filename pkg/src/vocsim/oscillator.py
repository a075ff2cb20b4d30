"""Actual (unaveraged) virtual-oscillator dynamics in polar form, plus the
adaptive moving-average power meter used to read P/Q off time-domain traces.

The oscillator state is (V, phi): RMS output voltage magnitude and
instantaneous phase.  The polar form is exact, not an approximation; the
slow/averaged model lives in :mod:`vocsim.averaged`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OscillatorCollapseError

__all__ = ["VocParams", "OscState", "g_nonlinearity", "voc_derivatives", "PowerMeter"]

V_FLOOR = 1e-6  # volts; below this the dphi/dt division is ill-posed


@dataclass(frozen=True)
class VocParams:
    """Virtual oscillator parameters.

    ``omega_star`` must equal 1/sqrt(L*C); ``epsilon = sqrt(L/C)`` is derived.
    """

    sigma: float        # negative-resistance conductance, S
    alpha: float        # cubic current source coefficient, A/V^3
    L: float            # oscillator inductance, H
    C: float            # oscillator capacitance, F
    k_v: float          # voltage scaling factor, V/V
    k_i: float          # current feedback gain, A/A
    omega_star: float   # nominal frequency, rad/s
    epsilon: float = field(init=False)

    def __post_init__(self):
        for name in ("sigma", "alpha", "L", "C", "k_v", "k_i"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        w_lc = 1.0 / math.sqrt(self.L * self.C)
        if abs(self.omega_star - w_lc) > 1e-9 * w_lc:
            raise ValueError(
                f"omega_star={self.omega_star} inconsistent with 1/sqrt(LC)={w_lc}"
            )
        object.__setattr__(self, "epsilon", math.sqrt(self.L / self.C))

    @classmethod
    def from_oscillator_c(cls, sigma, alpha, C, k_v, k_i, omega_star) -> "VocParams":
        """Build params from C, deriving L = 1/(C omega_star^2)."""
        return cls(sigma, alpha, 1.0 / (C * omega_star**2), C, k_v, k_i, omega_star)

    @property
    def beta(self) -> float:
        """Cubic coefficient of the averaged amplitude equation: 3 alpha/(k_v^2 sigma)."""
        return 3.0 * self.alpha / (self.k_v**2 * self.sigma)


@dataclass
class OscState:
    V: float      # RMS output voltage magnitude
    phi: float    # instantaneous phase, phi = omega*t + theta

    def __post_init__(self):
        if self.V < 0:
            raise ValueError("V must be non-negative")

    def v_inst(self) -> float:
        """Instantaneous terminal voltage sqrt(2) V cos(phi)."""
        return math.sqrt(2.0) * self.V * math.cos(self.phi)


def g_nonlinearity(u, p: VocParams):
    """Oscillator nonlinearity g(u) = u - (alpha/(sigma k_v^2)) u^3.

    This is the odd cubic whose cycle average produces the V - (beta/2) V^3
    amplitude law of the averaged model.
    """
    return u - (p.alpha / (p.sigma * p.k_v**2)) * u**3


def voc_derivatives(s: OscState, i_fb: float, p: VocParams) -> tuple[float, float]:
    """Polar oscillator dynamics driven by the scaled feedback current.

    Returns (dV/dt, dphi/dt).  Raises :class:`OscillatorCollapseError` when V
    is below the floor, since the phase equation divides by V.
    """
    if s.V < V_FLOOR:
        raise OscillatorCollapseError(f"V={s.V} below floor {V_FLOOR}")
    cos_phi = math.cos(s.phi)
    sin_phi = math.sin(s.phi)
    u = math.sqrt(2.0) * s.V * cos_phi
    common = (p.epsilon * p.omega_star / math.sqrt(2.0)) * (
        p.sigma * g_nonlinearity(u, p) - p.k_v * p.k_i * i_fb
    )
    dv = common * cos_phi
    dphi = p.omega_star - common * sin_phi / s.V
    return dv, dphi


class PowerMeter:
    """Moving-average P/Q measurement over one adaptive ac cycle.

    Averages p(t) = v(t) i(t) and q(t) = v(t - T/4) i(t) over a window of
    length T = 2*pi/omega_hat, where omega_hat tracks the recovered frequency
    (defaults to the nominal).  Quarter-period-delayed voltage is linearly
    interpolated in the sample history.  Queries before one full window has
    elapsed return ``None``.
    """

    def __init__(self, omega_star: float, history_cycles: float = 2.5):
        if omega_star <= 0:
            raise ValueError("omega_star must be positive")
        self.omega_star = omega_star
        self.omega_hat = omega_star
        self._keep = history_cycles * 2.0 * math.pi / omega_star
        self._t: list[float] = []
        self._v: list[float] = []
        self._i: list[float] = []
        self._t0 = None  # first sample time, for warm-up detection

    def set_frequency(self, omega_hat: float):
        """Update the recovered frequency that sets the window length."""
        if omega_hat <= 0:
            raise ValueError("omega_hat must be positive")
        self.omega_hat = omega_hat

    @property
    def window(self) -> float:
        return 2.0 * math.pi / self.omega_hat

    def update(self, t: float, v: float, i: float):
        """Append a sample and return (P, Q), or ``None`` before warm-up."""
        self.append(t, v, i)
        return self.read(t)

    def append(self, t: float, v: float, i: float):
        if self._t and t <= self._t[-1]:
            raise ValueError("sample times must be strictly increasing")
        if self._t0 is None:
            self._t0 = t
        self._t.append(t)
        self._v.append(v)
        self._i.append(i)
        self._compact()

    def extend(self, t, v, i):
        """Vectorized append of equally valid (strictly increasing) samples."""
        t = np.asarray(t, dtype=float)
        if self._t and t[0] <= self._t[-1]:
            raise ValueError("sample times must be strictly increasing")
        if len(t) and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if self._t0 is None and len(t):
            self._t0 = float(t[0])
        self._t.extend(map(float, t))
        self._v.extend(map(float, np.asarray(v, dtype=float)))
        self._i.extend(map(float, np.asarray(i, dtype=float)))
        self._compact()

    def _compact(self):
        # keep a bounded history: window for averaging plus T/4 of delayed lookup
        if not self._t:
            return
        cutoff = self._t[-1] - self._keep
        if self._t[0] < cutoff - self._keep:
            k = 0
            while self._t[k] < cutoff:
                k += 1
            del self._t[:k], self._v[:k], self._i[:k]

    def ready(self, t: float) -> bool:
        period = self.window
        return (
            self._t0 is not None
            and t - self._t0 >= period * 1.25
            and len(self._t) >= 4
        )

    def read(self, t: float):
        """(P, Q) averaged over the window ending at ``t``; ``None`` if not ready."""
        if not self.ready(t):
            return None
        period = self.window
        ta = np.asarray(self._t)
        va = np.asarray(self._v)
        ia = np.asarray(self._i)
        lo = t - period
        m = (ta >= lo - 2.0 * (ta[-1] - ta[-2])) & (ta <= t)
        tw, vw, iw = ta[m], va[m], ia[m]
        if len(tw) < 3:
            return None
        v_del = np.interp(tw - period / 4.0, ta, va)
        p_avg = _window_mean(tw, vw * iw, lo, t)
        q_avg = _window_mean(tw, v_del * iw, lo, t)
        return p_avg, q_avg


def _window_mean(t, y, lo, hi) -> float:
    """Trapezoid mean of samples (t, y) over [lo, hi], clipping the first interval."""
    y_lo = np.interp(lo, t, y)
    m = t > lo
    tt = np.concatenate(([lo], t[m]))
    yy = np.concatenate(([y_lo], y[m]))
    return float(np.trapezoid(yy, tt) / (hi - lo))
