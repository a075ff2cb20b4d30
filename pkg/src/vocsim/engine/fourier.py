"""Single-bin Fourier projection for harmonic content of periodic traces."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["harmonic_amplitude", "harmonic_ratio_31"]

MIN_CYCLES = 10


def harmonic_amplitude(t, y, omega, harmonic, min_cycles: int = MIN_CYCLES):
    """Amplitude of the ``harmonic``-th multiple of ``omega`` in the trace.

    Projects onto cos/sin over the trailing ``min_cycles`` fundamental
    cycles, interpolating to a uniform grid first so decimated traces work.
    Restricting the window to the trace tail keeps earlier transient content
    out of the projection; the trace must span at least ``min_cycles`` full
    cycles.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if omega <= 0 or harmonic < 1:
        raise ValueError("omega must be positive and harmonic >= 1")
    period = 2.0 * math.pi / omega
    n_avail = int(math.floor((t[-1] - t[0]) / period))
    if n_avail < min_cycles:
        raise ValueError(
            f"trace spans {n_avail} cycles; need at least {min_cycles} for projection"
        )
    n_cyc = min_cycles
    span = n_cyc * period
    grid = np.linspace(t[-1] - span, t[-1], 256 * n_cyc + 1)
    yg = np.interp(grid, t, y)
    phase = harmonic * omega * grid
    a = np.trapezoid(yg * np.cos(phase), grid) * 2.0 / span
    b = np.trapezoid(yg * np.sin(phase), grid) * 2.0 / span
    return float(math.hypot(a, b))


def harmonic_ratio_31(t, y, omega, min_cycles: int = MIN_CYCLES) -> float:
    """Third-to-first harmonic amplitude ratio of a steady ac waveform."""
    a1 = harmonic_amplitude(t, y, omega, 1, min_cycles)
    a3 = harmonic_amplitude(t, y, omega, 3, min_cycles)
    if a1 == 0.0:
        raise ValueError("fundamental amplitude is zero")
    return a3 / a1
