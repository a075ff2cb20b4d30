"""Small fixed-step integration helpers used outside the compiled kernels."""

from __future__ import annotations

import numpy as np

from ..errors import SimulationAbort

__all__ = ["rk4_step", "integrate_fixed"]


def rk4_step(f, t, y, dt):
    """One classic Runge-Kutta step of ``dy/dt = f(t, y)``."""
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k1))
    k3 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k2))
    k4 = np.asarray(f(t + dt, y + dt * k3))
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_fixed(f, t0, y0, dt, nsteps, record_every=1):
    """Fixed-step RK4 over ``nsteps`` steps with decimated recording.

    Returns ``(t, traj)`` including the initial point.  Raises
    :class:`SimulationAbort` at the first non-finite state.
    """
    if dt <= 0 or nsteps < 0 or record_every < 1:
        raise ValueError("need dt > 0, nsteps >= 0, record_every >= 1")
    y = np.array(y0, dtype=float)
    ts = [t0]
    ys = [y.copy()]
    for step in range(nsteps):
        t = t0 + step * dt
        y = rk4_step(f, t, y, dt)
        if not np.all(np.isfinite(y)):
            raise SimulationAbort(f"non-finite state at t={t + dt}", t=t + dt)
        if (step + 1) % record_every == 0 or step == nsteps - 1:
            ts.append(t0 + (step + 1) * dt)
            ys.append(y.copy())
    return np.array(ts), np.array(ys)
