"""Fixed-step inner-loop kernels for the simulation engine.

Both kernels advance a contiguous segment (constant topology, constant
controller gains for the electromagnetic one) with classic RK4 and decimated
recording, mutating the packed state vector in place.  They compile with
numba when it is importable; setting the environment variable
``VOCSIM_DISABLE_NUMBA`` to a non-empty value other than ``0`` forces the
pure-Python fallback, which runs the identical code objects uncompiled.

State packing for the electromagnetic kernel, per inverter i:
``y[5i..5i+4] = (V, phi, i_f, v_c, i_g)``, followed by one load-branch
current per branch.  The averaged kernel packs ``(V_bar, theta_bar)`` pairs.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "DISABLE_ENV",
    "emt_voc_segment",
    "averaged_segment",
    "EMT_REC_WIDTH",
    "AVG_REC_WIDTH",
]

DISABLE_ENV = "VOCSIM_DISABLE_NUMBA"


def _numba_enabled() -> bool:
    flag = os.environ.get(DISABLE_ENV, "").strip()
    if flag not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_enabled()


def _maybe_jit(fn):
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=True)(fn)
    return fn


def EMT_REC_WIDTH(n_inv: int) -> int:
    """Columns per electromagnetic record row:
    t, then (V, phi, v_term, i_f, i_g) per inverter, then v_pcc, kcl_residual."""
    return 1 + 5 * n_inv + 2


def AVG_REC_WIDTH(n_inv: int) -> int:
    """Columns per averaged record row: t, then (V, theta, dtheta, P, Q) per
    inverter (terminal powers), then kv0, ki0, load_P, load_Q."""
    return 1 + 5 * n_inv + 4


@_maybe_jit
def _emt_deriv(yy, out, osc, wstar, filt, br, conn, feedback_tap, tau):
    """Derivative of the packed electromagnetic state; returns v_pcc."""
    n = osc.shape[0]
    nb = br.shape[0]
    num = 0.0
    den = 0.0
    resid = 0.0
    for i in range(n):
        r_c = filt[i, 2]
        v_o = yy[5 * i + 3] + r_c * (yy[5 * i + 2] - yy[5 * i + 4])
        num += (v_o - filt[i, 4] * yy[5 * i + 4]) / filt[i, 5]
        den += 1.0 / filt[i, 5]
        resid += yy[5 * i + 4]
    any_conn = False
    for b in range(nb):
        if conn[b]:
            any_conn = True
            num += br[b, 0] * yy[5 * n + b] / br[b, 1]
            den += 1.0 / br[b, 1]
            resid -= yy[5 * n + b]
    if tau > 0.0:
        num += resid / tau
    v_pcc = num / den if any_conn or n > 0 else 0.0

    for i in range(n):
        sigma = osc[i, 0]
        alpha = osc[i, 1]
        k_v = osc[i, 2]
        k_i = osc[i, 3]
        epsw = osc[i, 4]
        r_f, l_f, r_c, c_f, r_gl, l_gl = (
            filt[i, 0], filt[i, 1], filt[i, 2], filt[i, 3], filt[i, 4], filt[i, 5],
        )
        v = yy[5 * i]
        phi = yy[5 * i + 1]
        i_f = yy[5 * i + 2]
        i_g = yy[5 * i + 4]
        v_term = np.sqrt(2.0) * v * np.cos(phi)
        v_o = yy[5 * i + 3] + r_c * (i_f - i_g)
        i_fb = i_f if feedback_tap == 1 else i_g
        u = v_term
        g = u - alpha / (sigma * k_v * k_v) * u * u * u
        common = epsw / np.sqrt(2.0) * (sigma * g - k_v * k_i * i_fb)
        out[5 * i] = common * np.cos(phi)
        out[5 * i + 1] = wstar - common * np.sin(phi) / v
        out[5 * i + 2] = (v_term - r_f * i_f - v_o) / l_f
        out[5 * i + 3] = (i_f - i_g) / c_f
        out[5 * i + 4] = (v_o - r_gl * i_g - v_pcc) / l_gl
    for b in range(nb):
        if conn[b]:
            out[5 * n + b] = (v_pcc - br[b, 0] * yy[5 * n + b]) / br[b, 1]
        else:
            out[5 * n + b] = 0.0
    return v_pcc


@_maybe_jit
def emt_voc_segment(
    y, nsteps, dt, t0, osc, wstar, filt, br, conn, pending, feedback_tap,
    rec_every, tau,
):
    """Advance the full electromagnetic model for ``nsteps`` RK4 steps.

    ``conn`` marks connected load branches; ``pending`` marks branches whose
    breaker has been told to open, which happens at the next current zero
    crossing.  ``y``, ``conn`` and ``pending`` are mutated in place.  Records
    every ``rec_every`` steps plus the final state; returns ``(rec, status)``
    with status 0 on success and 1 when a non-finite state appeared (the
    record is truncated at the last good sample).
    """
    n = osc.shape[0]
    nb = br.shape[0]
    nstate = 5 * n + nb
    ncol = 1 + 5 * n + 2
    nrec = nsteps // rec_every + 2
    rec = np.zeros((nrec, ncol))
    k1 = np.zeros(nstate)
    k2 = np.zeros(nstate)
    k3 = np.zeros(nstate)
    k4 = np.zeros(nstate)
    yt = np.zeros(nstate)
    scratch = np.zeros(nstate)
    irec = 0
    status = 0
    for step in range(nsteps + 1):
        t = t0 + step * dt
        if step % rec_every == 0 or step == nsteps:
            ok = True
            for m in range(nstate):
                if not np.isfinite(y[m]):
                    ok = False
            if not ok:
                status = 1
                break
            v_pcc = _emt_deriv(y, scratch, osc, wstar, filt, br, conn,
                               feedback_tap, tau)
            resid = 0.0
            for i in range(n):
                resid += y[5 * i + 4]
            for b in range(nb):
                if conn[b]:
                    resid -= y[5 * n + b]
            rec[irec, 0] = t
            for i in range(n):
                rec[irec, 1 + 5 * i] = y[5 * i]
                rec[irec, 2 + 5 * i] = y[5 * i + 1]
                rec[irec, 3 + 5 * i] = np.sqrt(2.0) * y[5 * i] * np.cos(y[5 * i + 1])
                rec[irec, 4 + 5 * i] = y[5 * i + 2]
                rec[irec, 5 + 5 * i] = y[5 * i + 4]
            rec[irec, 1 + 5 * n] = v_pcc
            rec[irec, 2 + 5 * n] = resid
            irec += 1
        if step == nsteps:
            break
        _emt_deriv(y, k1, osc, wstar, filt, br, conn, feedback_tap, tau)
        for m in range(nstate):
            yt[m] = y[m] + 0.5 * dt * k1[m]
        _emt_deriv(yt, k2, osc, wstar, filt, br, conn, feedback_tap, tau)
        for m in range(nstate):
            yt[m] = y[m] + 0.5 * dt * k2[m]
        _emt_deriv(yt, k3, osc, wstar, filt, br, conn, feedback_tap, tau)
        for m in range(nstate):
            yt[m] = y[m] + dt * k3[m]
        _emt_deriv(yt, k4, osc, wstar, filt, br, conn, feedback_tap, tau)
        for b in range(nb):
            scratch[b] = y[5 * n + b]  # pre-step branch currents for the breaker
        for m in range(nstate):
            y[m] = y[m] + dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
        for b in range(nb):
            if pending[b] and conn[b]:
                if scratch[b] * y[5 * n + b] <= 0.0:
                    conn[b] = False
                    pending[b] = False
                    y[5 * n + b] = 0.0
    return rec[:irec], status


@_maybe_jit
def averaged_segment(
    y, nsteps, dt, t0, osc, wstar, consts, m_f, m_g, m_pcc,
    pi_on, pi_gains, setpoint, pi_state, rec_every,
):
    """Advance the averaged model with the network folded into admittance maps.

    ``m_f``/``m_g`` map the terminal phasor vector to pre- and post-filter
    currents and ``m_pcc`` to the PCC voltage; the oscillator equations close
    on the pre-filter powers while recording and the dispatch PI use the
    post-filter (terminal) ones.  With ``pi_on`` the controller retunes
    inverter 0 each step, mutating ``osc[0, 2:4]`` and ``pi_state``.  Returns
    ``(rec, status)`` like the electromagnetic kernel.
    """
    n = osc.shape[0]
    ncol = 1 + 5 * n + 4
    nrec = nsteps // rec_every + 2
    rec = np.zeros((nrec, ncol))
    nstate = 2 * n
    k1 = np.zeros(nstate)
    k2 = np.zeros(nstate)
    k3 = np.zeros(nstate)
    k4 = np.zeros(nstate)
    yt = np.zeros(nstate)
    e = np.zeros(n, dtype=np.complex128)
    irec = 0
    status = 0
    for step in range(nsteps + 1):
        t = t0 + step * dt
        if step % rec_every == 0 or step == nsteps:
            ok = True
            for m in range(nstate):
                if not np.isfinite(y[m]) or y[2 * (m // 2)] <= 0.0:
                    ok = False
            if not ok:
                status = 1
                break
            for i in range(n):
                e[i] = y[2 * i] * np.exp(1j * y[2 * i + 1])
            _avg_deriv(y, k1, e, osc, wstar, consts, m_f)
            rec[irec, 0] = t
            ig_sum = 0.0 + 0.0j
            v_pcc = 0.0 + 0.0j
            for i in range(n):
                ig = 0.0 + 0.0j
                for j in range(n):
                    ig += m_g[i, j] * e[j]
                ig_sum += ig
                v_pcc += m_pcc[i] * e[i]
                s = e[i] * np.conj(ig)
                rec[irec, 1 + 5 * i] = y[2 * i]
                rec[irec, 2 + 5 * i] = y[2 * i + 1]
                rec[irec, 3 + 5 * i] = k1[2 * i + 1]
                rec[irec, 4 + 5 * i] = s.real
                rec[irec, 5 + 5 * i] = s.imag
            s_load = v_pcc * np.conj(ig_sum)
            rec[irec, 1 + 5 * n] = osc[0, 2]
            rec[irec, 2 + 5 * n] = osc[0, 3]
            rec[irec, 3 + 5 * n] = s_load.real
            rec[irec, 4 + 5 * n] = s_load.imag
            irec += 1
        if step == nsteps:
            break
        for i in range(n):
            e[i] = y[2 * i] * np.exp(1j * y[2 * i + 1])
        _avg_deriv(y, k1, e, osc, wstar, consts, m_f)
        for m in range(nstate):
            yt[m] = y[m] + 0.5 * dt * k1[m]
        for i in range(n):
            e[i] = yt[2 * i] * np.exp(1j * yt[2 * i + 1])
        _avg_deriv(yt, k2, e, osc, wstar, consts, m_f)
        for m in range(nstate):
            yt[m] = y[m] + 0.5 * dt * k2[m]
        for i in range(n):
            e[i] = yt[2 * i] * np.exp(1j * yt[2 * i + 1])
        _avg_deriv(yt, k3, e, osc, wstar, consts, m_f)
        for m in range(nstate):
            yt[m] = y[m] + dt * k3[m]
        for i in range(n):
            e[i] = yt[2 * i] * np.exp(1j * yt[2 * i + 1])
        _avg_deriv(yt, k4, e, osc, wstar, consts, m_f)
        for m in range(nstate):
            y[m] = y[m] + dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
        if pi_on:
            for i in range(n):
                e[i] = y[2 * i] * np.exp(1j * y[2 * i + 1])
            ig0 = 0.0 + 0.0j
            for j in range(n):
                ig0 += m_g[0, j] * e[j]
            s1 = e[0] * np.conj(ig0)
            err_p = s1.real - setpoint[0]
            err_q = s1.imag - setpoint[1]
            kv_raw = pi_gains[0] * err_p + pi_state[0]
            ki_raw = pi_gains[2] * err_q + pi_state[1]
            k_v = min(max(kv_raw, pi_gains[4]), pi_gains[5])
            k_i = min(max(ki_raw, pi_gains[6]), pi_gains[7])
            de_p = pi_gains[1] * err_p
            de_q = pi_gains[3] * err_q
            if (kv_raw > pi_gains[5] and de_p > 0.0) or (
                kv_raw < pi_gains[4] and de_p < 0.0
            ):
                de_p = 0.0
            if (ki_raw > pi_gains[7] and de_q > 0.0) or (
                ki_raw < pi_gains[6] and de_q < 0.0
            ):
                de_q = 0.0
            pi_state[0] += dt * de_p
            pi_state[1] += dt * de_q
            osc[0, 2] = k_v
            osc[0, 3] = k_i
    return rec[:irec], status


@_maybe_jit
def _avg_deriv(yy, out, e, osc, wstar, consts, m_f):
    """Averaged dynamics at packed state ``yy`` with terminal phasors ``e``."""
    n = osc.shape[0]
    for i in range(n):
        i_f = 0.0 + 0.0j
        for j in range(n):
            i_f += m_f[i, j] * e[j]
        s = e[i] * np.conj(i_f)
        p_bar = s.real
        q_bar = s.imag
        sigma = osc[i, 0]
        alpha = osc[i, 1]
        k_v = osc[i, 2]
        k_i = osc[i, 3]
        c = osc[i, 5]
        v = yy[2 * i]
        beta = 3.0 * alpha / (k_v * k_v * sigma)
        ka = consts[i, 0]
        sa = consts[i, 1]
        kb = consts[i, 2]
        sb = consts[i, 3]
        out[2 * i] = sigma / (2.0 * c) * (v - 0.5 * beta * v**3) - k_v * k_i / (
            2.0 * c
        ) * (ka * p_bar / v + sa * q_bar / v + kb * v)
        out[2 * i + 1] = k_v * k_i / (2.0 * c) * (
            ka * q_bar / v**2 - sa * p_bar / v**2 - sb
        )
