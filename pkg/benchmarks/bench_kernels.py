"""Timing comparison of the compiled kernels against the pure-numpy fallback.

The backend is fixed at import time by the VOCSIM_DISABLE_NUMBA environment
variable, so each backend is timed in its own subprocess.  Run from the
repository root:

    python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import textwrap

WORKLOAD = textwrap.dedent(
    """
    import math
    import time

    import numpy as np

    from vocsim import kernels
    from vocsim.design import AcSpec, design
    from vocsim.engine import parse_scenario, run
    from vocsim.phasor import LclFilter

    OMEGA_STAR = 2.0 * math.pi * 60.0
    lcl = LclFilter(R_f=0.15, L_f=2.48e-3, R_c=3.3, C_f=4.7e-6, R_g=0.13,
                    L_g=0.97e-3)
    spec = AcSpec(V_oc=126.0, V_min=114.0, P_rated=750.0, Q_rated=750.0,
                  omega_star=OMEGA_STAR, d_omega_max=math.pi,
                  t_rise_max=0.2, delta31_max=0.01)
    p = design(spec, lcl).require_params()
    inv = {
        "sigma_S": p.sigma, "alpha_A_per_V3": p.alpha, "C_F": p.C,
        "k_v": p.k_v, "k_i": p.k_i, "omega_star_rad_s": p.omega_star,
        "filter": {"R_f_ohm": 0.15, "L_f_H": 2.48e-3, "R_c_ohm": 3.3,
                   "C_f_F": 4.7e-6, "R_g_ohm": 0.13, "L_g_H": 0.97e-3},
        "line": {"R_ohm": 0.15, "L_H": 2.48e-3},
    }

    def scenario(model, t_end):
        return parse_scenario({
            "schema_version": 1,
            "run": {"model": model, "t_end_s": t_end},
            "inverters": [inv],
            "loads": [{"R_ohm": 22.1, "L_H": 14.4e-3}],
        })

    # warm-up triggers JIT compilation so it is not timed below
    run(scenario("actual", 0.01))
    run(scenario("averaged", 0.05))

    print(f"backend: {'numba' if kernels.NUMBA_ENABLED else 'numpy fallback'}")
    for model, t_end, reps in (("actual", 0.5, 3), ("averaged", 20.0, 3)):
        best = math.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            run(scenario(model, t_end))
            best = min(best, time.perf_counter() - t0)
        steps = int(round(t_end / (5e-6 if model == "actual" else 5e-4)))
        print(f"{model:>8s}  simulated {t_end:5.1f} s  ({steps} steps)  "
              f"best of {reps}: {best:8.3f} s wall")
    """
)


def main() -> int:
    for disable in (False, True):
        env = dict(os.environ)
        env.pop("VOCSIM_DISABLE_NUMBA", None)
        if disable:
            env["VOCSIM_DISABLE_NUMBA"] = "1"
        print(f"--- VOCSIM_DISABLE_NUMBA={'1' if disable else 'unset'} ---",
              flush=True)
        proc = subprocess.run([sys.executable, "-c", WORKLOAD], env=env)
        if proc.returncode != 0:
            return proc.returncode
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
