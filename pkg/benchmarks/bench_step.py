#!/usr/bin/env python3
"""Stepping-kernel benchmark: compiled extension vs numpy fallback.

The hot loop is n envs x 10 inner steps (controller + RK4 + battery at
1 kHz).  Budget: 2048 envs under 50 ms per policy step.
"""

import argparse
import time

import numpy as np

from taco.backend import HAVE_COMPILED, VecParams, VecState, step_envs
from taco.params import MavParams


def bench(n: int, backend: str, reps: int) -> float:
    params = MavParams()
    st = VecState.zeros(n)
    st.p[:, 2] = 3.0
    st.motor[:] = 1383.0
    st.voltage[:] = params.v_nominal
    vp = VecParams.nominal(params, n)
    act = np.tile([244.0, 0.3, -0.2, 0.1], (n, 1))
    step_envs(st, act, vp, backend=backend)  # warm-up
    t0 = time.perf_counter()
    for _ in range(reps):
        step_envs(st, act, vp, backend=backend)
    return (time.perf_counter() - t0) / reps


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="256,2048")
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    backends = (["compiled"] if HAVE_COMPILED else []) + ["numpy"]

    print(f"{'envs':>6} {'backend':>9} {'ms/step':>9} {'ns/env-substep':>15} {'budget':>7}")
    rows = {}
    for n in sizes:
        for backend in backends:
            dt = bench(n, backend, args.reps)
            rows[(n, backend)] = dt
            note = "ok" if dt < 0.050 else "over" if n >= 2048 else "-"
            print(f"{n:>6} {backend:>9} {dt*1e3:>9.2f} {dt/n/10*1e9:>15.0f} {note:>7}")
    if HAVE_COMPILED:
        for n in sizes:
            speedup = rows[(n, "numpy")] / rows[(n, "compiled")]
            print(f"speedup at {n} envs: {speedup:.1f}x")


if __name__ == "__main__":
    main()
