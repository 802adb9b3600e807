"""Compare the numba kernels with the pure-numpy fallback.

The backend is fixed at import time, so each one runs in its own child
process (``AGGSIR_DISABLE_NUMBA=1`` selects numpy).  Every workload reports
the best of ``--repeat`` timings and a checksum of its result; the parent
prints both backends side by side and the largest checksum disagreement.

    python benchmarks/bench_backends.py [--repeat 5] [--quick]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CHILD_FLAG = "--child"


def workloads(quick):
    import numpy as np

    from aggsir.grid import build_grid, indicator, project_function
    from aggsir.kernels import Gaussian, KernelMatrix, QuadAbs
    from aggsir.models import make_sir, make_sis
    from aggsir.solver import SolverConfig, State, full_rhs, run

    def sis_state(n):
        g = build_grid(-1.7, 1.7, n)
        S = project_function(g, indicator(-0.5, 0.5, 1.0))
        I = project_function(g, indicator(-0.1, 0.1, 0.25))
        return State.from_fields(("S", "I"), [S, I])

    sis = make_sis(1.0, 1.0, QuadAbs(0.5))

    names = ("S", "I", "R")
    km = KernelMatrix.from_pairs(
        names,
        {(a, b): Gaussian(0.5 + 0.1 * k, 0.2 + 0.05 * k) for k, (a, b) in enumerate((a, b) for a in names for b in names)},
    )
    sir = make_sir(1.0, 2.0, km)
    m = 32 if quick else 64
    g2 = build_grid([-1.0, -1.0], [1.0, 1.0], [m, m])
    X, Y = g2.mesh()
    blob = np.where(X**2 + Y**2 < 0.3**2, 1.0, 0.0)
    sir_state = State(g2, names, np.stack([blob, 0.5 * blob, np.zeros_like(blob)]))

    cases = {}
    for n in (340, 680) if not quick else (340,):
        st = sis_state(n)
        cases[f"1d sis rhs n={n}"] = lambda st=st: full_rhs(sis, st)
    st340 = sis_state(340)
    steps = 100 if quick else 1000
    cases[f"1d sis run {steps} steps"] = lambda: run(sis, st340, SolverConfig(t_final=steps * 1e-3, dt=1e-3))[0].data
    cases[f"2d sir rhs {m}x{m}"] = lambda: full_rhs(sir, sir_state)
    return cases


def child(repeat, quick):
    import numpy as np

    from aggsir._backend import backend_name

    out = {"backend": backend_name(), "cases": {}}
    for name, fn in workloads(quick).items():
        result = fn()  # warm-up (numba compiles or loads its cache here)
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            result = fn()
            best = min(best, time.perf_counter() - t0)
        arr = np.asarray(result, dtype=float)
        out["cases"][name] = {"seconds": best, "checksum": float(np.abs(arr).sum()), "peak": float(np.abs(arr).max())}
    json.dump(out, sys.stdout)


def launch(disable_numba, repeat, quick):
    env = dict(os.environ)
    env["AGGSIR_DISABLE_NUMBA"] = "1" if disable_numba else "0"
    cmd = [sys.executable, __file__, CHILD_FLAG, "--repeat", str(repeat)] + (["--quick"] if quick else [])
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--quick", action="store_true", help="smaller workloads")
    p.add_argument(CHILD_FLAG, action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args()
    if args.child:
        child(args.repeat, args.quick)
        return
    fast = launch(False, args.repeat, args.quick)
    slow = launch(True, args.repeat, args.quick)
    print(f"{'workload':<28}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}{'rel diff':>12}")
    for name, a in fast["cases"].items():
        b = slow["cases"][name]
        diff = abs(a["checksum"] - b["checksum"]) / max(a["checksum"], 1e-300)
        print(f"{name:<28}{a['seconds'] * 1e3:>10.3f}ms{b['seconds'] * 1e3:>10.3f}ms"
              f"{b['seconds'] / a['seconds']:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
