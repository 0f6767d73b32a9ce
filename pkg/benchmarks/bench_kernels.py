"""Time the compiled kernels against the pure-Python fallback.

Each mode runs in its own interpreter because RELOSC_DISABLE_NUMBA is read
at import. Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

import numpy as np

WORKER = r"""
import json, math, sys, time
import numpy as np
from relosc import NUMBA_ENABLED, pauli as P
from relosc.ode import propagate
from relosc.spectral import OperatorSpec, eigenvalues_regular
from relosc.discretize import FDOracle

repeat = int(sys.argv[1])
pot = P.periodic_trig(1.0, mean=(0.2, 0.1, 1.0), cos=[(0.5, 0.2, 0.3)], sin=[(0.1, 0.0, 0.2)])
H = OperatorSpec(pot, 0.0, 20.0)
fd = FDOracle(pot, 0.0, 20.0, 0.0, math.pi, N=20000)

jobs = {
    "propagate 50 periods": lambda: propagate(pot, 0.7, 0.0, [1.0, 0.0], 50.0).tolist(),
    "eigenvalues on (0, 20) in (-3, 3)": lambda: eigenvalues_regular(H, (-3, 3)).tolist(),
    "finite-difference count, 40k rows": lambda: fd.count_below(0.37),
}
out = {"jit": NUMBA_ENABLED, "times": {}, "values": {}}
for name, fn in jobs.items():
    out["values"][name] = fn()  # warm-up, includes compilation
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out["times"][name] = best
print(json.dumps(out))
"""


def run_mode(disable, repeat):
    env = dict(os.environ, RELOSC_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run_mode(False, args.repeat)
    py = run_mode(True, args.repeat)
    if not jit["jit"]:
        print("warning: numba is not active, both runs use the fallback")
    print(f"{'workload':38s} {'numba [s]':>10s} {'python [s]':>11s} {'speedup':>8s}  agree")
    for name in jit["times"]:
        a, b = jit["times"][name], py["times"][name]
        va, vb = jit["values"][name], py["values"][name]
        agree = bool(np.allclose(va, vb, rtol=1e-9, atol=1e-12))
        print(f"{name:38s} {a:10.4f} {b:11.4f} {b / a:7.1f}x  {agree}")


if __name__ == "__main__":
    main()
