#!/usr/bin/env python3
"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--number 200]

Times polynomial evaluation (values, Jacobian, Hessians), the LU solve and
the Jacobi eigensolver on corpus systems, then one end-to-end trace of the
cubic example under each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit
from pathlib import Path

import numpy as np

from rankcurve import kernels
from rankcurve.poly import load_system_text

DATA = Path(__file__).resolve().parents[1] / "src" / "rankcurve" / "data"

END_TO_END = """
import time
import numpy as np
from rankcurve import kernels
from rankcurve.penalty import PenaltyProblem, newton_refine
from rankcurve.poly import load_system_text
from rankcurve.tracer import TraceConfig, trace_branch
s = load_system_text(open({path!r}).read())
w = newton_refine(PenaltyProblem(s, [0.0, -1.0], 1e4), [-0.8296, -0.5982])
t = time.perf_counter()
trace_branch(s, w, [0.0, -1.0], TraceConfig(n_points=100, eps_residual=1e-2), 1)
print(kernels.BACKEND, 1e3 * (time.perf_counter() - t))
"""


def bench(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=200)
    args = ap.parse_args()
    if kernels.compiled is None:
        print("compiled backend not available; build with `pip install -e . --no-build-isolation`")
        return 1

    rng = np.random.default_rng(0)
    rows = []
    for name in ("cubic", "lax", "rankdef4", "rankdef6"):
        sys_ = load_system_text((DATA / f"{name}.sys").read_text())
        packed = sys_._packed
        x = rng.standard_normal(sys_.n_vars)
        for label, mod in (("cython", kernels.compiled), ("python", kernels.pure)):
            us = bench(lambda: mod.eval_system(*packed, sys_.k, x, 2), args.repeat, args.number)
            rows.append((f"eval_system[{name}] order 2", label, us))

    for n in (3, 6, 12):
        A = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        S = A + A.T
        for label, mod in (("cython", kernels.compiled), ("python", kernels.pure)):
            rows.append((f"lu_solve n={n}", label, bench(lambda: mod.lu_solve(A, b, 1e-14), args.repeat, args.number)))
            rows.append((f"jacobi_eigen n={n}", label,
                         bench(lambda: mod.jacobi_eigen(S, 1e-12 * np.linalg.norm(S), 50), args.repeat, args.number)))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'backend':<7}  {'us/call':>10}")
    by_key = {}
    for key, label, us in rows:
        by_key.setdefault(key, {})[label] = us
        print(f"{key:<{width}}  {label:<7}  {us:>10.2f}")
    print()
    for key, d in by_key.items():
        print(f"{key:<{width}}  speedup x{d['python'] / d['cython']:.1f}")

    print("\nend-to-end: 100-point cubic half-branch (ms)")
    code = END_TO_END.format(path=str(DATA / "cubic.sys"))
    for pure in ("0", "1"):
        env = dict(os.environ, RANKCURVE_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, ms = out.stdout.split()
        print(f"  {backend:<7} {float(ms):9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
