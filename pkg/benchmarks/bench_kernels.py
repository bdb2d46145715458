"""Compare the compiled and numpy ensemble integrators.

Usage: python benchmarks/bench_kernels.py [--members N] [--steps S] [--repeat R]

Both backends advance identical copies of one ensemble; the script reports
throughput in member-steps per second and the largest difference between the
two results.
"""
import argparse
import time

import numpy as np

from qccphase import kernels
from qccphase.classical import GaussianSpec, sample_initial
from qccphase.hamiltonian import ModelParams


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench(members: int, steps: int, repeat: int, dt: float = 1e-3):
    coef = ModelParams.quartic().coefficients
    spec = GaussianSpec.coherent(0.005)
    gamma0 = sample_initial(spec, members, seed=1)
    M0 = np.ascontiguousarray(np.broadcast_to(np.eye(4), (members, 4, 4)))
    rows, finals = [], {}
    for name in kernels.available():
        backend = kernels.get(name)
        out = {}

        def flow():
            g = gamma0.copy()
            backend.flow_rk4(coef, g, dt, steps)
            out["flow"] = g

        def tangent():
            g, M = gamma0.copy(), M0.copy()
            backend.tangent_rk4(coef, g, M, dt, steps)
            out["tangent"] = (g, M)

        rows.append((name, members * steps / _time(flow, repeat),
                     members * steps / _time(tangent, repeat)))
        finals[name] = out
    return rows, finals


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--members", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    rows, finals = bench(args.members, args.steps, args.repeat)
    print(f"active backend: {kernels.BACKEND}; {args.members} members x {args.steps} RK4 steps")
    print(f"{'backend':<8} {'flow [member-steps/s]':>22} {'tangent [member-steps/s]':>25}")
    for name, flow, tangent in rows:
        print(f"{name:<8} {flow:>22.3e} {tangent:>25.3e}")
    if len(finals) == 2:
        a, b = finals["cython"], finals["python"]
        diff = max(np.abs(a["flow"] - b["flow"]).max(),
                   np.abs(a["tangent"][0] - b["tangent"][0]).max(),
                   np.abs(a["tangent"][1] - b["tangent"][1]).max())
        speed = rows[0][2] / rows[1][2]
        print(f"tangent speed-up cython/python: {speed:.1f}x; max |difference| = {diff:.3g}")


if __name__ == "__main__":
    main()
