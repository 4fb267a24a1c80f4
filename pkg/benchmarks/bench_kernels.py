"""Time the numba kernels against the vectorised numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py --sizes 64 256 1024 --repeat 5

Both backends are imported in the same process through ``kernels.BACKENDS``,
so the env flag is not needed here. The first numba call per signature is
excluded from timing (it triggers compilation or a cache load).
"""
import argparse
import time

import numpy as np

from syncnet.coupling import TANH
from syncnet.dynamics import ScalarNetwork, VectorNetwork, simulate
from syncnet.graph import gen_ring
from syncnet.kernels import BACKENDS, COUPLING_CODES


def best_of(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_rhs(n, degree, repeat, calls):
    topo = gen_ring(n, degree)
    rng = np.random.default_rng(n)
    theta = rng.uniform(-3, 3, n)
    omega = rng.normal(size=n)
    gain = np.ones(n)
    out = np.empty(n)
    args = (theta, omega, gain, topo.tails, topo.heads, topo.weights,
            COUPLING_CODES["tanh"], out)
    row = {}
    for name, table in BACKENDS.items():
        rhs = table["rhs_scalar"]

        def loop():
            for _ in range(calls):
                rhs(*args)
        row[name] = best_of(loop, repeat) / calls
    return row


def bench_simulate(net, t_end, dt, repeat):
    return {name: best_of(lambda: simulate(net, t_end, dt, backend=name), repeat)
            for name in BACKENDS}


def fmt(seconds):
    if seconds < 1e-3:
        return f"{seconds * 1e6:9.2f} us"
    return f"{seconds * 1e3:9.2f} ms"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 128, 512, 2048])
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--calls", type=int, default=200, help="RHS evaluations per timing")
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--dim", type=int, default=3, help="state dimension for vector runs")
    args = ap.parse_args(argv)

    header = f"{'case':<22}{'N':>6}{'numba':>14}{'numpy':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        rng = np.random.default_rng(n)
        topo = gen_ring(n, args.degree)
        scalar = ScalarNetwork(topo, rng.normal(size=n), 1.0, 2.0, TANH,
                               theta0=rng.uniform(-1, 1, n))
        q = np.tile(np.eye(args.dim), (n, 1, 1)) * rng.uniform(0.5, 2.0, (n, 1, 1))
        vector = VectorNetwork(topo, rng.normal(size=(n, args.dim)), q, 2.0, TANH,
                               theta0=rng.uniform(-1, 1, (n, args.dim)))
        cases = {
            "rhs scalar": bench_rhs(n, args.degree, args.repeat, args.calls),
            "simulate scalar rk4": bench_simulate(scalar, args.t_end, args.dt, args.repeat),
            "simulate scalar noisy": bench_simulate(scalar.replace(noise_std=0.3),
                                                    args.t_end, args.dt, args.repeat),
            "simulate vector rk4": bench_simulate(vector, args.t_end, args.dt, args.repeat),
        }
        for label, row in cases.items():
            print(f"{label:<22}{n:>6}{fmt(row['numba']):>14}{fmt(row['numpy']):>14}"
                  f"{row['numpy'] / row['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
