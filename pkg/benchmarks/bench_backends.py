"""Time the pure-numpy kernels against their numba-jitted twins.

Run from the repository root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --K 200 --reps 30

Both backends execute the identical step loop (same IEEE op order), so
this measures dispatch and loop overhead only; results are bitwise equal.
Without numba installed the script reports the plain timings and exits.
"""

import argparse
import time

import numpy as np

from fedpart import backend, kernels
from fedpart.rng import stream


def time_fn(fn, args, reps):
    fn(*args)  # warm (and compile, for the jitted variant)
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def quad_args(K, d, rng):
    return (rng.standard_normal(d), rng.standard_normal(d),
            rng.standard_normal(d), rng.standard_normal(d),
            0.01, 0.01,
            rng.standard_normal((K, d)) * 0.1, rng.standard_normal((K, d)) * 0.1,
            np.zeros(d))


def logistic_args(K, rows, d_u, d_v, batch, rng):
    A = rng.standard_normal((rows, d_u))
    B = rng.standard_normal((rows, d_v))
    y = np.where(rng.integers(0, 2, rows) > 0, 1.0, -1.0)
    idx = rng.integers(0, rows, size=(K, batch))
    return (rng.standard_normal(d_u), rng.standard_normal(d_v),
            A, B, y, 0.01, 0.001, 0.001, idx, np.zeros(d_u))


def row(name, plain_s, jit_s):
    if jit_s is None:
        print(f"{name:<10} plain {plain_s * 1e3:8.3f} ms   numba unavailable")
    else:
        print(f"{name:<10} plain {plain_s * 1e3:8.3f} ms   numba "
              f"{jit_s * 1e3:8.3f} ms   speedup {plain_s / jit_s:6.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--K", type=int, default=100, help="local steps per call")
    ap.add_argument("--d", type=int, default=392, help="quadratic dimension per block")
    ap.add_argument("--rows", type=int, default=1000, help="logistic shard rows")
    ap.add_argument("--batch", type=int, default=200, help="logistic minibatch size")
    ap.add_argument("--reps", type=int, default=20, help="timed repetitions (best-of)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = stream(args.seed, "probe")
    jitted = backend.jit_kernels()

    qa = quad_args(args.K, args.d, rng)
    la = logistic_args(args.K, args.rows, args.d, args.d, args.batch, rng)

    print(f"K={args.K} d={args.d} rows={args.rows} batch={args.batch} "
          f"(best of {args.reps})")
    row("quadratic",
        time_fn(kernels.quad_local_steps, qa, args.reps),
        time_fn(jitted["quad"], qa, args.reps) if jitted else None)
    row("logistic",
        time_fn(kernels.logistic_local_steps, la, args.reps),
        time_fn(jitted["logistic"], la, args.reps) if jitted else None)

    if jitted:
        for name, plain, jit, a in (("quadratic", kernels.quad_local_steps,
                                     jitted["quad"], qa),
                                    ("logistic", kernels.logistic_local_steps,
                                     jitted["logistic"], la)):
            pu, pv = plain(*a)
            ju, jv = jit(*a)
            same = np.array_equal(pu, ju) and np.array_equal(pv, jv)
            print(f"{name:<10} backends bitwise equal: {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
