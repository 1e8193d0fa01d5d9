"""Timing for the slot-combining kernel: compiled extension vs numpy.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --batch 8192 --iters 30

Prints per-slot cost for both backends and the speedup.  The parity
column is the worst absolute difference across the four components,
which should sit at rounding error.
"""

import argparse
import time

import numpy as np

from cfota._kernels import BACKEND, combine_terms


def draw_case(gen, batch, n, l, m, cluster):
    h = gen.standard_normal((batch, n, l, m)) + 1j * gen.standard_normal(
        (batch, n, l, m)
    )
    h_hat = h + 0.1 * (
        gen.standard_normal((batch, n, l, m))
        + 1j * gen.standard_normal((batch, n, l, m))
    )
    z = gen.standard_normal((batch, l, m)) + 1j * gen.standard_normal(
        (batch, l, m)
    )
    x = gen.standard_normal((batch, n)) + 1j * gen.standard_normal((batch, n))
    mask = np.zeros((n, l))
    for client in range(n):
        mask[client, gen.choice(l, size=min(cluster, l), replace=False)] = 1.0
    inv_c = 1.0 / gen.uniform(0.5, 2.0, size=n)
    return h, h_hat, z, x, mask, inv_c


def time_backend(arrays, backend, iters):
    combine_terms(*arrays, 0.5, arrays[0].shape[1], backend=backend)  # warmup
    start = time.perf_counter()
    for _ in range(iters):
        combine_terms(*arrays, 0.5, arrays[0].shape[1], backend=backend)
    return (time.perf_counter() - start) / iters


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=4096, help="slots per call")
    parser.add_argument("--iters", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    gen = np.random.default_rng(args.seed)
    cases = ((4, 6, 2), (10, 16, 2), (20, 10, 4), (40, 20, 4))

    print(f"selected backend: {BACKEND}  (batch {args.batch}, "
          f"{args.iters} iterations)")
    header = f"{'(N, L, M)':>12} {'numpy us/slot':>14}"
    if BACKEND == "compiled":
        header += f" {'compiled us/slot':>17} {'speedup':>8} {'parity':>10}"
    print(header)

    for n, l, m in cases:
        arrays = draw_case(gen, args.batch, n, l, m, cluster=4)
        t_py = time_backend(arrays, "python", args.iters)
        row = f"{f'({n}, {l}, {m})':>12} {t_py / args.batch * 1e6:>14.3f}"
        if BACKEND == "compiled":
            t_fast = time_backend(arrays, "compiled", args.iters)
            ref = combine_terms(*arrays, 0.5, n, backend="python")
            fast = combine_terms(*arrays, 0.5, n, backend="compiled")
            parity = max(
                float(np.abs(a - b).max()) for a, b in zip(ref, fast)
            )
            row += (f" {t_fast / args.batch * 1e6:>17.3f}"
                    f" {t_py / t_fast:>7.1f}x {parity:>10.2e}")
        print(row)

    if BACKEND != "compiled":
        print("compiled extension not importable here; numpy path only "
              "(set up with pip install -e . --no-build-isolation)")


if __name__ == "__main__":
    main()
