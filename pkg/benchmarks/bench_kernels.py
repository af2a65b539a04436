#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--trials 20000] [--repeat 3]

Both paths run in one process via the ``backend=`` argument; setting
BLOCKQUANT_DISABLE_JIT=1 would only change the default.
"""
import argparse
import time

import numpy as np

from blockquant import kernels
from blockquant._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_mc(trials, n, repeat):
    args = (7, 0, trials, n, 1.0, 7.0, 7.0)
    t_np, (es_np, _) = best_of(lambda: kernels.mc_block_errors(*args, backend="numpy"), repeat)
    row = {"kernel": f"mc_block_errors n={n}", "numpy": t_np}
    if HAVE_NUMBA:
        kernels.mc_block_errors(7, 0, 2, n, 1.0, 7.0, 7.0, backend="numba")  # compile
        t_nb, (es_nb, _) = best_of(lambda: kernels.mc_block_errors(*args, backend="numba"), repeat)
        row["numba"] = t_nb
        row["max_diff"] = float(np.max(np.abs(es_nb - es_np)))
    return row


def bench_quantize(rows, n, repeat):
    x = np.random.default_rng(0).standard_normal((rows, n))
    t_np, (m_np, _, _) = best_of(lambda: kernels.quantize_blocks(x, 7.0, True, backend="numpy"), repeat)
    row = {"kernel": f"quantize_blocks bfp n={n}", "numpy": t_np}
    if HAVE_NUMBA:
        kernels.quantize_blocks(x[:2], 7.0, True, backend="numba")
        t_nb, (m_nb, _, _) = best_of(lambda: kernels.quantize_blocks(x, 7.0, True, backend="numba"), repeat)
        row["numba"] = t_nb
        row["max_diff"] = float(np.max(np.abs(m_nb - m_np)))
    return row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = [bench_mc(args.trials, n, args.repeat) for n in (16, 256, 4096)]
    rows += [bench_quantize(max(1, (args.trials * 64) // n), n, args.repeat) for n in (16, 256)]

    print(f"{'kernel':32s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for r in rows:
        if "numba" in r:
            print(f"{r['kernel']:32s} {r['numpy']:10.4f} {r['numba']:10.4f} "
                  f"{r['numpy'] / r['numba']:8.2f} {r['max_diff']:10.2e}")
        else:
            print(f"{r['kernel']:32s} {r['numpy']:10.4f} {'n/a':>10s}")


if __name__ == "__main__":
    main()
