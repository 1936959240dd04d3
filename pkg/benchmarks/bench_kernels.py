"""Time the LSTM scan kernels: numba @njit vs the pure-numpy fallback.

    python benchmarks/bench_kernels.py [--batch 1024] [--steps 80] [--units 64 32] [--repeat 5]

Both implementations are imported directly, so the env flag does not matter
here. Outputs are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from bangla_toxic import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(T, B, H, repeat):
    rng = np.random.default_rng(0)
    xp = rng.normal(scale=0.5, size=(T, B, 4 * H))
    U = rng.normal(scale=0.1, size=(4 * H, H))
    dh = rng.normal(size=(T, B, H))

    rows = {}
    for name, fwd, bwd in (
        ("numpy", kernels.lstm_scan_forward_numpy, kernels.lstm_scan_backward_numpy),
        ("numba", kernels.lstm_scan_forward_numba, kernels.lstm_scan_backward_numba),
    ):
        if fwd is None:
            continue
        gates, c, h = fwd(xp, U)
        bwd(dh, gates, c, h, U)  # warm up (compiles on first numba call)
        rows[name] = (
            best_of(lambda: fwd(xp, U), repeat),
            best_of(lambda: bwd(dh, gates, c, h, U), repeat),
            (gates, c, h, *bwd(dh, gates, c, h, U)),
        )

    if len(rows) == 2:
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip(rows["numpy"][2], rows["numba"][2]))
        print(f"T={T} B={B} H={H}  max |numpy - numba| = {diff:.2e}")
    for name, (f, b, _) in rows.items():
        print(f"  {name:6s} forward {f * 1e3:8.2f} ms   backward {b * 1e3:8.2f} ms")
    if len(rows) == 2:
        (nf, nb, _), (jf, jb, _) = rows["numpy"], rows["numba"]
        print(f"  speedup forward x{nf / jf:.2f}   backward x{nb / jb:.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=1024)
    ap.add_argument("--steps", type=int, default=80)
    ap.add_argument("--units", type=int, nargs="+", default=[64, 32])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"numba available: {kernels.NUMBA_AVAILABLE}, default backend: {kernels.BACKEND}")
    for H in args.units:
        bench(args.steps, args.batch, H, args.repeat)
    for B in (1, 32):
        bench(args.steps, B, args.units[0], args.repeat)


if __name__ == "__main__":
    main()
