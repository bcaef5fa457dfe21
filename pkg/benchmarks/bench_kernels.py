"""Time the hot kernels on the numba backend and on the pure-numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each operation is run once untimed per backend (JIT compilation, caches),
then timed ``--repeat`` times; the best time is reported.
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from orlat import _accel
from orlat._kernels import nudft_real
from orlat.lattice import DEFAULT_KERNEL as K
from orlat.montecarlo import chi2_direct_vs_geometric, estimate_green, simulate
from orlat.oracle import first_hit_axis, green_field


def operations(scale: float):
    n = lambda v: max(1, int(v * scale))  # noqa: E731
    rng = np.random.default_rng(0)
    vals = rng.normal(size=n(4000)) + 1j * rng.normal(size=n(4000))
    t = rng.uniform(0, np.pi, vals.size)
    return {
        "oracle sweep (first hit, horizon 2000)": lambda: first_hit_axis(K, (0, 1), n(2000), mode="float"),
        "oracle sweep (discounted field, 300 steps)": lambda: green_field(K, (0, 0), n(300), mode="float",
                                                                          discount=0.9),
        "single walk (10^5 steps)": lambda: simulate(K, (0, 1), n(100_000), np.random.default_rng(1)),
        "first-hit samplers (2 x 10^5)": lambda: chi2_direct_vs_geometric(n(200_000), 1, limit=20),
        "visit counts (10^5 paths, horizon 256)": lambda: estimate_green(K, (0, 0), (1, 1), n(100_000), 256, 1),
        "non-uniform DFT (4000 nodes x 400 modes)": lambda: nudft_real(vals, t, -200, 400),
    }


def best_time(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--scale", type=float, default=1.0, help="multiply every problem size")
    args = p.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend can be timed")
    saved = os.environ.get("ORLAT_DISABLE_NUMBA")
    rows = []
    try:
        for name, fn in operations(args.scale).items():
            timing = {}
            for backend, flag in (("numba", "0"), ("numpy", "1")):
                os.environ["ORLAT_DISABLE_NUMBA"] = flag
                if _accel.backend_name() != backend:
                    continue
                timing[backend] = best_time(fn, args.repeat)
            rows.append((name, timing))
    finally:
        if saved is None:
            os.environ.pop("ORLAT_DISABLE_NUMBA", None)
        else:
            os.environ["ORLAT_DISABLE_NUMBA"] = saved
    width = max(len(r[0]) for r in rows)
    print(f"{'operation':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for name, timing in rows:
        a, b = timing.get("numba"), timing.get("numpy")
        fa = f"{a:10.4f}" if a is not None else f"{'-':>10}"
        speed = f"{b / a:8.1f}" if a and b else f"{'-':>8}"
        print(f"{name:<{width}}  {fa}  {b:10.4f}  {speed}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
