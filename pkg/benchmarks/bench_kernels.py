"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from streetdyn import _core_py

try:
    from streetdyn import _core
except ImportError:
    _core = None


def cases(rng):
    actions = np.column_stack([rng.uniform(-0.05, 0.05, 1000), rng.uniform(-4, 4, 1000)])
    pts = rng.uniform(-50, 50, (2000, 2))
    segs = rng.uniform(-50, 50, (200, 4))
    ca, cb = rng.uniform(-5, 5, (2000, 2)), rng.uniform(-5, 5, (2000, 2))
    ha, hb = rng.uniform(-3, 3, 2000), rng.uniform(-3, 3, 2000)
    return {
        "bicycle_step x1000": lambda m: [m.bicycle_step(0.0, 0.0, 5.0, 0.0, 0.1, 0.01, 1.0, 0.9, 0.9, 0.1, 5, 0.6)
                                         for _ in range(1000)],
        "bicycle_rollout 1000": lambda m: m.bicycle_rollout((0.0, 0.0, 5.0, 0.0, 0.0), actions, 0.9, 0.9, 0.1, 5, 0.6),
        "segment_min_distance 2000x200": lambda m: m.segment_min_distance(pts, segs),
        "obb_overlap_series 2000": lambda m: m.obb_overlap_series(ca, ha, 4.5, 1.8, cb, hb, 4.5, 1.8),
        "disc_obb_overlap_series 2000": lambda m: m.disc_obb_overlap_series(ca, 0.4, cb, hb, 4.5, 1.8),
    }


def best_ms(fn, mod, repeat):
    return 1e3 * min(timeit.repeat(lambda: fn(mod), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(0)).items():
        py = best_ms(fn, _core_py, args.repeat)
        if _core is None:
            print(f"{name:32s} {py:10.3f} {'n/a':>10s} {'':>8s}")
            continue
        cy = best_ms(fn, _core, args.repeat)
        print(f"{name:32s} {py:10.3f} {cy:10.3f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
