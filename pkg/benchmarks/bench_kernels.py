"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import sys
import timeit

import numpy as np

from terrain_synth import _pykernels

try:
    from terrain_synth import _ckernels
except ImportError:
    _ckernels = None


def game(n, rng):
    moves = rng.integers(1, 4, n)
    env_ptr = np.concatenate([[0], np.cumsum(moves)]).astype(np.int32)
    ch = rng.integers(1, 4, env_ptr[-1])
    ch_ptr = np.concatenate([[0], np.cumsum(ch)]).astype(np.int32)
    succ = rng.integers(0, n, ch_ptr[-1]).astype(np.int32)
    target = (rng.random(n) < 0.5).astype(np.uint8)
    return env_ptr, ch_ptr, succ, target


def polygon(k, rng, r=1.0):
    a = np.sort(rng.uniform(0, 2 * np.pi, k))
    return np.c_[r * np.cos(a), r * np.sin(a)]


def cases(rng):
    g = game(50_000, rng)
    subj, clip = polygon(12, rng), polygon(8, rng, 0.8) + 0.2
    pts = polygon(64, rng)
    return {
        "cpre (50k states)": lambda m: m.cpre(*g),
        "clip_convex (12 x 8 vertices)": lambda m: m.clip_convex(subj, clip),
        "polygon_area (64 vertices)": lambda m: m.polygon_area(pts),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, fn in cases(rng).items():
        assert np.allclose(np.asarray(fn(_pykernels), dtype=float), np.asarray(fn(_ckernels), dtype=float))
        t = {}
        for label, mod in (("py", _pykernels), ("c", _ckernels)):
            timer = timeit.Timer(lambda: fn(mod))
            n, _ = timer.autorange()
            t[label] = min(timer.repeat(a.repeat, n)) / n * 1e3
        print(f"{name:<32}{t['py']:>14.4f}{t['c']:>14.4f}{t['py'] / t['c']:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
