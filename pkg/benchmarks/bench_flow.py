"""Time the compiled and numpy Lucas-Kanade kernels on the same frame pair.

    python benchmarks/bench_flow.py --width 1241 --height 376 --repeat 3
"""

import argparse
import time

import numpy as np
from scipy import ndimage

from seqvo.flow import compute_flow
from seqvo.flow._backend import get_kernel


def frame_pair(h, w, shift=(2.5, -1.0), seed=0):
    rng = np.random.default_rng(seed)
    a = ndimage.gaussian_filter(rng.random((h, w)), 2.0)
    a = (a - a.min()) / (a.max() - a.min())
    b = ndimage.shift(a, (shift[1], shift[0]), order=3, mode="wrap")
    return a, b


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--width", type=int, default=1241)
    p.add_argument("--height", type=int, default=376)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    a, b = frame_pair(args.height, args.width)
    results = {}
    for name in ("cython", "python"):
        try:
            get_kernel(name)
        except ImportError:
            print(f"{name:>7}: not available")
            continue
        dt, flow = best_time(lambda: compute_flow(a, b, backend=name), args.repeat)
        results[name] = (dt, flow)
        print(f"{name:>7}: {dt:8.3f} s  ({args.width}x{args.height}, best of {args.repeat})")
    if len(results) == 2:
        (tc, fc), (tp, fp) = results["cython"], results["python"]
        print(f"speedup: {tp / tc:.1f}x   max |flow difference|: {np.abs(fc - fp).max():.2e} px")


if __name__ == "__main__":
    main()
