#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--frames N]

The same backends can be forced package-wide with SALBENCH_KERNELS=numpy
or SALBENCH_KERNELS=numba.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from salbench import kernels, metrics, pipeline
from salbench.types import FrameFixations, VideoMeta

WIDTH, HEIGHT = 480, 270
N_FIXATIONS = 70
SIGMA = 9.6


def timeit(fn, repeats: int) -> float:
    for _ in range(5):
        fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        times.append((time.perf_counter_ns() - t0) / 1e6)
    return statistics.median(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=100)
    args = parser.parse_args()

    rng = np.random.default_rng(1)
    video = VideoMeta("bench", WIDTH, HEIGHT, duration_ms=1000.0)
    pts = [(int(rng.integers(0, WIDTH)), int(rng.integers(0, HEIGHT))) for _ in range(N_FIXATIONS)]
    fix = FrameFixations.from_points(0, pts)

    cases = {}
    gt = None

    def render():
        return pipeline.render_saliency(fix, video, SIGMA)

    gt = render().values
    pred = gt + 0.05 * rng.random(gt.shape)

    cases["render 70 fixations"] = render
    cases["auc_judd"] = lambda: metrics.auc_judd(pred, fix)
    cases["cc"] = lambda: metrics.cc(pred, gt)
    cases["sim"] = lambda: metrics.sim(pred, gt)
    cases["nss"] = lambda: metrics.nss(pred, fix)
    cases["all four metrics"] = lambda: (
        metrics.auc_judd(pred, fix),
        metrics.cc(pred, gt),
        metrics.sim(pred, gt),
        metrics.nss(pred, fix),
    )

    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"{WIDTH}x{HEIGHT} frame, {N_FIXATIONS} fixations, median of {args.repeats} runs (ms)\n")
    header = f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends)
    print(header)
    print("-" * len(header))
    results = {b: {} for b in backends}
    for backend in backends:
        kernels.set_backend(backend)
        if backend == "numba":
            kernels.warmup()
        for name, fn in cases.items():
            results[backend][name] = timeit(fn, args.repeats)
    for name in cases:
        row = f"{name:<24}" + "".join(f"{results[b][name]:>12.3f}" for b in backends)
        print(row)
    if "numba" in results:
        total = results["numba"]["all four metrics"]
        print(f"\nall-four-metrics throughput (numba): {1000.0 / total:.0f} frames/s")


if __name__ == "__main__":
    main()
