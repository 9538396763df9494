#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths as the Monte Carlo campaigns use them: per-trace
exposure integration and the decoder's alignment/template scans.  Run from
the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from occauth import _kernels
from occauth.frame_codec import encode_class
from occauth.occ_channel import ChannelParams, build_schedule, sample_trace
from occauth.reference_decoder import decode


def _workload(seed=0, n_frames=54):
    rng = np.random.default_rng(seed)
    t = np.arange(n_frames) / 30.0
    left = rng.random(n_frames)
    right = rng.random(n_frames)
    valid = rng.random(n_frames) > 0.05
    lbits = rng.integers(0, 2, size=7).astype(np.uint8)
    rbits = rng.integers(0, 2, size=7).astype(np.uint8)
    offsets = np.arange(0.0, 0.72, 1 / 120.0)
    return t, left, right, valid, lbits, rbits, offsets


def bench_kernel(impl, name, repeats):
    t, left, right, valid, lbits, rbits, offsets = _workload()
    fns = {
        "frame_on_fractions": lambda: impl["frame_on_fractions"](t, 1 / 30.0, 0.25, 0.15, lbits, rbits),
        "aligned_slot_means": lambda: impl["aligned_slot_means"](t, 1 / 30.0, left, right, valid, 0.25, 0.15, 7, 0.0),
        "preamble_score_scan": lambda: impl["preamble_score_scan"](t, 1 / 30.0, left, right, valid, offsets, 0.15, 0.0),
        "template_score_scan": lambda: impl["template_score_scan"](t, 1 / 30.0, left, right, valid, offsets, 0.15, lbits, rbits),
    }
    out = {}
    for key, fn in fns.items():
        fn()  # warm up (jit compile on the numba side)
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        out[key] = (time.perf_counter() - t0) / repeats
    return out


def bench_end_to_end(repeats):
    """Full sample+decode pipeline with whichever backend is active."""
    p = ChannelParams(fps=30, noise_sigma=0.05, ambient_level=0.1, seed=1)
    sched = build_schedule(encode_class(14), 0.15, 0.25)
    decode(sample_trace(sched, p, 1.8), 0.15)  # warm up
    t0 = time.perf_counter()
    for i in range(repeats):
        import dataclasses
        trace = sample_trace(sched, dataclasses.replace(p, seed=i), 1.8)
        decode(trace, 0.15)
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    print(f"active backend: {_kernels.BACKEND}")
    numpy_times = bench_kernel(_kernels.NUMPY_IMPL, "numpy", args.repeats)
    rows = [("kernel", "numpy", "numba", "speedup")]
    if _kernels.NUMBA_IMPL is not None:
        numba_times = bench_kernel(_kernels.NUMBA_IMPL, "numba", args.repeats)
        for key in numpy_times:
            rows.append((key, f"{numpy_times[key] * 1e6:9.1f}us",
                         f"{numba_times[key] * 1e6:9.1f}us",
                         f"{numpy_times[key] / numba_times[key]:6.1f}x"))
    else:
        for key in numpy_times:
            rows.append((key, f"{numpy_times[key] * 1e6:9.1f}us", "n/a", "n/a"))

    width = max(len(r[0]) for r in rows) + 2
    for r in rows:
        print(f"{r[0]:<{width}}{r[1]:>12}{r[2]:>12}{r[3]:>9}")

    per = bench_end_to_end(args.repeats)
    print(f"\nsample+decode pipeline ({_kernels.BACKEND}): {per * 1e3:.3f} ms/trace "
          f"-> {1 / per:,.0f} traces/s")


if __name__ == "__main__":
    main()
