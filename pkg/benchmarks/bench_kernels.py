"""Benchmark the compiled convolution kernels against the NumPy fallback.

Runs forward, input-gradient and weight-gradient passes for each conv
layer of the native-geometry model and prints per-op timings plus the
speedup of the compiled path. Usage:

    python benchmarks/bench_kernels.py [--batch 64] [--dtype float32]
"""

import argparse
import time

import numpy as np

from hisariq.nn import backend, kernels_numpy

# (name, width, cin, cout) for the four conv layers at native geometry.
LAYERS = [
    ("conv1", 1024, 1, 256),
    ("conv2", 512, 256, 128),
    ("conv3", 256, 128, 64),
    ("conv4", 128, 64, 64),
]
KH, KW = 2, 3


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def compiled_ops():
    if backend.BACKEND != "compiled":
        raise SystemExit(
            "compiled backend unavailable (HISARIQ_KERNELS=numpy set, or the "
            "extension is not built); nothing to compare")
    return (backend.conv2d_forward, backend.conv2d_backward_input,
            backend.conv2d_backward_params)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--dtype", choices=("float32", "float64"),
                        default="float32")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    dtype = np.dtype(args.dtype)
    cf, cbi, cbp = compiled_ops()
    rng = np.random.default_rng(0)
    print(f"batch={args.batch} dtype={args.dtype} "
          f"(best of {args.repeats} runs, seconds)")
    header = f"{'layer':8s} {'op':10s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    totals = {"numpy": 0.0, "compiled": 0.0}
    for name, width, cin, cout in LAYERS:
        x_pad = rng.standard_normal(
            (args.batch, 2 + KH - 1, width + KW - 1, cin)).astype(dtype)
        w = rng.standard_normal((KH, KW, cin, cout)).astype(dtype)
        b = rng.standard_normal(cout).astype(dtype)
        dy = rng.standard_normal((args.batch, 2, width, cout)).astype(dtype)
        cases = [
            ("forward", lambda: kernels_numpy.conv2d_forward(x_pad, w, b),
             lambda: cf(x_pad, w, b)),
            ("bwd_input",
             lambda: kernels_numpy.conv2d_backward_input(dy, w, x_pad.shape),
             lambda: cbi(dy, w, x_pad.shape)),
            ("bwd_params",
             lambda: kernels_numpy.conv2d_backward_params(x_pad, dy),
             lambda: cbp(x_pad, dy)),
        ]
        for op, numpy_fn, compiled_fn in cases:
            t_np = timeit(numpy_fn, args.repeats)
            t_cy = timeit(compiled_fn, args.repeats)
            totals["numpy"] += t_np
            totals["compiled"] += t_cy
            print(f"{name:8s} {op:10s} {t_np:10.4f} {t_cy:10.4f} "
                  f"{t_np / t_cy:7.2f}x")
    print("-" * len(header))
    print(f"{'total':8s} {'':10s} {totals['numpy']:10.4f} "
          f"{totals['compiled']:10.4f} "
          f"{totals['numpy'] / totals['compiled']:7.2f}x")


if __name__ == "__main__":
    main()
