"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-NumPy
fallback is used otherwise. Set HISARIQ_KERNELS=numpy or =compiled to
force a backend (the latter raises if the extension is missing).
Both backends produce identical results up to floating-point rounding;
see benchmarks/bench_kernels.py for the speed comparison.
"""

import os

import numpy as np

from . import kernels_numpy

_requested = os.environ.get("HISARIQ_KERNELS", "").strip().lower()
if _requested not in ("", "numpy", "compiled"):
    raise ValueError(
        f"HISARIQ_KERNELS must be 'numpy' or 'compiled', got {_requested!r}")

_compiled = None
if _requested != "numpy":
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
if _requested == "compiled" and _compiled is None:
    raise ImportError("HISARIQ_KERNELS=compiled but hisariq.nn._kernels "
                      "is not built; reinstall the package")

BACKEND = "compiled" if _compiled is not None else "numpy"


def _compiled_forward(x_pad, w, b):
    n, hp, wp, cin = x_pad.shape
    kh, kw, _, cout = w.shape
    h, wd = hp - kh + 1, wp - kw + 1
    out = np.empty((n, h, wd, cout), dtype=x_pad.dtype)
    out[:] = b
    buf = np.empty((n * h * wd, cin), dtype=x_pad.dtype)
    _compiled.conv_forward_acc(x_pad, w, out.reshape(n * h * wd, cout), buf)
    return out


def _compiled_backward_input(dy, w, pad_shape):
    n, h, wd, cout = dy.shape
    cin = w.shape[2]
    dx_pad = np.zeros(pad_shape, dtype=dy.dtype)
    buf = np.empty((n * h * wd, cin), dtype=dy.dtype)
    _compiled.conv_backward_input(dy.reshape(n * h * wd, cout), w, dx_pad, buf)
    return dx_pad


def _compiled_backward_params(x_pad, dy):
    kh = x_pad.shape[1] - dy.shape[1] + 1
    kw = x_pad.shape[2] - dy.shape[2] + 1
    n, h, wd, cout = dy.shape
    cin = x_pad.shape[3]
    dw_out = np.empty((kh, kw, cin, cout), dtype=dy.dtype)
    buf = np.empty((n * h * wd, cin), dtype=dy.dtype)
    _compiled.conv_backward_weights(x_pad, dy.reshape(n * h * wd, cout),
                                    dw_out, buf)
    return dw_out, dy.sum(axis=(0, 1, 2))


if BACKEND == "compiled":
    conv2d_forward = _compiled_forward
    conv2d_backward_input = _compiled_backward_input
    conv2d_backward_params = _compiled_backward_params
else:
    conv2d_forward = kernels_numpy.conv2d_forward
    conv2d_backward_input = kernels_numpy.conv2d_backward_input
    conv2d_backward_params = kernels_numpy.conv2d_backward_params
