"""Pure-NumPy convolution kernels (fallback for the compiled extension).

Convolutions are expressed as one shifted matmul per kernel offset, so the
heavy lifting still lands in BLAS. Arrays are NHWC; weights are
(kh, kw, cin, cout). All functions operate on pre-padded inputs.
"""

import numpy as np


def conv2d_forward(x_pad, w, b):
    kh, kw, _, cout = w.shape
    n, hp, wp, _ = x_pad.shape
    h, wd = hp - kh + 1, wp - kw + 1
    out = np.empty((n, h, wd, cout), dtype=x_pad.dtype)
    out[:] = b
    for dh in range(kh):
        for dw in range(kw):
            out += x_pad[:, dh:dh + h, dw:dw + wd, :] @ w[dh, dw]
    return out


def conv2d_backward_input(dy, w, pad_shape):
    kh, kw, _, _ = w.shape
    _, h, wd, _ = dy.shape
    dx_pad = np.zeros(pad_shape, dtype=dy.dtype)
    for dh in range(kh):
        for dw in range(kw):
            dx_pad[:, dh:dh + h, dw:dw + wd, :] += dy @ w[dh, dw].T
    return dx_pad


def conv2d_backward_params(x_pad, dy):
    kh = x_pad.shape[1] - dy.shape[1] + 1
    kw = x_pad.shape[2] - dy.shape[2] + 1
    _, h, wd, _ = dy.shape
    cin, cout = x_pad.shape[3], dy.shape[3]
    dw_out = np.empty((kh, kw, cin, cout), dtype=dy.dtype)
    for dh in range(kh):
        for dw in range(kw):
            dw_out[dh, dw] = np.tensordot(
                x_pad[:, dh:dh + h, dw:dw + wd, :], dy,
                axes=([0, 1, 2], [0, 1, 2]))
    db = dy.sum(axis=(0, 1, 2))
    return dw_out, db
