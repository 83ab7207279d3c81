# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels.

Same contracts as kernels_numpy; one BLAS gemm per kernel offset with the
slice gather/scatter done in C, so no per-offset temporaries are allocated
in Python. Arrays are C-contiguous NHWC, float32 or float64.
"""

from libc.string cimport memcpy

from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused real:
    float
    double


cdef void _gemm(char ta, char tb, int m, int n, int k, real alpha,
                real *a, int lda, real *b, int ldb, real beta,
                real *c, int ldc) noexcept nogil:
    if real is float:
        sgemm(&ta, &tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)
    else:
        dgemm(&ta, &tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)


cdef void _gather(real[:, :, :, ::1] x_pad, Py_ssize_t dh, Py_ssize_t dw,
                  Py_ssize_t h, Py_ssize_t wd, real[:, ::1] buf) noexcept nogil:
    cdef Py_ssize_t n, i, j, r
    cdef Py_ssize_t nn = x_pad.shape[0]
    cdef Py_ssize_t cin = x_pad.shape[3]
    for n in range(nn):
        for i in range(h):
            for j in range(wd):
                r = (n * h + i) * wd + j
                memcpy(&buf[r, 0], &x_pad[n, i + dh, j + dw, 0],
                       cin * sizeof(real))


def conv_forward_acc(real[:, :, :, ::1] x_pad, real[:, :, :, ::1] w,
                     real[:, ::1] out, real[:, ::1] buf):
    """out(M,cout) += sum over kernel offsets of slice(M,cin) @ w[dh,dw]."""
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1]
    cdef int cin = <int> w.shape[2], cout = <int> w.shape[3]
    cdef Py_ssize_t h = x_pad.shape[1] - kh + 1
    cdef Py_ssize_t wd = x_pad.shape[2] - kw + 1
    cdef int m = <int> out.shape[0]
    cdef Py_ssize_t dh, dw
    with nogil:
        for dh in range(kh):
            for dw in range(kw):
                _gather(x_pad, dh, dw, h, wd, buf)
                # C-order C(M,cout) += A(M,cin) @ B(cin,cout), BLAS col-major.
                _gemm(c'n', c'n', cout, m, cin, <real> 1.0,
                      &w[dh, dw, 0, 0], cout, &buf[0, 0], cin,
                      <real> 1.0, &out[0, 0], cout)


def conv_backward_input(real[:, ::1] dy, real[:, :, :, ::1] w,
                        real[:, :, :, ::1] dx_pad, real[:, ::1] buf):
    """Accumulate dy @ w[dh,dw]^T back into the padded input gradient."""
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1]
    cdef int cin = <int> w.shape[2], cout = <int> w.shape[3]
    cdef Py_ssize_t h = dx_pad.shape[1] - kh + 1
    cdef Py_ssize_t wd = dx_pad.shape[2] - kw + 1
    cdef int m = <int> dy.shape[0]
    cdef Py_ssize_t nn = dx_pad.shape[0]
    cdef Py_ssize_t dh, dw, n, i, j, r, c
    with nogil:
        for dh in range(kh):
            for dw in range(kw):
                # buf(M,cin) = dy(M,cout) @ w[dh,dw]^T
                _gemm(c't', c'n', cin, m, cout, <real> 1.0,
                      &w[dh, dw, 0, 0], cout, &dy[0, 0], cout,
                      <real> 0.0, &buf[0, 0], cin)
                for n in range(nn):
                    for i in range(h):
                        for j in range(wd):
                            r = (n * h + i) * wd + j
                            for c in range(cin):
                                dx_pad[n, i + dh, j + dw, c] += buf[r, c]


def conv_backward_weights(real[:, :, :, ::1] x_pad, real[:, ::1] dy,
                          real[:, :, :, ::1] dw_out, real[:, ::1] buf):
    """dw[dh,dw] = slice^T @ dy for every kernel offset."""
    cdef Py_ssize_t kh = dw_out.shape[0], kw = dw_out.shape[1]
    cdef int cin = <int> dw_out.shape[2], cout = <int> dw_out.shape[3]
    cdef Py_ssize_t h = x_pad.shape[1] - kh + 1
    cdef Py_ssize_t wd = x_pad.shape[2] - kw + 1
    cdef int m = <int> dy.shape[0]
    cdef Py_ssize_t dh, dw
    with nogil:
        for dh in range(kh):
            for dw in range(kw):
                _gather(x_pad, dh, dw, h, wd, buf)
                # C-order dwmat(cin,cout) = buf^T(cin,M) @ dy(M,cout)
                _gemm(c'n', c't', cout, cin, m, <real> 1.0,
                      &dy[0, 0], cout, &buf[0, 0], cin,
                      <real> 0.0, &dw_out[dh, dw, 0, 0], cout)
