# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Convolutions gather input columns (im2col / col2im) in C loops and contract
channels with a single-threaded-order BLAS ``dgemm`` per group.  The biquad
recursion is a plain scalar loop.  Signatures mirror ``_fallback``.
"""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline void _gemm_rm(int m, int n, int k, const double* a, const double* b, double* c,
                          double beta) noexcept nogil:
    # Row-major C[m, n] = A[m, k] @ B[k, n] + beta * C, via column-major dgemm on transposes.
    cdef char trans = b'N'
    cdef double alpha = 1.0
    dgemm(&trans, &trans, &n, &m, &k, &alpha, <double*>b, &n, <double*>a, &k, &beta, c, &n)


def conv1d(x, w, bias, int stride=1, int dilation=1, int pad_left=0, int pad_right=0,
           int groups=1):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t c_in = xv.shape[0], t_in = xv.shape[1]
    cdef Py_ssize_t c_out = wv.shape[0], cig = wv.shape[1], ksz = wv.shape[2]
    if stride < 1 or dilation < 1 or groups < 1:
        raise ValueError("stride, dilation and groups must be positive")
    cdef Py_ssize_t cog = c_out // groups
    cdef Py_ssize_t span = dilation * (ksz - 1) + 1
    cdef Py_ssize_t padded = t_in + pad_left + pad_right
    if c_in != cig * groups or c_out % groups:
        raise ValueError("channel/group mismatch")
    # checked before dividing: cdivision truncates a negative quotient towards zero
    if padded < span:
        return np.zeros((c_out, 0))
    cdef Py_ssize_t t_out = (padded - span) // stride + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y = np.empty((c_out, t_out))
    cdef double[:, ::1] yv = y
    cdef Py_ssize_t o, t, ci, k, g, idx, row
    if bias is None:
        yv[:, :] = 0.0
    else:
        bv = np.ascontiguousarray(bias, dtype=np.float64)
        for o in range(c_out):
            yv[o, :] = bv[o]
    cdef double[:, ::1] col = np.empty((cig * ksz, t_out))
    with nogil:
        for g in range(groups):
            for ci in range(cig):
                for k in range(ksz):
                    row = ci * ksz + k
                    idx = k * dilation - pad_left
                    for t in range(t_out):
                        if 0 <= idx < t_in:
                            col[row, t] = xv[g * cig + ci, idx]
                        else:
                            col[row, t] = 0.0
                        idx += stride
            _gemm_rm(<int>cog, <int>t_out, <int>(cig * ksz),
                     &wv[g * cog, 0, 0], &col[0, 0], &yv[g * cog, 0], 1.0)
    return y


def conv_transpose1d(x, w, bias, int stride, int crop_left, int out_len):
    """``w`` has layout (C_out, C_in, K)."""
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    wt = np.ascontiguousarray(np.transpose(np.asarray(w, dtype=np.float64), (0, 2, 1)))
    cdef const double[:, :, ::1] wv = wt  # (C_out, K, C_in)
    cdef Py_ssize_t c_in = xv.shape[0], t_in = xv.shape[1]
    cdef Py_ssize_t c_out = wv.shape[0], ksz = wv.shape[1]
    if wv.shape[2] != c_in:
        raise ValueError("channel mismatch")
    if stride < 1 or crop_left < 0 or out_len < 0:
        raise ValueError("stride must be positive; crop and output length non-negative")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] y = np.empty((c_out, out_len))
    cdef double[:, ::1] yv = y
    cdef Py_ssize_t o, k, t, j
    if bias is None:
        yv[:, :] = 0.0
    else:
        bv = np.ascontiguousarray(bias, dtype=np.float64)
        for o in range(c_out):
            yv[o, :] = bv[o]
    if t_in == 0 or out_len == 0:
        return y
    cdef double[:, ::1] cols = np.empty((c_out * ksz, t_in))
    with nogil:
        _gemm_rm(<int>(c_out * ksz), <int>t_in, <int>c_in, &wv[0, 0, 0], &xv[0, 0],
                 &cols[0, 0], 0.0)
        for o in range(c_out):
            for k in range(ksz):
                j = k - crop_left
                for t in range(t_in):
                    if 0 <= j < out_len:
                        yv[o, j] += cols[o * ksz + k, t]
                    j += stride
    return y


def biquad_filter(b, a, x, zi):
    """Direct-form-II-transposed second-order section; ``a[0]`` must be 1."""
    cdef double b0 = b[0], b1 = b[1], b2 = b[2], a1 = a[1], a2 = a[2]
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n)
    cdef double[::1] yv = y
    cdef double z1 = zi[0], z2 = zi[1], xi, yi
    with nogil:
        for i in range(n):
            xi = xv[i]
            yi = b0 * xi + z1
            z1 = b1 * xi - a1 * yi + z2
            z2 = b2 * xi - a2 * yi
            yv[i] = yi
    return y
