# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Cauchy-product kernels for float64 and complex128 arrays."""
import numpy as np
cimport cython

ctypedef fused scalar:
    double
    double complex


cdef void _row_product(scalar[:, :, ::1] A, scalar[:, :, ::1] B, int o,
                       int width, unsigned char[::1] nzA,
                       unsigned char[::1] nzB, scalar[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, m, n, c
    cdef Py_ssize_t nb = A.shape[2]
    cdef scalar av
    for i in range(o + 1):
        if nzA[i] == 0 or nzB[o - i] == 0:
            continue
        for m in range(width):
            for n in range(m, width):
                for c in range(nb):
                    out[n, c] = out[n, c] + A[i, m, c] * B[o - i, n - m, c]


def row_product(A, B, int o, int width, nzA=None, nzB=None):
    A = np.ascontiguousarray(A)
    B = np.ascontiguousarray(B)
    dt = np.result_type(A.dtype, B.dtype)
    if dt != np.float64 and dt != np.complex128:
        raise TypeError("compiled kernel supports float64 and complex128 only")
    A = A.astype(dt, copy=False)
    B = B.astype(dt, copy=False)
    nb = A.shape[2]
    out = np.zeros((max(width, 0), nb), dtype=dt)
    if width <= 0:
        return out
    na = np.ones(A.shape[0], dtype=np.uint8) if nzA is None else np.ascontiguousarray(nzA, dtype=np.uint8)
    nbz = np.ones(B.shape[0], dtype=np.uint8) if nzB is None else np.ascontiguousarray(nzB, dtype=np.uint8)
    if dt == np.float64:
        _row_product[double](A, B, o, width, na, nbz, out)
    else:
        _row_product[cython.doublecomplex](A, B, o, width, na, nbz, out)
    return out


cdef void _cauchy2d(scalar[:, ::1] a, scalar[:, ::1] b, scalar[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t rows = a.shape[0], cols = a.shape[1]
    cdef Py_ssize_t n, k, i, j
    cdef scalar acc
    for n in range(rows):
        for k in range(cols):
            acc = 0
            for i in range(n + 1):
                for j in range(k + 1):
                    acc = acc + a[i, j] * b[n - i, k - j]
            out[n, k] = acc


def cauchy2d(a, b):
    dt = np.result_type(a.dtype, b.dtype)
    if dt != np.float64 and dt != np.complex128:
        raise TypeError("compiled kernel supports float64 and complex128 only")
    a = np.ascontiguousarray(a, dtype=dt)
    b = np.ascontiguousarray(b, dtype=dt)
    out = np.zeros(a.shape, dtype=dt)
    if dt == np.float64:
        _cauchy2d[double](a, b, out)
    else:
        _cauchy2d[cython.doublecomplex](a, b, out)
    return out
