"""Pure numpy implementations of the Cauchy-product kernels.

Arrays hold normalised Taylor coefficients, so products are plain
convolutions. Object arrays (exact scalars) go through the same code.
"""
from __future__ import annotations

import numpy as np


def _toeplitz_lower(col: np.ndarray, width: int) -> np.ndarray:
    """Lower-triangular Toeplitz matrix T with T[n, m] = col[n - m]."""
    idx = np.arange(width)[:, None] - np.arange(width)[None, :]
    mask = idx >= 0
    t = np.zeros((width, width), dtype=col.dtype)
    if col.dtype == object:
        t[...] = 0
    t[mask] = col[:width][idx[mask]]
    return t


def row_product(A: np.ndarray, B: np.ndarray, o: int, width: int,
                nzA=None, nzB=None) -> np.ndarray:
    """Outer row ``o`` of the 2D Cauchy product of ``A`` and ``B``.

    ``A`` and ``B`` have shape (rows, L, batch). Returns an array of shape
    (width, batch) with ``out[n] = sum_i sum_m A[i, m] * B[o - i, n - m]``.
    """
    nb = A.shape[2]
    out = np.zeros((width, nb), dtype=np.result_type(A.dtype, B.dtype))
    if out.dtype == object:
        out[...] = 0
    if width <= 0:
        return out
    for i in range(o + 1):
        if nzA is not None and not nzA[i]:
            continue
        if nzB is not None and not nzB[o - i]:
            continue
        a = A[i, :width, :]
        b = B[o - i, :width, :]
        if nb == 1:
            out[:, 0] += _toeplitz_lower(a[:, 0], width) @ b[:, 0]
        else:
            for m in range(width):
                out[m:, :] += a[m, :] * b[: width - m, :]
    return out


def cauchy2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full 2D Cauchy product of two (rows, cols) coefficient arrays."""
    rows, cols = a.shape
    out = np.zeros((rows, cols), dtype=np.result_type(a.dtype, b.dtype))
    if out.dtype == object:
        out[...] = 0
    mats = [_toeplitz_lower(a[i], cols) for i in range(rows)]
    for n in range(rows):
        for i in range(n + 1):
            out[n] += mats[i] @ b[n - i]
    return out
