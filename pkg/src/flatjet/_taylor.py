"""Truncated Taylor arithmetic for derivatives of the flat step function.

Series are arrays of shape ``(Q + 1, npts)`` holding Taylor coefficients
(not derivatives) in a local variable around each sample point.
"""
from __future__ import annotations

import math

import numpy as np


def series_exp(w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(w)
    out[0] = np.exp(w[0])
    for n in range(1, w.shape[0]):
        k = np.arange(1, n + 1)[:, None]
        out[n] = np.sum(k * w[1: n + 1] * out[n - 1:: -1][:n], axis=0) / n
    return out


def series_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    for n in range(a.shape[0]):
        acc = a[n].copy()
        for k in range(1, n + 1):
            acc -= b[k] * out[n - k]
        out[n] = acc / b[0]
    return out


def power_series(u0: np.ndarray, expo: float, Q: int, sign: float = 1.0) -> np.ndarray:
    """Taylor coefficients of ``(u0 + sign*h)^expo`` in ``h``."""
    binom = np.ones(Q + 1)
    for i in range(Q):
        binom[i + 1] = binom[i] * (expo - i) / (i + 1)
    q = np.arange(Q + 1)[:, None]
    return binom[:, None] * u0[None, :] ** (expo - q) * sign ** q


def step_derivs(u, Q: int, s: float) -> np.ndarray:
    """Derivatives ``0..Q`` in ``u`` of the flat step

    ``Phi(u) = phi(u) / (phi(u) + phi(1 - u))`` with ``phi(u) = exp(-u^(-s))``,
    equal to 0 for ``u <= 0`` and 1 for ``u >= 1``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.zeros((Q + 1, u.size))
    out[0, u >= 1.0] = 1.0
    inner = (u > 0.0) & (u < 1.0)
    if not inner.any():
        return out
    ui = u[inner]
    z = power_series(ui, -s, Q) - power_series(1.0 - ui, -s, Q, -1.0)
    # Phi = 1/(1+e^z); use the branch with a non-positive exponent
    pos = z[0] > 0
    res = np.zeros_like(z)
    negligible = np.abs(z[0]) > 700.0
    for mask, sgn in ((pos & ~negligible, -1.0), (~pos & ~negligible, 1.0)):
        if not mask.any():
            continue
        E = series_exp(sgn * z[:, mask])
        one_plus = E.copy()
        one_plus[0] += 1.0
        if sgn < 0:
            res[:, mask] = series_div(E, one_plus)
        else:
            num = np.zeros_like(E)
            num[0] = 1.0
            res[:, mask] = series_div(num, one_plus)
    # far inside the plateaus the step equals its limit to double precision
    res[0, negligible & ~pos] = 1.0
    fact = np.array([math.factorial(k) for k in range(Q + 1)], dtype=float)[:, None]
    out[:, inner] = res * fact
    return out
