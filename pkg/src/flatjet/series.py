"""Jet algebra: truncated 2D derivative arrays, Leibniz products, polynomial
composition, and log-domain factorial combinatorics.

A :class:`Jet2D` stores derivatives ``e[n, k] = d_t^n d_x^k y`` at a point.
Internally products run on normalised Taylor coefficients
``c[n, k] = e[n, k] / (n! k!)`` where the double Leibniz rule becomes a plain
2D convolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

from . import kernels
from .errors import JetMismatchError, TableError
from .scalars import GaussianRational


@lru_cache(maxsize=None)
def factorial_int(n: int) -> int:
    return math.factorial(n)


@lru_cache(maxsize=None)
def _factorial_floats(n: int) -> np.ndarray:
    return np.array([float(math.factorial(i)) for i in range(n + 1)])


def factorial_vector(n: int, exact: bool):
    """Factorials 0!..n! as an int object array (exact) or float array."""
    if exact:
        return np.array([factorial_int(i) for i in range(n + 1)], dtype=object)
    return _factorial_floats(n)


def _scale_array(entries: np.ndarray, exact: bool, inverse: bool) -> np.ndarray:
    rows, cols = entries.shape
    fr = factorial_vector(rows - 1, exact)
    fc = factorial_vector(cols - 1, exact)
    w = np.multiply.outer(fr, fc)
    if exact:
        out = np.empty(entries.shape, dtype=object)
        for idx in np.ndindex(entries.shape):
            v = entries[idx]
            out[idx] = v * w[idx] if inverse else v / Fraction(w[idx])
        return out
    return entries * w if inverse else entries / w


def to_taylor(entries: np.ndarray, exact: bool) -> np.ndarray:
    """Derivative array -> normalised Taylor coefficients."""
    return _scale_array(entries, exact, inverse=False)


def from_taylor(coeffs: np.ndarray, exact: bool) -> np.ndarray:
    """Normalised Taylor coefficients -> derivative array."""
    return _scale_array(coeffs, exact, inverse=True)


@dataclass(frozen=True)
class Jet2D:
    """Truncated mixed-derivative array at ``point = (x0, t0)``.

    ``known`` is ``None`` for a full rectangle. Jets produced by completion
    from boundary traces carry a boolean mask; absent entries hold ``None``
    (exact) or ``nan`` (float) and are never silently zero.
    """

    entries: np.ndarray
    point: tuple = (0, 0)
    exact: bool = False
    complex_kind: bool = False
    known: np.ndarray | None = field(default=None, compare=False)

    @property
    def n_max(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def k_max(self) -> int:
        return self.entries.shape[1] - 1

    def __getitem__(self, idx):
        n, k = idx
        if self.known is not None and not self.known[n, k]:
            raise KeyError(f"jet entry ({n}, {k}) lies outside the computed staircase")
        return self.entries[n, k]

    def is_known(self, n: int, k: int) -> bool:
        if n < 0 or k < 0 or n > self.n_max or k > self.k_max:
            return False
        return self.known is None or bool(self.known[n, k])

    def known_mask(self) -> np.ndarray:
        if self.known is None:
            return np.ones(self.entries.shape, dtype=bool)
        return self.known

    def taylor(self) -> np.ndarray:
        if self.known is not None and not self.known.all():
            raise JetMismatchError("Taylor coefficients need a full rectangular jet")
        return to_taylor(self.entries, self.exact)

    def to_float(self) -> "Jet2D":
        dtype = np.complex128 if self.complex_kind else np.float64
        if self.exact:
            out = np.full(self.entries.shape, np.nan, dtype=dtype)
            mask = self.known_mask()
            for idx in zip(*np.nonzero(mask)):
                v = self.entries[idx]
                out[idx] = complex(v) if self.complex_kind else float(v)
        else:
            out = self.entries.astype(dtype)
        return Jet2D(out, self.point, False, self.complex_kind, self.known)

    def restrict(self, n_max: int | None = None, k_max: int | None = None) -> "Jet2D":
        n_max = self.n_max if n_max is None else n_max
        k_max = self.k_max if k_max is None else k_max
        known = None if self.known is None else self.known[: n_max + 1, : k_max + 1].copy()
        return Jet2D(self.entries[: n_max + 1, : k_max + 1].copy(), self.point,
                     self.exact, self.complex_kind, known)

    def max_abs(self) -> float:
        mask = self.known_mask()
        if not mask.any():
            return 0.0
        return max(abs(complex(v)) if self.exact else abs(v)
                   for v in self.entries[mask])

    @staticmethod
    def from_taylor(coeffs: np.ndarray, point=(0, 0), exact=False, complex_kind=False) -> "Jet2D":
        return Jet2D(from_taylor(coeffs, exact), tuple(point), exact, complex_kind)

    @staticmethod
    def constant(value, n_max: int, k_max: int, point=(0, 0), exact=False,
                 complex_kind=False) -> "Jet2D":
        e = zeros((n_max + 1, k_max + 1), exact, complex_kind)
        e[0, 0] = value
        return Jet2D(e, tuple(point), exact, complex_kind)


def zeros(shape, exact: bool, complex_kind: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        z = GaussianRational(0) if complex_kind else Fraction(0)
        out[...] = z
        return out
    return np.zeros(shape, dtype=np.complex128 if complex_kind else np.float64)


def _check_match(a: Jet2D, b: Jet2D) -> None:
    if tuple(a.point) != tuple(b.point):
        raise JetMismatchError(f"jets at different points {a.point} and {b.point}")
    if a.entries.shape != b.entries.shape:
        raise JetMismatchError(
            f"truncation mismatch {a.entries.shape} vs {b.entries.shape}")
    if a.exact != b.exact:
        raise JetMismatchError("cannot mix exact and float jets")


def jet_product(a: Jet2D, b: Jet2D, backend: str | None = None) -> Jet2D:
    """Jet of the product ``y1 * y2`` by the double Leibniz rule."""
    _check_match(a, b)
    cplx = a.complex_kind or b.complex_kind
    prod = kernels.cauchy2d(a.taylor(), b.taylor(), backend=backend)
    return Jet2D(from_taylor(prod, a.exact), tuple(a.point), a.exact, cplx)


def jet_sum(a: Jet2D, b: Jet2D) -> Jet2D:
    _check_match(a, b)
    return Jet2D(a.entries + b.entries, tuple(a.point), a.exact,
                 a.complex_kind or b.complex_kind)


def jet_scale(a: Jet2D, s) -> Jet2D:
    return Jet2D(a.entries * s, tuple(a.point), a.exact, a.complex_kind)


def _conj_array(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == object:
        out = np.empty_like(arr)
        for idx in np.ndindex(arr.shape):
            out[idx] = arr[idx].conjugate()
        return out
    return np.conj(arr)


def jet_conj(a: Jet2D) -> Jet2D:
    return Jet2D(_conj_array(a.entries), tuple(a.point), a.exact, a.complex_kind)


def shift_polynomial(coeffs: dict[int, object], x0) -> list:
    """Coefficients of ``sum_r a_r x^r`` re-expanded around ``x0``."""
    if not coeffs:
        return []
    deg = max(coeffs)
    out = [0] * (deg + 1)
    for r, a in coeffs.items():
        for s in range(r + 1):
            out[s] = out[s] + a * math.comb(r, s) * (x0 ** (r - s) if r > s else 1)
    return out


def jet_poly_apply(table, jets: list[Jet2D], backend: str | None = None) -> Jet2D:
    """2D jet of ``f(x, y_0, ..., y_{M-1})`` for a polynomial coefficient table.

    ``jets[i]`` is the jet of ``d_x^i y``. Conjugate factors use the
    conjugated jet. The ``x`` dependence enters through the Taylor
    coefficients of ``A_p(x)`` re-expanded at the jet's base point.
    """
    if not jets:
        raise JetMismatchError("at least one argument jet is required")
    ref = jets[0]
    for j in jets[1:]:
        _check_match(ref, j)
    M = len(jets)
    exact = ref.exact
    cplx = any(j.complex_kind for j in jets) or any(
        any(t.pbar) for t in table.iter_terms())
    shape = ref.entries.shape
    taylors = [j.taylor() for j in jets]
    conj_taylors: dict[int, np.ndarray] = {}

    def factor(i: int, conj: bool) -> np.ndarray:
        if not conj:
            return taylors[i]
        if i not in conj_taylors:
            conj_taylors[i] = _conj_array(taylors[i])
        return conj_taylors[i]

    total = zeros(shape, exact, cplx)
    if not exact and not cplx and total.dtype != taylors[0].dtype:
        total = total.astype(taylors[0].dtype)
    x0 = ref.point[0]
    groups = table.grouped()
    for (p, pbar), poly in groups.items():
        if len(p) != M or len(pbar) != M:
            raise TableError(f"monomial {p}/{pbar} does not match {M} argument jets")
        shifted = shift_polynomial(poly, x0)
        acc = zeros(shape, exact, cplx)
        for s, a in enumerate(shifted[: shape[1]]):
            acc[0, s] = a
        if not exact:
            acc = acc.astype(np.result_type(acc.dtype, taylors[0].dtype))
        for i in range(M):
            for _ in range(p[i]):
                acc = kernels.cauchy2d(acc, factor(i, False), backend=backend)
            for _ in range(pbar[i]):
                acc = kernels.cauchy2d(acc, factor(i, True), backend=backend)
        total = total + acc
    return Jet2D(from_taylor(total, exact), tuple(ref.point), exact, cplx)


def log_factorial_ratio(n: int, k: int, lam) -> float:
    """``log Gamma(lam*n + k + 1)``, i.e. the log of ``(lam n + k)!``."""
    if n < 0 or k < 0:
        raise ValueError("orders must be non-negative")
    x = float(Fraction(lam) * n + k) if not isinstance(lam, float) else lam * n + k
    return math.lgamma(x + 1.0)


def log_gen_binomial(a: float, b: float) -> float:
    """log of the generalised binomial ``Gamma(a+1)/(Gamma(b+1)Gamma(a-b+1))``."""
    return math.lgamma(a + 1.0) - math.lgamma(b + 1.0) - math.lgamma(a - b + 1.0)


def k_q_mu(q: int, mu: float, lam: float, rel_tol: float = 1e-14,
           max_terms: int = 1_000_000) -> float:
    """Constant of the weighted Leibniz product bound.

    The inner sum over ``j`` is a Hurwitz zeta value; the outer sum over
    ``i`` is accumulated in blocks until the integral tail estimate drops
    below ``rel_tol`` of the partial sum, capped at ``max_terms`` terms.
    """
    p = mu - q
    if p <= 2:
        raise ValueError("the series converges only for mu > q + 2")
    total = 0.0
    start = 0
    block = 1024
    while start < max_terms:
        i = np.arange(start, min(start + block, max_terms), dtype=float)
        total += float(np.sum(special.zeta(p, lam * i + 1.0)))
        start += len(i)
        a = lam * start + 1.0
        tail = a ** (2.0 - p) / (lam * (p - 1.0) * (p - 2.0)) + a ** (1.0 - p) / (2.0 * lam * (p - 1.0))
        if tail < rel_tol * total:
            break
        block = min(block * 2, 262_144)
    else:
        total += tail
    return lam * 2.0 ** (mu - q + 1) * (1 + q) ** (2 * q) * total
