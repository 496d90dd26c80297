"""Streaming evaluation of the nonlinearity along one axis of a 2D Taylor array.

Both jet recursions produce a 2D array of normalised Taylor coefficients one
"outer" row at a time: the forward recursion streams time orders (inner axis
= space), completion streams space orders (inner axis = time). Every factor
of ``f`` is a lazily evaluated series whose outer row ``o`` depends only on
rows ``<= o`` of its inputs, so products can be advanced row by row.

Row arrays have shape ``(width, batch)``; widths never increase with ``o``.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .series import zeros

TIME, SPACE = "time", "space"


def _falling(top: int, count: int) -> int:
    """(top)! / (top - count)!"""
    out = 1
    for v in range(top - count + 1, top + 1):
        out *= v
    return out


def _conj(arr):
    if arr.dtype == object:
        out = np.empty_like(arr)
        for idx in np.ndindex(arr.shape):
            out[idx] = arr[idx].conjugate()
        return out
    return np.conj(arr)


class _Series:
    def __init__(self, n_outer: int, L: int, nb: int, exact: bool, cplx: bool):
        self.n_outer = n_outer
        self.L = L
        self.exact = exact
        self.cplx = cplx
        self.data = zeros((n_outer, L, nb), exact, cplx)
        self.width = [0] * n_outer
        self.nz = np.zeros(n_outer, dtype=np.uint8)
        self.done = 0

    def _store(self, o: int, arr) -> None:
        w = arr.shape[0]
        if w > self.L:
            arr = arr[: self.L]
            w = self.L
        self.data[o, :w] = arr
        self.width[o] = w
        self.nz[o] = 1 if w and (any(v != 0 for v in arr.reshape(-1)) if arr.dtype == object
                                 else bool(np.any(arr != 0))) else 0

    def ensure(self, o: int) -> None:
        while self.done <= o:
            self._store(self.done, self._compute(self.done))
            self.done += 1

    def row(self, o: int):
        self.ensure(o)
        return self.data[o, : self.width[o]]

    def _compute(self, o: int):  # pragma: no cover - abstract
        raise NotImplementedError


class Base(_Series):
    """The unknown; rows are assigned by the driving recursion."""

    def set_row(self, o: int, arr) -> None:
        if o != self.done:
            raise RuntimeError(f"rows must be set in order (expected {self.done}, got {o})")
        self._store(o, arr)
        self.done += 1

    def ensure(self, o: int) -> None:
        if o >= self.done:
            raise RuntimeError(f"row {o} requested before it was computed")


class Deriv(_Series):
    """``d_x^i`` of the base series."""

    def __init__(self, base: Base, i: int, mode: str):
        super().__init__(base.n_outer, base.L, base.data.shape[2], base.exact, base.cplx)
        self.base = base
        self.i = i
        self.mode = mode
        if mode == TIME:
            w = [_falling(k + i, i) for k in range(base.L)]
            self.weights = (np.array(w, dtype=object) if base.exact
                            else np.array(w, dtype=float))[:, None]

    def _compute(self, o: int):
        i = self.i
        if self.mode == TIME:
            src = self.base.row(o)
            w = max(src.shape[0] - i, 0)
            return src[i: i + w] * self.weights[:w]
        if o + i >= self.base.n_outer:
            return self.data[o, :0]
        src = self.base.row(o + i)
        return src * _falling(o + i, i)


class Conj(_Series):
    def __init__(self, s: _Series):
        super().__init__(s.n_outer, s.L, s.data.shape[2], s.exact, True)
        self.s = s

    def _compute(self, o: int):
        return _conj(self.s.row(o))


class Poly(_Series):
    """A time-independent polynomial ``sum_r a_r x^r``."""

    def __init__(self, coeffs, mode: str, n_outer: int, L: int, nb: int, exact: bool, cplx: bool):
        super().__init__(n_outer, L, nb, exact, cplx)
        self.coeffs = list(coeffs)
        self.mode = mode

    def _compute(self, o: int):
        out = zeros((self.L, self.data.shape[2]), self.exact, self.cplx)
        if self.mode == TIME:
            if o == 0:
                for r, a in enumerate(self.coeffs[: self.L]):
                    out[r, :] = a
        elif o < len(self.coeffs):
            out[0, :] = self.coeffs[o]
        return out


class Prod(_Series):
    def __init__(self, a: _Series, b: _Series):
        super().__init__(a.n_outer, a.L, a.data.shape[2], a.exact, a.cplx or b.cplx)
        self.a = a
        self.b = b

    def _compute(self, o: int):
        self.a.ensure(o)
        self.b.ensure(o)
        w = min(self.a.width[o], self.b.width[o])
        return kernels.row_product(self.a.data, self.b.data, o, w, self.a.nz, self.b.nz)


class Nonlinearity:
    """Streams the outer rows of ``f(x, y, ..., d_x^{M-1} y)``."""

    def __init__(self, table, base: Base, mode: str, x0=0):
        from .series import shift_polynomial

        self.empty = table.is_empty()
        self.products = []
        if self.empty:
            return
        M = table.M
        nb = base.data.shape[2]
        derivs = [Deriv(base, i, mode) for i in range(M)]
        conjs: dict[int, Conj] = {}
        cache: dict[tuple, _Series] = {}
        for (p, pbar), poly in table.grouped().items():
            coeffs = shift_polynomial(poly, x0)
            if not base.exact:
                dt = complex if base.cplx else float
                coeffs = [dt(complex(c)) if base.cplx else float(c) for c in coeffs]
            factors = []
            for i, e in enumerate(p):
                factors += [("y", i)] * e
            for i, e in enumerate(pbar):
                factors += [("c", i)] * e
            acc: _Series = Poly(coeffs, mode, base.n_outer, base.L, nb, base.exact, base.cplx)
            key: tuple = ()
            for fac in factors:
                key = key + (fac,)
                if key not in cache:
                    kind, i = fac
                    if kind == "y":
                        src = derivs[i]
                    else:
                        if i not in conjs:
                            conjs[i] = Conj(derivs[i])
                        src = conjs[i]
                    prev = cache.get(key[:-1])
                    cache[key] = src if prev is None else Prod(prev, src)
                node = cache[key]
            self.products.append(Prod(acc, node) if factors else acc)

    def row(self, o: int):
        """Row ``o`` of ``f``, or ``None`` when the table is empty."""
        if self.empty:
            return None
        rows = [p.row(o) for p in self.products]
        w = min(r.shape[0] for r in rows)
        total = rows[0][:w].copy()
        for r in rows[1:]:
            total = total + r[:w]
        return total


def falling_weights(count: int, length: int, exact: bool):
    """Column vector ``(n + count)! / n!`` for ``n < length``."""
    w = [_falling(n + count, count) for n in range(length)]
    arr = np.array(w, dtype=object) if exact else np.array(w, dtype=float)
    return arr[:, None]


def inv_falling(top: int, count: int, exact: bool):
    from fractions import Fraction

    v = _falling(top, count)
    return Fraction(1, v) if exact else 1.0 / v


__all__ = ["Base", "Deriv", "Conj", "Poly", "Prod", "Nonlinearity", "TIME", "SPACE",
           "falling_weights", "inv_falling"]
