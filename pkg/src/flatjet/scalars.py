"""Exact scalar helpers: Gaussian rationals and scalar-kind detection."""
from __future__ import annotations

import numbers
from fractions import Fraction

import numpy as np


class GaussianRational:
    """Complex number with :class:`fractions.Fraction` real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussianRational):
            re, im = re.re, re.im + Fraction(im)
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(other):
        if isinstance(other, GaussianRational):
            return other
        if isinstance(other, (int, Fraction)):
            return GaussianRational(other, 0)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return complex(self) + other
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return complex(self) - other
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return other - complex(self)
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return complex(self) * other
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return complex(self) / other
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return other / complex(self)
        return o / self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            return complex(self) ** n
        out = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __abs__(self):
        return abs(complex(self))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, np.ndarray):
                return NotImplemented  # let numpy map elementwise
            return complex(self) == other
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        sign = "+" if self.im >= 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


def is_exact_scalar(v) -> bool:
    return isinstance(v, (int, Fraction, GaussianRational)) and not isinstance(v, bool)


def to_exact(v, complex_kind: bool = False):
    """Convert an int, Fraction, GaussianRational or finite float to an exact scalar.

    Floats are converted through their exact binary value.
    """
    if isinstance(v, GaussianRational):
        if not complex_kind and v.im != 0:
            raise ValueError("complex value in a real exact context")
        return v if complex_kind else v.re
    if isinstance(v, numbers.Complex) and not isinstance(v, numbers.Real):
        c = complex(v)
        if not complex_kind and c.imag != 0:
            raise ValueError("complex value in a real exact context")
        if complex_kind:
            return GaussianRational(Fraction(c.real), Fraction(c.imag))
        v = c.real
    q = Fraction(v)
    return GaussianRational(q) if complex_kind else q


def to_float(v, complex_kind: bool = False):
    if isinstance(v, GaussianRational):
        c = complex(v)
        return c if complex_kind else c.real
    return complex(v) if complex_kind else float(v)


def object_array(values, complex_kind: bool = False) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    flat_in = arr.reshape(-1)
    flat_out = out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = to_exact(v, complex_kind)
    return out


def float_array(values, complex_kind: bool = False) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    dtype = np.complex128 if complex_kind else np.float64
    out = np.empty(arr.shape, dtype=dtype)
    flat_in = arr.reshape(-1)
    flat_out = out.reshape(-1)
    for i, v in enumerate(flat_in):
        flat_out[i] = to_float(v, complex_kind)
    return out


def exact_zero(complex_kind: bool = False):
    return GaussianRational(0) if complex_kind else Fraction(0)
