"""Equation data model: operator coefficients, nonlinearity table, boundary
matrix, analytic states, presets and scaling normalisation."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy as sp

from .errors import SpecError, StateError, TableError
from .scalars import GaussianRational, is_exact_scalar, to_exact, to_float


@dataclass(frozen=True, order=True)
class Monomial:
    """``x^r * prod y_i^p[i] * prod conj(y_i)^pbar[i]``."""

    p: tuple
    pbar: tuple
    r: int = 0

    @property
    def degree(self) -> int:
        return sum(self.p) + sum(self.pbar)


def _abs(v) -> float:
    return abs(complex(v)) if isinstance(v, GaussianRational) else abs(v)


@dataclass(frozen=True)
class NonlinearityTable:
    """Finite polynomial ``f(x, y_0..y_{M-1})`` with analyticity bound data.

    The bound requires ``|a| <= Ca / (b^(|p|+|pbar|) * b2^r)`` for every term.
    """

    M: int
    terms: Mapping[Monomial, object]
    Ca: float = 0.0
    b: float = 5.0
    b2: float = 5.0

    def __post_init__(self):
        for mono, a in self.terms.items():
            if len(mono.p) != self.M or len(mono.pbar) != self.M:
                raise TableError(f"term {mono} references arguments beyond M={self.M}",
                                 term=str(mono))
            if mono.degree == 0:
                raise TableError("terms of total degree 0 would break f(x, 0) = 0",
                                 term=str(mono))
            if min(mono.p + mono.pbar) < 0 or mono.r < 0:
                raise TableError(f"negative exponent in {mono}")
        if self.b <= 4 or self.b2 <= 4:
            raise TableError(f"bound radii must exceed 4 (got b={self.b}, b2={self.b2})")
        for mono, a in self.terms.items():
            limit = self.Ca / (self.b ** mono.degree * self.b2 ** mono.r)
            if _abs(a) > limit * (1 + 1e-12):
                raise TableError(
                    f"coefficient {a} of {mono} exceeds the bound Ca/(b^deg b2^r) = {limit}",
                    term=str(mono))

    @staticmethod
    def build(M: int, terms: Mapping[Monomial, object], b: float = 5.0, b2: float = 5.0,
              Ca: float | None = None) -> "NonlinearityTable":
        """Table whose ``Ca`` defaults to the smallest certifying amplitude."""
        terms = {m: a for m, a in terms.items() if a != 0}
        if Ca is None:
            Ca = max((_abs(a) * b ** m.degree * b2 ** m.r for m, a in terms.items()),
                     default=0.0)
        return NonlinearityTable(M, dict(terms), float(Ca), float(b), float(b2))

    def iter_terms(self):
        return iter(sorted(self.terms))

    def is_empty(self) -> bool:
        return not self.terms

    def has_conjugates(self) -> bool:
        return any(any(m.pbar) for m in self.terms)

    def grouped(self) -> dict:
        """``{(p, pbar): {r: a}}``: the coefficients of each ``A_p(x)``."""
        out: dict = {}
        for m in sorted(self.terms):
            out.setdefault((m.p, m.pbar), {})[m.r] = self.terms[m]
        return out

    def scaled(self, s) -> "NonlinearityTable":
        terms = {m: a * s for m, a in self.terms.items()}
        return NonlinearityTable(self.M, terms, self.Ca * float(abs(complex(s))), self.b, self.b2)

    def exact_coeffs(self) -> bool:
        return all(is_exact_scalar(a) for a in self.terms.values())

    def evaluate(self, x, args: Sequence, conj_args: Sequence | None = None):
        """Pointwise value; ``args[i]`` holds samples of ``d_x^i y``."""
        if conj_args is None and self.has_conjugates():
            conj_args = [np.conj(a) for a in args]
        total = 0
        for m, a in self.terms.items():
            coef = to_float(a, isinstance(a, GaussianRational) or isinstance(a, complex))
            term = coef * (np.asarray(x) ** m.r if m.r else 1)
            for i, e in enumerate(m.p):
                if e:
                    term = term * args[i] ** e
            for i, e in enumerate(m.pbar):
                if e:
                    term = term * conj_args[i] ** e
            total = total + term
        return total


@dataclass(frozen=True)
class PdeSpec:
    """``d_t^N y = sum_j zeta_j d_x^j y + f(x, y, ..., d_x^{M-1} y)`` with
    boundary rows ``B Y^x(0, t) = 0``.

    ``controlled`` lists the space orders whose traces at x = 1 act as
    controls.
    """

    N: int
    M: int
    zeta: tuple
    nonlinearity: NonlinearityTable
    B: tuple = ()
    complex_kind: bool = False
    name: str = "custom"
    controlled: tuple = ()
    forward_wellposed: bool | None = None

    def __post_init__(self):
        if self.N < 1 or self.M <= self.N:
            raise SpecError(f"need M > N >= 1 (got N={self.N}, M={self.M})")
        if len(self.zeta) != self.M + 1:
            raise SpecError(f"zeta must have M+1={self.M + 1} entries")
        if self.zeta[self.M] == 0:
            raise SpecError("leading coefficient zeta_M must be nonzero")
        if self.nonlinearity.M != self.M:
            raise SpecError("nonlinearity table arity differs from M")
        if not self.complex_kind:
            if self.nonlinearity.has_conjugates():
                raise SpecError("conjugate factors need a complex spec")
            for z in self.zeta:
                if isinstance(z, GaussianRational) and z.im != 0 or isinstance(z, complex) and z.imag != 0:
                    raise SpecError("complex operator coefficient in a real spec")
        if self.B:
            if any(len(row) != self.M for row in self.B):
                raise SpecError("boundary matrix must have M columns")
            if len(self.B) > self.M:
                raise SpecError("boundary matrix has more rows than M")
            rank = np.linalg.matrix_rank(np.array([[complex(v) for v in row] for row in self.B]))
            if rank != len(self.B):
                raise SpecError("boundary matrix must have full row rank")
        nl = self.nonlinearity
        if not nl.is_empty() and min(nl.b, nl.b2) <= rhat(self):
            warnings.warn(f"nonlinearity radii b={nl.b}, b2={nl.b2} are below the "
                          f"controllability threshold {rhat(self):.4g}", stacklevel=3)

    @property
    def lam(self) -> Fraction:
        return Fraction(self.M, self.N)

    @property
    def v(self) -> int:
        return len(self.B)

    def exact_coeffs(self) -> bool:
        return (all(is_exact_scalar(z) for z in self.zeta)
                and self.nonlinearity.exact_coeffs()
                and all(is_exact_scalar(b) for row in self.B for b in row))

    def zeta_values(self, exact: bool):
        if exact:
            return [to_exact(z, self.complex_kind) for z in self.zeta]
        return [to_float(z, self.complex_kind) for z in self.zeta]

    def B_array(self) -> np.ndarray:
        dtype = np.complex128 if self.complex_kind else np.float64
        if not self.B:
            return np.zeros((0, self.M), dtype=dtype)
        return np.array([[to_float(b, self.complex_kind) for b in row] for row in self.B],
                        dtype=dtype)

    def linear_zeta(self) -> tuple:
        return tuple(self.zeta)


def row_reduce(B: Sequence[Sequence]) -> tuple:
    """Reduced row echelon form, exact when all entries are rational."""
    if not B:
        return ()
    exact = all(is_exact_scalar(v) and not isinstance(v, GaussianRational) for row in B for v in row)
    if exact:
        mat = sp.Matrix([[sp.Rational(Fraction(v).numerator, Fraction(v).denominator) for v in row]
                         for row in B])
        red, piv = mat.rref()
        rows = []
        for i in range(len(piv)):
            rows.append(tuple(Fraction(int(sp.fraction(red[i, j])[0]), int(sp.fraction(red[i, j])[1]))
                              for j in range(mat.shape[1])))
        return tuple(rows)
    arr = np.array([[complex(v) for v in row] for row in B])
    red, piv = sp.Matrix(arr.real if np.all(arr.imag == 0) else arr).rref(
        iszerofunc=lambda v: abs(complex(v)) < 1e-12)
    rows = []
    for i in range(len(piv)):
        row = [complex(red[i, j]) for j in range(arr.shape[1])]
        rows.append(tuple(r.real if r.imag == 0 else r for r in row))
    return tuple(rows)


def kernel_basis(B: Sequence[Sequence], M: int, exact: bool):
    """Basis of ker(B) with one vector per free column of the echelon form.

    Returns ``(free_columns, basis)``; vector ``i`` has a 1 at
    ``free_columns[i]`` and zeros at the other free columns.
    """
    if not B:
        basis = []
        for i in range(M):
            e = [0] * M
            e[i] = 1
            basis.append(e)
        return list(range(M)), basis
    red = row_reduce(B)
    pivots = []
    for row in red:
        for j, v in enumerate(row):
            if (abs(complex(v)) > 1e-12):
                pivots.append(j)
                break
    free = [j for j in range(M) if j not in pivots]
    basis = []
    for f in free:
        vec = [Fraction(0) if exact else 0.0] * M
        vec[f] = Fraction(1) if exact else 1.0
        for row, pc in zip(red, pivots):
            vec[pc] = -row[f] if exact else -complex(row[f])
        if not exact:
            vec = [complex(v) for v in vec]
            if all(v.imag == 0 for v in vec):
                vec = [v.real for v in vec]
        basis.append(vec)
    return free, basis


@dataclass(frozen=True)
class AnalyticState:
    """``N`` Taylor coefficient sequences with certified ``(R, C)``.

    Component ``l`` is ``d_t^l y(., tau)``; coefficient ``n`` is its
    ``n``-th space derivative at 0.
    """

    components: tuple
    R: float
    C: float
    exact: bool = False
    complex_kind: bool = False

    @property
    def N(self) -> int:
        return len(self.components)

    @property
    def n_cut(self) -> int:
        return min(len(c) for c in self.components) - 1

    def coeff(self, component: int, n: int):
        seq = self.components[component]
        if n < len(seq):
            return seq[n]
        return 0

    def evaluate(self, x, component: int = 0, derivative: int = 0):
        """Taylor sum ``sum_n alpha_{n+d} x^n / n!`` in floating point."""
        seq = self.components[component]
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=np.complex128 if self.complex_kind else float)
        term = np.ones_like(x)
        for n in range(len(seq) - derivative):
            a = to_float(seq[n + derivative], self.complex_kind)
            if a != 0:
                out = out + a * term
            term = term * x / (n + 1)
        return out

    def scaled(self, s) -> "AnalyticState":
        comps = tuple(tuple(a * s for a in c) for c in self.components)
        return certify_state(comps, self.R, complex_kind=self.complex_kind)

    def is_zero(self) -> bool:
        return all(a == 0 for c in self.components for a in c)


def certify_state(coeffs, R: float, complex_kind: bool | None = None) -> AnalyticState:
    """State with ``C = max_n |alpha_n| R^n / n!`` over the stored orders."""
    if R <= 0:
        raise StateError("radius must be positive")
    if len(coeffs) == 0:
        raise StateError("empty coefficient sequences")
    if not isinstance(coeffs[0], (list, tuple, np.ndarray)):
        coeffs = [coeffs]
    comps = [list(c) for c in coeffs]
    if any(len(c) == 0 for c in comps):
        raise StateError("empty coefficient sequences")
    flat = [a for c in comps for a in c]
    if complex_kind is None:
        complex_kind = any(isinstance(a, (complex, np.complexfloating, GaussianRational))
                           and complex(a).imag != 0 for a in flat)
    exact = all(is_exact_scalar(a) for a in flat)
    if exact:
        comps = [[to_exact(a, complex_kind) for a in c] for c in comps]
    else:
        comps = [[to_float(a, complex_kind) for a in c] for c in comps]
    C = 0.0
    logR = math.log(R)
    for c in comps:
        for n, a in enumerate(c):
            mag = _abs(a)
            if mag == 0:
                continue
            C = max(C, math.exp(math.log(float(mag)) + n * logR - math.lgamma(n + 1)))
    return AnalyticState(tuple(tuple(c) for c in comps), float(R), C, exact, complex_kind)


def zero_state(N: int, n_cut: int, R: float = 20.0, exact: bool = True,
               complex_kind: bool = False) -> AnalyticState:
    z = Fraction(0) if exact else 0.0
    if exact and complex_kind:
        z = GaussianRational(0)
    return AnalyticState(tuple((z,) * (n_cut + 1) for _ in range(N)), R, 0.0, exact, complex_kind)


def state_from_expressions(exprs: Sequence[str], n_cut: int, R: float = 20.0,
                           exact: bool = True) -> AnalyticState:
    """Taylor coefficients at 0 of sympy-parsable expressions in ``x``."""
    x = sp.Symbol("x")
    comps = []
    cplx = False
    for e in exprs:
        expr = sp.sympify(e, locals={"x": x, "I": sp.I})
        poly = sp.series(expr, x, 0, n_cut + 1).removeO() if not expr.is_polynomial(x) else sp.expand(expr)
        seq = []
        for n in range(n_cut + 1):
            c = sp.nsimplify(poly.coeff(x, n)) * sp.factorial(n)
            re, im = sp.re(c), sp.im(c)
            if im != 0:
                cplx = True
            if exact and re.is_Rational and im.is_Rational:
                seq.append(GaussianRational(Fraction(int(re.p), int(re.q)), Fraction(int(im.p), int(im.q)))
                           if im != 0 else Fraction(int(re.p), int(re.q)))
            else:
                seq.append(complex(c) if im != 0 else float(c))
        comps.append(seq)
    return certify_state(comps, R, complex_kind=cplx or None)


def rhat(spec: PdeSpec) -> float:
    """Threshold radius ``4 M exp(1 / (lambda e))``."""
    return 4 * spec.M * math.exp(1.0 / (float(spec.lam) * math.e))


def normalize(spec: PdeSpec):
    """Divide the equation by ``|zeta_M|``; returns ``(spec, time_scale)``.

    A solution ``y~`` of the normalised equation gives ``y(x, t) = y~(x, s t)``
    with ``s = |zeta_M|^(1/N)``.
    """
    zM = spec.zeta[spec.M]
    mag = abs(complex(zM))
    if mag == 1:
        return spec, 1.0
    exact_mag = None
    if isinstance(zM, (int, Fraction)):
        exact_mag = abs(Fraction(zM))
    elif isinstance(zM, GaussianRational) and zM.im == 0:
        exact_mag = abs(zM.re)
    if exact_mag is not None and spec.exact_coeffs():
        inv = 1 / exact_mag
        zeta = tuple(z * inv for z in spec.zeta)
        table = spec.nonlinearity.scaled(inv)
    else:
        inv = 1.0 / mag
        zeta = tuple(to_float(z, spec.complex_kind) * inv for z in spec.zeta)
        table = NonlinearityTable(spec.M, {m: to_float(a, spec.complex_kind) * inv
                                           for m, a in spec.nonlinearity.terms.items()},
                                  spec.nonlinearity.Ca * inv, spec.nonlinearity.b,
                                  spec.nonlinearity.b2)
    return replace(spec, zeta=zeta, nonlinearity=table), mag ** (1.0 / spec.N)


def _mono(M: int, p: dict | None = None, pbar: dict | None = None, r: int = 0) -> Monomial:
    pv = [0] * M
    qv = [0] * M
    for i, e in (p or {}).items():
        pv[i] = e
    for i, e in (pbar or {}).items():
        qv[i] = e
    return Monomial(tuple(pv), tuple(qv), r)


def _unit_rows(M: int, cols: Iterable[int]) -> tuple:
    rows = []
    for c in cols:
        row = [Fraction(0)] * M
        row[c] = Fraction(1)
        rows.append(tuple(row))
    return tuple(rows)


def _quarter_turn(angle: float):
    """``exp(i angle)`` as an exact Gaussian rational when angle is k*pi/2."""
    k = angle / (math.pi / 2)
    if abs(k - round(k)) < 1e-15:
        return [GaussianRational(1, 0), GaussianRational(0, 1),
                GaussianRational(-1, 0), GaussianRational(0, -1)][int(round(k)) % 4]
    return complex(math.cos(angle), math.sin(angle))


PRESETS = (
    "kdv", "heat", "heat_neumann", "backward_heat", "ks",
    "boussinesq_neumann", "bad_boussinesq_neumann",
    "boussinesq_dirichlet", "bad_boussinesq_dirichlet",
    "gl_dirichlet", "gl_neumann", "linear_potential",
)


def make_preset(name: str, theta: float = 0.0, phi: float = 0.0,
                potential: Sequence | None = None, complex_backend: bool = True,
                b: float | None = None) -> PdeSpec:
    """Catalogue of worked equations with their boundary rows at x = 0."""
    F = Fraction
    name = {"gl": "gl_dirichlet", "boussinesq": "boussinesq_neumann"}.get(name, name)
    if name not in PRESETS:
        raise SpecError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")

    def table(M, terms, lam):
        radius = b if b is not None else math.ceil(4 * M * math.exp(1.0 / (lam * math.e))) + 1
        return NonlinearityTable.build(M, terms, radius, radius)

    if name == "kdv":
        M = 3
        nl = table(M, {_mono(M, {0: 1, 1: 1}): F(1)}, 3)
        return PdeSpec(1, 3, (F(0), F(1), F(0), F(1)), nl, _unit_rows(M, [0, 1]),
                       name=name, controlled=(0,), forward_wellposed=True)
    if name in ("heat", "heat_neumann", "backward_heat", "linear_potential"):
        M = 2
        sign = F(-1) if name == "backward_heat" else F(1)
        terms = {}
        if name == "linear_potential":
            for r, v in enumerate(potential if potential is not None else [F(1)]):
                if v != 0:
                    terms[_mono(M, {0: 1}, r=r)] = v
        nl = table(M, terms, 2)
        col = 1 if name == "heat_neumann" else 0
        return PdeSpec(1, 2, (F(0), F(0), sign), nl, _unit_rows(M, [col]), name=name,
                       controlled=(col,), forward_wellposed=(name != "backward_heat"))
    if name == "ks":
        M = 4
        nl = table(M, {_mono(M, {0: 1, 1: 1}): F(-1)}, 4)
        return PdeSpec(1, 4, (F(0), F(0), F(-1), F(0), F(-1)), nl, _unit_rows(M, [0, 2]),
                       name=name, controlled=(0, 2), forward_wellposed=True)
    if "boussinesq" in name:
        M = 4
        sign = F(1) if name.startswith("bad") else F(-1)
        if name.endswith("neumann"):
            terms = {_mono(M, {0: 1, 2: 1}): F(-2), _mono(M, {1: 2}): F(-2)}
            cols = [1, 3]
        else:
            terms = {_mono(M, {0: 1, 1: 1}): F(-2)}
            cols = [0, 2]
        nl = table(M, terms, 2)
        return PdeSpec(2, 4, (F(0), F(0), F(1), F(0), sign), nl, _unit_rows(M, cols),
                       name=name, controlled=tuple(cols),
                       forward_wellposed=False if name.startswith("bad") else None)
    # Ginzburg-Landau
    if not complex_backend:
        raise SpecError("the Ginzburg-Landau presets need the complex backend")
    M = 2
    ez = _quarter_turn(theta)
    ef = _quarter_turn(phi)
    nl = table(M, {_mono(M, {0: 2}, {0: 1}): ef}, 2)
    col = 0 if name == "gl_dirichlet" else 1
    zero = GaussianRational(0) if isinstance(ez, GaussianRational) else 0j
    return PdeSpec(1, 2, (zero, zero, ez), nl, _unit_rows(M, [col]), complex_kind=True,
                   name=name, controlled=(col,), forward_wellposed=math.cos(theta) > 0)


# ---------------------------------------------------------------- JSON spec IO

def _scalar_to_json(v):
    if isinstance(v, GaussianRational):
        return {"re": str(v.re), "im": str(v.im)}
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, int):
        return v
    return float(v)


def _scalar_from_json(v, complex_kind: bool):
    if isinstance(v, dict):
        re, im = v.get("re", 0), v.get("im", 0)
        if isinstance(re, str) or isinstance(im, str) or (isinstance(re, int) and isinstance(im, int)):
            return GaussianRational(Fraction(re), Fraction(im))
        return complex(float(re), float(im))
    if isinstance(v, list):
        return _scalar_from_json({"re": v[0], "im": v[1]}, complex_kind)
    if isinstance(v, str):
        q = Fraction(v)
        return GaussianRational(q) if complex_kind else q
    if isinstance(v, int):
        return GaussianRational(v) if complex_kind else Fraction(v)
    return complex(v) if complex_kind else float(v)


def spec_to_json(spec: PdeSpec) -> dict:
    nl = spec.nonlinearity
    return {
        "name": spec.name,
        "N": spec.N,
        "M": spec.M,
        "zeta": [_scalar_to_json(z) for z in spec.zeta],
        "nonlinearity": {
            "terms": [{"p": list(m.p), "pbar": list(m.pbar), "r": m.r,
                       "a": _scalar_to_json(a)} for m, a in sorted(nl.terms.items())],
            "Ca": nl.Ca, "b": nl.b, "b2": nl.b2,
        },
        "B": [[_scalar_to_json(v) for v in row] for row in spec.B],
        "complex": spec.complex_kind,
        "controlled": list(spec.controlled),
        "forward_wellposed": spec.forward_wellposed,
    }


def spec_from_json(doc: dict | str) -> PdeSpec:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        N, M = int(doc["N"]), int(doc["M"])
        cplx = bool(doc.get("complex", False))
        zeta = tuple(_scalar_from_json(z, cplx) for z in doc["zeta"])
        nl_doc = doc.get("nonlinearity", {}) or {}
        terms = {}
        for t in nl_doc.get("terms", []):
            p = tuple(int(e) for e in t["p"])
            pbar = tuple(int(e) for e in t.get("pbar", [0] * M))
            terms[Monomial(p, pbar, int(t.get("r", 0)))] = _scalar_from_json(t["a"], cplx)
        b = float(nl_doc.get("b", 5.0))
        b2 = float(nl_doc.get("b2", 5.0))
        Ca = nl_doc.get("Ca")
        table = NonlinearityTable.build(M, terms, b, b2, None if Ca is None else float(Ca))
        B_raw = [[_scalar_from_json(v, False) if not isinstance(v, dict) else _scalar_from_json(v, True)
                  for v in row] for row in doc.get("B", [])]
        B = row_reduce(B_raw) if B_raw else ()
    except KeyError as exc:
        raise SpecError(f"spec document missing field {exc}") from exc
    controlled = tuple(doc.get("controlled", []))
    if not controlled and B:
        controlled = tuple(next(j for j, v in enumerate(row) if abs(complex(v)) > 1e-12) for row in B)
    wellposed = doc.get("forward_wellposed")
    return PdeSpec(N, M, zeta, table, B, cplx, doc.get("name", "custom"), controlled,
                   None if wellposed is None else bool(wellposed))


def warn_radius(spec: PdeSpec, R: float, what: str = "state") -> None:
    threshold = rhat(spec)
    if R <= threshold:
        warnings.warn(f"{what} radius {R:.4g} is not above the threshold {threshold:.4g}",
                      stacklevel=3)
