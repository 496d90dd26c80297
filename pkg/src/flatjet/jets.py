"""Jet correspondence between analytic states and boundary time-traces.

* :func:`time_jets_from_state` marches the equation forward in time order:
  row ``n >= N`` of the jet at ``(0, tau)`` follows from rows ``n - N`` and
  below.
* :func:`complete_jet_from_traces` goes the other way: it solves the
  equation for the top space derivative and fills columns ``k >= M`` from
  the boundary rows ``k < M``.
* Compatibility checks test ``B D_n = 0`` on the induced boundary jets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy as sp

from . import _stream as st
from .errors import InsufficientOrderError, SpecError, SymmetryError
from .model import AnalyticState, PdeSpec, certify_state
from .scalars import GaussianRational, to_exact, to_float
from .series import Jet2D, factorial_vector, zeros


@dataclass(frozen=True)
class JetBoundParams:
    R: float
    Rp: float
    mu: float
    lam: float
    Cfit: float = 0.0


def required_widths(spec: PdeSpec, n_max: int, k_max: int) -> list[int]:
    """Highest space order needed on each time row ``m <= n_max``."""
    return [k_max + spec.M * ((n_max - m) // spec.N) for m in range(n_max + 1)]


def required_state_length(spec: PdeSpec, n_max: int, k_max: int) -> int:
    """Number of Taylor coefficients each state component must provide."""
    return required_widths(spec, n_max, k_max)[0] + 1


def _use_exact(spec: PdeSpec, exact: bool | None, *states: AnalyticState) -> bool:
    if exact is None:
        return spec.exact_coeffs() and all(s.exact for s in states)
    if exact and not spec.exact_coeffs():
        raise SpecError("exact mode needs rational equation coefficients")
    return exact


def _coerce(v, exact: bool, cplx: bool):
    return to_exact(v, cplx) if exact else to_float(v, cplx)


def time_jets_from_state(spec: PdeSpec, Y0: AnalyticState, n_max: int, k_max: int,
                         exact: bool | None = None, tau=0) -> Jet2D:
    """Jet ``d_n^k`` at ``(0, tau)`` of any solution starting from ``Y0``.

    Rows ``n < N`` are the state coefficients; higher rows follow from the
    equation. The result does not presuppose that a solution exists.
    """
    if Y0.N != spec.N:
        raise SpecError(f"state has {Y0.N} components but the equation needs N={spec.N}")
    exact = _use_exact(spec, exact, Y0)
    cplx = spec.complex_kind or Y0.complex_kind
    N, M = spec.N, spec.M
    W = required_widths(spec, n_max, k_max)
    for m in range(min(N, n_max + 1)):
        have = len(Y0.components[m])
        if have < W[m] + 1:
            raise InsufficientOrderError(
                f"component {m} needs Taylor coefficients up to order {W[m]} "
                f"(has {have - 1}) for n_max={n_max}, k_max={k_max}",
                component=m, required_order=W[m])
    L = W[0] + 1
    base = st.Base(n_max + 1, L, 1, exact, cplx)
    fk = factorial_vector(L, exact)
    fn = factorial_vector(n_max + N, exact)
    for m in range(min(N, n_max + 1)):
        row = zeros((W[m] + 1, 1), exact, cplx)
        for k in range(W[m] + 1):
            a = _coerce(Y0.components[m][k], exact, cplx)
            row[k, 0] = a / Fraction(fn[m] * fk[k]) if exact else a / (fn[m] * fk[k])
        base.set_row(m, row)
    zeta = spec.zeta_values(exact)
    derivs = [st.Deriv(base, j, st.TIME) for j in range(M + 1)]
    f = st.Nonlinearity(spec.nonlinearity, base, st.TIME, x0=0)
    for m in range(0, n_max - N + 1):
        w = W[m + N] + 1
        acc = zeros((w, 1), exact, cplx)
        for j in range(M + 1):
            if zeta[j] != 0:
                acc = acc + zeta[j] * derivs[j].row(m)[:w]
        frow = f.row(m)
        if frow is not None:
            acc = acc + frow[:w]
        base.set_row(m + N, acc * st.inv_falling(m + N, N, exact))
    entries = zeros((n_max + 1, k_max + 1), exact, cplx)
    for n in range(n_max + 1):
        row = base.row(n)[: k_max + 1, 0]
        entries[n, :] = row * (fn[n] * fk[: k_max + 1])
    return Jet2D(entries, (0, tau), exact, cplx)


def staircase_mask(spec: PdeSpec, n_max: int, k_max: int) -> np.ndarray:
    """Entries reachable from boundary rows of time order ``<= n_max``."""
    n = np.arange(n_max + 1)[:, None]
    k = np.arange(k_max + 1)[None, :]
    steps = -((-(k - spec.M + 1)) // spec.M)  # ceil((k - M + 1) / M)
    return n + spec.N * np.maximum(steps, 0) <= n_max


def complete_batch(spec: PdeSpec, rows: np.ndarray, k_max: int, exact: bool = False):
    """Vectorised completion over a batch of base points.

    ``rows`` has shape ``(n_max + 1, M, batch)`` and holds ``e_n^k`` for
    ``k < M``. Returns ``(entries, mask)`` with entries of shape
    ``(batch, n_max + 1, k_max + 1)``; entries outside ``mask`` are absent.
    """
    N, M = spec.N, spec.M
    n_max = rows.shape[0] - 1
    nb = rows.shape[2]
    cplx = spec.complex_kind or (rows.dtype == np.complex128) or (
        rows.dtype == object and any(isinstance(v, GaussianRational) for v in rows.reshape(-1)))
    K = max(k_max, M - 1)
    fn = factorial_vector(n_max, exact)
    fk = factorial_vector(K + M, exact)
    base = st.Base(K + 1, n_max + 1, nb, exact, cplx)
    for k in range(min(M, K + 1)):
        col = zeros((n_max + 1, nb), exact, cplx)
        for n in range(n_max + 1):
            if exact:
                col[n, :] = [_coerce(v, True, cplx) / Fraction(fn[n] * fk[k]) for v in rows[n, k, :]]
            else:
                col[n, :] = rows[n, k, :] / (fn[n] * fk[k])
        base.set_row(k, col)
    zeta = spec.zeta_values(exact)
    inv_top = (1 / zeta[M]) if exact else 1.0 / zeta[M]
    f = st.Nonlinearity(spec.nonlinearity, base, st.SPACE, x0=0)
    shiftN = st.falling_weights(N, n_max + 1, exact)
    for k in range(0, K - M + 1):
        w = base.width[k] - N
        for j in range(1, M):
            w = min(w, base.width[k + j])
        frow = f.row(k)
        if frow is not None:
            w = min(w, frow.shape[0])
        w = max(w, 0)
        acc = base.row(k)[N: N + w] * shiftN[:w]
        for j in range(M):
            if zeta[j] != 0:
                acc = acc - zeta[j] * st._falling(k + j, j) * base.row(k + j)[:w]
        if frow is not None:
            acc = acc - frow[:w]
        scale = st.inv_falling(k + M, M, exact)
        base.set_row(k + M, acc * (scale * inv_top))
    mask = np.zeros((n_max + 1, k_max + 1), dtype=bool)
    if exact:
        entries = np.empty((nb, n_max + 1, k_max + 1), dtype=object)
        entries[...] = None
    else:
        entries = np.full((nb, n_max + 1, k_max + 1), np.nan,
                          dtype=np.complex128 if cplx else np.float64)
    for k in range(k_max + 1):
        w = base.width[k]
        mask[:w, k] = True
        col = base.row(k)
        if k < M:
            # supplied traces are returned verbatim, not round-tripped through n! k!
            for n in range(w):
                entries[:, n, k] = [_coerce(v, True, cplx) for v in rows[n, k, :]] if exact else rows[n, k, :]
            continue
        for n in range(w):
            entries[:, n, k] = col[n, :] * (fn[n] * fk[k])
    return entries, mask


def complete_jet_from_traces(spec: PdeSpec, boundary_rows, k_max: int,
                             exact: bool | None = None, point=(0, 0)) -> Jet2D:
    """Fill columns ``k >= M`` from boundary rows ``e_n^k``, ``k < M``.

    ``boundary_rows`` has shape ``(n_max + 1, M)``. The result is known on
    the staircase ``n + N ceil((k - M + 1) / M) <= n_max``; other entries
    are flagged absent.
    """
    arr = np.asarray(boundary_rows, dtype=object)
    if arr.ndim != 2 or arr.shape[1] != spec.M:
        raise SpecError(f"boundary rows must have shape (n_max+1, M={spec.M})")
    if exact is None:
        exact = spec.exact_coeffs() and all(
            isinstance(v, (int, Fraction, GaussianRational)) for v in arr.reshape(-1))
    cplx = spec.complex_kind
    if not exact:
        arr = np.asarray(boundary_rows)
        cplx = cplx or np.iscomplexobj(arr)
        arr = arr.astype(np.complex128 if cplx else np.float64)
    entries, mask = complete_batch(spec, arr[:, :, None], k_max, exact)
    return Jet2D(entries[0], tuple(point), exact, cplx, mask)


def certify_jet_bound(jet: Jet2D, params: JetBoundParams) -> float:
    """Smallest ``C'`` with ``|d_n^k| <= C' (lam n + k)! / (R^k R'^(lam n) (lam n + k + 1)^mu)``."""
    lam = float(params.lam)
    logR, logRp = math.log(params.R), math.log(params.Rp)
    best = -math.inf
    mask = jet.known_mask()
    for n in range(jet.n_max + 1):
        for k in range(jet.k_max + 1):
            if not mask[n, k]:
                continue
            v = jet.entries[n, k]
            mag = abs(complex(v)) if jet.exact else abs(v)
            if mag == 0:
                continue
            s = lam * n + k
            val = (math.log(float(mag)) + k * logR + lam * n * logRp
                   + params.mu * math.log(s + 1.0) - math.lgamma(s + 1.0))
            best = max(best, val)
    return 0.0 if best == -math.inf else math.exp(best)


def bound_envelope(n: int, k: int, params: JetBoundParams) -> float:
    s = params.lam * n + k
    return math.exp(math.lgamma(s + 1.0) - k * math.log(params.R)
                    - params.lam * n * math.log(params.Rp) - params.mu * math.log(s + 1.0))


@dataclass
class CompatReport:
    max_violation: list
    n_checked: int
    verdict: bool
    tolerance: list = field(default_factory=list)
    details: list = field(default_factory=list)
    exact: bool = False

    def to_json(self) -> dict:
        return {"max_violation": [float(v) for v in self.max_violation],
                "n_checked": self.n_checked, "verdict": "pass" if self.verdict else "fail",
                "tolerance": [float(t) for t in self.tolerance], "details": self.details,
                "exact": self.exact}


def _boundary_violations(spec: PdeSpec, D: np.ndarray, exact: bool):
    """Rows of ``B D_n`` for each ``n`` (``D`` has shape (n+1, M))."""
    out = []
    for n in range(D.shape[0]):
        vals = []
        for row in spec.B:
            s = 0
            for b, d in zip(row, D[n]):
                if b != 0:
                    s = s + (to_exact(b, spec.complex_kind) if exact else to_float(b, spec.complex_kind)) * d
            vals.append(s)
        out.append(vals)
    return out


def _report(spec, viol, exact, tol_rows, n_max):
    maxv, details = [], []
    ok = True
    for n, vals in enumerate(viol):
        mags = [abs(complex(v)) for v in vals]
        m = max(mags, default=0.0)
        maxv.append(m)
        for r, (v, mag) in enumerate(zip(vals, mags)):
            bad = (v != 0) if exact else (mag > tol_rows[n])
            if bad:
                ok = False
                details.append({"n": n, "row": r, "value": mag})
    return CompatReport(maxv, n_max, ok, list(tol_rows), details, exact)


def compat_check(spec: PdeSpec, Y0: AnalyticState, n_max: int, tol: float = 1e-10,
                 exact: bool | None = None) -> CompatReport:
    """Check ``B D_n = 0`` for ``n <= n_max`` on the jets induced by ``Y0``.

    Exact mode compares with literal zero. Float mode allows ``tol`` times
    the row's certified envelope scale.
    """
    if spec.v == 0:
        return CompatReport([0.0] * (n_max + 1), n_max, True, [0.0] * (n_max + 1), [], True)
    exact = _use_exact(spec, exact, Y0)
    jet = time_jets_from_state(spec, Y0, n_max, spec.M - 1, exact=exact)
    viol = _boundary_violations(spec, jet.entries, exact)
    if exact:
        tol_rows = [0.0] * (n_max + 1)
    else:
        params = JetBoundParams(max(Y0.R, 1.0), max(Y0.R, 1.0), spec.M + 2, float(spec.lam))
        cp = certify_jet_bound(jet, params)
        tol_rows = [tol * max(1.0, cp * max(bound_envelope(n, k, params) for k in range(spec.M)))
                    for n in range(n_max + 1)]
    return _report(spec, viol, exact, tol_rows, n_max)


def linear_compat_check(spec: PdeSpec, Y0: AnalyticState, n_max: int, tol: float = 1e-10,
                        exact: bool | None = None) -> CompatReport:
    """Compatibility for ``f = 0`` by applying powers of ``P`` directly."""
    if not spec.nonlinearity.is_empty():
        raise SpecError("linear compatibility check needs an empty nonlinearity table")
    if spec.v == 0:
        return CompatReport([0.0] * (n_max + 1), n_max, True, [0.0] * (n_max + 1), [], True)
    exact = _use_exact(spec, exact, Y0)
    cplx = spec.complex_kind or Y0.complex_kind
    N, M = spec.N, spec.M
    zeta = spec.zeta_values(exact)
    D = np.empty((n_max + 1, M), dtype=object)
    for n in range(n_max + 1):
        kpow, l = divmod(n, N)
        need = M + M * kpow
        seq = [_coerce(Y0.coeff(l, i), exact, cplx) for i in range(need)]
        if len(Y0.components[l]) < need:
            raise InsufficientOrderError(f"component {l} needs order {need - 1}",
                                         component=l, required_order=need - 1)
        for _ in range(kpow):
            seq = [sum((zeta[j] * seq[i + j] for j in range(M + 1) if zeta[j] != 0), 0 * seq[0])
                   for i in range(len(seq) - M)]
        D[n, :] = seq[:M]
    viol = _boundary_violations(spec, D, exact)
    scale = [tol * max(1.0, max(abs(complex(v)) for v in D[n])) for n in range(n_max + 1)]
    return _report(spec, viol, exact, [0.0] * (n_max + 1) if exact else scale, n_max)


# ---------------------------------------------------------------- KdV symbolic path

@dataclass(frozen=True)
class KdvCompatPoly:
    l: int
    H: object
    ring: object
    m: int

    def J(self, which: int):
        """``J_{l, which}`` for ``which`` in 1, 2, 3."""
        ys = self.ring.gens
        l, H = self.l, self.H
        top = 3 * l - 1  # H depends on y_0..y_{3l-2}
        if which == 1:
            return ys[3 * l] + H
        if which == 2:
            return ys[3 * l + 1] + sum((H.diff(ys[i]) * ys[i + 1] for i in range(top)), self.ring(0))
        if which == 3:
            out = ys[3 * l + 2] + sum((H.diff(ys[i]) * ys[i + 2] for i in range(top)), self.ring(0))
            for i in range(top):
                Hi = H.diff(ys[i])
                for j in range(top):
                    out += Hi.diff(ys[j]) * ys[j + 1] * ys[i + 1]
            return out
        raise ValueError("which must be 1, 2 or 3")


def _kdv_ring(l_max: int):
    nv = 3 * l_max + 3
    return sp.ring(",".join(f"y{i}" for i in range(nv)), sp.QQ)


def kdv_compat_polys(l_max: int) -> list[KdvCompatPoly]:
    """Exact polynomials ``H_0..H_{l_max}`` of the KdV compatibility relations."""
    R, *ys = _kdv_ring(max(l_max, 0))
    half = sp.QQ(1, 2)
    H = [R(0)]
    for l in range(l_max):
        m = 3 * l + 1
        h = ys[m] + half * sum((math.comb(m, k) * ys[k] * ys[m - k] for k in range(m + 1)), R(0))
        for i in range(3 * l - 1):
            dH = H[l].diff(ys[i])
            if dH == 0:
                continue
            inner = ys[i + 3] + ys[i + 1] + half * sum(
                (math.comb(i + 1, k) * ys[k] * ys[i + 1 - k] for k in range(i + 2)), R(0))
            h += dH * inner
        H.append(h)
    return [KdvCompatPoly(l, H[l], R, 3 * l + 2) for l in range(l_max + 1)]


def eval_poly(poly, values: Sequence[Fraction]) -> Fraction:
    """Evaluate a ring polynomial at exact rational values."""
    ring = poly.ring
    vals = list(values) + [Fraction(0)] * (ring.ngens - len(values))
    total = Fraction(0)
    for monom, coeff in poly.terms():
        term = Fraction(int(coeff.numerator), int(coeff.denominator))
        for i, e in enumerate(monom):
            if e:
                term *= vals[i] ** e
        total += term
    return total


def kdv_project_to_compat(free: Sequence, l_max: int, R: float = 14.0,
                          method: str = "auto") -> AnalyticState:
    """KdV-compatible coefficients with prescribed ``alpha_{3l+2}``.

    ``method='symbolic'`` evaluates the ``H_l`` polynomials;
    ``method='recursion'`` reads the same conditions off the numeric jet
    recursion, which scales to larger ``l_max``. ``auto`` picks symbolic for
    ``l_max <= 4``.
    """
    if method == "auto":
        method = "symbolic" if l_max <= 4 else "recursion"
    free = [Fraction(v) if not isinstance(v, float) else v for v in free]
    exact = all(isinstance(v, (int, Fraction)) for v in free)
    zero = Fraction(0) if exact else 0.0
    n_len = 3 * l_max + 3
    alpha = [zero] * n_len

    def free_at(l):
        return free[l] if l < len(free) else zero

    alpha[2] = free_at(0)
    if method == "symbolic":
        polys = kdv_compat_polys(l_max)
        ys = polys[0].ring.gens
        for l in range(1, l_max + 1):
            H = polys[l].H
            if exact:
                alpha[3 * l] = -eval_poly(H, alpha)
                acc = Fraction(0)
                for i in range(3 * l - 1):
                    dH = H.diff(ys[i])
                    if dH != 0:
                        acc += eval_poly(dH, alpha) * alpha[i + 1]
                alpha[3 * l + 1] = -acc
            else:
                fa = [float(a) for a in alpha]
                alpha[3 * l] = -float(eval_poly(H, [Fraction(a) for a in fa]))
                acc = 0.0
                for i in range(3 * l - 1):
                    dH = H.diff(ys[i])
                    if dH != 0:
                        acc += float(eval_poly(dH, [Fraction(a) for a in fa])) * fa[i + 1]
                alpha[3 * l + 1] = -acc
            alpha[3 * l + 2] = free_at(l)
    elif method == "recursion":
        from .model import make_preset

        spec = make_preset("kdv")
        for l in range(1, l_max + 1):
            # row l of the jet, columns 0 and 1, only needs alpha_0..alpha_{3l+1}
            for col in (0, 1):
                trial = list(alpha[: 3 * l + 2])
                trial[3 * l + col] = zero
                st8 = AnalyticState((tuple(trial),), R, 0.0, exact)
                jet = time_jets_from_state(spec, st8, l, 1, exact=exact)
                alpha[3 * l + col] = -jet.entries[l, col]
            alpha[3 * l + 2] = free_at(l)
    else:
        raise ValueError(f"unknown method {method!r}")
    return certify_state([alpha], R)


# ---------------------------------------------------------------- parity

def symmetry_sign(mono, parity: str) -> int:
    """Sign picked up by a monomial under the reflection for ``parity``."""
    sign = (-1) ** mono.r
    for i, (e, ebar) in enumerate(zip(mono.p, mono.pbar)):
        s = (-1) ** (i + 1) if parity == "odd" else (-1) ** i
        sign *= s ** (e + ebar)
    return sign


def check_symmetric(spec: PdeSpec, parity: str) -> None:
    if parity not in ("odd", "even"):
        raise ValueError("parity must be 'odd' or 'even'")
    if spec.M % 2:
        raise SymmetryError(f"space order M={spec.M} is odd", reason="M")
    for j, z in enumerate(spec.zeta):
        if j % 2 and z != 0:
            raise SymmetryError(f"operator contains the odd derivative of order {j}", order=j)
    want = -1 if parity == "odd" else 1
    for mono in spec.nonlinearity.iter_terms():
        if symmetry_sign(mono, parity) != want:
            raise SymmetryError(f"term {mono} breaks the {parity} reflection symmetry",
                                term=str(mono))


def parity_compat(spec: PdeSpec, Y0: AnalyticState, parity: str, k_max: int) -> bool:
    """Verdict of the parity description of the compatibility set.

    Odd data (vanishing even coefficients) for Dirichlet-type rows, even
    data (vanishing odd coefficients) for Neumann-type rows.
    """
    check_symmetric(spec, parity)
    start = 0 if parity == "odd" else 1
    for comp in Y0.components:
        for n in range(start, min(k_max, len(comp) - 1) + 1, 2):
            if comp[n] != 0:
                return False
    return True
