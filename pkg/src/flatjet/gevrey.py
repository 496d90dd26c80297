"""Gevrey scale, norms, inequality checks, cutoffs and trace realization.

Traces are immutable evaluators on ``[0, T]``. ``derivs(t, order)`` returns
an array of shape ``(order + 1, len(t))`` (vector traces add a leading
component axis).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _taylor
from .errors import GrowthError, KernelError, TraceError
from .scalars import is_exact_scalar, to_float


# ---------------------------------------------------------------- Gamma scale

def log_gamma_la(lam: float, a: float, k: int) -> float:
    if k < 0:
        raise ValueError("k must be non-negative")
    lam, a = float(lam), float(a)
    if k > abs(a) + 1:
        core = math.lgamma(k + 1 - a)
    else:
        core = math.lgamma(k + 1)
    return -5 * math.log(2) + lam * core - 2 * math.log(1 + k)


def gamma_la(lam: float, a: float, k: int) -> float:
    """Shifted Gevrey weight ``2^-5 Gamma(k+1-a)^lam (1+k)^-2`` (plain factorial for small k)."""
    return math.exp(log_gamma_la(lam, a, k))


@dataclass(frozen=True)
class GevreyNormParams:
    lam: float
    L: float
    a: float = 0.0
    k_trunc: int = 12
    n_grid: int = 2048
    refine: int = 4

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.k_trunc < 0:
            raise ValueError("k_trunc must be non-negative")


# ---------------------------------------------------------------- traces

def _as_t(t) -> np.ndarray:
    return np.atleast_1d(np.asarray(t, dtype=float))


class GevreyTrace:
    """Scalar trace on ``[0, T]`` with derivatives to order ``Q``."""

    kind = "base"

    def __init__(self, T: float, Q: int):
        if T <= 0:
            raise TraceError("trace domain needs T > 0")
        self.T = float(T)
        self.Q = int(Q)

    def derivs(self, t, order: int | None = None) -> np.ndarray:
        order = self.Q if order is None else order
        t = _as_t(t)
        if np.any(t < -1e-12 * self.T) or np.any(t > self.T * (1 + 1e-12)):
            raise TraceError(f"evaluation outside [0, {self.T}]")
        return self._derivs(np.clip(t, 0.0, self.T), order)

    def _derivs(self, t: np.ndarray, order: int) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def __call__(self, t):
        return self.derivs(t, 0)[0]

    def derivative(self, q: int, t):
        return self.derivs(t, q)[q]

    @property
    def complex_kind(self) -> bool:
        return False

    def breakpoints(self) -> list:
        return []

    def sample_grid(self, n: int = 2048, refine: int = 4) -> np.ndarray:
        return sample_grid(self.T, n, self.breakpoints(), refine)


def sample_grid(T: float, n: int = 2048, breakpoints: Sequence[float] = (), refine: int = 4,
                cluster_at: Sequence[float] = ()) -> np.ndarray:
    """Uniform grid, refined ``refine``-fold within one cell of each breakpoint.

    ``cluster_at`` adds geometrically spaced points approaching the given
    endpoints, for features on scales far below the grid spacing.
    """
    pts = [np.linspace(0.0, T, n + 1)]
    h = T / n
    for b in breakpoints:
        lo, hi = max(0.0, b - h), min(T, b + h)
        pts.append(np.linspace(lo, hi, 2 * refine + 1))
    for c in cluster_at:
        off = T * np.logspace(-9, 0, n // 2)
        pts.append(c + off if c <= 0.5 * T else c - off)
    g = np.unique(np.clip(np.concatenate(pts), 0.0, T))
    return g


class ZeroTrace(GevreyTrace):
    kind = "zero"

    def __init__(self, T: float, Q: int = 64, cplx: bool = False):
        super().__init__(T, Q)
        self._cplx = cplx

    @property
    def complex_kind(self) -> bool:
        return self._cplx

    def _derivs(self, t, order):
        return np.zeros((order + 1, t.size), dtype=np.complex128 if self._cplx else float)


class FunctionTrace(GevreyTrace):
    """Trace defined by a callable ``fn(t, order) -> (order+1, n)`` array."""

    kind = "tabulated"

    def __init__(self, fn: Callable, T: float, Q: int, cplx: bool = False, label: str = ""):
        super().__init__(T, Q)
        self.fn = fn
        self._cplx = cplx
        self.label = label

    @property
    def complex_kind(self) -> bool:
        return self._cplx

    def _derivs(self, t, order):
        return np.asarray(self.fn(t, order))


def exp_trace(rate: float = 1.0, T: float = 1.0, amplitude=1.0, Q: int = 64) -> FunctionTrace:
    """``amplitude * exp(rate * t)``."""
    cplx = isinstance(amplitude, complex)

    def fn(t, order):
        base = amplitude * np.exp(rate * t)
        return np.array([rate ** q * base for q in range(order + 1)])

    return FunctionTrace(fn, T, Q, cplx, label=f"exp({rate} t)")


def polynomial_trace(coeffs: Sequence, T: float = 1.0, Q: int = 64) -> FunctionTrace:
    """``sum_j coeffs[j] t^j``."""
    c = np.array([to_float(v, isinstance(v, complex)) for v in coeffs])
    cplx = np.iscomplexobj(c)

    def fn(t, order):
        out = np.zeros((order + 1, t.size), dtype=c.dtype)
        cur = c.copy()
        for q in range(order + 1):
            out[q] = np.polynomial.polynomial.polyval(t, cur) if cur.size else 0.0
            cur = np.array([j * cur[j] for j in range(1, cur.size)], dtype=c.dtype)
        return out

    return FunctionTrace(fn, T, Q, cplx, label="polynomial")


class CutoffTrace(GevreyTrace):
    """``rho = Phi((3T/4 - t)/(T/2))``: 1 on ``[0, T/4]``, 0 on ``[3T/4, T]``."""

    kind = "cutoff"

    def __init__(self, T: float, sigma: float, Q: int = 32):
        if sigma <= 1:
            raise TraceError(f"cutoff Gevrey order must exceed 1 (got {sigma})")
        super().__init__(T, Q)
        self.sigma = float(sigma)

    def breakpoints(self):
        return [self.T / 4, self.T / 2, 3 * self.T / 4]

    def _derivs(self, t, order):
        u = (0.75 * self.T - t) / (0.5 * self.T)
        d = _taylor.step_derivs(u, order, 1.0 / (self.sigma - 1.0))
        return d * ((-2.0 / self.T) ** np.arange(order + 1))[:, None]


def gevrey_cutoff(T: float, sigma: float, Q: int = 32) -> CutoffTrace:
    return CutoffTrace(T, sigma, Q)


# ---------------------------------------------------------------- Borel realization

def _weights(q: int, p: int, n: int) -> np.ndarray:
    """Coefficients of ``(d/dx)^p [x^q/q! E_n(x)]`` on the basis ``e^-x x^m / m!``."""
    W = [0] * (q + n + 1)
    for j in range(p + 1):
        for i in range(n + 1):
            m = q + i - p + j
            if m >= 0:
                W[m] += math.comb(p, j) * (-1) ** j * math.comb(q + i, i)
    return np.array([float(w) for w in W])


def _poisson_table(x: np.ndarray, m_max: int) -> np.ndarray:
    """``e^-x x^m / m!`` for ``m <= m_max`` (rows), ``x >= 0``.

    Where ``e^-x`` underflows the whole column is below 1e-150 for the
    orders used here and is returned as zero.
    """
    out = np.empty((m_max + 1, x.size))
    out[0] = np.exp(-x)
    for m in range(1, m_max + 1):
        out[m] = out[m - 1] * x / m
    return out


def sequence_conditions(lam: float, p_max: int = 60) -> bool:
    """Check the weight-sequence hypotheses of the realization lemma.

    ``a_0 = 1``, ``a_k = (lam(k-1))!/(lam k)!`` must be non-increasing,
    summable, and satisfy ``p a_p + sum_{k>p} a_k <= A p a_p`` with
    ``A = lam/(lam-1) + 1``.
    """
    lam = float(lam)
    if lam <= 1:
        return False
    A = lam / (lam - 1) + 1
    K = p_max + 400
    loga = [0.0] + [math.lgamma(lam * (k - 1) + 1) - math.lgamma(lam * k + 1) for k in range(1, K + 1)]
    a = np.exp(loga)
    if np.any(np.diff(a) > 1e-15 * a[:-1]):
        return False
    tails = np.cumsum(a[::-1])[::-1]
    for p in range(1, p_max + 1):
        if p * a[p] + tails[p + 1] > A * p * a[p] * (1 + 1e-12):
            return False
    return True


class BorelTrace(GevreyTrace):
    """``f(t) = sum_q d_q s^q/q! E_{Q-q}(beta_q s)``, ``s = |t - tau|``.

    ``E_n(x) = e^-x sum_{i<=n} x^i/i!`` equals ``1 + O(x^{n+1})`` at 0, so
    ``f^{(q)}(tau) = d_q`` exactly for ``q <= Q`` while each term is damped
    on the scale ``1/beta_q``.
    """

    kind = "borel"

    def __init__(self, d, betas, tau: float, T: float, C: float, H: float, Htilde: float,
                 lam: float):
        d = np.asarray(d)
        super().__init__(T, len(d) - 1)
        self.d = d
        self.betas = np.asarray(betas, dtype=float)
        self.tau = float(tau)
        self.direction = 1.0 if self.tau == 0.0 else -1.0
        self.C, self.H, self.Htilde, self.lam = float(C), float(H), float(Htilde), float(lam)
        self._w: dict = {}

    @property
    def complex_kind(self) -> bool:
        return np.iscomplexobj(self.d)

    def breakpoints(self):
        return []

    def sample_grid(self, n: int = 2048, refine: int = 4) -> np.ndarray:
        return sample_grid(self.T, n, (), refine, cluster_at=(self.tau,))

    def weight(self, q: int, p: int) -> np.ndarray:
        key = (q, p)
        if key not in self._w:
            self._w[key] = _weights(q, p, self.Q - q)
        return self._w[key]

    def term_derivs(self, q: int, t: np.ndarray, order: int) -> np.ndarray:
        """Derivatives of ``(t - tau)^q/q! E_{Q-q}(beta_q |t - tau|)``."""
        s = self.direction * (t - self.tau)
        beta = self.betas[q]
        out = np.zeros((order + 1, t.size))
        if beta == 0.0:
            for p in range(min(order, q) + 1):
                out[p] = s ** (q - p) / math.factorial(q - p) * self.direction ** (p + q)
            return out
        P = _poisson_table(beta * s, self.Q + order + 1)
        for p in range(order + 1):
            W = self.weight(q, p)
            out[p] = (beta ** (p - q)) * (W @ P[: W.size]) * self.direction ** (p + q)
        return out

    def _derivs(self, t, order):
        out = np.zeros((order + 1, t.size), dtype=self.d.dtype if np.iscomplexobj(self.d) else float)
        for q, dq in enumerate(self.d):
            if dq != 0:
                out = out + dq * self.term_derivs(q, t, order)
        return out

    def growth_ratios(self, t=None) -> np.ndarray:
        """``max_t |f^{(p)}| / (C Htilde^p (lam p)!)`` for ``p <= Q``."""
        t = self.sample_grid() if t is None else _as_t(t)
        vals = np.max(np.abs(self.derivs(t, self.Q)), axis=1)
        logb = np.array([math.log(self.C) + p * math.log(self.Htilde) + math.lgamma(self.lam * p + 1)
                         for p in range(self.Q + 1)]) if self.C > 0 else None
        if logb is None:
            return np.where(vals == 0, 0.0, np.inf)
        return vals / np.exp(logb)


def minimal_growth_constant(d, H: float, lam: float) -> float:
    best = 0.0
    for q, v in enumerate(d):
        mag = abs(complex(v))
        if mag:
            best = max(best, math.exp(math.log(mag) - q * math.log(H) - math.lgamma(lam * q + 1)))
    return best


def borel_realize(d, H: float, Htilde: float, lam: float, T: float = 1.0, tau: float = 0.0,
                  C: float | None = None, n_grid: int = 2048, rounds: int = 4) -> BorelTrace:
    """Realize ``f^{(q)}(tau) = d_q`` (``q <= Q``) with ``|f^{(q)}| <= C Htilde^q (lam q)!``.

    The damping rates ``beta_q`` are chosen by coordinate search on a
    sample grid to minimise the worst growth ratio; the achieved ratios are
    stored on the returned trace for inspection.
    """
    lam = float(lam)
    if lam <= 1:
        raise GrowthError("realization needs lam > 1", lam=lam)
    if Htilde <= math.exp(1 / math.e) * H:
        raise GrowthError("Htilde must exceed e^(1/e) H", H=H, Htilde=Htilde)
    if tau not in (0, 0.0, T):
        raise TraceError("realization point must be an endpoint of [0, T]")
    if not sequence_conditions(lam):
        raise GrowthError("weight sequence hypotheses fail", lam=lam)
    vals = [complex(v) if (isinstance(v, complex) or (is_exact_scalar(v) and complex(v).imag))
            else float(v) for v in d]
    cplx = any(isinstance(v, complex) for v in vals)
    arr = np.array(vals, dtype=np.complex128 if cplx else float)
    Q = len(arr) - 1
    cmin = minimal_growth_constant(arr, H, lam)
    if C is None:
        C = cmin
    elif cmin > C * (1 + 1e-12):
        bad = next(q for q, v in enumerate(arr)
                   if abs(v) > C * math.exp(q * math.log(H) + math.lgamma(lam * q + 1)) * (1 + 1e-12))
        raise GrowthError(f"|d_{bad}| exceeds C H^q (lam q)!", q=bad, C=C)
    base = np.array([H * max(lam * q, 1.0) ** lam for q in range(Q + 1)])
    trace = BorelTrace(arr, base, tau, T, C, H, Htilde, lam)
    if C == 0 or not np.any(arr != 0):
        return trace
    _search_rates(trace, n_grid, rounds)
    return trace


def _search_rates(trace: BorelTrace, n_grid: int, rounds: int) -> None:
    """Coordinate search over ``beta_q = base_q * scale`` minimising the worst growth ratio.

    Scales run over a coarse geometric ladder (plus the undamped choice 0),
    then the best rung is bisected in log-scale.
    """
    Q, lam = trace.Q, trace.lam
    t = trace.sample_grid(n_grid)
    logb = np.array([math.log(trace.C) + p * math.log(trace.Htilde) + math.lgamma(lam * p + 1)
                     for p in range(Q + 1)])
    inv_bound = np.exp(-logb)[:, None]
    base = trace.betas.copy()
    active = [q for q in range(Q + 1) if trace.d[q] != 0]

    def contrib(q, scale):
        trace.betas[q] = base[q] * scale
        return trace.d[q] * trace.term_derivs(q, t, Q) * inv_bound

    ladder = [0.0] + list(2.0 ** (np.arange(-16, 25) / 2.0))
    chosen = {q: 1.0 for q in active}
    parts = {q: contrib(q, 1.0) for q in active}
    total = sum(parts.values())
    for _ in range(rounds):
        changed = False
        for q in active:
            rest = total - parts[q]
            best_s, best_part = chosen[q], parts[q]
            best_v = np.max(np.abs(total))

            def consider(sc):
                nonlocal best_s, best_part, best_v
                part = contrib(q, sc)
                v = np.max(np.abs(rest + part))
                if v < best_v * (1 - 1e-9):
                    best_s, best_part, best_v = sc, part, v

            for sc in ladder:
                consider(sc)
            if best_s > 0:
                for step in (2 ** 0.25, 2 ** 0.125, 2 ** 0.0625):
                    centre = best_s
                    consider(centre * step)
                    consider(centre / step)
            if best_s != chosen[q]:
                changed = True
                chosen[q], parts[q] = best_s, best_part
            total = rest + parts[q]
        if not changed:
            break
    for q in active:
        trace.betas[q] = base[q] * chosen[q]


class VectorTrace:
    """``M`` scalar traces on a common domain."""

    kind = "vector"

    def __init__(self, components: Sequence[GevreyTrace]):
        if not components:
            raise TraceError("vector trace needs at least one component")
        T = components[0].T
        if any(abs(c.T - T) > 1e-12 * T for c in components):
            raise TraceError("components live on different domains")
        self.components = list(components)
        self.T = T
        self.Q = min(c.Q for c in components)

    @property
    def M(self) -> int:
        return len(self.components)

    @property
    def complex_kind(self) -> bool:
        return any(c.complex_kind for c in self.components)

    def derivs(self, t, order: int | None = None) -> np.ndarray:
        order = self.Q if order is None else order
        t = _as_t(t)
        out = np.zeros((self.M, order + 1, t.size),
                       dtype=np.complex128 if self.complex_kind else float)
        for i, c in enumerate(self.components):
            out[i] = c.derivs(t, order)
        return out

    def __call__(self, t):
        return self.derivs(t, 0)[:, 0]

    def breakpoints(self):
        return sorted({b for c in self.components for b in c.breakpoints()})


class CombinationTrace(GevreyTrace):
    """``sum_i w_i f_i`` for scalar traces ``f_i``."""

    kind = "combination"

    def __init__(self, weights: Sequence, traces: Sequence[GevreyTrace]):
        super().__init__(traces[0].T, min(t.Q for t in traces))
        self.weights = list(weights)
        self.traces = list(traces)

    @property
    def complex_kind(self) -> bool:
        return any(isinstance(w, complex) for w in self.weights) or any(
            t.complex_kind for t in self.traces)

    def _derivs(self, t, order):
        out = np.zeros((order + 1, t.size), dtype=np.complex128 if self.complex_kind else float)
        for w, tr in zip(self.weights, self.traces):
            out = out + w * tr.derivs(t, order)
        return out

    def sample_grid(self, n: int = 2048, refine: int = 4) -> np.ndarray:
        return np.unique(np.concatenate([tr.sample_grid(n, refine) for tr in self.traces]))


def borel_realize_in_kernel(D, B, H: float, Htilde: float, lam: float, T: float = 1.0,
                            tau: float = 0.0, C: float | None = None, tol: float = 1e-10,
                            n_grid: int = 2048) -> VectorTrace:
    """Vector trace with ``F^{(q)}(tau) = D_q`` and ``B F ≡ 0``.

    ``D`` has shape ``(Q + 1, M)``. Each coordinate of ``D_q`` in a basis of
    ``ker B`` (unit vector on a free column of the reduced echelon form) is
    realized by :func:`borel_realize`.
    """
    from .model import kernel_basis

    D = np.asarray(D, dtype=object)
    Qp1, M = D.shape
    rows = [list(r) for r in B] if B is not None and len(B) else []
    exact = all(is_exact_scalar(v) for v in D.reshape(-1)) and all(
        is_exact_scalar(b) for r in rows for b in r)
    for q in range(Qp1):
        for r in rows:
            s = sum((b * D[q, m] for m, b in enumerate(r) if b != 0), 0)
            if exact:
                bad = s != 0
            else:
                scale = max(1.0, max(abs(complex(v)) for v in D[q]))
                bad = abs(complex(s)) > tol * scale
            if bad:
                raise KernelError(f"D_{q} lies outside ker(B)", q=q, residual=abs(complex(s)))
    if not rows:
        free, basis = list(range(M)), [[1 if i == j else 0 for i in range(M)] for j in range(M)]
    else:
        free, basis = kernel_basis(rows, M, exact)
    cplx = any(complex(v).imag != 0 for v in D.reshape(-1)) or any(
        complex(x).imag != 0 for vec in basis for x in vec)
    if C is None:
        C = minimal_growth_constant([max(abs(complex(v)) for v in D[q]) for q in range(Qp1)], H, lam)
    scalar = []
    for col in free:
        seq = D[:, col]
        if all(v == 0 for v in seq):
            scalar.append(None)
        else:
            scalar.append(borel_realize(list(seq), H, Htilde, lam, T, tau, C, n_grid=n_grid))
    comps = []
    for m in range(M):
        ws, trs = [], []
        for vec, tr in zip(basis, scalar):
            w = vec[m]
            if tr is not None and w != 0:
                wv = complex(w) if cplx and complex(w).imag else float(complex(w).real)
                ws.append(wv)
                trs.append(tr)
        if not trs:
            comps.append(ZeroTrace(T, Qp1 - 1, cplx))
        elif len(trs) == 1 and ws[0] == 1.0:
            comps.append(trs[0])
        else:
            comps.append(CombinationTrace(ws, trs))
    return VectorTrace(comps)


class BlendTrace(VectorTrace):
    """``rho * hat + (1 - rho) * tilde`` with Leibniz-rule derivatives."""

    kind = "blend"

    def __init__(self, hat: VectorTrace, tilde: VectorTrace, rho: GevreyTrace):
        if hat.M != tilde.M:
            raise TraceError("blended traces have different lengths")
        for tr in (tilde, rho):
            if abs(tr.T - hat.T) > 1e-12 * hat.T:
                raise TraceError("blended traces live on different domains")
        self.hat, self.tilde, self.rho = hat, tilde, rho
        self.components = [None] * hat.M
        self.T = hat.T
        self.Q = min(hat.Q, tilde.Q, rho.Q)

    @property
    def complex_kind(self) -> bool:
        return self.hat.complex_kind or self.tilde.complex_kind

    def derivs(self, t, order: int | None = None) -> np.ndarray:
        order = self.Q if order is None else order
        t = _as_t(t)
        h = self.hat.derivs(t, order)
        g = self.tilde.derivs(t, order)
        r = self.rho.derivs(t, order)
        diff = h - g
        out = r[0] * h + (1.0 - r[0]) * g
        for n in range(1, order + 1):
            for j in range(1, n + 1):
                rj = r[j]
                if np.any(rj != 0):
                    out[:, n] = out[:, n] + math.comb(n, j) * rj * diff[:, n - j]
        return out

    def breakpoints(self):
        return sorted(set(self.hat.breakpoints()) | set(self.tilde.breakpoints())
                      | set(self.rho.breakpoints()))


def blend_traces(hat: VectorTrace, tilde: VectorTrace, rho: GevreyTrace) -> BlendTrace:
    return BlendTrace(hat, tilde, rho)


def trace_table(trace, t, order: int) -> tuple[list[str], np.ndarray]:
    """Header and rows ``(t, f, f', ...)`` for CSV export."""
    t = _as_t(t)
    d = trace.derivs(t, order)
    if d.ndim == 2:
        d = d[None]
    header = ["t"]
    cols = [t]
    for i in range(d.shape[0]):
        for q in range(order + 1):
            v = d[i, q]
            if np.iscomplexobj(v):
                header += [f"c{i}_d{q}_re", f"c{i}_d{q}_im"]
                cols += [v.real, v.imag]
            else:
                header.append(f"c{i}_d{q}")
                cols.append(v)
    return header, np.column_stack(cols)


# ---------------------------------------------------------------- norms

def _grid_derivs(u, params: GevreyNormParams, extra: int = 1, T: float | None = None):
    if isinstance(u, np.ndarray):
        return u
    grid = u.sample_grid(params.n_grid, params.refine)
    return u.derivs(grid, params.k_trunc + extra)


def norm_from_samples(derivs: np.ndarray, lam: float, L: float, a: float, k_trunc: int) -> float:
    """Truncated norm from sampled derivatives ``derivs[k]``, ``k <= k_trunc + 1``."""
    sup = np.max(np.abs(derivs), axis=1)
    semi = 0.0
    for k in range(min(k_trunc, derivs.shape[0] - 2) + 1):
        if sup[k + 1] == 0:
            continue
        logw = abs(k - a) * math.log(L) + log_gamma_la(lam, a, k)
        semi = max(semi, math.exp(math.log(sup[k + 1]) - logw))
    return max(64.0 * sup[0], 8.0 / L * semi)


def gevrey_norm(u, params: GevreyNormParams) -> float:
    """``max(2^6 sup|u|, 2^3 L^-1 sup_{k <= k_trunc} sup|u^(k+1)| / (L^|k-a| Gamma_{lam,a}(k)))``.

    ``u`` is a scalar trace or an array of sampled derivatives of shape
    ``(k_trunc + 2, npts)``; sups are taken over the sample grid.
    """
    d = _grid_derivs(u, params)
    return norm_from_samples(d, params.lam, params.L, params.a, params.k_trunc)


# ---------------------------------------------------------------- inequality suites

@dataclass
class InequalityReport:
    case: str
    n_checked: int
    violations: int
    worst_ratio: float
    details: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"case": self.case, "n_checked": self.n_checked, "violations": self.violations,
                "worst_ratio": self.worst_ratio, "details": self.details[:20]}


INEQUALITY_CASES = ("algebra", "cost_of_derivative", "embedding_plus", "embedding_minus",
                    "monotone_L", "shift_compare", "vandermonde", "binomial_bound")


def _random_trace_samples(rng, T: float, order: int, n: int = 257) -> np.ndarray:
    """Derivatives of a random polynomial-times-exponential on ``[0, T]``."""
    t = np.linspace(0.0, T, n)
    deg = int(rng.integers(0, 6))
    coeffs = rng.normal(size=deg + 1) * rng.choice([1e-2, 1.0, 10.0])
    rate = float(rng.normal())
    out = np.zeros((order + 1, n))
    # (p e^{rt})^{(q)} = e^{rt} sum_j C(q,j) r^{q-j} p^{(j)}
    pders = [coeffs]
    for _ in range(order):
        c = pders[-1]
        pders.append(np.array([j * c[j] for j in range(1, c.size)]) if c.size > 1 else np.zeros(1))
    e = np.exp(rate * t)
    for q in range(order + 1):
        acc = np.zeros(n)
        for j in range(q + 1):
            acc += math.comb(q, j) * rate ** (q - j) * np.polynomial.polynomial.polyval(t, pders[j])
        out[q] = e * acc
    return out


def _leibniz(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    for n in range(u.shape[0]):
        for j in range(n + 1):
            out[n] += math.comb(n, j) * u[j] * v[n - j]
    return out


def cost_of_derivative_factor(lam: float, L: float, alpha: float, delta: float, d: float,
                              b: float = 0.0, C: float = 1.0) -> float:
    """Right-hand factor of the cost-of-derivative inequality with constant ``C``."""
    return (C * (L ** -d + math.sqrt(1 + L * L) ** C)
            + (1 + delta) * alpha ** b * L ** d * (lam * d / (math.e * math.log(alpha))) ** (lam * d))


def shift_compare_constant(lam: float, L: float, a1: float, a2: float, k_max: int = 400) -> float:
    """``sup_k`` of the weight ratio relating the ``a2`` and ``a1`` norms."""
    best = 1.0
    for k in range(k_max + 1):
        r = (abs(k - a2) * math.log(L) + log_gamma_la(lam, a2, k)
             - abs(k - a1) * math.log(L) - log_gamma_la(lam, a1, k))
        best = max(best, math.exp(r))
    return best


def gen_binomial_log(a: float, b: float) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def check_inequalities(case: str, n_samples: int = 100, k_trunc: int = 10, seed: int = 0,
                       rel_slack: float = 1e-9) -> InequalityReport:
    """Evaluate both sides of a Gevrey-scale inequality on random inputs."""
    rng = np.random.default_rng(seed)
    viol, worst, details = 0, 0.0, []

    def record(lhs, rhs, info):
        nonlocal viol, worst
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        worst = max(worst, ratio)
        if lhs > rhs * (1 + rel_slack):
            viol += 1
            details.append({**info, "lhs": lhs, "rhs": rhs})

    for i in range(n_samples):
        lam = float(rng.choice([1.5, 2.0, 3.0, 4.0]))
        L = float(np.exp(rng.uniform(np.log(0.5), np.log(20.0))))
        T = float(rng.uniform(0.2, 2.0))
        info = {"sample": i, "lam": lam, "L": L}
        if case == "algebra":
            u = _random_trace_samples(rng, T, k_trunc + 1)
            v = _random_trace_samples(rng, T, k_trunc + 1)
            uv = _leibniz(u, v)
            nu, nv, nuv = (norm_from_samples(x, lam, L, 0.0, k_trunc) for x in (u, v, uv))
            record(nuv, nu * nv, info)
        elif case == "cost_of_derivative":
            # q = 1, a = b = 0, d = 1, alpha = 2, delta = 1/2 at matching derivative order
            u = _random_trace_samples(rng, T, k_trunc + 1)
            lhs = norm_from_samples(u[1:], lam, 2 * L, 0.0, k_trunc - 1)
            rhs = cost_of_derivative_factor(lam, L, 2.0, 0.5, 1.0) * norm_from_samples(u, lam, L, 0.0, k_trunc)
            record(lhs, rhs, info)
        elif case == "embedding_plus":
            a = float(rng.uniform(0, 4))
            u = _random_trace_samples(rng, T, k_trunc + 1)
            record(norm_from_samples(u, lam, L, 0.0, k_trunc),
                   max(L ** a, L ** -a) * norm_from_samples(u, lam, L, a, k_trunc), {**info, "a": a})
        elif case == "embedding_minus":
            a = -float(rng.uniform(0, 4))
            u = _random_trace_samples(rng, T, k_trunc + 1)
            record(norm_from_samples(u, lam, L, a, k_trunc),
                   max(L ** a, L ** -a) * norm_from_samples(u, lam, L, 0.0, k_trunc), {**info, "a": a})
        elif case == "monotone_L":
            a = float(rng.uniform(-3, 3))
            L2 = L * float(np.exp(rng.uniform(0, 2)))
            u = _random_trace_samples(rng, T, k_trunc + 1)
            record(norm_from_samples(u, lam, L2, a, k_trunc),
                   norm_from_samples(u, lam, L, a, k_trunc), {**info, "a": a, "L2": L2})
        elif case == "shift_compare":
            a1 = float(rng.uniform(0, 3))
            a2 = a1 + float(rng.uniform(0.01, 3))
            u = _random_trace_samples(rng, T, k_trunc + 1)
            C = shift_compare_constant(lam, L, a1, a2)
            record(norm_from_samples(u, lam, L, a1, k_trunc),
                   C * norm_from_samples(u, lam, L, a2, k_trunc), {**info, "a1": a1, "a2": a2})
        elif case == "vandermonde":
            k, q = (int(v) for v in rng.integers(0, 40, size=2))
            a = int(rng.integers(0, k + q + 1))
            lhs = sum(math.comb(k, j) * math.comb(q, a - j)
                      for j in range(max(0, a - q), min(k, a) + 1))
            rhs = math.comb(k + q, a)
            if lhs != rhs:
                viol += 1
                details.append({"k": k, "q": q, "a": a})
            worst = max(worst, lhs / rhs)
        elif case == "binomial_bound":
            lam = float(rng.uniform(1.0, 5.0))
            k, n = (int(v) for v in rng.integers(0, 40, size=2))
            j, ii = int(rng.integers(0, k + 1)), int(rng.integers(0, n + 1))
            lhs = math.log(math.comb(k, j)) + math.log(math.comb(n, ii))
            rhs = math.log(lam) + gen_binomial_log(k + lam * n, j + lam * ii)
            record(math.exp(lhs - rhs), 1.0, {"lam": lam, "k": k, "j": j, "n": n, "i": ii})
        else:
            raise ValueError(f"unknown case {case!r}; choose from {', '.join(INEQUALITY_CASES)}")
    return InequalityReport(case, n_samples, viol, worst, details)


# ---------------------------------------------------------------- empirical order

def fit_gevrey_order(values: Sequence[float], q_start: int = 1) -> tuple[float, float, float]:
    """Least-squares fit ``log v_q = log C + q log H + sigma log q!``; returns ``(C, H, sigma)``."""
    qs = np.arange(q_start, q_start + len(values))
    y = np.log(np.asarray(values, dtype=float))
    X = np.column_stack([np.ones(len(qs)), qs, [math.lgamma(q + 1) for q in qs]])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(np.exp(coef[0])), float(np.exp(coef[1])), float(coef[2])


def gevrey_envelope(values: Sequence[float], sigma: float, q_start: int = 1) -> tuple[float, float]:
    """``(C, H)`` with ``v_q <= C H^q (q!)^sigma`` for all given ``q`` (fit, then lift)."""
    qs = np.arange(q_start, q_start + len(values))
    y = np.log(np.asarray(values, dtype=float)) - sigma * np.array([math.lgamma(q + 1) for q in qs])
    X = np.column_stack([np.ones(len(qs)), qs])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    lift = float(np.max(y - X @ coef))
    return float(np.exp(coef[0] + lift)), float(np.exp(coef[1]))
