"""Space-time field reconstructed from boundary traces at x = 0.

At every time node the 2D jet at ``(0, t)`` is completed from the trace
derivatives and the solution is the space-Taylor series on ``[-1, 1]``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from .errors import InsufficientOrderError, SpecError
from .jets import complete_batch
from .model import PdeSpec
from .series import Jet2D


def chebyshev_nodes(T: float, n: int = 129) -> np.ndarray:
    """Chebyshev-Lobatto points on ``[0, T]`` including both endpoints."""
    if n < 2:
        return np.array([0.0, T][:n])
    j = np.arange(n)
    t = 0.5 * T * (1.0 - np.cos(np.pi * j / (n - 1)))
    t[0], t[-1] = 0.0, float(T)
    return t


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FLATJET_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class TailEstimate:
    Q: float
    R1: float
    R2: float
    tail_at_x1: float

    def envelope_log(self, n: int, k: int, lam: float) -> float:
        if self.Q == 0:
            return -math.inf
        return (math.log(self.Q) + math.lgamma(k + lam * n + 1) - k * math.log(self.R1)
                - lam * n * math.log(self.R2))

    def series_tail(self, p1: int, p2: int, K: int, x: float, lam: float,
                    max_terms: int = 2000) -> float:
        """Envelope bound of ``sum_{k > K} e_{p2}^{p1+k} |x|^k / k!``."""
        if self.Q == 0:
            return 0.0
        if not math.isfinite(self.R1):
            return 0.0
        ax = abs(x)
        if ax == 0:
            return 0.0
        total, prev = 0.0, math.inf
        for k in range(K + 1, K + 1 + max_terms):
            lt = self.envelope_log(p2, p1 + k, lam) + k * math.log(ax) - math.lgamma(k + 1)
            term = math.exp(lt) if lt < 700 else math.inf
            total += term
            if term < 1e-18 * total or (term > prev and not math.isfinite(total)):
                break
            prev = term
        return total

    def to_json(self) -> dict:
        return {"Q": self.Q, "R1": self.R1, "R2": self.R2, "tail_at_x1": self.tail_at_x1}


@dataclass(frozen=True)
class SpatialField:
    spec: PdeSpec
    t_nodes: np.ndarray
    entries: np.ndarray
    mask: np.ndarray
    n_max: int
    k_max: int
    bound: TailEstimate | None = dc_field(default=None, compare=False)

    @property
    def complex_kind(self) -> bool:
        return np.iscomplexobj(self.entries)

    @property
    def lam(self) -> float:
        return float(self.spec.lam)

    @property
    def jets(self) -> list[Jet2D]:
        return [self.jet(i) for i in range(len(self.t_nodes))]

    def jet(self, i: int) -> Jet2D:
        return Jet2D(self.entries[i], (0.0, float(self.t_nodes[i])), False,
                     self.complex_kind, self.mask)

    def node_index(self, t_node) -> int:
        idx = int(np.argmin(np.abs(self.t_nodes - t_node)))
        if abs(self.t_nodes[idx] - t_node) > 1e-12 * max(1.0, abs(t_node)):
            raise SpecError(f"t = {t_node} is not a time node of the field")
        return idx

    def available(self, p1: int, p2: int) -> int:
        """Largest ``k`` with ``e_{p2}^{p1+k}`` inside the staircase, or -1."""
        if p2 > self.n_max or p1 > self.k_max:
            return -1
        col = self.mask[p2, p1:]
        return int(np.max(np.nonzero(col)[0])) if col.any() else -1

    def with_bound(self) -> "SpatialField":
        return SpatialField(self.spec, self.t_nodes, self.entries, self.mask, self.n_max,
                            self.k_max, tail_estimate(self))


def build_field(spec: PdeSpec, K0, t_nodes=None, n_max: int = 12, k_max: int = 24,
                T: float | None = None, fit_bound: bool = True) -> SpatialField:
    """Complete the jet at ``(0, t)`` for every node from the trace vector ``K0``."""
    if t_nodes is None:
        t_nodes = chebyshev_nodes(K0.T if T is None else T)
    t_nodes = np.asarray(t_nodes, dtype=float)
    if K0.M != spec.M:
        raise SpecError(f"trace vector has {K0.M} components, the equation needs M={spec.M}")
    M, N = spec.M, spec.N
    need = N * max(0, -(-(k_max - M + 1) // M))
    if need > n_max:
        raise InsufficientOrderError(
            f"k_max={k_max} needs time order {need} but n_max={n_max}", required_order=need)
    if K0.Q < n_max:
        raise InsufficientOrderError(f"traces support derivatives to {K0.Q} < n_max={n_max}",
                                     required_order=n_max)
    derivs = K0.derivs(t_nodes, n_max)           # (M, n+1, nb)
    rows = np.transpose(derivs, (1, 0, 2))        # (n+1, M, nb)
    cplx = spec.complex_kind or np.iscomplexobj(rows)
    rows = rows.astype(np.complex128 if cplx else float)
    nthreads = min(_threads(), len(t_nodes))
    if nthreads > 1:
        chunks = np.array_split(np.arange(len(t_nodes)), nthreads)
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(lambda idx: complete_batch(spec, rows[:, :, idx], k_max), chunks))
        entries = np.concatenate([p[0] for p in parts], axis=0)
        mask = parts[0][1]
    else:
        entries, mask = complete_batch(spec, rows, k_max)
    fld = SpatialField(spec, t_nodes, entries, mask, n_max, k_max)
    return fld.with_bound() if fit_bound else fld


class FieldValue(NamedTuple):
    value: np.ndarray
    tail: float


def _series_sum(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``sum_k c_k x^k / k!`` for coefficient rows ``coeffs[k, node]`` (Horner)."""
    K = coeffs.shape[0] - 1
    out = np.zeros((x.size, coeffs.shape[1]), dtype=coeffs.dtype)
    for k in range(K, -1, -1):
        out = out * (x[:, None] / (k + 1)) + coeffs[k][None, :]
    return out


def eval_grid(fld: SpatialField, x, p1: int = 0, p2: int = 0, K: int | None = None) -> np.ndarray:
    """``d_x^p1 d_t^p2 y`` on ``x`` (rows) at every node (columns)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    avail = fld.available(p1, p2)
    if avail < 0:
        raise InsufficientOrderError(f"order (p1={p1}, p2={p2}) lies outside the staircase",
                                     p1=p1, p2=p2)
    K = avail if K is None else min(K, avail)
    coeffs = np.transpose(fld.entries[:, p2, p1: p1 + K + 1])  # (K+1, nodes)
    return _series_sum(coeffs, x)


def eval_field(fld: SpatialField, x, t_node, p1: int = 0, p2: int = 0) -> FieldValue:
    """Taylor evaluation of ``d_x^p1 d_t^p2 y(x, t_node)`` with an envelope tail estimate."""
    idx = fld.node_index(t_node)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    avail = fld.available(p1, p2)
    if avail < 0:
        raise InsufficientOrderError(f"order (p1={p1}, p2={p2}) lies outside the staircase",
                                     p1=p1, p2=p2)
    coeffs = fld.entries[idx, p2, p1: p1 + avail + 1][:, None]
    val = _series_sum(coeffs, x)[:, 0]
    tail = 0.0
    if fld.bound is not None:
        tail = fld.bound.series_tail(p1, p2, avail, float(np.max(np.abs(x))), fld.lam)
    return FieldValue(val, tail)


@dataclass
class ResidualReport:
    max_abs: float
    per_node: np.ndarray
    order: int
    predicted_tail: float
    rounding_floor: float
    x_grid: np.ndarray

    @property
    def bound(self) -> float:
        return self.predicted_tail + self.rounding_floor

    def to_json(self) -> dict:
        return {"max_abs": self.max_abs, "order": self.order,
                "predicted_tail": self.predicted_tail, "rounding_floor": self.rounding_floor,
                "per_node_max": [float(v) for v in self.per_node]}


def residual(fld: SpatialField, x_grid=None, order: int | None = None) -> ResidualReport:
    """``max |d_t^N y - P y - f(x, Y^x)|`` over ``x_grid`` and all nodes.

    Every series is truncated at the same x-order ``K`` so that Taylor
    coefficients up to ``x^K`` cancel identically; what remains is the
    truncation tail plus rounding. ``order`` lowers ``K`` below the
    deepest consistent truncation.
    """
    spec = fld.spec
    N, M = spec.N, spec.M
    x = np.linspace(-1.0, 1.0, 41) if x_grid is None else np.atleast_1d(np.asarray(x_grid, float))
    K = min(fld.available(0, N), fld.available(M, 0))
    if order is not None:
        K = min(K, order)
    if K < 0:
        raise InsufficientOrderError("field too shallow for a residual check")
    lhs = eval_grid(fld, x, 0, N, K)
    zeta = spec.zeta_values(False)
    args = [eval_grid(fld, x, i, 0, K) for i in range(M + 1)]
    rhs = sum(z * a for z, a in zip(zeta, args) if z != 0)
    scale = np.abs(lhs) + sum(abs(z) * np.abs(a) for z, a in zip(zeta, args) if z != 0)
    if not spec.nonlinearity.is_empty():
        xs = np.broadcast_to(x[:, None], lhs.shape)
        fval = spec.nonlinearity.evaluate(xs, args[:M])
        rhs = rhs + fval
        scale = scale + _abs_table(spec, xs, args[:M])
    res = np.abs(lhs - rhs)
    per_node = np.max(res, axis=0)
    floor = 64 * np.finfo(float).eps * float(np.max(scale))
    pred = residual_tail(fld, K, float(np.max(np.abs(x))), args) if fld.bound else math.inf
    return ResidualReport(float(np.max(res)), per_node, K, pred, floor, x)


def _abs_table(spec, xs, args):
    total = np.zeros(xs.shape)
    for mono in spec.nonlinearity.iter_terms():
        a = spec.nonlinearity.terms[mono]
        term = abs(complex(a)) * np.abs(xs) ** mono.r
        for i, e in enumerate(mono.p):
            term = term * np.abs(args[i]) ** e
        for i, e in enumerate(mono.pbar):
            term = term * np.abs(args[i]) ** e
        total = total + term
    return total


def residual_tail(fld: SpatialField, K: int, xmax: float, args=None) -> float:
    """Envelope prediction of the residual left by truncation at x-order ``K``."""
    b = fld.bound
    spec = fld.spec
    lam = fld.lam
    tails = [b.series_tail(0, spec.N, K, xmax, lam)]
    for j, z in enumerate(spec.zeta_values(False)):
        if z != 0:
            tails.append(abs(z) * b.series_tail(j, 0, K, xmax, lam))
    if not spec.nonlinearity.is_empty() and args is not None:
        sup = [float(np.max(np.abs(a))) for a in args[: spec.M]]
        ftail = [b.series_tail(i, 0, K, xmax, lam) for i in range(spec.M)]
        for mono in spec.nonlinearity.iter_terms():
            a = spec.nonlinearity.terms[mono]
            exps = [e + eb for e, eb in zip(mono.p, mono.pbar)]
            base = abs(complex(a)) * xmax ** mono.r
            for i, e in enumerate(exps):
                if e == 0:
                    continue
                others = base * e * (sup[i] + ftail[i]) ** (e - 1) * ftail[i]
                for jdx, ej in enumerate(exps):
                    if jdx != i and ej:
                        others *= (sup[jdx] + ftail[jdx]) ** ej
                tails.append(others)
    return float(sum(tails))


def tail_estimate(fld: SpatialField) -> TailEstimate:
    """Fit ``|e_n^k| <= Q (k + lam n)! / (R1^k R2^(lam n))`` to the stored entries.

    Least squares on the log-magnitudes (max over nodes), then ``Q`` is
    lifted so every stored entry lies under the envelope.
    """
    lam = fld.lam
    mags = np.max(np.abs(np.where(np.isnan(fld.entries), 0.0, fld.entries)), axis=0)
    ns, ks, ys = [], [], []
    for n in range(fld.n_max + 1):
        for k in range(fld.k_max + 1):
            if fld.mask[n, k] and mags[n, k] > 0:
                ns.append(n)
                ks.append(k)
                ys.append(math.log(mags[n, k]) - math.lgamma(k + lam * n + 1))
    if not ys:
        return TailEstimate(0.0, math.inf, math.inf, 0.0)
    ns, ks, ys = np.array(ns, float), np.array(ks, float), np.array(ys)
    X = np.column_stack([np.ones_like(ys), -ks, -lam * ns])
    coef, *_ = np.linalg.lstsq(X, ys, rcond=None)
    logR1, logR2 = coef[1], coef[2]
    if len(set(ns)) == 1:
        logR2 = logR1
    if len(set(ks)) == 1:
        logR1 = logR2
    logQ = float(np.max(ys + ks * logR1 + lam * ns * logR2))
    R1, R2 = math.exp(logR1), math.exp(logR2)
    est = TailEstimate(math.exp(logQ), R1, R2, 0.0)
    K0 = fld.available(0, 0)
    t1 = est.series_tail(0, 0, K0, 1.0, lam) if R1 > 1 else math.inf
    return TailEstimate(est.Q, R1, R2, t1)
