"""Control synthesis: endpoint traces, cutoff blend, field, boundary controls."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import CompatibilityError
from .field import (SpatialField, build_field, chebyshev_nodes, eval_grid, residual,
                    ResidualReport)
from .gevrey import (VectorTrace, ZeroTrace, blend_traces, borel_realize_in_kernel,
                     gevrey_cutoff, minimal_growth_constant)
from .jets import compat_check, time_jets_from_state
from .model import AnalyticState, PdeSpec, warn_radius

BOREL_MARGIN = 1.05


@dataclass
class EndpointTraces:
    traces: VectorTrace
    D: np.ndarray
    C: float
    H: float
    Htilde: float
    tau: float

    def growth_report(self) -> dict:
        return {"C": self.C, "H": self.H, "Htilde": self.Htilde, "tau": self.tau}


def default_rates(spec: PdeSpec, R_prime: float = 5.0) -> tuple[float, float]:
    """``H = R'^-lam`` and ``Htilde`` just above the realization threshold."""
    lam = float(spec.lam)
    H = R_prime ** -lam
    return H, BOREL_MARGIN * math.exp(1 / math.e) * H


def endpoint_traces(spec: PdeSpec, Y: AnalyticState, tau: float, n_max: int, T: float = 1.0,
                    H: float | None = None, Htilde: float | None = None,
                    R_prime: float = 5.0, check: bool = True) -> EndpointTraces:
    """Traces ``F`` on ``[0, T]`` with ``F^{(n)}(tau) = D_n`` (n <= n_max) and ``B F = 0``."""
    M = spec.M
    if H is None or Htilde is None:
        h0, h1 = default_rates(spec, R_prime)
        H = h0 if H is None else H
        Htilde = h1 if Htilde is None else Htilde
    warn_radius(spec, Y.R)
    if check and spec.v:
        rep = compat_check(spec, Y, n_max)
        if not rep.verdict:
            raise CompatibilityError("state violates the boundary compatibility conditions",
                                     report=rep.to_json())
    if Y.is_zero():
        cplx = spec.complex_kind
        zero = VectorTrace([ZeroTrace(T, n_max, cplx) for _ in range(M)])
        return EndpointTraces(zero, np.zeros((n_max + 1, M)), 0.0, H, Htilde, tau)
    jet = time_jets_from_state(spec, Y, n_max, M - 1)
    D = jet.entries
    norms = [max(abs(complex(v)) for v in D[q]) for q in range(n_max + 1)]
    C = minimal_growth_constant(norms, H, float(spec.lam))
    F = borel_realize_in_kernel(D, spec.B, H, Htilde, float(spec.lam), T, tau, C=C)
    return EndpointTraces(F, D, C, H, Htilde, tau)


@dataclass
class SynthesisResult:
    spec: PdeSpec
    T: float
    field: SpatialField
    hat: EndpointTraces
    tilde: EndpointTraces
    K0: object
    controls: dict
    endpoint_err0: list
    endpoint_errT: list
    residual: ResidualReport
    diagnostics: dict = dc_field(default_factory=dict)
    ok: bool = True

    def control_at(self, t, order: int | None = None, x: float = 1.0) -> np.ndarray:
        """``d_x^order y(x, t)`` at arbitrary times by completing fresh jets."""
        order = self.spec.controlled[0] if order is None else order
        t = np.atleast_1d(np.asarray(t, dtype=float))
        fld = build_field(self.spec, self.K0, t, self.field.n_max, self.field.k_max,
                          fit_bound=False)
        return eval_grid(fld, [x], order, 0)[0]

    def control_function(self, order: int | None = None, x: float = 1.0):
        return lambda t: self.control_at(t, order, x)

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "n_max": self.field.n_max,
            "k_max": self.field.k_max,
            "t_nodes": [float(v) for v in self.field.t_nodes],
            "controls": {str(k): _jsonable(v) for k, v in self.controls.items()},
            "endpoint_err0": [float(v) for v in self.endpoint_err0],
            "endpoint_errT": [float(v) for v in self.endpoint_errT],
            "residual": self.residual.to_json(),
            "tail": self.field.bound.to_json() if self.field.bound else None,
            "diagnostics": self.diagnostics,
            "ok": self.ok,
        }


def _jsonable(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return {"re": [float(a) for a in v.real], "im": [float(a) for a in v.imag]}
    return [float(a) for a in v]


def endpoint_error(fld: SpatialField, target: AnalyticState, t: float, x_grid=None) -> list:
    """Per-component ``sup_x |d_t^l y(x, t) - target_l(x)|`` over ``x_grid`` in [0, 1]."""
    x = np.linspace(0.0, 1.0, 51) if x_grid is None else np.asarray(x_grid, dtype=float)
    idx = fld.node_index(t)
    errs = []
    for l in range(fld.spec.N):
        val = eval_grid(fld, x, 0, l)[:, idx]
        ref = target.evaluate(x, l)
        errs.append(float(np.max(np.abs(val - ref))))
    return errs


def state_amplitude(Y: AnalyticState, x_grid=None) -> float:
    """``max_l sup_x |Y_l(x)|`` on ``[-1, 1]``; the smallness measure for inputs."""
    x = np.linspace(-1.0, 1.0, 201) if x_grid is None else np.asarray(x_grid, dtype=float)
    return max(float(np.max(np.abs(Y.evaluate(x, l)))) for l in range(Y.N))


def synthesize(spec: PdeSpec, Y0: AnalyticState, Y1: AnalyticState, T: float = 1.0,
               n_max: int = 12, k_max: int = 24, t_nodes=None, sigma: float | None = None,
               R_prime: float = 5.0, max_amplitude: float = 1e-3,
               endpoint_ceiling: float = 1e-3, x_grid=None) -> SynthesisResult:
    """Steer ``Y0`` at ``t = 0`` to ``Y1`` at ``t = T``.

    The blended boundary trace equals the ``Y0`` trace on ``[0, T/4]`` and the
    ``Y1`` trace on ``[3T/4, T]`` together with all derivatives, so the
    completed jets at the endpoints reproduce the targets. ``x_grid`` (on
    ``[-1, 1]``) carries the residual; endpoint errors use its points in ``[0, 1]``.
    """
    lam = float(spec.lam)
    sigma = (lam + 1) / 2 if sigma is None else sigma
    t_nodes = chebyshev_nodes(T) if t_nodes is None else np.asarray(t_nodes, dtype=float)
    x_grid = np.linspace(-1.0, 1.0, 41) if x_grid is None else np.asarray(x_grid, dtype=float)
    x_ctrl = x_grid[(x_grid >= 0) & (x_grid <= 1)]
    amps = {"Y0": state_amplitude(Y0), "Y1": state_amplitude(Y1)}
    diag: dict = {"sigma": sigma, "R_prime": R_prime, "max_amplitude": max_amplitude,
                  "Y0": {"R": Y0.R, "C": Y0.C, "amplitude": amps["Y0"]},
                  "Y1": {"R": Y1.R, "C": Y1.C, "amplitude": amps["Y1"]}}
    if spec.nonlinearity.is_empty():
        # no smallness needed; truncation growth at large amplitude is only reported
        diag["linear"] = True
    else:
        for name, a in amps.items():
            if a > max_amplitude:
                warnings.warn(f"{name} amplitude {a:.3g} exceeds max_amplitude={max_amplitude}",
                              stacklevel=2)
                diag[f"{name}_amplitude_exceeds"] = True
    hat = endpoint_traces(spec, Y0, 0.0, n_max, T, R_prime=R_prime)
    tilde = endpoint_traces(spec, Y1, T, n_max, T, R_prime=R_prime)
    rho = gevrey_cutoff(T, sigma, Q=n_max)
    K0 = blend_traces(hat.traces, tilde.traces, rho)
    fld = build_field(spec, K0, t_nodes, n_max, k_max)
    xs = np.array([1.0])
    controls = {c: eval_grid(fld, xs, c, 0)[0] for c in spec.controlled}
    err0 = endpoint_error(fld, Y0, 0.0, x_ctrl)
    errT = endpoint_error(fld, Y1, T, x_ctrl)
    res = residual(fld, x_grid)
    diag.update({"hat": hat.growth_report(), "tilde": tilde.growth_report(),
                 "residual_order": res.order})
    ok = max(err0 + errT, default=0.0) <= endpoint_ceiling
    if not ok:
        diag["endpoint_ceiling_exceeded"] = endpoint_ceiling
    return SynthesisResult(spec, T, fld, hat, tilde, K0, controls, err0, errT, res, diag, ok)


def controls_table(result: SynthesisResult, order: int, n_deriv: int | None = None) -> tuple[list, np.ndarray]:
    """Header and rows ``t, d_t^j (d_x^order y)(1, t)`` at the field nodes."""
    fld = result.field
    n_deriv = result.spec.N if n_deriv is None else n_deriv
    cols = [eval_grid(fld, [1.0], order, j)[0] for j in range(n_deriv + 1)]
    cplx = any(np.iscomplexobj(c) for c in cols)
    header = ["t"]
    data = [fld.t_nodes]
    for j, c in enumerate(cols):
        if cplx:
            header += [f"d{j}_re", f"d{j}_im"]
            data += [np.real(c), np.imag(c)]
        else:
            header.append(f"d{j}")
            data.append(np.real(c))
    return header, np.column_stack(data)


def breakdown_amplitude(spec: PdeSpec, Y0: AnalyticState, Y1: AnalyticState, T: float = 1.0,
                        lo: float = 1e-8, hi: float = 1.0, steps: int = 12,
                        residual_factor: float = 10.0, **kw) -> dict:
    """Bisect (geometrically) the scale ``s`` of ``(Y0, Y1)`` where synthesis stops passing.

    A run passes when endpoint errors stay under the ceiling and the residual
    stays within ``residual_factor`` times its predicted tail.
    """
    def passes(s):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                r = synthesize(spec, Y0.scaled(s), Y1.scaled(s), T, max_amplitude=math.inf, **kw)
            except Exception:  # any numerical failure counts as breakdown
                return False
        return r.ok and r.residual.max_abs <= residual_factor * r.residual.bound

    if not passes(lo):
        return {"breakdown": lo, "passing": None, "bracket": [0.0, lo]}
    if passes(hi):
        return {"breakdown": None, "passing": hi, "bracket": [hi, math.inf]}
    a, b = lo, hi
    for _ in range(steps):
        m = math.sqrt(a * b)
        if passes(m):
            a = m
        else:
            b = m
    return {"breakdown": b, "passing": a, "bracket": [a, b]}
