"""Forward-in-time finite-difference simulators used to cross-check synthesized controls.

All first-order-in-time presets share one method-of-lines core: derivative
operators come from finite-difference stencils on the physical grid, the
rows next to each boundary are replaced by the boundary conditions, the linear
part is advanced with Crank-Nicolson and the nonlinearity explicitly
(Adams-Bashforth 2, forward Euler on the first step).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import IllPosedError, SimulationBlowUp, SpecError, StateError
from .model import AnalyticState, PdeSpec, make_preset
from .scalars import to_float

SCHEMES = ("cn", "imex", "euler")
BLOWUP_FACTOR = 1e6


def stencil_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights for ``d^order`` at 0 from unit-spaced ``offsets``."""
    offsets = np.asarray(offsets, dtype=float)
    n = offsets.size
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def diff_matrix(nx: int, dx: float, order: int) -> sps.csr_matrix:
    """Second-order accurate ``d^order`` on ``nx`` equispaced nodes, shifted at the ends."""
    if order == 0:
        return sps.identity(nx, format="csr")
    width = order + 1 if order % 2 == 0 else order + 2
    half = width // 2
    rows, cols, vals = [], [], []
    for i in range(nx):
        if half <= i < nx - half:
            offs = np.arange(-half, half + 1)
        else:
            # one extra point keeps second order on the shifted stencil
            w = width + 1
            lo = 0 if i < half else nx - w
            offs = np.arange(lo, lo + w) - i
        wts = stencil_weights(offs, order) / dx ** order
        rows.extend([i] * len(offs))
        cols.extend(i + offs)
        vals.extend(wts)
    return sps.csr_matrix((vals, (rows, cols)), shape=(nx, nx))


@dataclass
class SimConfig:
    preset: str | PdeSpec
    nx: int = 201
    dt: float = 1e-4
    T: float = 1.0
    scheme: str = "cn"

    def __post_init__(self):
        self.spec = self.preset if isinstance(self.preset, PdeSpec) else make_preset(self.preset)
        if self.scheme not in SCHEMES:
            raise SpecError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        if self.nx < self.spec.M + 4:
            raise SpecError(f"nx={self.nx} too small for a spatial order {self.spec.M} stencil")
        if not (self.dt > 0 and self.T > 0):
            raise SpecError("dt and T must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-8 * steps:
            raise SpecError(f"T={self.T} is not a multiple of dt={self.dt}")
        if self.scheme == "euler":
            zM = abs(complex(self.spec.zeta[self.spec.M]))
            limit = 0.5 * self.dx ** self.spec.M / (zM * 2 ** (self.spec.M - 1))
            if self.dt > limit:
                raise SpecError(f"explicit scheme unstable: dt={self.dt} exceeds {limit:.3g}",
                                dt_max=limit)

    @property
    def dx(self) -> float:
        return 1.0 / (self.nx - 1)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nx)


@dataclass
class SimResult:
    x: np.ndarray
    t: np.ndarray
    terminal: np.ndarray
    trajectory: np.ndarray | None = None
    diagnostics: dict = dc_field(default_factory=dict)

    def to_json(self) -> dict:
        y = self.terminal
        out = {"nx": int(self.x.size), "n_steps": int(self.t.size - 1), "T": float(self.t[-1]),
               "terminal_sup": float(np.max(np.abs(y))), "diagnostics": self.diagnostics}
        if np.iscomplexobj(y):
            out["terminal"] = {"re": y.real.tolist(), "im": y.imag.tolist()}
        else:
            out["terminal"] = y.tolist()
        return out

    def write_csv(self, path: str, stride: int = 1) -> None:
        """Rows ``t, x, y`` (``y`` split into re/im for complex runs)."""
        traj = self.trajectory if self.trajectory is not None else self.terminal[None, :]
        times = self.t[::stride] if self.trajectory is not None else self.t[-1:]
        cplx = np.iscomplexobj(traj)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y_re", "y_im"] if cplx else ["t", "x", "y"])
            for tt, row in zip(times, traj):
                for xx, yy in zip(self.x, row):
                    w.writerow([repr(float(tt)), repr(float(xx))]
                               + ([repr(yy.real), repr(yy.imag)] if cplx else [repr(float(yy))]))

    def write_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)


def _boundary_rows(spec: PdeSpec) -> tuple[list[int], list[int]]:
    """Derivative orders held at ``x = 0`` (homogeneous) and driven at ``x = 1``."""
    left = []
    for row in spec.B_array():
        nz = np.flatnonzero(np.abs(row) > 0)
        if len(nz) != 1:
            raise SpecError("the simulators need boundary rows that fix single derivatives")
        left.append(int(nz[0]))
    right = list(spec.controlled)
    if len(left) + len(right) != spec.M:
        raise SpecError(f"{len(left)} + {len(right)} boundary conditions for spatial order {spec.M}")
    return left, right


def _sample_initial(initial, x: np.ndarray, cplx: bool) -> np.ndarray:
    if isinstance(initial, AnalyticState):
        y = initial.evaluate(x, 0)
    else:
        y = np.asarray(initial)
        if y.shape != x.shape:
            raise StateError(f"initial samples have shape {y.shape}, grid has {x.shape}")
    return y.astype(np.complex128 if cplx or np.iscomplexobj(y) else float)


def _sample_controls(controls, orders, t: np.ndarray) -> np.ndarray:
    out = np.zeros((len(orders), t.size), dtype=np.complex128)
    for j, c in enumerate(orders):
        fn = controls.get(c) if controls is not None else None
        if fn is None:
            continue
        if callable(fn):
            vals = np.asarray(fn(t))
        else:
            vals = np.asarray(fn)
            if vals.shape != t.shape:
                raise StateError(f"control for order {c} has {vals.shape} samples, need {t.shape}")
        out[j] = np.broadcast_to(vals, t.shape)
    return out


def simulate_forward(config: SimConfig, initial, controls: Mapping[int, Callable | np.ndarray] | None = None,
                     keep_trajectory: bool = False, keep_every: int = 1) -> SimResult:
    """Advance ``initial`` to ``T`` with ``d_x^c y(1, t) = controls[c](t)``.

    ``controls`` maps each controlled derivative order to a vectorised function
    of time or to samples on the ``n_steps + 1`` scheme times.
    """
    spec = config.spec
    if spec.forward_wellposed is False:
        raise IllPosedError(f"{spec.name or 'this equation'} is ill-posed forward in time; "
                            "use the series route (synthesize/residual) instead",
                            preset=spec.name, reason="forward initial value problem unstable")
    if spec.N != 1:
        raise SpecError(f"no forward simulator for time order {spec.N}", preset=spec.name)
    left, right = _boundary_rows(spec)
    cplx = spec.complex_kind
    nx, dx, dt = config.nx, config.dx, config.dt
    x = config.x
    t = np.linspace(0.0, config.n_steps * dt, config.n_steps + 1)
    dtype = np.complex128 if cplx else float

    D = [diff_matrix(nx, dx, j) for j in range(spec.M + 1)]
    zeta = [to_float(z, cplx) for z in spec.zeta]
    L = sps.csr_matrix((nx, nx), dtype=dtype)
    for j, z in enumerate(zeta):
        if z != 0:
            L = L + z * D[j]
    # boundary condition rows replace the PDE rows nearest each end
    bc_nodes = list(range(len(left))) + [nx - 1 - j for j in range(len(right))]
    bc_ops = [_edge_row(nx, dx, c, 0) for c in left]
    bc_ops += [_edge_row(nx, dx, c, nx - 1) for c in right]
    pde = np.ones(nx, dtype=bool)
    pde[bc_nodes] = False
    P = sps.diags(pde.astype(float))
    Pc = sps.diags((~pde).astype(float))
    bc_mat = sps.csr_matrix((nx, nx), dtype=dtype)
    for node, op in zip(bc_nodes, bc_ops):
        bc_mat = bc_mat + sps.csr_matrix((np.ones(1), ([node], [0])), shape=(nx, 1)) @ op
    I = sps.identity(nx, format="csr")
    implicit = config.scheme in ("cn", "imex")
    if implicit:
        A = (P @ (I - 0.5 * dt * L) + bc_mat).tocsc()
        lu = spla.splu(A)
        Bexp = P @ (I + 0.5 * dt * L)
    else:
        Bexp = P @ (I + dt * L)
        Afix = (Pc @ I).tocsc()
    ctrl = _sample_controls(controls, right, t)
    if not cplx:
        if np.max(np.abs(ctrl.imag), initial=0.0) > 0:
            raise StateError("complex controls for a real equation")
        ctrl = ctrl.real
    nl = spec.nonlinearity
    has_nl = not nl.is_empty()

    def nonlinear(y):
        args = [y] + [D[j] @ y for j in range(1, spec.M)]
        return np.asarray(nl.evaluate(x, args), dtype=dtype) * pde

    y = _sample_initial(initial, x, cplx)
    scale = max(np.max(np.abs(y)), np.max(np.abs(ctrl), initial=0.0), 1e-300)
    traj = [y.copy()] if keep_trajectory else None
    prev = None
    for n in range(config.n_steps):
        rhs = Bexp @ y
        if has_nl:
            cur = nonlinear(y)
            rhs = rhs + dt * (cur if prev is None else 1.5 * cur - 0.5 * prev)
            prev = cur
        bvals = np.zeros(nx, dtype=dtype)
        for j, node in enumerate(bc_nodes[len(left):]):
            bvals[node] = ctrl[j, n + 1]
        rhs = rhs + bvals
        if implicit:
            y = lu.solve(rhs.astype(dtype))
        else:
            y = _explicit_fix(rhs, bc_mat, bc_nodes, pde, Afix)
        peak = np.max(np.abs(y))
        if not np.isfinite(peak) or peak > BLOWUP_FACTOR * scale:
            raise SimulationBlowUp("solution norm exceeded the blow-up threshold",
                                   step=n + 1, t=float(t[n + 1]), peak=float(peak),
                                   threshold=BLOWUP_FACTOR * scale)
        if keep_trajectory and (n + 1) % keep_every == 0:
            traj.append(y.copy())
    diag = {"scheme": config.scheme, "dx": dx, "dt": dt, "preset": spec.name,
            "left_orders": left, "right_orders": right}
    tt = t[::keep_every] if keep_trajectory else t
    return SimResult(x, tt, y, np.array(traj) if keep_trajectory else None, diag)


def _edge_row(nx: int, dx: float, order: int, node: int) -> sps.csr_matrix:
    """One-sided stencil for ``d^order`` at an end node, second-order accurate."""
    w = order + 2
    offs = np.arange(w) if node == 0 else -np.arange(w)[::-1]
    wts = stencil_weights(offs, order) / dx ** order
    return sps.csr_matrix((wts, (np.zeros(w, dtype=int), node + offs)), shape=(1, nx))


def _explicit_fix(rhs, bc_mat, bc_nodes, pde, Afix):
    # interior values are explicit; solve the small boundary block for the rest
    y = rhs.copy()
    y[~pde] = 0
    fixed = np.array(sorted(bc_nodes))
    sub = bc_mat[fixed][:, fixed].toarray()
    other = bc_mat[fixed] @ y
    y[fixed] = np.linalg.solve(sub, rhs[fixed] - other)
    return y


@dataclass
class Comparison:
    sup: float
    l2: float
    per_component: list

    def relative_l2(self, reference_l2: float) -> float:
        return self.l2 / reference_l2 if reference_l2 else math.inf


def l2_norm(v, x) -> float:
    return float(math.sqrt(np.trapezoid(np.abs(np.asarray(v)) ** 2, x)))


def _as_components(a, x) -> list:
    if isinstance(a, AnalyticState):
        return [a.evaluate(x, l) for l in range(a.N)]
    arr = np.asarray(a)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape[-1] != x.size:
        raise StateError(f"samples of length {arr.shape[-1]} on a grid of {x.size} points")
    return list(arr)


def compare_states(a, b, x=None) -> Comparison:
    """Sup and L2 distances on ``x`` (default: the grid implied by the samples)."""
    if x is None:
        n = next((np.asarray(v).shape[-1] for v in (a, b) if not isinstance(v, AnalyticState)), 201)
        x = np.linspace(0.0, 1.0, n)
    x = np.asarray(x, dtype=float)
    ca, cb = _as_components(a, x), _as_components(b, x)
    if len(ca) != len(cb):
        raise StateError(f"component count mismatch: {len(ca)} vs {len(cb)}")
    per = []
    for u, v in zip(ca, cb):
        d = u - v
        per.append({"sup": float(np.max(np.abs(d))), "l2": l2_norm(d, x)})
    return Comparison(max(p["sup"] for p in per), math.sqrt(sum(p["l2"] ** 2 for p in per)), per)
