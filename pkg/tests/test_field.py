import math
from fractions import Fraction

import numpy as np
import pytest

from flatjet.errors import InsufficientOrderError, SpecError
from flatjet.field import (build_field, chebyshev_nodes, eval_field, eval_grid, residual,
                           tail_estimate)
from flatjet.gevrey import VectorTrace, ZeroTrace, exp_trace, polynomial_trace
from flatjet.jets import complete_jet_from_traces
from flatjet.model import make_preset

NODES = np.linspace(0.0, 1.0, 17)


def heat_field(c0, c1, k_max=24, n_max=12):
    spec = make_preset("heat")
    comps = [exp_trace(1.0, 1.0, Q=16) if c else ZeroTrace(1.0, 16) for c in (c0, c1)]
    return build_field(spec, VectorTrace(comps), NODES, n_max, k_max)


def test_chebyshev_nodes():
    t = chebyshev_nodes(2.0)
    assert t.size == 129 and t[0] == 0.0 and t[-1] == 2.0
    assert np.all(np.diff(t) > 0)


def test_zero_field():
    f = heat_field(False, False)
    assert not np.any(np.nan_to_num(f.entries))
    assert not eval_grid(f, np.linspace(-1, 1, 5)).any()
    assert residual(f).max_abs == 0.0
    est = tail_estimate(f)
    assert est.tail_at_x1 == 0.0 and math.isinf(est.R1)


def test_cosh_and_sinh():
    x = np.linspace(-1, 1, 21)
    et = np.exp(NODES)[None, :]
    f = heat_field(True, False)
    assert np.max(np.abs(eval_grid(f, x) - np.cosh(x)[:, None] * et)) <= 1e-10 * math.e
    g = heat_field(False, True)
    assert np.max(np.abs(eval_grid(g, x) - np.sinh(x)[:, None] * et)) <= 1e-10 * math.e
    v = eval_field(f, [1.0], NODES[5], 1, 0)
    assert v.value[0] == pytest.approx(math.sinh(1) * math.exp(NODES[5]), abs=1e-10)
    assert 0 <= v.tail < 1e-10


def test_eval_at_center_returns_entry():
    f = heat_field(True, True)
    for i in (0, 7, 16):
        for p1, p2 in ((0, 0), (3, 2), (5, 1)):
            assert eval_field(f, [0.0], NODES[i], p1, p2).value[0] == f.entries[i, p2, p1]


def test_boundary_trace_fidelity():
    spec = make_preset("kdv")
    K0 = VectorTrace([ZeroTrace(1.0, 12), ZeroTrace(1.0, 12), exp_trace(0.7, 1.0, 1e-3, Q=12)])
    f = build_field(spec, K0, NODES, 12, 24)
    ref = K0.derivs(NODES, 12)
    for k in range(3):
        for n in range(13):
            np.testing.assert_array_equal(eval_grid(f, [0.0], k, n)[0], ref[k, n])


def test_linearity_exact_completion():
    spec = make_preset("heat")
    a = [[Fraction(n + 1, 3), Fraction(-n, 7)] for n in range(9)]
    b = [[Fraction(2, n + 1), Fraction(n * n, 5)] for n in range(9)]
    s = [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]
    ja, jb, js = (complete_jet_from_traces(spec, r, 16) for r in (a, b, s))
    m = js.known_mask()
    assert all(js.entries[i] == ja.entries[i] + jb.entries[i] for i in zip(*np.nonzero(m)))


def test_linearity_float_field():
    spec = make_preset("heat")
    A = VectorTrace([exp_trace(1.0, Q=12), exp_trace(2.0, Q=12)])
    B = VectorTrace([polynomial_trace([1.0, 2.0], Q=12), ZeroTrace(1.0, 12)])
    AB = VectorTrace([exp_trace(1.0, Q=12), exp_trace(2.0, Q=12)])
    AB.derivs = lambda t, order=None: A.derivs(t, order) + B.derivs(t, order)
    x = np.linspace(-1, 1, 9)
    lhs = eval_grid(build_field(spec, AB, NODES, 12, 20), x)
    rhs = eval_grid(build_field(spec, A, NODES, 12, 20), x) + eval_grid(build_field(spec, B, NODES, 12, 20), x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(lhs))


def test_cosh_residual():
    r = residual(heat_field(True, False))
    assert r.max_abs <= 1e-9
    assert r.max_abs <= r.bound
    assert r.to_json()["order"] == r.order


def test_tail_estimate_bounds_observed_error():
    f = heat_field(True, False)
    est = f.bound
    assert est.R1 >= 1 and est.tail_at_x1 < 1
    x = np.array([1.0])
    exact = np.cosh(x)[:, None] * np.exp(NODES)[None, :]
    for K in (6, 8, 10, 12):
        observed = np.max(np.abs(eval_grid(f, x, 0, 0, K) - exact))
        predicted = est.series_tail(0, 0, K, 1.0, 2.0)
        assert observed <= predicted <= 1e3 * observed


def test_residual_decreases_with_k_max(kdv_synthesis):
    spec = make_preset("kdv")
    K0 = kdv_synthesis.K0
    nodes = kdv_synthesis.field.t_nodes
    r16 = residual(build_field(spec, K0, nodes, 12, 16))
    r24 = residual(build_field(spec, K0, nodes, 12, 24))
    assert r16.max_abs > r24.max_abs


def test_residual_monotone_in_order(kdv_synthesis):
    vals = [residual(kdv_synthesis.field, order=K).max_abs for K in (6, 9, 12, 15, 18, 21)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_field_errors():
    spec = make_preset("heat")
    K0 = VectorTrace([exp_trace(1.0, Q=12), ZeroTrace(1.0, 12)])
    with pytest.raises(InsufficientOrderError):
        build_field(spec, K0, NODES, 4, 24)
    with pytest.raises(InsufficientOrderError):
        build_field(spec, K0, NODES, 14, 24)
    with pytest.raises(SpecError):
        build_field(make_preset("kdv"), K0, NODES, 12, 24)
    f = build_field(spec, K0, NODES, 12, 24)
    with pytest.raises(SpecError):
        eval_field(f, [0.0], 0.123, 0, 0)
    with pytest.raises(InsufficientOrderError):
        eval_grid(f, [0.0], 30, 0)
