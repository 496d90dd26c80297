import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_rational_state
from flatjet.errors import InsufficientOrderError, SpecError, SymmetryError
from flatjet.jets import (JetBoundParams, certify_jet_bound, check_symmetric, compat_check,
                          complete_jet_from_traces, eval_poly, kdv_compat_polys,
                          kdv_project_to_compat, linear_compat_check, parity_compat,
                          required_state_length, staircase_mask, time_jets_from_state)
from flatjet.model import (NonlinearityTable, PdeSpec, certify_state, make_preset,
                           state_from_expressions, zero_state)
from flatjet.series import Jet2D

F = Fraction


def test_heat_linear_row_shift():
    spec = make_preset("heat")
    Y = certify_state([[0, 1] + [0] * 20], 20)
    d = time_jets_from_state(spec, Y, 4, 4).entries
    nz = [(n, k) for n in range(5) for k in range(5) if d[n, k] != 0]
    assert nz == [(0, 1)] and d[0, 1] == 1
    alpha = [F(i + 1, 7) for i in range(20)]
    d = time_jets_from_state(spec, certify_state([alpha], 20), 4, 4).entries
    assert all(d[n, k] == alpha[k + 2 * n] for n in range(5) for k in range(5))


def test_kdv_quadratic():
    spec = make_preset("kdv")
    d = time_jets_from_state(spec, state_from_expressions(["x**2"], 12), 1, 1).entries
    assert d[1, 0] == 0 and d[1, 1] == 2


def test_kdv_generic_matches_symbolic_oracle(frozen):
    o = frozen["kdv_jets"]
    alpha = [F(a) for a in o["alpha"]] + [F(0)] * 10
    d = time_jets_from_state(make_preset("kdv"), certify_state([alpha], 20), 2, 2).entries
    assert [d[1, k] for k in range(3)] == [F(v) for v in o["d1"]]
    assert [d[2, k] for k in range(2)] == [F(v) for v in o["d2"]]
    a = alpha
    assert d[1, 0] == a[3] + a[1] + a[0] * a[1]


def test_insufficient_length_names_order():
    spec = make_preset("kdv")
    need = required_state_length(spec, 3, 2)
    with pytest.raises(InsufficientOrderError) as exc:
        time_jets_from_state(spec, certify_state([[F(1)] * (need - 1)], 20), 3, 2)
    assert str(need - 1) in str(exc.value) or exc.value.details


def test_component_count_checked():
    with pytest.raises(SpecError):
        time_jets_from_state(make_preset("boussinesq_neumann"), certify_state([[1] * 40], 20), 2, 2)


def test_zero_traces_complete_to_zero():
    spec = make_preset("ks")
    jet = complete_jet_from_traces(spec, np.zeros((9, 4), dtype=object) + F(0), 12)
    vals = jet.entries[jet.known_mask()]
    assert all(v == 0 for v in vals)


def test_cosh_completion():
    spec = make_preset("heat")
    rows = [[F(1), F(0)] for _ in range(13)]
    jet = complete_jet_from_traces(spec, rows, 24)
    for k in range(25):
        assert jet[0, k] == (1 if k % 2 == 0 else 0)


def test_staircase_absent_entries_flagged():
    spec = make_preset("kdv")
    jet = complete_jet_from_traces(spec, [[F(1), F(0), F(0)] for _ in range(5)], 12)
    mask = jet.known_mask()
    assert (mask == staircase_mask(spec, 4, 12)).all()
    n, k = np.argwhere(~mask)[0]
    with pytest.raises(KeyError):
        jet[int(n), int(k)]
    for n in range(5):
        for k in range(13):
            inside = n + 1 * max(0, -(-(k - 3 + 1) // 3)) <= 4
            assert mask[n, k] == inside


@pytest.mark.parametrize("name", ["kdv", "heat", "ks", "gl_dirichlet", "boussinesq_neumann"])
def test_round_trip_exact(name):
    spec = make_preset(name)
    rng = random.Random(name)
    n_max, k_max = 6, 10
    L = required_state_length(spec, n_max, k_max)
    Y = certify_state(random_rational_state(rng, spec.N, L, complex_kind=spec.complex_kind), 20)
    full = time_jets_from_state(spec, Y, n_max, k_max)
    rebuilt = complete_jet_from_traces(spec, full.entries[:, : spec.M], k_max)
    mask = rebuilt.known_mask()
    assert all(rebuilt.entries[i] == full.entries[i] for i in zip(*np.nonzero(mask)))


def test_certify_bound_examples():
    p = JetBoundParams(8.0, 5.0, 4, 2.0)
    assert certify_jet_bound(Jet2D(np.zeros((3, 3))), p) == 0.0
    spec = make_preset("heat")
    jet = time_jets_from_state(spec, certify_state([[0.0, 1.0] + [0.0] * 20], 20), 3, 4)
    assert certify_jet_bound(jet, p) == pytest.approx(128.0, rel=1e-12)


def test_certified_bound_holds_entrywise():
    spec = make_preset("kdv")
    Y = kdv_project_to_compat([F(1, 1000), F(1, 2000)], 6, R=14, method="recursion")
    jet = time_jets_from_state(spec, Y, 4, 6, exact=False)
    p = JetBoundParams(14.0, 5.0, 5, 3.0)
    C = certify_jet_bound(jet, p)
    from flatjet.jets import bound_envelope
    for n in range(5):
        for k in range(7):
            assert abs(jet.entries[n, k]) <= C * bound_envelope(n, k, p) * (1 + 1e-12)


def test_bound_decays_with_amplitude():
    spec = make_preset("kdv")
    p = JetBoundParams(14.0, 5.0, spec.M + 2, 3.0)
    vals = []
    for C in (1e-2, 1e-3, 1e-4):
        Y = kdv_project_to_compat([F(C).limit_denominator(10 ** 8)], 14, R=14, method="recursion")
        vals.append(certify_jet_bound(time_jets_from_state(spec, Y, 4, 2, exact=False), p))
    assert vals[0] > vals[1] > vals[2] > 0


def test_compat_examples():
    kdv = make_preset("kdv")
    rep = compat_check(kdv, zero_state(1, 20), 4)
    assert rep.verdict and max(rep.max_violation) == 0
    heat = make_preset("heat")
    assert compat_check(heat, state_from_expressions(["x"], 20), 6).verdict
    rep = compat_check(kdv, state_from_expressions(["x**2"], 20), 3)
    assert not rep.verdict
    assert rep.max_violation[0] == 0 and rep.max_violation[1] == 2
    assert {"n": 1, "row": 1, "value": 2.0} in rep.details
    assert rep.to_json()["verdict"] == "fail"


def test_compat_float_tolerance():
    heat = make_preset("heat")
    Y = certify_state([[0.0, 1.0, 0.0, 1e-3] + [0.0] * 20], 20)
    assert compat_check(heat, Y, 5).verdict
    Y = certify_state([[0.0, 1.0, 1e-3] + [0.0] * 20], 20)
    assert not compat_check(heat, Y, 5).verdict


def test_linear_compat_examples():
    spec = PdeSpec(1, 2, (F(0), F(0), F(1)), NonlinearityTable.build(2, {}), ())
    assert linear_compat_check(spec, state_from_expressions(["1 + x**2"], 20), 5).verdict
    heat = make_preset("heat")
    assert linear_compat_check(heat, state_from_expressions(["x - x**3/6"], 20), 6).verdict
    with pytest.raises(SpecError):
        linear_compat_check(make_preset("kdv"), zero_state(1, 20), 2)


def test_linear_compat_agrees_with_generic():
    rng = random.Random(7)
    presets = ["heat", "heat_neumann", "backward_heat"]
    for i in range(20):
        spec = make_preset(presets[i % 3])
        seq = [F(0)] * 24
        for n in range(24):
            # sparse data: about half the cases are compatible
            if rng.random() < 0.25 or (n % 2 == 1 and rng.random() < 0.6):
                seq[n] = F(rng.randint(-9, 9), rng.randint(1, 9))
        Y = certify_state([seq], 20)
        assert linear_compat_check(spec, Y, 5).verdict == compat_check(spec, Y, 5).verdict


def test_kdv_polys_low_levels():
    polys = kdv_compat_polys(2)
    ring = polys[0].ring
    y = ring.gens
    assert polys[0].H == 0
    assert [polys[0].J(i) for i in (1, 2, 3)] == [y[0], y[1], y[2]]
    assert polys[1].H == y[1] + y[0] * y[1]
    assert polys[1].J(2) == y[4] + y[2] + y[0] * y[2] + y[1] ** 2
    assert polys[1].m == 5
    with pytest.raises(ValueError):
        polys[1].J(4)


def test_kdv_h2_against_jets():
    polys = kdv_compat_polys(2)
    spec = make_preset("kdv")
    rng = random.Random(2)
    for _ in range(5):
        vals = [F(rng.randint(-5, 5), rng.randint(1, 6)) for _ in range(9)]
        Y = certify_state([vals + [F(0)] * 6], 20)
        d = time_jets_from_state(spec, Y, 2, 0).entries
        assert eval_poly(polys[2].J(1), vals) == d[2, 0]


def test_projection_examples():
    Y = kdv_project_to_compat([0, 0], 1)
    assert Y.is_zero()
    eps = F(1, 1000)
    a = kdv_project_to_compat([eps], 1).components[0]
    assert (a[0], a[1], a[2], a[3], a[4]) == (0, 0, eps, 0, -eps)


@pytest.mark.parametrize("method", ["symbolic", "recursion"])
def test_projection_is_compatible(method):
    spec = make_preset("kdv")
    Y = kdv_project_to_compat([F(1, 100), F(-1, 300), F(1, 700)], 4, method=method)
    rep = compat_check(spec, Y, 4, exact=True)
    assert rep.verdict and all(v == 0 for v in rep.max_violation)


def test_projection_methods_agree():
    free = [F(1, 50), F(1, 70), F(-1, 90)]
    a = kdv_project_to_compat(free, 3, method="symbolic").components[0]
    b = kdv_project_to_compat(free, 3, method="recursion").components[0]
    assert list(a) == list(b)


def test_symmetry_checks():
    check_symmetric(make_preset("boussinesq_neumann"), "even")
    check_symmetric(make_preset("gl_dirichlet"), "odd")
    check_symmetric(make_preset("gl_dirichlet"), "even")
    check_symmetric(make_preset("ks"), "odd")
    with pytest.raises(SymmetryError):
        check_symmetric(make_preset("ks"), "even")
    with pytest.raises(SymmetryError):
        check_symmetric(make_preset("kdv"), "odd")
    with pytest.raises(SymmetryError):
        check_symmetric(make_preset("boussinesq_neumann"), "odd")


def test_parity_compat_examples():
    ks = make_preset("ks")
    assert parity_compat(ks, state_from_expressions(["x - x**3"], 20), "odd", 10)
    assert not parity_compat(ks, state_from_expressions(["x**2"], 20), "odd", 10)
    bn = make_preset("boussinesq_neumann")
    assert parity_compat(bn, state_from_expressions(["1 + x**2", "x**4"], 20), "even", 10)


def _parity_zero(spec, exprs, forbidden):
    Y = state_from_expressions(exprs, required_state_length(spec, 6, 10))
    d = time_jets_from_state(spec, Y, 6, 10).entries
    return all(d[n, k] == 0 for n in range(7) for k in range(forbidden, 11, 2))


def test_parity_of_jets():
    assert _parity_zero(make_preset("boussinesq_neumann"), ["1/10 + x**2/7", "x**4/11"], 1)
    assert _parity_zero(make_preset("gl_dirichlet"), ["(1+I)*x/10 + x**3/9", "0"][:1], 0)
