import math
import random
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatjet import kernels
from flatjet.errors import JetMismatchError, TableError
from flatjet.model import Monomial, NonlinearityTable, make_preset
from flatjet.scalars import GaussianRational
from flatjet.series import (Jet2D, jet_poly_apply, jet_product, k_q_mu, log_factorial_ratio,
                            log_gen_binomial, zeros)

fractions = st.fractions(min_value=-4, max_value=4, max_denominator=50)


def exact_jet(vals, shape=(3, 4)):
    e = zeros(shape, True, False)
    for idx, v in zip(np.ndindex(shape), vals):
        e[idx] = v
    return Jet2D(e, exact=True)


jets_exact = st.lists(fractions, min_size=12, max_size=12).map(exact_jet)


def test_constant_multiplier():
    rng = np.random.default_rng(1)
    b = Jet2D(rng.normal(size=(4, 5)))
    two = Jet2D.constant(2.0, 3, 4)
    np.testing.assert_allclose(jet_product(two, b).entries, 2 * b.entries, rtol=1e-15)


def test_x_times_x():
    e = zeros((3, 4), True, False)
    e[0, 1] = Fraction(1)
    x = Jet2D(e, exact=True)
    out = jet_product(x, x).entries
    expected = zeros((3, 4), True, False)
    expected[0, 2] = Fraction(2)
    assert (out == expected).all()


@given(jets_exact, jets_exact)
def test_product_commutes(a, b):
    assert (jet_product(a, b).entries == jet_product(b, a).entries).all()


@given(jets_exact, jets_exact, jets_exact)
def test_product_associates(a, b, c):
    left = jet_product(jet_product(a, b), c).entries
    right = jet_product(a, jet_product(b, c)).entries
    assert (left == right).all()


@given(jets_exact)
def test_product_identity(a):
    one = Jet2D.constant(Fraction(1), 2, 3, exact=True)
    assert (jet_product(one, a).entries == a.entries).all()


@given(st.integers(0, 2**32 - 1))
def test_float_product_commutes_associates(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (Jet2D(rng.normal(size=(5, 6))) for _ in range(3))
    ab = jet_product(a, b).entries
    np.testing.assert_allclose(ab, jet_product(b, a).entries, rtol=1e-12, atol=1e-12 * np.max(np.abs(ab)))
    left = jet_product(jet_product(a, b), c).entries
    right = jet_product(a, jet_product(b, c)).entries
    np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-12 * np.max(np.abs(left)))


def test_mismatch_errors():
    a = Jet2D(np.zeros((3, 3)))
    with pytest.raises(JetMismatchError):
        jet_product(a, Jet2D(np.zeros((3, 4))))
    with pytest.raises(JetMismatchError):
        jet_product(a, Jet2D(np.zeros((3, 3)), point=(0.5, 0)))
    with pytest.raises(JetMismatchError):
        jet_product(a, Jet2D(zeros((3, 3), True, False), exact=True))


def test_k_q_mu_matches_independent_series(frozen):
    ref = frozen["k_q_mu"]
    assert k_q_mu(ref["q"], ref["mu"], ref["lam"]) == pytest.approx(ref["value"], rel=1e-10)


def test_k_q_mu_domain():
    with pytest.raises(ValueError):
        k_q_mu(1, 3, 2)


def _bound(n, k, lam, R, Rp, mu):
    s = lam * n + k
    return math.exp(math.lgamma(s + 1) - k * math.log(R) - lam * n * math.log(Rp) - mu * math.log(s + 1))


@pytest.mark.parametrize("seed", range(10))
def test_leibniz_bound_preserved(seed):
    lam, q, mu, R, Rp = 2, 1, 4, 8.0, 8.0
    K = k_q_mu(q, mu, lam)
    rng = np.random.default_rng(seed)
    shape = (6, 10)
    env = np.array([[_bound(n, k, lam, R, Rp, mu) for k in range(shape[1])] for n in range(shape[0])])
    weight = np.array([[(lam * n + k + 1) ** q for k in range(shape[1])] for n in range(shape[0])])
    C1, C2 = rng.uniform(0.1, 3, size=2)
    a = Jet2D(C1 * env * rng.uniform(-1, 1, size=shape))
    b = Jet2D(C2 * env * rng.uniform(-1, 1, size=shape))
    prod = jet_product(a, b).entries
    assert np.all(np.abs(prod) <= K * C1 * C2 * env * weight * (1 + 1e-12))


def test_poly_apply_zero_in_zero_out():
    spec = make_preset("kdv")
    z = Jet2D(np.zeros((3, 4)))
    out = jet_poly_apply(spec.nonlinearity, [z, z, z])
    assert not out.entries.any()


def test_poly_apply_kdv_on_x():
    spec = make_preset("kdv")
    y = zeros((2, 4), True, False)
    y[0, 1] = Fraction(1)
    yx = zeros((2, 4), True, False)
    yx[0, 0] = Fraction(1)
    jets = [Jet2D(y, exact=True), Jet2D(yx, exact=True), Jet2D(zeros((2, 4), True, False), exact=True)]
    out = jet_poly_apply(spec.nonlinearity, jets).entries
    assert out[0, 1] == 1
    assert sum(1 for v in out.reshape(-1) if v != 0) == 1


def test_poly_apply_gl_constant():
    spec = make_preset("gl_dirichlet")
    c = Jet2D.constant(GaussianRational(1, 1), 1, 1, exact=True, complex_kind=True)
    zero = Jet2D(zeros((2, 2), True, True), exact=True, complex_kind=True)
    out = jet_poly_apply(spec.nonlinearity, [c, zero])
    assert out.entries[0, 0] == GaussianRational(2, 2)


def test_poly_apply_x_dependence():
    # f = x * y_0 applied to y = 1 gives the jet of x
    M = 2
    table = NonlinearityTable.build(M, {Monomial((1, 0), (0, 0), 1): Fraction(1)})
    one = Jet2D.constant(Fraction(1), 1, 3, exact=True)
    zero = Jet2D(zeros((2, 4), True, False), exact=True)
    out = jet_poly_apply(table, [one, zero]).entries
    assert out[0, 1] == 1 and out[0, 0] == 0 and out[0, 2] == 0


def test_poly_apply_rejects_wrong_arity():
    table = NonlinearityTable.build(2, {Monomial((1, 1), (0, 0)): Fraction(1)})
    j = Jet2D(np.zeros((2, 2)))
    with pytest.raises(TableError):
        jet_poly_apply(table, [j, j, j])


def test_log_factorial_examples(frozen):
    assert log_factorial_ratio(0, 0, 3) == 0.0
    assert log_factorial_ratio(1, 0, 3) == pytest.approx(math.log(6), rel=1e-15)
    assert log_factorial_ratio(1, 1, Fraction(3, 2)) == pytest.approx(frozen["log_gamma_7_2"], rel=1e-14)


@given(st.integers(0, 60), st.integers(0, 60), st.sampled_from([Fraction(1), Fraction(3, 2), Fraction(2), Fraction(7, 3), Fraction(4)]))
def test_log_factorial_precision_and_monotone(n, k, lam):
    mp.mp.dps = 30
    ref = mp.loggamma(mp.mpf(lam.numerator) / lam.denominator * n + k + 1)
    got = log_factorial_ratio(n, k, lam)
    assert abs(got - float(ref)) <= 1e-12 * max(1.0, abs(float(ref)))
    assert log_factorial_ratio(n + 1, k, lam) >= got
    assert log_factorial_ratio(n, k + 1, lam) >= got


def test_log_factorial_rejects_negative():
    with pytest.raises(ValueError):
        log_factorial_ratio(-1, 0, 2)


def test_vandermonde_identity_exhaustive():
    for k in range(21):
        for q in range(21):
            for a in range(k + q + 1):
                s = sum(math.comb(k, j) * math.comb(q, a - j) for j in range(max(0, a - q), min(k, a) + 1))
                assert s == math.comb(k + q, a)


@pytest.mark.parametrize("lam", [1.5, 2.0, 3.0, 4.0])
def test_generalized_binomial_bound(lam):
    rng = random.Random(int(lam * 10))
    for _ in range(400):
        k, n = rng.randint(0, 15), rng.randint(0, 15)
        j, i = rng.randint(0, k), rng.randint(0, n)
        lhs = math.log(math.comb(k, j)) + math.log(math.comb(n, i))
        rhs = math.log(lam) + log_gen_binomial(k + lam * n, j + lam * i)
        assert lhs <= rhs + 1e-12


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_kernel_backends_agree(backend):
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(7, 9)), rng.normal(size=(7, 9))
    ref = kernels.cauchy2d(a, b, backend="python")
    np.testing.assert_allclose(kernels.cauchy2d(a, b, backend=backend), ref, rtol=1e-13, atol=1e-13)
