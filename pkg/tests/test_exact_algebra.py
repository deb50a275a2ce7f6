from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from gmconn.exact_algebra import (
    AlgebraError, DiffOp, LocalSeries, MultiPoly, TruncationError, apply_op, bareiss_det,
    exact_div, matrix_rank_exact, nc_determinant, rational_roots, resultant_s0_oracle,
    theta, upoly_gcd, weyl_mul, zpoly_diff,
)

NV = 3
SYMS = sp.symbols("s0:3")

fracs = st.fractions(min_value=-5, max_value=5, max_denominator=6)
exps = st.tuples(*[st.integers(0, 2)] * NV)
polys = st.dictionaries(exps, fracs, max_size=4).map(lambda d: MultiPoly(NV, d))


def to_sympy(p):
    return sum((sp.Rational(c.numerator, c.denominator)
                * sp.Mul(*[s ** e for s, e in zip(SYMS, k)]) for k, c in p.items()),
               sp.Integer(0))


@given(polys, polys, polys)
def test_ring_axioms(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a + b == b + a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a - a == MultiPoly(NV)


@given(polys, polys)
def test_product_matches_sympy(a, b):
    assert sp.expand(to_sympy(a * b) - to_sympy(a) * to_sympy(b)) == 0


@given(polys, polys)
def test_exact_division_roundtrip(a, b):
    if b.is_zero():
        return
    assert exact_div(a * b, b) == a


def test_exact_division_refuses_remainder():
    x = MultiPoly.var(2, 0)
    with pytest.raises(AlgebraError):
        exact_div(x * x + 1, x)


@given(polys, st.integers(0, NV - 1))
def test_diff_matches_sympy(a, i):
    assert sp.expand(to_sympy(a.diff(i)) - sp.diff(to_sympy(a), SYMS[i])) == 0


def test_resultant_against_sylvester():
    # z-polynomials with MultiPoly coefficients in (s0, s1)
    s0, s1 = MultiPoly.var(2, 0), MultiPoly.var(2, 1)
    one = MultiPoly.const(2, 1)
    for f in ([s0, s1, MultiPoly(2), one],
              [s0, s1, s1 * 2, MultiPoly(2), one],
              [s0 * s1, one, s0, one * 3]):
        g = zpoly_diff(f)
        got = resultant_s0_oracle(f, g)
        z, a, b = sp.symbols("z s0 s1")
        conv = lambda q: sum(to_sympy(MultiPoly(NV, {k + (0,): v for k, v in c.items()}))
                             .subs({SYMS[0]: a, SYMS[1]: b}) * z ** i for i, c in enumerate(q))
        want = sp.resultant(conv(f), conv(g), z)
        gots = to_sympy(MultiPoly(NV, {k + (0,): v for k, v in got.items()})).subs(
            {SYMS[0]: a, SYMS[1]: b})
        assert sp.expand(gots - want) == 0


def test_bareiss_matches_sympy():
    x, y = MultiPoly.var(2, 0), MultiPoly.var(2, 1)
    one = MultiPoly.const(2, 1)
    M = [[x, y, one], [one * 2, x * y, y], [y, one, x + 1]]
    a, b = sp.symbols("s0 s1")
    Ms = sp.Matrix([[a, b, 1], [2, a * b, b], [b, 1, a + 1]])
    got = bareiss_det(M)
    gs = sum(sp.Rational(c.numerator, c.denominator) * a ** k[0] * b ** k[1]
             for k, c in got.items())
    assert sp.expand(gs - Ms.det()) == 0


def test_rank_and_roots():
    assert matrix_rank_exact([[1, 2], [2, 4]]) == 1
    assert matrix_rank_exact([[1, 2], [3, 4]]) == 2
    # (x - 1/2)(x + 3)(x^2 + 1)
    p = [Fraction(-3, 2), Fraction(5, 2), Fraction(-1, 2), Fraction(5, 2), Fraction(1)]
    roots, rest = rational_roots(p)
    assert sorted(roots) == [Fraction(-3), Fraction(1, 2)]
    assert rest == [Fraction(1), 0, Fraction(1)]
    g = upoly_gcd([Fraction(-1), 0, Fraction(1)], [Fraction(1), Fraction(1)])
    assert len(g) == 2


ops1 = st.dictionaries(
    st.tuples(st.just(None), st.integers(0, 2)),
    st.dictionaries(st.tuples(st.integers(0, 2)), fracs, max_size=3).map(
        lambda d: MultiPoly(1, d)),
    max_size=3).map(lambda d: DiffOp(1, d))


@given(ops1, ops1, ops1)
def test_weyl_associative(a, b, c):
    assert weyl_mul(weyl_mul(a, b), c) == weyl_mul(a, weyl_mul(b, c))


def test_weyl_commutator():
    x = DiffOp.mult(MultiPoly.var(1, 0))
    d = DiffOp.d0(1)
    comm = weyl_mul(d, x) - weyl_mul(x, d)
    assert comm == DiffOp.mult(MultiPoly.const(1, 1))


@given(st.fractions(min_value=-3, max_value=3, max_denominator=5),
       st.fractions(min_value=-3, max_value=3, max_denominator=5))
def test_theta_on_monomial(rho, shift):
    out = apply_op(theta(1, 0, shift), LocalSeries.monomial(rho, order=6))
    assert out.coefficient(0) == rho + shift


def test_apply_op_log_term():
    # theta^2 kills s0^0 and s0^0 log s0
    th = theta(1, 0, 0)
    op = weyl_mul(th, th)
    out = apply_op(op, LocalSeries.monomial(Fraction(0), order=6, logpow=1))
    assert all(v == 0 for v in out.coeffs.values())


def test_truncation_is_reported():
    s = LocalSeries.monomial(Fraction(1, 3), order=2)
    with pytest.raises(TruncationError):
        s.coefficient(2)


def test_nc_determinant_rejects_second_order():
    d2 = DiffOp.d0(1, 2)
    with pytest.raises(AlgebraError):
        nc_determinant([[d2]])


@given(ops1, ops1, st.fractions(min_value=-3, max_value=3, max_denominator=4))
def test_apply_op_respects_composition(a, b, rho):
    m = LocalSeries.monomial(rho, order=12)
    left = apply_op(weyl_mul(a, b), m)
    right = apply_op(a, apply_op(b, m))
    order = min(left.order, right.order)
    strip = lambda s: {k: v for k, v in s.coeffs.items() if k[0] < order}
    assert strip(left) == strip(right)


@pytest.mark.parametrize("mu", [2, 3, 4])
def test_resultant_quasihomogeneous(mu):
    from gmconn.gauss_manin import versal_F
    f = versal_F(mu)
    res = resultant_s0_oracle(f, zpoly_diff(f))
    w = [mu + 1] + [mu + 1 - j for j in range(1, mu)]
    assert {sum(e * x for e, x in zip(k, w)) for k in res.terms} == {mu * (mu + 1)}
