from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from gmconn import gauss_manin as gm
from gmconn.exact_algebra import MultiPoly, bareiss_det, poly_str
from gmconn.fuchs import morse_point


def test_sigma_layout_mu2():
    sig = gm.build_sigma(2, Fraction(1, 2))
    s0, s1 = MultiPoly.var(2, 0), MultiPoly.var(2, 1)
    one, zero = MultiPoly.const(2, 1), MultiPoly(2)
    assert sig.sigma[0] == [s0, s1, zero, one, zero]
    assert sig.sigma[2] == [s1, zero, one * 3, zero, zero]
    half = Fraction(1, 2)
    want = [[(0, half)], [(1, half)], [], [(0, -1)], [(1, -2)]]
    assert [[(j, c.constant_value()) for j, c in row] for row in sig.rhs_pattern()] == want


def test_sigma_determinant_is_multiple_of_resultant():
    det = gm.sigma_determinant(2)
    res = gm.discriminant_oracle(2)
    ratio = None
    for k, c in det.items():
        r = c / res.terms.get(k, Fraction(0)) if res.terms.get(k) else None
        assert r is not None
        ratio = ratio or r
        assert r == ratio


def test_connection_mu2():
    cs = gm.derive_connection(2, 2, 1)
    assert cs.L == [Fraction(5, 6), Fraction(7, 6)]
    assert all(c.is_zero() for row in cs.V for c in row)
    assert poly_str(gm.discriminant(2)) == "s0^2 + 4/27*s1^3"


@pytest.mark.parametrize("mu", [2, 3, 4])
def test_S_is_monic_in_s0(mu):
    cs = gm.derive_connection(mu, 2, 1)
    s0 = MultiPoly.var(mu, 0)
    for i in range(mu):
        for j in range(mu):
            c = cs.S[i][j] - (s0 if i == j else 0)
            assert c.degree(0) <= 0


def test_V_relation_mu4():
    # (j+1) v_{i,j} = j v_{i+1,j+1} with indices counted from 1
    cs = gm.derive_connection(4, 2, 1)
    V = cs.V
    assert not V[2][0].is_zero()
    for i in range(1, 4):
        for j in range(1, 4):
            assert V[i - 1][j - 1] * (j + 1) == V[i][j] * j


@pytest.mark.parametrize("mu", [2, 3, 4, 5])
def test_discriminant_vs_sympy(mu):
    z = sp.symbols("z")
    s = sp.symbols(f"s0:{mu}")
    F = z ** (mu + 1) + sum(s[l] * z ** l for l in range(1, mu)) + s[0]
    res = sp.Poly(sp.resultant(F, sp.diff(F, z), z), *s)
    lead = res.coeff_monomial(s[0] ** mu)
    want = sp.expand(res.as_expr() / lead)
    d = gm.discriminant(mu)
    got = sum(sp.Rational(c.numerator, c.denominator) * sp.Mul(*[v ** e for v, e in zip(s, k)])
              for k, c in d.items())
    assert sp.expand(got - want) == 0


@pytest.mark.parametrize("mu", [2, 3, 4])
def test_quasihomogeneity_of_discriminant(mu):
    w = [mu + 1] + [mu + 1 - j for j in range(1, mu)]
    d = gm.discriminant(mu)
    degs = {sum(a * b for a, b in zip(k, w)) for k in d.terms}
    assert degs == {mu * (mu + 1)}


@pytest.mark.parametrize("mu", [2, 3])
def test_log_fields_tangent(mu):
    delta = gm.discriminant(mu)
    fields = gm.log_fields(mu)
    assert all(gm.is_tangent(f, delta) for f in fields)
    # brackets stay tangent
    br = gm.LogVectorField(-1, gm.lie_bracket(fields[0], fields[1]))
    assert gm.is_tangent(br, delta)


def test_strata_examples():
    lab = gm.stratum_of([Fraction(0), Fraction(0)])
    assert lab.k == 1 and lab.witness == 0
    lab = gm.stratum_of([Fraction(2), Fraction(-3)])
    assert lab.k == 0 and lab.root_order == 2
    s0, sp_ = morse_point(3, Fraction(1, 2), [Fraction(-2)])
    assert gm.stratum_of([s0, *sp_]).k == 0
    # cusp of mu=3: (z - 1)^3 (z + 3)
    assert gm.stratum_of([Fraction(-3), Fraction(8), Fraction(-6)]).k == 1


def test_stratum_rejects_off_discriminant():
    with pytest.raises(gm.StratumError):
        gm.stratum_of([Fraction(1), Fraction(1)])


def test_stratum_float_path():
    lab = gm.stratum_of([2.0, -3.0])
    assert lab.k == 0


@pytest.mark.parametrize("mu,x0,k", [(2, 1, 0), (2, 0, 1), (3, Fraction(1, 2), 2)])
def test_shifted_connection(mu, x0, k):
    spr = [Fraction(0)] * (mu - 1) if mu == 2 and x0 == 1 else [Fraction(j + 1, 3) for j in range(mu - 1)]
    cs = gm.derive_shifted_connection(mu, 2, 1, k, x0, spr)
    assert cs.size == mu + 1
    lam = Fraction(1, 2)
    assert cs.L == [lam + Fraction(k + i + 1, mu + 1) for i in range(mu + 1)]
    delta = gm.discriminant(mu).subs({j: spr[j - 1] for j in range(1, mu)})
    s0 = MultiPoly.var(mu, 0)
    assert bareiss_det(cs.S) == (s0 - cs.s_tilde0) * delta


def test_shifted_first_row_mu2():
    cs = gm.derive_shifted_connection(2, 2, 1, 0, 1, [Fraction(0)])
    assert cs.s_tilde0.constant_value() == -1
    f = gm.taylor_coefficients(2, 1, [Fraction(0)])
    assert [c.constant_value() for c in f] == [1, 3, 3, 1]
    # Euler row: f_l weighted by 1 - l/(mu+1)
    assert [c.constant_value() for c in cs.S[0][1:]] == [2, 1]


def test_shifted_at_origin_is_plain_taylor():
    cs = gm.derive_shifted_connection(3, 2, 1, 0, 0, [Fraction(1), Fraction(2)])
    assert cs.s_tilde0.is_zero()
    f = gm.taylor_coefficients(3, 0, [Fraction(1), Fraction(2)])
    assert [c.constant_value() for c in f] == [0, 1, 2, 0, 1]


def test_conversion_coefficients():
    assert gm.conversion_B(3, 1, Fraction(2)) == 3 * 4
    assert gm.conversion_Bj(3, 0, Fraction(1)) == 1


def test_mu_range():
    with pytest.raises(ValueError):
        gm.derive_connection(9, 2, 1)


def test_numeric_evaluation():
    cs = gm.derive_connection(2, 2, 1)
    S, R = cs.numeric([0.25, -1.0])
    assert np.allclose(np.linalg.det(S), 0.25 ** 2 - 4 / 27)
