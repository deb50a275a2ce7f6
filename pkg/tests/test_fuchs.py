from fractions import Fraction

import pytest

from gmconn import fuchs as F
from gmconn import gauss_manin as gm
from gmconn import periods as P
from gmconn.exact_algebra import DiffOp, MultiPoly, nc_determinant

HALF, THIRD = Fraction(1, 2), Fraction(1, 3)


def roots(de):
    return de.exponents().multiset()


def test_euler_operator_double_root():
    x = MultiPoly.var(1, 0)
    op = DiffOp(1, {(None, 2): x * x, (None, 1): x})
    de = F.indicial_polynomial(op, t=Fraction(0))
    assert de.roots == [(Fraction(0), 2)]
    assert de.exponents().log_ranks() == {Fraction(0): [0, 1]}


def test_nc_determinant_examples():
    d = DiffOp.d0(1)
    one = DiffOp.mult(MultiPoly.const(1, 1))
    zero = DiffOp(1)
    assert nc_determinant([[d, zero], [zero, d]]) == DiffOp.d0(1, 2)
    assert nc_determinant([[d, one], [-one, d]]) == DiffOp.d0(1, 2) + one


@pytest.mark.parametrize("lam", [HALF, THIRD])
def test_41_prime_at_one(lam):
    got = roots(F.indicial_polynomial(F.op_41_prime(2, lam), t=Fraction(1)))
    assert got == [0, lam + HALF]


def test_42_prime_at_zero():
    got = roots(F.indicial_polynomial(F.op_42_prime(2, HALF, 0), t=Fraction(0)))
    assert got == [0, 1, HALF + 1]


@pytest.mark.parametrize("mu", [2, 3, 4])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_42_prime_at_infinity(mu, k):
    got = roots(F.indicial_polynomial(F.op_42_prime(mu, THIRD, k), t="inf"))
    want = sorted(Fraction(mu * j - (k + 1), mu + 1) - THIRD for j in range(mu + 1))
    assert got == want


@pytest.mark.parametrize("mu", [2, 3, 4, 5])
@pytest.mark.parametrize("lam", [HALF, THIRD, Fraction(2, 3)])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_42_tables_match_computation(mu, lam, k):
    ce = F.computed_exponents_42(mu, lam, k)
    for p, es in ce.items():
        key = "omega" if p.startswith("omega") else p
        tab = F.exponents_closed_form(mu, lam.denominator, lam.numerator, k, "4.2'", key)
        assert es.multiset() == tab.multiset(), p


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_43_tables_match_computation(k):
    fam = "4.3e" if k % 2 == 0 else "4.3o"
    tab = F.exponents_closed_form(4, 2, 1, k, fam, "0")
    assert F.computed_exponents_43(4, HALF, k).multiset() == tab.multiset()


def test_uncovered_table_raises():
    with pytest.raises(F.FuchsError):
        F.exponents_closed_form(3, 2, 1, 0, "4.3e", "0")


@pytest.mark.parametrize("mu", [2, 3, 4])
def test_annihilator_leading_is_discriminant(mu):
    op = F.build_annihilator(gm.derive_connection(mu, 2, 1))
    assert op.order == mu
    assert op.leading == gm.discriminant(mu)


def test_literal_determinant_is_not_an_annihilator():
    cs = gm.derive_connection(2, 2, 1)
    cfg = P.CurveConfig(2, 2, 1, (0.1 + 0.3j, -1.0))
    lit = F.literal_determinant(cs)
    op = F.build_annihilator(cs)
    assert P.annihilator_residual(lit, cfg) > 1e-2
    assert P.annihilator_residual(op, cfg) < 1e-10


@pytest.mark.parametrize("lam", [HALF, THIRD])
def test_slice_operator_agrees_with_41(lam):
    # s' = (s1, 0, ...): same exponents at the Morse values as the slice form
    s1 = Fraction(-3)
    cs = gm.derive_connection(2, lam.denominator, lam.numerator)
    op = F.build_annihilator(cs, [s1])
    o41 = F.op_41(2, lam, s1)
    for t in (Fraction(2), Fraction(-2)):
        assert roots(F.indicial_polynomial(op, None, t)) == [0, lam + HALF]
        assert roots(F.indicial_polynomial(o41, None, t)) == [0, lam + HALF]


def test_specialized_and_generic_agree():
    cs = gm.derive_connection(3, 3, 1)
    s0, sp = F.morse_point(3, HALF, [Fraction(-2)])
    gen = F.build_annihilator(cs)
    spec = F.build_annihilator(cs, list(sp))
    assert roots(F.indicial_polynomial(gen, sp, s0)) == roots(F.indicial_polynomial(spec, None, s0))


def test_deep_stratum_is_refused():
    op = F.build_annihilator(gm.derive_connection(2, 2, 1))
    with pytest.raises(F.FuchsError):
        F.indicial_polynomial(op, [Fraction(0)], Fraction(0))


@pytest.mark.parametrize("x0,k", [(Fraction(1), 0), (Fraction(1, 2), 1)])
def test_shifted_annihilator(x0, k):
    cs = gm.derive_shifted_connection(2, 2, 1, k, x0, [Fraction(-1)])
    op = F.build_shifted_annihilator(cs)
    assert op.order == 3
    s0 = MultiPoly.var(2, 0)
    delta = gm.discriminant(2).subs({1: Fraction(-1)})
    assert op.leading == (s0 - cs.s_tilde0) * delta
    t = cs.s_tilde0.constant_value()
    assert roots(F.indicial_polynomial(op, None, t)) == [0, 1, HALF + k + 1]
    cfg = P.CurveConfig(2, 2, 1, (0.1 + 0.3j, -1.0))
    assert P.annihilator_residual(op, cfg) < 1e-10


def test_shifted_origin_has_apparent_factor():
    cs = gm.derive_shifted_connection(3, 2, 1, 0, 0, [Fraction(1), Fraction(2)])
    op = F.build_shifted_annihilator(cs)
    assert op.construction == "cyclic-vector"
    assert op.apparent is not None and op.apparent.degree(0) == 2
    assert op.order == 4


def test_fuchs_sum_relation():
    for mu in (2, 3, 4, 5):
        rel = F.fuchs_sum_relation(mu + 1, mu + 2)
        assert rel == Fraction(mu * mu * (mu + 1), 2)
        for k in range(3):
            assert F.fuchs_sum_brute(mu, 2, 1, k) == rel
            assert F.fuchs_sum_computed(mu, HALF, k) == rel
        assert F.fuchs_sum_printed(mu) != rel


def test_isomonodromy_factorization_mu2():
    op = F.build_annihilator(gm.derive_connection(2, 3, 1))
    samples = [F.morse_point(2, a, []) for a in (HALF, Fraction(1), Fraction(-2))]
    rep = F.check_isomonodromy_factorization(op, samples)
    assert rep["orders_ok"] and rep["exponents_agree"]
    assert rep["samples"][0]["exponents"] == ["0", "5/6"]


def test_isomonodromy_rejects_wrong_stratum():
    op = F.build_annihilator(gm.derive_connection(2, 2, 1))
    with pytest.raises(F.FuchsError):
        F.check_isomonodromy_factorization(op, [(Fraction(1), (Fraction(1),))])


@pytest.mark.parametrize("mu,lam", [(2, THIRD), (3, HALF), (4, Fraction(2, 3))])
def test_frobenius_series_annihilated(mu, lam):
    from gmconn.exact_algebra import LocalSeries, apply_op
    op = F.op_41_prime(mu, lam)
    s = F.frobenius_series(op, 1, lam + HALF, 8)
    r = apply_op(op, LocalSeries(s.center, s.rho, s.coeffs, 30))
    # everything below the truncation order vanishes
    assert min(n for n, _ in r.coeffs) >= 7 + F.indicial_polynomial(op, t=Fraction(1)).kappa - mu


def test_frobenius_rejects_non_exponent():
    with pytest.raises(F.FuchsError):
        F.frobenius_series(F.op_41_prime(2, THIRD), 1, Fraction(1, 7))


def test_frobenius_matches_vanishing_period():
    # K_0 near the Morse value s0 = 2 of s1 = -3 is A eps^rho (1 + c1 eps + c2 eps^2 + ...)
    import numpy as np
    cs = gm.derive_connection(2, 3, 1)
    op = F.ordinary_annihilator(cs, [Fraction(-3)], component=0)
    rho = THIRD + HALF
    s = F.frobenius_series(op, 2, rho, 4)
    cfg = P.CurveConfig(2, 3, 1, (2.0, -3.0))
    es = np.array([0.01, 0.005, 0.0025])
    vals, hint = [], None
    for e in es:
        c2 = cfg.with_s0(2.0 + e)
        r = P.roots_of_fiber(c2)
        ia, ib = sorted(sorted(range(3), key=lambda i: abs(r[i] - 1))[:2], key=lambda i: r[i].imag)
        pv = P.period(c2, P.CyclePath(ia, ib), roots=(r[ia], r[ib]), branch_hint=hint)
        hint = pv.anchor
        vals.append(pv.value / e ** float(rho))
    A, c1, c2_ = np.linalg.solve(np.vstack([np.ones(3), es, es ** 2]).T, np.array(vals))
    assert abs(c1 / A - float(s.coefficient(1))) < 1e-4
