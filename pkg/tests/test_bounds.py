from fractions import Fraction
from math import floor

import pytest
from hypothesis import given, strategies as st

from gmconn import bounds as B


def exp(*terms, **kw):
    return B.DulacExpansion(0, [B.DulacTerm(Fraction(r), k, c) for r, k, c in terms], **kw)


def test_dulac_examples():
    assert B.dulac_multiplicity(exp(("1/2", 0, 1))) == 1
    assert B.dulac_multiplicity(exp(("3/2", 1, 1), (2, 0, 1))) == 4


def test_dulac_all_zero_is_indeterminate():
    with pytest.raises(B.IndeterminateError):
        B.dulac_multiplicity(exp(("1/2", 0, 0)))


def test_dulac_threshold_from_error_bar():
    e = B.DulacExpansion(0, [B.DulacTerm(Fraction(0), 0, 1e-9, 1e-11),
                             B.DulacTerm(Fraction(1), 0, 2.0, 1e-11)])
    # 1e-9 is below 1e3 * 1e-11
    assert e.leading() == (Fraction(1), 0)


term = st.tuples(st.fractions(min_value=0, max_value=6, max_denominator=6),
                 st.integers(0, 3), st.integers(1, 5))


@given(st.lists(term, min_size=1, max_size=6), st.randoms(use_true_random=False),
       st.lists(st.tuples(st.fractions(min_value=0, max_value=6, max_denominator=6),
                          st.integers(0, 3)), max_size=4))
def test_dulac_invariances(terms, rnd, zeros):
    base = B.dulac_multiplicity(exp(*terms))
    shuffled = list(terms)
    rnd.shuffle(shuffled)
    assert B.dulac_multiplicity(exp(*shuffled)) == base
    padded = list(terms) + [(r, k, 0) for r, k in zeros]
    assert B.dulac_multiplicity(exp(*padded)) == base


def test_worked_instances():
    assert B.zero_bound(B.BoundQuery(2, 2, 1, 0, 0, "branch")) == 2
    assert B.zero_bound(B.BoundQuery(3, 2, 1, 0, 0, "branch")) == 4
    assert B.zero_bound(B.BoundQuery(4, 2, 1, 3, 0, "regular")) == 7
    r = B.bound_report(B.BoundQuery(2, 2, 1))
    assert r.formula == "thm5.1.i"


@pytest.mark.parametrize("mu", [2, 4, 6, 8])
def test_nu2_forms_agree(mu):
    for K in range(13):
        for m in range(13):
            q = B.BoundQuery(mu, 2, m, K)
            assert B.zero_bound(q) == B.bound_nu2(mu, K, m)


@given(st.integers(2, 8), st.integers(2, 6), st.integers(0, 10), st.integers(0, 10),
       st.sampled_from(["branch", "regular"]))
def test_monotone(mu, nu, m, K, pt):
    b = B.zero_bound(B.BoundQuery(mu, nu, m, K, 0, pt))
    assert B.zero_bound(B.BoundQuery(mu, nu, m + 1, K, 0, pt)) >= b
    assert B.zero_bound(B.BoundQuery(mu, nu, m, K + 1, 0, pt)) >= b
    # same parity keeps the formula branch for branch points
    step = 2 if pt == "branch" else 1
    if mu + step <= 8:
        assert B.zero_bound(B.BoundQuery(mu + step, nu, m, K, 0, pt)) >= b


def test_classify_cases():
    lam = Fraction(1, 3)
    assert B.classify_exponent_bound(4, 3, 1, 2, "D_M1") == lam + Fraction(3, 2)
    assert B.classify_exponent_bound(4, 3, 1, 1, "D_M1") == lam + Fraction(5, 2)
    assert B.classify_exponent_bound(5, 3, 1, 3, "D_M-") == lam + Fraction(1, 2)
    assert B.classify_exponent_bound(3, 3, 1, 0, "D_M1") == lam + Fraction(1, 2)
    with pytest.raises(B.NotCoveredError):
        B.classify_exponent_bound(3, 3, 1, 1, "D_M1")
    with pytest.raises(B.BoundError):
        B.classify_exponent_bound(4, 3, 1, 1, "elsewhere")


def test_odd_mu_with_log_not_covered():
    with pytest.raises(B.NotCoveredError):
        B.zero_bound(B.BoundQuery(3, 2, 1, 2, 1))


def test_query_validation():
    with pytest.raises(B.BoundError):
        B.BoundQuery(1, 2, 1)
    with pytest.raises(B.BoundError):
        B.BoundQuery(2, 2, 1, K=0, k1=1)
    with pytest.raises(B.BoundError):
        B.BoundQuery(2, 2, 1, pointType="cusp")


@pytest.mark.parametrize("rho,n", [(Fraction(1), 2), (Fraction(5, 6), 1), (Fraction(7, 3), 3)])
def test_n_estimate(rho, n):
    assert B.n_estimate(rho) == n
    assert n == (2 * rho if rho.denominator == 1 else floor(rho) + 1)
