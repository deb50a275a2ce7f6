"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``. Tolerances and time limits are fixed
here and are not tuned per run.
"""
import time
from fractions import Fraction

import sympy as sp

from gmconn import bounds, gauss_manin, verify

TOL_CONNECTION = 1e-8
TOL_ANNIHILATOR = 1e-6
TOL_FIT = 1e-4
TOL_MONODROMY = 1e-6
LIMITS = {1: 10.0, 2: 120.0, 3: 120.0, 5: 300.0, 6: 300.0}

RESULTS = []


def _record(num, name, ok, seconds, note=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {name} ({seconds:.1f}s){note}"
    RESULTS.append(line)
    return line


def _sympy_discriminant(mu):
    z = sp.symbols("z")
    s = sp.symbols(f"s0:{mu}")
    F = z ** (mu + 1) + sum(s[l] * z ** l for l in range(1, mu)) + s[0]
    res = sp.Poly(sp.resultant(F, sp.diff(F, z), z), *s)
    return s, sp.expand(res.as_expr() / res.coeff_monomial(s[0] ** mu))


def test_criterion_1_discriminant():
    t = time.perf_counter()
    ok = True
    for mu in (2, 3, 4, 5):
        d = gauss_manin.discriminant(mu)
        ok &= d == gauss_manin.discriminant_oracle(mu)
        s, want = _sympy_discriminant(mu)
        got = sum(sp.Rational(c.numerator, c.denominator)
                  * sp.Mul(*[v ** e for v, e in zip(s, k)]) for k, c in d.items())
        ok &= sp.expand(got - want) == 0
    dt = time.perf_counter() - t
    ok &= dt < LIMITS[1]
    _record(1, "discriminant oracle equivalence", ok, dt)
    assert ok


def test_criterion_2_connection():
    r = verify.check_connection(npoints=20, tol=TOL_CONNECTION)
    ok = r.passed and r.seconds < LIMITS[2]
    _record(2, "connection soundness", ok, r.seconds,
            f" max residual {r.detail['max_residual']:.2e}")
    assert ok


def test_criterion_3_annihilator():
    r = verify.check_annihilator(tol=TOL_ANNIHILATOR)
    ok = r.passed and r.seconds < LIMITS[3]
    _record(3, "annihilator soundness", ok, r.seconds,
            f" max residual {r.detail['max_residual']:.2e}")
    assert ok


def test_criterion_4_exponents():
    r = verify.check_exponents(mus=(2, 3, 4))
    _record(4, "exponents of the closed forms", r.passed, r.seconds)
    assert r.passed


def test_criterion_5_fit():
    r = verify.check_fit(tol=TOL_FIT)
    ok = r.passed and r.seconds < LIMITS[5]
    worst = max(abs(v["rho"] - v["target"]) for v in r.detail.values())
    _record(5, "fitted asymptotics", ok, r.seconds, f" max |rho - target| {worst:.1e}")
    assert ok


def test_criterion_6_monodromy():
    r = verify.check_monodromy(tol=TOL_MONODROMY)
    ok = r.passed and r.seconds < LIMITS[6]
    _record(6, "monodromy", ok, r.seconds)
    assert ok


def test_criterion_7_isomonodromy():
    r = verify.check_isomonodromy(mus=(2, 4))
    ok = r.passed and all(v["npoints"] >= 6 for v in r.detail.values())
    _record(7, "isomonodromy sampling", ok, r.seconds)
    assert ok


def test_criterion_8_bounds():
    t = time.perf_counter()
    ok = (bounds.zero_bound(bounds.BoundQuery(2, 2, 1, 0, 0, "branch")) == 2
          and bounds.zero_bound(bounds.BoundQuery(3, 2, 1, 0, 0, "branch")) == 4
          and bounds.zero_bound(bounds.BoundQuery(4, 2, 1, 3, 0, "regular")) == 7)
    r = verify.check_bounds()
    ok &= r.passed and len(r.detail["fitted"]) == 8
    _record(8, "bounds arithmetic", ok, time.perf_counter() - t)
    assert ok


def test_criterion_9_fuchs_sum():
    r = verify.check_fuchs_sum()
    # both sums are reported and the discrepancy flagged
    ok = r.passed
    for mu in (2, 3, 4, 5):
        d = r.detail[f"mu={mu}"]
        ok &= Fraction(d["printed"]) == Fraction(mu * (mu + 1) ** 2, 2)
        ok &= Fraction(d["brute_force"]) == Fraction(mu * mu * (mu + 1), 2)
        ok &= d["discrepancy"]
    _record(9, "Fuchs-sum audit", ok, r.seconds, " printed sum flagged")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
