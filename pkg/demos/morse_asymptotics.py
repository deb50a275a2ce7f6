"""Local behaviour of a vanishing period at a Morse value, and the bound.

For lam = 1/2 the leading exponent lam + 1/2 is an integer and a log term
appears; for lam = 1/3 it does not. The monodromy around the value shows
the same dichotomy: a Jordan block or a nontrivial eigenvalue.
"""
from fractions import Fraction

import numpy as np

from gmconn import bounds, gauss_manin, periods


def main():
    for lam in (Fraction(1, 2), Fraction(1, 3)):
        cfg = periods.CurveConfig(2, lam.denominator, lam.numerator, (0.0, -1.0))
        zc, t0 = periods.critical_values(cfg)[0]
        fit = periods.fit_exponent(cfg, t0, zc)
        print(f"lam={lam}: critical value {t0.real:.6f}")
        print(f"  fitted rho = {fit.rho:.8f} +- {fit.rho_uncertainty:.1e}, log rank {fit.logRank}")

        cs = gauss_manin.derive_connection(2, lam.denominator, lam.numerator)
        M = periods.monodromy(cfg, t0, cs=cs)
        print("  monodromy eigenvalues:", np.round(np.linalg.eigvals(M), 8))

        q = bounds.BoundQuery(2, lam.denominator, lam.numerator)
        rep = bounds.bound_report(q)
        for cycle in ("vanishing", "neighbour"):
            e = periods.dulac_expansion(fit, t0, cycle)
            print(f"  {cycle} cycle: Dulac multiplicity {bounds.dulac_multiplicity(e)}"
                  f" <= bound {rep.bound} [{rep.formula}]")
        print()


if __name__ == "__main__":
    main()
