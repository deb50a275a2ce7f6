"""Derive the s0-connection for mu = 2, 3 and check it against quadrature.

Run with ``python demos/connection_tour.py``.
"""
from fractions import Fraction

import numpy as np

from gmconn import fuchs, gauss_manin, periods
from gmconn.exact_algebra import poly_str


def show_system(mu, nu, m):
    cs = gauss_manin.derive_connection(mu, nu, m)
    print(f"mu={mu}, lam={cs.lam}")
    print("  S =")
    for row in cs.S:
        print("   ", [poly_str(c) for c in row])
    print("  L =", [str(x) for x in cs.L])
    print("  Delta =", poly_str(gauss_manin.discriminant(mu)))
    return cs


def main():
    for mu in (2, 3):
        cs = show_system(mu, 3, 1)
        rng = np.random.default_rng(1)
        from gmconn.verify import random_offdiscriminant
        s = random_offdiscriminant(mu, rng)
        cfg = periods.CurveConfig(mu, 3, 1, s)
        res, info = periods.connection_residual(cfg, cs=cs, return_details=True)
        print(f"  residual at a random point: {res:.2e} (cond S = {info['cond_S']:.1f})")

        op = fuchs.build_annihilator(cs)
        print("  annihilator order", op.order, "with leading coefficient Delta")
        print(f"  sampled-derivative residual: "
              f"{periods.annihilator_residual_sampled(op, cfg, n=16):.2e}")
        s0, sp = fuchs.morse_point(mu, Fraction(1, 2), [Fraction(-2)] * (mu - 2))
        ex = fuchs.indicial_polynomial(op, sp, s0).exponents()
        print("  exponents at a Morse point:", [str(e) for e in ex.multiset()])
        print()


if __name__ == "__main__":
    main()
