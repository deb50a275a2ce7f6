"""Compare the printed exponent sum with the one computed from the operator."""
from fractions import Fraction

from gmconn import fuchs


def main():
    print(" mu  printed  n(n-1)(p-2)/2  computed (k=0..3, lam=1/3)")
    for mu in range(2, 6):
        comp = {fuchs.fuchs_sum_computed(mu, Fraction(1, 3), k) for k in range(4)}
        print(f"{mu:3d}  {str(fuchs.fuchs_sum_printed(mu)):>7}  "
              f"{str(fuchs.fuchs_sum_relation(mu + 1, mu + 2)):>13}  {sorted(map(str, comp))}")


if __name__ == "__main__":
    main()
