"""Dulac multiplicities and zero-multiplicity bounds for hyperelliptic integrals.

Integer part ``[x]`` is the floor. All bound arithmetic is exact.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor

from .exact_algebra import as_fraction

DEFAULT_THRESHOLD_FACTOR = 1e3


class BoundError(ValueError):
    pass


class IndeterminateError(BoundError):
    """No term of the expansion is certainly nonzero."""


class NotCoveredError(BoundError):
    """The query falls outside the cases the theorem covers."""


@dataclass(frozen=True)
class DulacTerm:
    rho: Fraction
    k: int
    coefficient: object
    error: float = 0.0

    def __post_init__(self):
        if self.k < 0:
            raise BoundError("log power must be nonnegative")
        object.__setattr__(self, "rho", as_fraction(self.rho))


@dataclass
class DulacExpansion:
    """Finite part of ``sum f_{rho,k} (t - t0)^rho log^k (t - t0)``.

    A term is certainly nonzero when ``|f| > threshold`` where the threshold
    is ``threshold`` if given, else ``threshold_factor`` times the term's
    error bar. Exact Rational coefficients are nonzero iff they are nonzero.
    """
    t0: complex
    terms: list = field(default_factory=list)
    threshold: float = None
    threshold_factor: float = DEFAULT_THRESHOLD_FACTOR

    def term_threshold(self, term):
        if self.threshold is not None:
            return self.threshold
        return self.threshold_factor * term.error

    def is_nonzero(self, term):
        c = term.coefficient
        if isinstance(c, (int, Fraction)) and term.error == 0 and self.threshold is None:
            return c != 0
        return abs(complex(c)) > self.term_threshold(term)

    def nonzero_terms(self):
        return [t for t in self.terms if self.is_nonzero(t)]

    def leading(self):
        """``(rho_1, k_1)`` of the Dulac definition."""
        nz = self.nonzero_terms()
        if not nz:
            raise IndeterminateError("every term is below the zero threshold")
        rho1 = min(t.rho for t in nz)
        k1 = max(t.k for t in nz if t.rho == rho1)
        return rho1, k1

    def to_dict(self):
        return {"t0": [complex(self.t0).real, complex(self.t0).imag],
                "terms": [{"rho": str(t.rho), "k": t.k,
                           "coefficient": _num_json(t.coefficient), "error": t.error}
                          for t in self.terms],
                "threshold": self.threshold}


def _num_json(c):
    if isinstance(c, (int, Fraction)):
        return str(c)
    c = complex(c)
    return [c.real, c.imag]


def dulac_multiplicity(e):
    """``(k_1 + 1)([rho_1] + 1)`` for a Dulac expansion."""
    rho1, k1 = e.leading()
    return (k1 + 1) * (floor(rho1) + 1)


@dataclass(frozen=True)
class BoundQuery:
    mu: int
    nu: int
    m: int
    K: int = 0
    k1: int = 0
    pointType: str = "branch"

    def __post_init__(self):
        if self.mu < 2 or self.nu < 2 or self.K < 0 or self.k1 < 0:
            raise BoundError("need mu >= 2, nu >= 2, K >= 0, k1 >= 0")
        if self.k1 > self.K:
            raise BoundError("k1 cannot exceed K")
        if self.pointType not in ("branch", "regular"):
            raise BoundError("pointType must be 'branch' or 'regular'")

    @property
    def lam(self):
        return Fraction(self.m, self.nu)


@dataclass(frozen=True)
class BoundResult:
    bound: int
    formula: str
    rho: Fraction = None

    def to_dict(self):
        return {"bound": self.bound, "formula": self.formula,
                "rho": None if self.rho is None else str(self.rho)}


def bound_report(q):
    """Bound with the formula tag and the matching maximal exponent."""
    lam = q.lam
    if q.pointType == "regular":
        return BoundResult(q.mu + q.K, "thm5.1.iii")
    if q.mu % 2 == 0:
        b = 2 * floor(lam + Fraction(q.K + q.mu, 2))
        rho = classify_exponent_bound(q.mu, q.nu, q.m, q.k1, "D_M1")
        return BoundResult(b, "thm5.1.i", rho)
    if q.k1 != 0:
        raise NotCoveredError("odd mu with k1 > 0 at a branch point is not covered")
    b = max(q.mu - 1, 2 * floor(lam + Fraction(3, 2)))
    return BoundResult(b, "thm5.1.ii", lam + Fraction(1, 2))


def zero_bound(q):
    """Upper bound on the zero multiplicity of the integral at a point."""
    return bound_report(q).bound


def bound_nu2(mu, K, m):
    """The two-sheeted form ``2[(K + m + mu)/2]``."""
    return 2 * floor(Fraction(K + m + mu, 2))


def classify_exponent_bound(mu, nu, m, k1, stratum):
    """Maximal characteristic exponent contribution at a branch point.

    ``stratum`` is ``"D_M1"`` (the point carrying the factor of exponent
    ``k1``) or ``"D_M-"`` (any other Morse branch point).
    """
    lam = Fraction(m, nu)
    if stratum == "D_M-":
        return lam + Fraction(1, 2)
    if stratum != "D_M1":
        raise BoundError(f"unknown stratum {stratum!r}")
    if mu % 2 == 0:
        if k1 % 2 == 0:
            return lam + Fraction(k1 + 1, 2)
        return lam + Fraction(k1 + mu, 2)
    if k1 == 0:
        return lam + Fraction(1, 2)
    raise NotCoveredError("odd mu at the D_M1 point is only known for k1 = 0")


def n_estimate(rho):
    """Multiplicity estimate from a maximal exponent: ``2 rho`` or ``[rho] + 1``."""
    rho = as_fraction(rho)
    if rho.denominator == 1:
        return 2 * int(rho)
    return floor(rho) + 1
