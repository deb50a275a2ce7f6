"""Period relations, the s0-direction connection, discriminant and strata.

The deformation is ``F(z, s') = z^(mu+1) + s_{mu-1} z^(mu-1) + ... + s_1 z``
and the periods are ``K_i = int z^i (F + s0)^lam dz`` with ``lam = m/nu``.
Unknowns of the relation matrix are ``b_m = dK_m/ds0``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .exact_algebra import (
    AlgebraError, MultiPoly, as_fraction, bareiss_det, divides, exact_div,
    matrix_rank_exact, resultant_s0_oracle, upoly_divmod, upoly_gcd, upoly_trim,
    zpoly_diff,
)

MU_MIN, MU_MAX = 2, 8


class ConnectionShapeError(AlgebraError):
    pass


class StratumError(ValueError):
    pass


def check_mu(mu):
    if not isinstance(mu, int) or not MU_MIN <= mu <= MU_MAX:
        raise ValueError(f"mu={mu!r} outside supported range {MU_MIN}..{MU_MAX}")


def s_var(mu, i):
    return MultiPoly.var(mu, i)


def versal_F(mu, with_s0=True):
    """Coefficients in z of ``F(z, s') (+ s0)`` as MultiPoly in s0..s_{mu-1}."""
    check_mu(mu)
    coeffs = [MultiPoly(mu) for _ in range(mu + 2)]
    coeffs[mu + 1] = MultiPoly.const(mu, 1)
    for l in range(1, mu):
        coeffs[l] = s_var(mu, l)
    if with_s0:
        coeffs[0] = s_var(mu, 0)
    return coeffs


@dataclass(frozen=True)
class SigmaSystem:
    """Relation matrix ``sigma @ b = rhs @ K`` between dK/ds0 and K."""
    mu: int
    lam: Fraction
    sigma: list
    rhs: list

    def rhs_pattern(self):
        """Nonzero weights of the right-hand side, row by row."""
        out = []
        for row in self.rhs:
            nz = [(j, c) for j, c in enumerate(row) if c]
            out.append(nz)
        return out


def build_sigma(mu, lam):
    """Assemble the ``(2mu+1) x (2mu+1)`` relation matrix.

    Rows ``0..mu-1``: ``sum_l s_l b_{l+i} + b_{mu+1+i} = lam K_i``.
    Rows ``mu..2mu`` (``j = -1..mu-1``):
    ``sum_l l s_l b_{l+j} + (mu+1) b_{mu+1+j} = -(j+1) K_j``.
    """
    check_mu(mu)
    lam = as_fraction(lam)
    n = 2 * mu + 1
    zero = MultiPoly(mu)
    sig = [[zero] * n for _ in range(n)]
    rhs = [[zero] * mu for _ in range(n)]
    for i in range(mu):
        for l in range(mu):
            sig[i][l + i] = s_var(mu, l)
        sig[i][mu + 1 + i] = MultiPoly.const(mu, 1)
        rhs[i][i] = MultiPoly.const(mu, lam)
    for r, j in enumerate(range(-1, mu)):
        row = mu + r
        for l in range(1, mu):
            sig[row][l + j] = s_var(mu, l) * l
        sig[row][mu + 1 + j] = MultiPoly.const(mu, mu + 1)
        if j >= 0:
            rhs[row][j] = MultiPoly.const(mu, -(j + 1))
    return SigmaSystem(mu, lam, sig, rhs)


@dataclass(frozen=True)
class ConnectionSystem:
    """``S dK/ds0 = (L + V) K``; shifted variants carry ``x0`` and ``k``."""
    mu: int
    nu: int
    m: int
    lam: Fraction
    S: list
    L: list
    V: list
    shifted: bool = False
    k: int = 0
    x0: Fraction = Fraction(0)
    s_prime: tuple = None
    s_tilde0: MultiPoly = None
    taylor: list = field(default=None, compare=False)

    @property
    def size(self):
        return len(self.S)

    def R(self):
        n = self.size
        return [[self.V[i][j] + (self.L[i] if i == j else 0) for j in range(n)]
                for i in range(n)]

    def numeric(self, point):
        """Evaluate ``S`` and ``L + V`` at a point as complex arrays."""
        point = [complex(p) for p in point]
        R = self.R()
        Sn = np.array([[complex(c.evaluate(point)) for c in row] for row in self.S])
        Rn = np.array([[complex(c.evaluate(point)) for c in row] for row in R])
        return Sn, Rn


def _poly_matrix_str(M):
    return [[str(c) for c in row] for row in M]


def derive_connection(mu, nu, m):
    """Eliminate ``b_mu .. b_2mu`` from the relation matrix.

    The lower rows have constant pivots ``mu+1`` on a triangular band, so
    the elimination needs only division by constants.
    """
    check_mu(mu)
    if nu < 1:
        raise ValueError("nu must be positive")
    lam = Fraction(m, nu)
    if lam.denominator == 1 and lam < 0:
        raise ValueError("lam is a negative integer")
    sysm = build_sigma(mu, lam)
    n = 2 * mu + 1
    lower = {}
    for r in range(mu, n):
        j = r - mu - 1
        lower[mu + 1 + j] = (sysm.sigma[r], sysm.rhs[r])
    rows = []
    for i in range(mu):
        b = list(sysm.sigma[i])
        a = list(sysm.rhs[i])
        for col in range(n - 1, mu - 1, -1):
            if b[col].is_zero():
                continue
            pb, pa = lower[col]
            f = b[col] / pb[col].constant_value()
            b = [x - f * y for x, y in zip(b, pb)]
            a = [x - f * y for x, y in zip(a, pa)]
        if any(not x.is_zero() for x in b[mu:]):
            raise ConnectionShapeError("high columns survived elimination")
        rows.append((b[:mu], a))
    S = [r[0] for r in rows]
    R = [r[1] for r in rows]
    S, R = _normalize_monic(S, R, var_shift=MultiPoly.var(mu, 0))
    L, V = _split_LV(R, mu, expected=[lam + Fraction(i + 1, mu + 1) for i in range(mu)])
    for i in range(mu):
        for j in range(mu):
            if V[i][j] and (j >= i or i < 2):
                raise ConnectionShapeError(f"V[{i}][{j}] = {V[i][j]} breaks the triangular pattern")
            if any(v < 2 for v in V[i][j].variables()):
                raise ConnectionShapeError(f"V[{i}][{j}] involves s0 or s1")
    return ConnectionSystem(mu, nu, m, lam, S, L, V)


def _normalize_monic(S, R, var_shift):
    """Left-multiply so that the coefficient of s0 in S is the identity."""
    n = len(S)
    E = [[c.coefficients_in(0)[1].constant_value() if c.degree(0) >= 1 else Fraction(0)
          for c in row] for row in S]
    for row in S:
        for c in row:
            if c.degree(0) > 1:
                raise ConnectionShapeError("S is not affine in s0")
    if all(E[i][j] == (1 if i == j else 0) for i in range(n) for j in range(n)):
        return S, R
    Einv = _inv_rational(E)
    mix = lambda M: [[sum((M[k][j] * Einv[i][k] for k in range(n)), MultiPoly(M[0][0].nvars))
                      for j in range(len(M[0]))] for i in range(n)]
    return mix(S), mix(R)


def _inv_rational(E):
    n = len(E)
    A = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(E)]
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c]), None)
        if p is None:
            raise ConnectionShapeError("s0-coefficient matrix of S is singular")
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [x / piv for x in A[c]]
        for r in range(n):
            if r != c and A[r][c]:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return [row[n:] for row in A]


def _split_LV(R, nvars, expected):
    n = len(R)
    L = []
    V = [[MultiPoly(nvars) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        d = R[i][i]
        if not d.is_constant():
            raise ConnectionShapeError(f"diagonal of L+V not constant at row {i}")
        L.append(d.constant_value())
        for j in range(n):
            if j != i:
                V[i][j] = R[i][j]
    if expected is not None and L != list(expected):
        raise ConnectionShapeError(f"L = {L} differs from expected {expected}")
    return L, V


def discriminant(mu):
    """``det S`` for the connection (monic of degree mu in s0)."""
    cs = derive_connection(mu, 2, 1)
    return bareiss_det(cs.S)


def discriminant_oracle(mu):
    """Monic normalization of ``Res_z(F + s0, dF/dz)``."""
    f = versal_F(mu)
    res = resultant_s0_oracle(f, zpoly_diff(f))
    lead = res.coefficients_in(0)[-1]
    return res / lead.constant_value()


def sigma_determinant(mu, lam=Fraction(1, 2)):
    return bareiss_det(build_sigma(mu, lam).sigma)


def quasihomogeneous_weights(mu):
    return [mu + 1 - j for j in range(mu)]


# --------------------------------------------------------------------------
# logarithmic vector fields

@dataclass(frozen=True)
class LogVectorField:
    index: int
    coeffs: tuple

    def apply(self, p):
        """``xi(p) = sum_j sigma_{i,j} dp/ds_j``."""
        out = MultiPoly(p.nvars)
        for j, c in enumerate(self.coeffs):
            if c:
                out = out + c * p.diff(j)
        return out


def log_fields(mu):
    """Rows of S read as vector fields ``sum_j S[i][j] d/ds_j``."""
    cs = derive_connection(mu, 2, 1)
    return [LogVectorField(i, tuple(cs.S[i])) for i in range(mu)]


def lie_bracket(a, b):
    """Coefficients of ``[a, b]`` as a plain tuple."""
    out = []
    for j in range(len(a.coeffs)):
        out.append(a.apply(b.coeffs[j]) - b.apply(a.coeffs[j]))
    return tuple(out)


def is_tangent(field_, delta):
    return divides(delta, field_.apply(delta))


# --------------------------------------------------------------------------
# strata

@dataclass(frozen=True)
class StratumLabel:
    k: int
    witness: int
    maxwellFlag: bool
    root_order: int = 0
    delta_root_multiplicity: int = 0

    def to_dict(self):
        return {"k": self.k, "rank_S": self.witness, "maxwell": self.maxwellFlag,
                "root_order": self.root_order,
                "delta_root_multiplicity": self.delta_root_multiplicity}


def _univariate_in_s0(p, sprime):
    vals = {j: sprime[j - 1] for j in range(1, p.nvars)}
    return p.subs(vals).univariate(0)


def _root_multiplicity_exact(coeffs, root):
    p = upoly_trim(coeffs)
    mult = 0
    while p:
        q, r = upoly_divmod(p, [-root, Fraction(1)])
        if upoly_trim(r):
            break
        mult += 1
        p = q
    return mult


def max_root_order_exact(coeffs):
    """Largest multiplicity of a root of a rational polynomial."""
    p = upoly_trim(coeffs)
    order = 1
    while True:
        dp = [p[i] * i for i in range(1, len(p))]
        g = upoly_gcd(p, dp)
        if len(g) <= 1:
            return order
        order += 1
        p = g


def stratum_of(point, mu=None, tol=1e-9):
    """Stratum label of a discriminant point ``(s0, s1, ..., s_{mu-1})``."""
    point = list(point)
    mu = mu or len(point)
    check_mu(mu)
    delta = discriminant(mu)
    cs = derive_connection(mu, 2, 1)
    exact = all(isinstance(x, (int, Fraction)) for x in point)
    sprime = point[1:]
    if exact:
        point = [as_fraction(x) for x in point]
        if delta.evaluate(point) != 0:
            raise StratumError("point not on the discriminant")
        Sval = [[c.evaluate(point) for c in row] for row in cs.S]
        rank = matrix_rank_exact(Sval)
        Fz = [point[0]] + [as_fraction(x) for x in sprime] + [Fraction(0), Fraction(1)]
        root_order = max_root_order_exact(Fz)
        dmult = _root_multiplicity_exact(_univariate_in_s0(delta, sprime), point[0])
    else:
        pt = [complex(x) for x in point]
        scale = max(1.0, max(abs(x) for x in pt)) ** (mu * (mu + 1) / (mu + 1))
        dval = abs(complex(delta.evaluate(pt)))
        if dval > tol * max(1.0, scale) * 1e3:
            raise StratumError(f"point not on the discriminant (|Delta| = {dval:.3g})")
        Sval = np.array([[complex(c.evaluate(pt)) for c in row] for row in cs.S])
        sv = np.linalg.svd(Sval, compute_uv=False)
        rank = int(np.sum(sv > tol * max(1.0, sv[0]) * 1e2)) if sv[0] > 0 else 0
        zc = np.array([1.0, 0.0] + [pt[j] for j in range(mu - 1, 0, -1)] + [pt[0]], dtype=complex)
        roots = np.roots(zc)
        root_order = _cluster_max(roots, 1e-4)
        dc = _univariate_float(delta, pt[1:])
        dmult = _cluster_count(np.roots(dc[::-1]), pt[0], 1e-4)
    k = mu - 1 - rank
    if root_order != k + 2:
        raise StratumError(
            f"rank of S gives k={k} but F + s0 has a root of order {root_order}")
    maxwell = dmult > k + 1
    return StratumLabel(k, rank, maxwell, root_order, dmult)


def _univariate_float(p, sprime):
    d = p.degree(0)
    out = []
    for c in p.coefficients_in(0):
        out.append(complex(c.evaluate([0j] + list(sprime))))
    return out + [0j] * (d + 1 - len(out))


def _cluster_max(roots, tol):
    best = 1
    for r in roots:
        best = max(best, int(np.sum(np.abs(roots - r) < tol * max(1.0, abs(r)))))
    return best


def _cluster_count(roots, x, tol):
    return int(np.sum(np.abs(roots - x) < tol * max(1.0, abs(x))))


# --------------------------------------------------------------------------
# shifted system around a base point x0

def taylor_coefficients(mu, x0, s_prime=None):
    """``f_l = F^(l)(x0, s') / l!`` for ``l = 0 .. mu+1`` (without s0)."""
    x0 = as_fraction(x0)
    base = versal_F(mu, with_s0=False)
    out = []
    for l in range(mu + 2):
        acc = MultiPoly(mu)
        for p in range(l, mu + 2):
            if base[p]:
                acc = acc + base[p] * (comb(p, l) * x0 ** (p - l))
        out.append(acc)
    if s_prime is not None:
        vals = {j: as_fraction(s_prime[j - 1]) for j in range(1, mu)}
        out = [c.subs(vals) for c in out]
    return out


def conversion_B(j, i, x0):
    """``x^j = sum_i B_ji (x + x0)^i`` in shifted coordinates."""
    x0 = as_fraction(x0)
    return comb(j, i) * (-x0) ** (j - i)


def conversion_Bj(mu, j, x0):
    """Coefficients of ``(x + x0)^mu - x^mu`` written in powers of ``(x + x0)``."""
    x0 = as_fraction(x0)
    return -comb(mu, j) * (-x0) ** (mu - j)


def derive_shifted_connection(mu, nu, m, k, x0, s_prime=None):
    """Size ``mu+1`` system for ``K_{k+i}(x0) = int_{x0} (z-x0)^(k+i) (F+s0)^lam dz``.

    Each Euler row combines a row of the first family with the matching row
    of the second family divided by ``mu+1``; the remaining high columns are
    then reduced with the constant ``mu+1`` pivots of the second family.
    """
    check_mu(mu)
    lam = Fraction(m, nu)
    x0 = as_fraction(x0)
    f = taylor_coefficients(mu, x0, s_prime)
    s0 = s_var(mu, 0)
    s_tilde0 = -f[0]
    f = [s0 + f[0]] + f[1:]
    n = 2 * mu + 2
    zero = MultiPoly(mu)

    def const(c):
        return MultiPoly.const(mu, c)

    second = {}
    for j in range(mu):
        b = [zero] * n
        a = [zero] * (mu + 1)
        for l in range(1, mu + 1):
            b[l + j] = b[l + j] + f[l] * l
        b[mu + 1 + j] = const(mu + 1)
        a[j] = const(-(k + j + 1))
        second[mu + 1 + j] = (b, a)
    S, R = [], []
    for i in range(mu + 1):
        b = [zero] * n
        a = [zero] * (mu + 1)
        for l in range(mu + 1):
            b[l + i] = b[l + i] + f[l] * (1 - Fraction(l, mu + 1))
        a[i] = const(lam + Fraction(k + i + 1, mu + 1))
        for col in range(2 * mu, mu, -1):
            if b[col].is_zero():
                continue
            pb, pa = second[col]
            fac = b[col] / (mu + 1)
            b = [x - fac * y for x, y in zip(b, pb)]
            a = [x - fac * y for x, y in zip(a, pa)]
        if any(x for x in b[mu + 1:]):
            raise ConnectionShapeError("shifted elimination left high columns")
        S.append(b[:mu + 1])
        R.append(a)
    expected = [lam + Fraction(k + i + 1, mu + 1) for i in range(mu + 1)]
    L = [R[i][i].constant_value() if R[i][i].is_constant() else None for i in range(mu + 1)]
    if L != expected:
        raise ConnectionShapeError(f"shifted L = {L}, expected {expected}")
    V = [[R[i][j] if i != j else zero for j in range(mu + 1)] for i in range(mu + 1)]
    for i in range(mu + 1):
        for j in range(mu + 1):
            d = (S[i][j] - (s0 if i == j else 0)).degree(0)
            if d > 0:
                raise ConnectionShapeError("shifted S is not s0*Id plus an s0-free part")
    sp = tuple(as_fraction(v) for v in s_prime) if s_prime is not None else None
    return ConnectionSystem(mu, nu, m, lam, S, L, V, shifted=True, k=k, x0=x0,
                            s_prime=sp, s_tilde0=s_tilde0, taylor=f)
