"""Annihilating operators, determining equations and exponents.

The annihilator of ``K_0`` is built from the ordered determinant of
``P = S d/ds0 - L - V``. The ordered determinant alone does not kill
``K_0``: the cofactor sums ``T_k`` obtained by substituting column ``k``
into column 0 do not vanish in the non-commutative setting. They are
converted into first-order ``d/ds_j`` terms through
``dK_j/ds0 = dK_0/ds_j`` and ``K = (L+V)^-1 S dK/ds0``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import mpmath

from .exact_algebra import (
    AlgebraError, DiffOp, LocalSeries, MultiPoly, apply_op, as_fraction, bareiss_det, exact_div, nc_determinant,
    rational_roots, taylor_shift, theta, to_mp, upoly_divmod, upoly_gcd, upoly_trim,
    weyl_mul,
)
from .gauss_manin import (
    ConnectionSystem, conversion_B, derive_connection, discriminant,
)

MP_PREC = 128
ZERO_REL = mpmath.mpf("1e-25")


class FuchsError(AlgebraError):
    pass


class FuchsConditionError(FuchsError):
    def __init__(self, msg, coefficient=None):
        super().__init__(msg)
        self.coefficient = coefficient


@dataclass(frozen=True)
class FuchsOperator:
    mu: int
    order: int
    body: DiffOp
    leading: MultiPoly
    lam: Fraction
    shifted: bool = False
    k: int = 0
    x0: Fraction = Fraction(0)
    s_prime: tuple = None
    construction: str = "ordered-determinant+cofactors"
    apparent: MultiPoly = None

    def specialized(self):
        return self.s_prime is not None


@dataclass
class DeterminingEquation:
    t: object
    kappa: int
    coeffs: list
    roots: list = field(default_factory=list)

    def exponents(self):
        return ExponentSet(str(self.t), list(self.roots))

    def __call__(self, rho):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * rho + c
        return acc


@dataclass
class ExponentSet:
    point: str
    entries: list

    def multiset(self):
        out = []
        for e, mult in self.entries:
            out.extend([e] * mult)
        return sorted(out, key=_sort_key)

    def log_ranks(self):
        """Per Frobenius: a root of multiplicity L carries log powers 0..L-1."""
        return {e: list(range(mult)) for e, mult in self.entries}

    def total(self):
        return sum(self.multiset(), Fraction(0))


def _sort_key(x):
    if isinstance(x, Fraction):
        return (float(x), 0.0)
    return (float(mpmath.re(x)), float(mpmath.im(x)))


def _collect(values):
    out = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return sorted(out.items(), key=lambda kv: _sort_key(kv[0]))


# --------------------------------------------------------------------------
# matrix helpers over MultiPoly

def _specialize_matrix(M, s_prime):
    if s_prime is None:
        return M
    vals = {j: as_fraction(s_prime[j - 1]) for j in range(1, len(s_prime) + 1)}
    return [[c.subs(vals) for c in row] for row in M]


def _lower_triangular_inverse(R):
    """Inverse of a lower-triangular matrix with constant nonzero diagonal."""
    n = len(R)
    nv = R[0][0].nvars
    inv = [[MultiPoly(nv) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if R[i][j]:
                raise FuchsError("L + V is not lower triangular")
        if not R[i][i].is_constant() or R[i][i].constant_value() == 0:
            raise FuchsError("L + V has a non-constant or zero diagonal")
    for col in range(n):
        for i in range(n):
            acc = MultiPoly.const(nv, 1 if i == col else 0)
            for j in range(i):
                acc = acc - R[i][j] * inv[j][col]
            inv[i][col] = acc / R[i][i].constant_value()
    return inv


def _matmul(A, B):
    nv = A[0][0].nvars
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), MultiPoly(nv))
             for j in range(len(B[0]))] for i in range(len(A))]


def operator_matrix(S, R):
    """Entries ``S_ij d/ds0 - R_ij`` as DiffOps."""
    nv = S[0][0].nvars
    return [[DiffOp(nv, {(None, 1): S[i][j], (None, 0): -R[i][j]})
             for j in range(len(S))] for i in range(len(S))]


def _split_constant_term(op):
    """``op = T'' d/ds0 + t`` with ``t`` the coefficient of ``d^0``."""
    t = op.coeff(None, 0)
    rest = {}
    for (j, b), c in op.items():
        if j is not None:
            raise FuchsError("cofactor operator carries d/ds' terms")
        if b >= 1:
            rest[(None, b - 1)] = c
    return DiffOp(op.nvars, rest), t


def _corrected_determinant(P, D, E):
    """``T_0 + sum_i (T_i'' * D_i + t_i * E_i)``.

    ``D[i]`` realises ``dK_i/ds0`` and ``E[i]`` realises ``K_i`` as
    first-order operators acting on ``K_0``.
    """
    n = len(P)
    total = nc_determinant(P)
    for i in range(1, n):
        Pi = [[P[r][i] if c == 0 else P[r][c] for c in range(n)] for r in range(n)]
        Ti = nc_determinant(Pi)
        if Ti.is_zero():
            continue
        Tpp, t = _split_constant_term(Ti)
        if not Tpp.is_zero():
            total = total + weyl_mul(Tpp, D[i])
        if t:
            total = total + t * E[i]
    return total


def build_annihilator(cs, s_prime=None):
    """Order-``mu`` operator with leading coefficient ``Delta`` killing ``K_0``.

    Parameters
    ----------
    cs : ConnectionSystem
        Output of :func:`derive_connection`.
    s_prime : sequence of rationals, optional
        Specialize ``s_1 .. s_{mu-1}`` in the coefficients (the ``d/ds_j``
        terms are kept; only their coefficients are evaluated).
    """
    if cs.shifted:
        raise FuchsError("use build_shifted_annihilator for shifted systems")
    mu = cs.mu
    S = _specialize_matrix(cs.S, s_prime)
    R = _specialize_matrix(cs.R(), s_prime)
    P = operator_matrix(S, R)
    M = _matmul(_lower_triangular_inverse(R), S)
    D = [DiffOp.d0(mu)] + [DiffOp.dparam(mu, j) for j in range(1, mu)]
    E = []
    for k in range(mu):
        op = DiffOp(mu)
        for i in range(mu):
            op = op + M[k][i] * D[i]
        E.append(op)
    body = _corrected_determinant(P, D, E)
    delta = discriminant(mu)
    if s_prime is not None:
        delta = _specialize_matrix([[delta]], s_prime)[0][0]
    lead = body.coeff(None, body.s0_order())
    if body.s0_order() != mu or lead != delta:
        raise FuchsError(f"leading coefficient {lead} differs from the discriminant")
    sp = tuple(as_fraction(v) for v in s_prime) if s_prime is not None else None
    return FuchsOperator(mu, mu, body, lead, cs.lam, s_prime=sp)


def literal_determinant(cs, s_prime=None):
    """The bare ordered determinant, kept for comparison."""
    S = _specialize_matrix(cs.S, s_prime)
    R = _specialize_matrix(cs.R(), s_prime)
    return nc_determinant(operator_matrix(S, R))


def build_shifted_annihilator(cs, k=None, x0=None):
    """Order ``mu+1`` operator for ``K_{k,x0}`` with leading ``(s0 - s~0) Delta``.

    For ``x0 != 0`` the cofactor terms are converted with the binomial
    relations ``dK_{k+j}/ds0 = sum_i B_ji dK_k/ds_i`` and the first row of
    the shifted system for ``j = mu``. For ``x0 = 0`` that row degenerates,
    and the pure ``d/ds0`` operator is obtained by cyclic-vector elimination.
    """
    if not cs.shifted:
        raise FuchsError("expected a shifted connection system")
    if cs.s_prime is None:
        raise FuchsError("shifted annihilator needs s' specialized to rationals")
    k = cs.k if k is None else k
    x0 = cs.x0 if x0 is None else as_fraction(x0)
    if k != cs.k or x0 != cs.x0:
        raise FuchsError("k / x0 do not match the connection system")
    mu = cs.mu
    n = mu + 1
    s0 = MultiPoly.var(mu, 0)
    target = (s0 - cs.s_tilde0) * _specialize_matrix([[discriminant(mu)]], cs.s_prime)[0][0]
    if x0 == 0:
        op1 = ordinary_annihilator(cs, component=0)
        lead = _lift_univariate(op1.leading_coefficient(), mu)
        try:
            q = exact_div(lead, target)
        except AlgebraError:
            raise FuchsError(
                f"cyclic annihilator leading coefficient {lead} is not a multiple of "
                "(s0 - s~0) Delta") from None
        apparent = None
        if not q.is_constant():
            _check_apparent(op1, q)
            apparent = q
        body = _lift_op(op1, mu)
        return FuchsOperator(mu, n if apparent is None else op1.s0_order(), body, lead,
                             cs.lam, shifted=True, k=k, x0=x0, s_prime=cs.s_prime,
                             construction="cyclic-vector", apparent=apparent)
    S, R = cs.S, cs.R()
    P = operator_matrix(S, R)
    if any(R[0][j] for j in range(1, n)):
        raise FuchsError("first row of the shifted L + V is not diagonal")
    D = []
    for i in range(mu):
        op = DiffOp(mu)
        for j in range(i + 1):
            b = conversion_B(i, j, x0)
            if b:
                op = op + b * (DiffOp.d0(mu) if j == 0 else DiffOp.dparam(mu, j))
        D.append(op)
    pivot = S[0][mu]
    if not pivot.is_constant() or pivot.constant_value() == 0:
        raise FuchsError("shifted first row has no constant pivot in its last column")
    acc = DiffOp.mult(R[0][0])
    for m in range(mu):
        acc = acc - S[0][m] * D[m]
    D.append(DiffOp(mu, {key: c / pivot.constant_value() for key, c in acc.items()}))
    M = _matmul(_lower_triangular_inverse(R), S)
    E = []
    for i in range(n):
        op = DiffOp(mu)
        for m in range(n):
            if M[i][m]:
                op = op + M[i][m] * D[m]
        E.append(op)
    body = _corrected_determinant(P, D, E)
    lead = body.coeff(None, body.s0_order())
    if body.s0_order() != n or lead != target:
        raise FuchsError(f"leading coefficient {lead} differs from (s0 - s~0) Delta")
    return FuchsOperator(mu, n, body, lead, cs.lam, shifted=True, k=k, x0=x0,
                         s_prime=cs.s_prime)


def _check_apparent(op1, q):
    """Every root of the extra factor must carry distinct integer exponents >= 0."""
    coeffs = [to_mp(c) for c in q.univariate(0)]
    with mpmath.workprec(MP_PREC):
        ts = mpmath.polyroots(coeffs[::-1], maxsteps=200, extraprec=MP_PREC)
    for t in ts:
        de = indicial_polynomial(op1, None, mpmath.mpc(t))
        for rho, mult in de.roots:
            r = complex(rho)
            if mult != 1 or abs(r.imag) > 1e-8 or r.real < -1e-8 or abs(r.real - round(r.real)) > 1e-8:
                raise FuchsError(f"extra singular point {t} is not apparent (exponent {rho})")


def _lift_univariate(p, mu):
    return MultiPoly(mu, {(e[0],) + (0,) * (mu - 1): c for e, c in p.items()})


def _lift_op(op, mu):
    return DiffOp(mu, {key: _lift_univariate(c, mu) for key, c in op.items()})


def _to_univariate(p):
    if any(v != 0 for v in p.variables()):
        raise FuchsError("coefficient still depends on s'")
    return MultiPoly(1, {(e[0],): c for e, c in p.items()})


# --------------------------------------------------------------------------
# ordinary (pure d/ds0) annihilators by cyclic vectors

def _u(p):
    return upoly_trim(p.univariate(0)) if isinstance(p, MultiPoly) else upoly_trim(p)


def _uadd(a, b):
    n = max(len(a), len(b))
    return upoly_trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def _umul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return upoly_trim(out)


def _uscale(a, c):
    return upoly_trim([x * c for x in a])


def _uder(a):
    return upoly_trim([a[i] * i for i in range(1, len(a))])


def _udet(M):
    polys = [[MultiPoly(1, {(i,): c for i, c in enumerate(p)}) for p in row] for row in M]
    return upoly_trim(bareiss_det(polys).univariate(0)) if M else [Fraction(1)]


def _rank_at(rows, x):
    from .exact_algebra import matrix_rank_exact, upoly_eval
    return matrix_rank_exact([[upoly_eval(p, x) for p in row] for row in rows])


def ordinary_annihilator(cs, s_prime=None, component=0):
    """Minimal pure ``d/ds0`` operator killing component ``component`` of K.

    ``s'`` must be specialized (from ``cs.s_prime`` or the argument). The
    result is a one-variable DiffOp in ``s0`` with coprime coefficients.
    """
    sp = s_prime if s_prime is not None else cs.s_prime
    if sp is None:
        raise FuchsError("ordinary annihilator needs s' specialized")
    S = _specialize_matrix(cs.S, sp) if cs.s_prime is None else cs.S
    R = _specialize_matrix(cs.R(), sp) if cs.s_prime is None else cs.R()
    n = len(S)
    Su = [[_u(c) for c in row] for row in S]
    Ru = [[_u(c) for c in row] for row in R]
    delta = _udet(Su)
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[Su[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            d = _udet(minor) if minor else [Fraction(1)]
            adj[i][j] = _uscale(d, (-1) ** (i + j))
    N = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc = []
            for q in range(n):
                acc = _uadd(acc, _umul(adj[i][q], Ru[q][j]))
            N[i][j] = acc
    ddelta = _uder(delta)
    rows = [[[Fraction(1)] if q == component else [] for q in range(n)]]
    probes = [Fraction(7, 3), Fraction(-11, 5), Fraction(13, 17)]
    for order in range(1, n + 1):
        prev = rows[-1]
        nxt = []
        for j in range(n):
            acc = _uadd(_umul(delta, _uder(prev[j])), _uscale(_umul(ddelta, prev[j]), -(order - 1)))
            for i in range(n):
                acc = _uadd(acc, _umul(prev[i], N[i][j]))
            nxt.append(acc)
        rows.append(nxt)
        if max(_rank_at(rows, x) for x in probes) == order:
            break
    else:
        raise FuchsError("no dependency found among derivatives")
    # columns giving a nonsingular block for the first `order` rows
    cols = _pivot_columns(rows[:order], probes[0])
    coeffs = []
    for r in range(order + 1):
        minor = [[rows[q][c] for c in cols] for q in range(order + 1) if q != r]
        coeffs.append(_uscale(_udet(minor), (-1) ** r))
    # sum_r coeffs[r] * Delta^r * d^r
    terms = []
    dpow = [Fraction(1)]
    for r in range(order + 1):
        terms.append(_umul(coeffs[r], dpow))
        dpow = _umul(dpow, delta)
    g = []
    for t in terms:
        g = upoly_gcd(g, t) if g else upoly_gcd(t, t)
    terms = [upoly_divmod(t, g)[0] for t in terms]
    lc = terms[-1][-1]
    terms = [_uscale(t, 1 / lc) for t in terms]
    return DiffOp(1, {(None, r): MultiPoly(1, {(i,): c for i, c in enumerate(t)})
                      for r, t in enumerate(terms) if t})


def _pivot_columns(rows, x):
    from .exact_algebra import upoly_eval
    A = [[upoly_eval(p, x) for p in row] for row in rows]
    n = len(A[0])
    chosen = []
    basis = []
    for c in range(n):
        trial = [[row[cc] for cc in chosen + [c]] for row in A]
        from .exact_algebra import matrix_rank_exact
        if matrix_rank_exact(trial) == len(chosen) + 1:
            chosen.append(c)
        if len(chosen) == len(rows):
            break
    if len(chosen) != len(rows):
        raise FuchsError("could not select pivot columns")
    return chosen


# --------------------------------------------------------------------------
# closed-form operators on special slices

def _theta_product(shifts, nvars=1):
    op = DiffOp.mult(MultiPoly.const(nvars, 1))
    for a in shifts:
        op = weyl_mul(op, theta(nvars, 0, a))
    return op


def ell(mu, j):
    return Fraction(j + 1, mu + 1)


def op_41(mu, lam, s1):
    """Slice ``s' = (s1, 0, ..., 0)`` operator for ``K_0`` in the variable s0."""
    lam, s1 = as_fraction(lam), as_fraction(s1)
    prod = _theta_product([-ell(mu, j) + j - lam for j in range(mu)])
    psi_mu = (-Fraction(mu, mu + 1) * s1) ** mu
    return prod + DiffOp(1, {(None, mu): MultiPoly.const(1, s1 / (mu + 1) * psi_mu)})


def op_42(mu, lam, k, s1):
    """Slice operator for ``K_k`` (order mu+1) in the variable s0."""
    lam, s1 = as_fraction(lam), as_fraction(s1)
    shifts = [-ell(mu, k - 1) + mu - 1 - lam] + [-ell(mu, k + j) + j - lam for j in range(mu)]
    prod = _theta_product(shifts)
    psi_mu = (-Fraction(mu, mu + 1) * s1) ** mu
    tail = weyl_mul(DiffOp(1, {(None, mu): MultiPoly.const(1, s1 / (mu + 1) * psi_mu)}),
                    theta(1, 0, -k - 1 - lam))
    return prod + tail


def op_41_prime(mu, lam, c=1):
    """``prod (theta - l_j + j - lam) - c d^mu`` in ``t0``; c stands for t1^(mu+1)."""
    lam = as_fraction(lam)
    prod = _theta_product([-ell(mu, j) + j - lam for j in range(mu)])
    return prod - DiffOp(1, {(None, mu): MultiPoly.const(1, c)})


def op_42_prime(mu, lam, k, c=1):
    """``(theta + alpha_mu) prod (theta + alpha_j) - c d^mu (theta + gamma)`` in ``t0``."""
    lam = as_fraction(lam)
    shifts = [-ell(mu, k - 1) + mu - 1 - lam] + [-ell(mu, k + j) + j - lam for j in range(mu)]
    prod = _theta_product(shifts)
    tail = weyl_mul(DiffOp(1, {(None, mu): MultiPoly.const(1, c)}), theta(1, 0, -k - 1 - lam))
    return prod - tail


def slice_change_of_variables(op, mu, s1):
    """Rewrite an s0 operator in ``t0 = s0/mu`` (``d/ds0 = (1/mu) d/dt0``).

    The printed second parameter ``t1 = -s1/(mu+1)`` only enters through
    the constant in front of the ``d^mu`` term.
    """
    out = {}
    for (j, b), c in op.items():
        coeffs = c.univariate(0)
        new = MultiPoly(1, {(i,): a * Fraction(mu) ** i / Fraction(mu) ** b
                            for i, a in enumerate(coeffs)})
        out[(j, b)] = new
    return DiffOp(1, out)


# --------------------------------------------------------------------------
# determining equations

def at_infinity(op):
    """Rewrite a one-variable operator in ``u = 1/t``; result in ``u``."""
    if op.nvars != 1 or not op.is_pure():
        raise FuchsError("at_infinity expects a one-variable pure operator")
    u = MultiPoly.var(1, 0)
    D = DiffOp(1, {(None, 1): u * u * -1})
    N = max(c.degree(0) for _, c in op.items())
    total = DiffOp(1)
    for (_, b), c in op.items():
        pw = DiffOp.mult(MultiPoly.const(1, 1))
        for _ in range(b):
            pw = weyl_mul(pw, D)
        coeffs = c.univariate(0)
        cu = MultiPoly(1, {(N - i,): a for i, a in enumerate(coeffs) if a})
        total = total + cu * pw
    return total


def _taylor_at(coeffs, t, exact):
    if exact:
        return taylor_shift([as_fraction(c) for c in coeffs], t)
    with mpmath.workprec(MP_PREC):
        return taylor_shift([to_mp(c) for c in coeffs], to_mp(t))


def _vanishing_order(tay, exact, scale):
    for i, c in enumerate(tay):
        if exact:
            if c != 0:
                return i, c
        elif abs(c) > ZERO_REL * scale:
            return i, c
    return None, 0


def full_leading(op):
    """Leading coefficient as a polynomial in all of ``s0 .. s_{mu-1}``.

    Operators built with ``s'`` substituted lose the ``s'`` dependence of
    their singular locus, which the transversal restriction needs.
    """
    mu = op.mu
    delta = discriminant(mu)
    if not op.shifted:
        return delta
    # s~0 = -F(x0, s')
    x0 = as_fraction(op.x0)
    st = MultiPoly.const(mu, -x0 ** (mu + 1))
    for l in range(1, mu):
        st = st - MultiPoly.var(mu, l) * x0 ** l
    lead = (MultiPoly.var(mu, 0) - st) * delta
    if op.apparent is not None:
        lead = lead * op.apparent
    return lead


def restrict_transversal(op, s_prime, t, lead=None):
    """Evaluate the ``s'`` coefficients and trade ``d/ds_j`` for ``-t_j d/ds0``.

    ``t_j = dt/ds_j`` is taken from ``lead`` (default: the operator's own
    leading coefficient), whose root ``t`` must be simple. Valid for reading
    the lowest-order (indicial) part.
    """
    mu = op.nvars
    sp = [as_fraction(v) for v in s_prime]
    vals = {j: sp[j - 1] for j in range(1, mu)}
    if lead is None:
        lead = op.leading_coefficient()
    grads = None
    if not op.is_pure():
        exact = isinstance(t, (int, Fraction))
        pt = [as_fraction(t) if exact else t] + sp
        d0 = lead.diff(0).evaluate(pt)
        if (d0 == 0) if exact else abs(d0) < 1e-30:
            raise FuchsError("transversal restriction needs a simple root of the leading coefficient")
        grads = {j: -lead.diff(j).evaluate(pt) / d0 for j in range(1, mu)}
    out = {}
    for (j, b), c in op.items():
        cu = _to_univariate(c.subs(vals))
        if j is None:
            key, fac = (None, b), 1
        else:
            key, fac = (None, b + 1), -grads[j]
        if isinstance(fac, (int, Fraction)):
            term = cu * fac
            out[key] = out[key] + term if key in out else term
        else:
            out.setdefault(("num", key), []).append((cu, fac))
    numeric = {k: v for k, v in out.items() if k[0] == "num"}
    exact_part = DiffOp(1, {k: v for k, v in out.items() if k[0] != "num"})
    if numeric:
        return exact_part, numeric
    return exact_part, None


def indicial_polynomial(op, s_prime=None, t=Fraction(0)):
    """Determining polynomial of ``op`` at the singular point ``t``.

    Parameters
    ----------
    op : FuchsOperator or DiffOp
        Either a one-variable operator or a ``mu``-variable operator whose
        ``s'`` gets specialized to ``s_prime``.
    t : rational, complex, or the string ``"inf"``
    """
    body = op.body if isinstance(op, FuchsOperator) else op
    if t == "inf":
        if body.nvars != 1:
            raise FuchsError("infinity handled for one-variable operators")
        return _indicial_pure(at_infinity(body), Fraction(0), label="inf")
    exact = isinstance(t, (int, Fraction))
    if body.nvars == 1:
        return _indicial_pure(body, as_fraction(t) if exact else t)
    if s_prime is None:
        s_prime = op.s_prime if isinstance(op, FuchsOperator) else None
    if s_prime is None:
        raise FuchsError("specialize s' to read the determining equation")
    lead = full_leading(op) if isinstance(op, FuchsOperator) else None
    pure, numeric = restrict_transversal(body, s_prime, as_fraction(t) if exact else t, lead)
    if numeric:
        raise FuchsError("transversal gradient is not rational at this point")
    return _indicial_pure(pure, as_fraction(t) if exact else t)


def _indicial_pure(op, t, label=None):
    if isinstance(t, Fraction):
        return _indicial_pure_inner(op, t, label)
    with mpmath.workprec(MP_PREC):
        return _indicial_pure_inner(op, t, label)


def _indicial_pure_inner(op, t, label=None):
    exact = isinstance(t, Fraction)
    m = op.s0_order()
    data = {}
    scale = 0
    for (_, b), c in op.items():
        tay = _taylor_at(c.univariate(0), t, exact)
        data[b] = tay
        if not exact:
            scale = max(scale, max(abs(x) for x in tay))
    orders = {}
    for b, tay in data.items():
        v, lc = _vanishing_order(tay, exact, scale if not exact else 1)
        if v is not None:
            orders[b] = (v, lc)
    kappa = orders[m][0]
    for b, (v, _) in orders.items():
        if b >= m - kappa and v - b < kappa - m:
            raise FuchsConditionError(
                f"coefficient of d^{b} vanishes to order {v} < {kappa - (m - b)} at t={t}",
                coefficient=b)
    # Pi0(rho) = sum over b with v_b - b = kappa - m of lc_b [rho]_b
    zero = Fraction(0) if exact else mpmath.mpf(0)
    poly = [zero] * (m + 1)
    for b, (v, lc) in orders.items():
        if v - b != kappa - m:
            continue
        falling = [Fraction(1)] if exact else [mpmath.mpf(1)]
        for r in range(b):
            falling = _poly_mul_linear(falling, -r)
        for i, f in enumerate(falling):
            poly[i] = poly[i] + lc * f
    lead = poly[-1]
    poly = [p / lead for p in poly]
    roots = _roots(poly, exact)
    return DeterminingEquation(label or t, kappa, poly, roots)


def _poly_mul_linear(p, a):
    """Multiply by ``(rho + a)``."""
    out = [0 * p[0]] * (len(p) + 1)
    for i, c in enumerate(p):
        out[i] = out[i] + c * a
        out[i + 1] = out[i + 1] + c
    return out


def _roots(poly, exact):
    if exact:
        rat, rest = rational_roots(poly)
        vals = list(rat)
        if len(rest) > 1:
            with mpmath.workprec(MP_PREC):
                vals.extend(mpmath.polyroots([to_mp(c) for c in reversed(rest)],
                                             maxsteps=200, extraprec=200))
        return _collect(vals)
    with mpmath.workprec(MP_PREC):
        raw = mpmath.polyroots([to_mp(c) for c in reversed(poly)], maxsteps=400, extraprec=400)
        # a root of multiplicity r is only found to about prec/r bits; the
        # cluster mean is accurate again
        out, used = [], set()
        for i, r in enumerate(raw):
            if i in used:
                continue
            cl = [j for j in range(len(raw)) if j not in used
                  and abs(raw[j] - r) < mpmath.mpf("1e-12") * max(1, abs(r))]
            used.update(cl)
            mean = mpmath.fsum(raw[j] for j in cl) / len(cl)
            out.extend([snap_rational(mean)] * len(cl))
    return _collect(out)


def snap_rational(z, max_den=10000, tol=mpmath.mpf("1e-20")):
    """Identify a high-precision number with a small-denominator rational."""
    z = mpmath.mpmathify(z)
    if abs(mpmath.im(z)) > tol:
        return z
    x = mpmath.re(z)
    f = Fraction(str(mpmath.nstr(x, 40, strip_zeros=False))).limit_denominator(max_den)
    if abs(x - to_mp(f)) < tol:
        return f
    return z


def exponent_set(op, t, s_prime=None):
    return indicial_polynomial(op, s_prime, t).exponents()


def frobenius_series(op, t, rho, order=8):
    """Frobenius solution ``sum c_n (s0 - t)^(rho + n)`` with ``c_0 = 1``.

    Coefficients are fixed order by order from ``apply_op``; ``op`` is a
    one-variable pure operator with rational coefficients and ``rho`` a
    root of its determining equation at ``t``. Raises on a resonance,
    where a log term would be needed.
    """
    body = op.body if isinstance(op, FuchsOperator) else op
    if body.nvars != 1 or not body.is_pure():
        raise FuchsError("frobenius_series expects a one-variable pure operator")
    t, rho = as_fraction(t), as_fraction(rho)
    m = body.s0_order()
    kappa = indicial_polynomial(body, t=t).kappa
    shift = kappa - m
    size = order + m + 1

    def image(series):
        return apply_op(body, series)

    if image(LocalSeries.monomial(rho, t, size)).coefficient(shift) != 0:
        raise FuchsError(f"{rho} is not an exponent at {t}")
    coeffs = {(0, 0): Fraction(1)}
    for n in range(1, order):
        d = image(LocalSeries(t, rho, {(n, 0): Fraction(1)}, size)).coefficient(n + shift)
        r = image(LocalSeries(t, rho, coeffs, size)).coefficient(n + shift)
        if d == 0:
            if r != 0:
                raise FuchsError(f"resonance at n={n}: a log term is needed")
            continue
        coeffs[(n, 0)] = -r / d
    return LocalSeries(t, rho, coeffs, order)


# --------------------------------------------------------------------------
# closed-form exponent tables

FAMILIES = ("4.1'", "4.2'", "4.3e", "4.3o")


def exponents_closed_form(mu, nu, m, k, family, point):
    """Printed exponent lists, ``lam = m/nu`` substituted.

    ``family`` is one of ``4.1'``, ``4.2'``, ``4.3e`` (even index ``k = 2j``)
    and ``4.3o`` (odd index ``k = 2j+1``); ``point`` is ``omega``, ``0`` or
    ``inf``.
    """
    lam = Fraction(m, nu)
    point = str(point)
    if family == "4.1'" and point == "omega":
        vals = list(range(mu - 1)) + [lam + Fraction(1, 2)]
    elif family == "4.2'" and point == "omega":
        vals = list(range(mu)) + [lam + Fraction(1, 2)]
    elif family == "4.2'" and point == "0":
        vals = list(range(mu)) + [lam + k + 1]
    elif family == "4.2'" and point == "inf":
        vals = [Fraction(mu * j - (k + 1), mu + 1) - lam for j in range(mu + 1)]
    elif family in ("4.3e", "4.3o") and point == "0":
        if mu % 2 or mu < 2:
            raise FuchsError("(4.3) families need mu even")
        mm = (mu - 2) // 2
        if family == "4.3e":
            if k % 2:
                raise FuchsError("4.3e covers even indices k = 2j")
            j = k // 2
            vals = list(range(2 * mm + 1)) + [lam + j + Fraction(1, 2)]
        else:
            if k % 2 == 0:
                raise FuchsError("4.3o covers odd indices k = 2j+1")
            j = (k - 1) // 2
            vals = list(range(2 * mm + 1)) + [lam + j + mm + Fraction(3, 2)]
    else:
        raise FuchsError(f"({family}, {point}) is not covered by the printed tables")
    return ExponentSet(f"{family}@{point}", _collect([as_fraction(v) for v in vals]))


def fuchs_sum_printed(mu):
    return Fraction(mu * (mu + 1) ** 2, 2)


def fuchs_sum_relation(order, npoints):
    """``n(n-1)(p-2)/2`` for an order-n Fuchsian operator with p singular points."""
    return Fraction(order * (order - 1) * (npoints - 2), 2)


def fuchs_sum_brute(mu, nu, m, k):
    """Sum of the printed (4.2)' lists over 0, the mu roots of unity and infinity."""
    tot = exponents_closed_form(mu, nu, m, k, "4.2'", "0").total()
    tot += mu * exponents_closed_form(mu, nu, m, k, "4.2'", "omega").total()
    tot += exponents_closed_form(mu, nu, m, k, "4.2'", "inf").total()
    return tot


def roots_of_unity(mu):
    with mpmath.workprec(MP_PREC):
        return [mpmath.expjpi(mpmath.mpf(2 * j) / mu) for j in range(mu)]


def computed_exponents_42(mu, lam, k, c=1):
    """Exponents of the (4.2)' operator at 0, the roots of unity and infinity."""
    op = op_42_prime(mu, lam, k, c)
    out = {"0": indicial_polynomial(op, t=Fraction(0)).exponents(),
           "inf": indicial_polynomial(op, t="inf").exponents()}
    for j, w in enumerate(roots_of_unity(mu)):
        t = Fraction(1) if j == 0 else w
        out[f"omega^{j}"] = indicial_polynomial(op, t=t).exponents()
    return out


def computed_exponents_43(mu, lam, k, s2=Fraction(-3)):
    """Exponents at ``s0 = 0`` of the closed-cycle operator for ``K_k``.

    Uses the slice ``s' = (0, s2, 0, ..., 0)`` (``mu`` even), where ``z = 0``
    is a triple root at ``s0 = 0``.
    """
    if mu % 2 or mu < 4:
        raise FuchsError("the (4.3) geometry needs mu even and at least 4")
    lam = as_fraction(lam)
    cs = derive_connection(mu, lam.denominator, lam.numerator)
    sp = [Fraction(0)] * (mu - 1)
    sp[1] = as_fraction(s2)
    op = ordinary_annihilator(cs, sp, component=k)
    return indicial_polynomial(op, t=Fraction(0)).exponents()


def fuchs_sum_computed(mu, lam, k):
    ex = computed_exponents_42(mu, lam, k)
    total = 0
    for es in ex.values():
        for e in es.multiset():
            total = total + e
    return snap_rational(total) if not isinstance(total, Fraction) else total


# --------------------------------------------------------------------------
# isomonodromy sampling

def vanishing_orders(op, s_prime, t):
    """Order of vanishing at ``s0 = t`` of each coefficient (after specializing)."""
    body = op.body if isinstance(op, FuchsOperator) else op
    mu = body.nvars
    vals = {j: as_fraction(s_prime[j - 1]) for j in range(1, mu)} if mu > 1 else {}
    out = {}
    for (j, b), c in body.items():
        cu = c.subs(vals)
        tay = taylor_shift(cu.univariate(0), as_fraction(t))
        v = next((i for i, x in enumerate(tay) if x != 0), None)
        out[(j, b)] = v
    return out


def check_isomonodromy_factorization(op, samples, k=0):
    """Check vanishing orders and exponent sets at sample points of ``D^(k)``.

    Each sample is ``(t, s_prime)`` with ``t`` a root of ``Delta(., s')``.
    Returns a dict with per-sample orders, exponents and the agreement flag.
    """
    body = op.body if isinstance(op, FuchsOperator) else op
    mu = body.nvars
    delta = discriminant(mu)
    from .gauss_manin import stratum_of
    order = body.s0_order()
    report = {"samples": [], "orders_ok": True, "exponents_agree": True}
    ref = None
    for t, sp in samples:
        t = as_fraction(t)
        pt = [t] + [as_fraction(v) for v in sp]
        if delta.evaluate(pt) != 0:
            raise FuchsError(f"sample {pt} is not on the discriminant")
        lab = stratum_of(pt, mu)
        if lab.k != k:
            raise FuchsError(f"sample {pt} lies on D^({lab.k}), not D^({k})")
        vo = vanishing_orders(body, sp, t)
        ok = True
        for jj in range(0, k + 2):
            need = k - jj + 1
            v = vo.get((None, order - jj))
            if need > 0 and v is not None and v < need:
                ok = False
        ex = indicial_polynomial(op, sp, t).exponents()
        ms = ex.multiset()
        if ref is None:
            ref = ms
        agree = ms == ref
        report["orders_ok"] &= ok
        report["exponents_agree"] &= agree
        report["samples"].append({"t": str(t), "s_prime": [str(v) for v in sp],
                                  "orders": {f"{j}:{b}": v for (j, b), v in vo.items()},
                                  "exponents": [str(e) for e in ms], "orders_ok": ok})
    return report


def morse_point(mu, a, q_roots):
    """Rational point of ``D^(0)`` with a double root at ``a``.

    ``F + s0 = (z - a)^2 prod (z - r)`` with the ``r`` chosen so that the
    ``z^mu`` coefficient vanishes: the last root is fixed by that condition.
    """
    a = as_fraction(a)
    rs = [as_fraction(r) for r in q_roots]
    if len(rs) != mu - 2:
        raise ValueError("need mu-2 free roots")
    last = -2 * a - sum(rs)
    roots = [a, a] + rs + [last]
    poly = [Fraction(1)]
    for r in roots:
        poly = _poly_mul_linear(poly, -r)
    s0 = poly[0]
    sp = tuple(poly[1:mu])
    return s0, sp
