"""Exact rational polynomials, resultants and the first-order Weyl algebra.

Everything here works over :class:`fractions.Fraction`. Variables of a
:class:`MultiPoly` are indexed so that index 0 is ``s0`` and index ``j`` is
``sj``. Values are immutable once built.
"""
from fractions import Fraction
from itertools import permutations
from math import comb

import mpmath

MAX_VARS = 8


class AlgebraError(ValueError):
    pass


class TruncationError(AlgebraError):
    pass


def as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"not an exact rational: {x!r}")


def to_mp(x):
    """Convert an exact or floating value to an mpmath number."""
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        return x
    if isinstance(x, complex):
        return mpmath.mpc(x.real, x.imag)
    return mpmath.mpf(x)


def _is_exact(x):
    return isinstance(x, (int, Fraction))


# --------------------------------------------------------------------------
# multivariate polynomials

class MultiPoly:
    """Sparse polynomial with rational coefficients in ``nvars`` variables.

    Parameters
    ----------
    nvars : int
        Number of variables ``s0 .. s_{nvars-1}``.
    terms : dict, optional
        Map from exponent tuples to coefficients. Zero coefficients are
        dropped.
    """

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars, terms=None):
        if not 1 <= nvars <= MAX_VARS + 1:
            raise AlgebraError(f"variable count {nvars} outside 1..{MAX_VARS + 1}")
        self.nvars = nvars
        clean = {}
        if terms:
            for e, c in terms.items():
                e = tuple(e)
                if len(e) != nvars:
                    raise AlgebraError("exponent length does not match nvars")
                c = as_fraction(c)
                if c:
                    clean[e] = clean.get(e, 0) + c
                    if not clean[e]:
                        del clean[e]
        self._terms = clean
        self._hash = None

    # constructors
    @classmethod
    def const(cls, nvars, c):
        c = as_fraction(c)
        return cls(nvars, {(0,) * nvars: c} if c else {})

    @classmethod
    def var(cls, nvars, i):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    # access
    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self):
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def is_constant(self):
        return all(not any(e) for e in self._terms)

    def constant_value(self):
        if not self.is_constant():
            raise AlgebraError("polynomial is not constant")
        return self._terms.get((0,) * self.nvars, Fraction(0))

    def degree(self, i=None):
        if not self._terms:
            return -1
        if i is None:
            return max(sum(e) for e in self._terms)
        return max(e[i] for e in self._terms)

    def weighted_degrees(self, weights):
        return {sum(w * a for w, a in zip(weights, e)) for e in self._terms}

    def variables(self):
        used = set()
        for e in self._terms:
            used.update(i for i, a in enumerate(e) if a)
        return sorted(used)

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise AlgebraError(
                    f"variable-count mismatch: {self.nvars} vs {other.nvars}")
            return other
        if _is_exact(other):
            return MultiPoly.const(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = dict(self._terms)
        for e, c in other._terms.items():
            v = t.get(e, 0) + c
            if v:
                t[e] = v
            else:
                t.pop(e, None)
        return MultiPoly(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _is_exact(other):
            other = as_fraction(other)
            if not other:
                return MultiPoly(self.nvars)
            return MultiPoly(self.nvars, {e: c * other for e, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return MultiPoly(self.nvars, t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_exact(other):
            other = as_fraction(other)
            if not other:
                raise ZeroDivisionError("division of polynomial by zero")
            return self * (1 / other)
        if isinstance(other, MultiPoly):
            return exact_div(self, other)
        return NotImplemented

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise AlgebraError("only nonnegative integer powers")
        out = MultiPoly.const(self.nvars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, MultiPoly):
            return self.nvars == other.nvars and self._terms == other._terms
        if _is_exact(other):
            return self == MultiPoly.const(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # calculus and substitution
    def diff(self, i):
        t = {}
        for e, c in self._terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                t[tuple(f)] = c * e[i]
        return MultiPoly(self.nvars, t)

    def subs(self, values):
        """Substitute exact values or polynomials for some variables.

        ``values`` maps variable index to a rational or a :class:`MultiPoly`
        with the same variable count. The variable count is preserved.
        """
        out = MultiPoly(self.nvars)
        powers = {}
        for e, c in self._terms.items():
            keep = list(e)
            term = MultiPoly.const(self.nvars, c)
            for i, v in values.items():
                a = e[i]
                if not a:
                    continue
                keep[i] = 0
                key = (i, a)
                if key not in powers:
                    if isinstance(v, MultiPoly):
                        powers[key] = v ** a
                    else:
                        powers[key] = as_fraction(v) ** a
                term = term * powers[key]
            out = out + term * MultiPoly(self.nvars, {tuple(keep): 1})
        return out

    def __call__(self, *point):
        return self.evaluate(point)

    def evaluate(self, point):
        """Evaluate at a full point (exact or floating values)."""
        if len(point) != self.nvars:
            raise AlgebraError("point dimension does not match nvars")
        exact = all(_is_exact(p) for p in point)
        if exact:
            point = [as_fraction(p) for p in point]
        total = Fraction(0) if exact else 0
        for e, c in self._terms.items():
            m = c if exact else _num(c, point)
            for p, a in zip(point, e):
                if a:
                    m = m * p ** a
            total = total + m
        return total

    def coefficients_in(self, i):
        """Return the list of coefficients with respect to variable ``i``."""
        d = self.degree(i)
        out = [dict() for _ in range(max(d, 0) + 1)]
        for e, c in self._terms.items():
            f = list(e)
            f[i] = 0
            out[e[i]][tuple(f)] = c
        return [MultiPoly(self.nvars, t) for t in out] if d >= 0 else []

    def univariate(self, i=0):
        """Coefficient list in variable ``i`` when no other variable occurs."""
        if any(j != i for j in self.variables()):
            raise AlgebraError("polynomial involves variables other than the requested one")
        d = self.degree(i)
        out = [Fraction(0)] * (max(d, 0) + 1)
        for e, c in self._terms.items():
            out[e[i]] = c
        return out if d >= 0 else []

    def leading_term(self):
        e = max(self._terms)
        return e, self._terms[e]

    def sorted_terms(self):
        return sorted(self._terms.items(), reverse=True)

    def __str__(self):
        return poly_str(self)

    def __repr__(self):
        return f"MultiPoly({self.nvars}, '{poly_str(self)}')"


def _num(c, point):
    if any(isinstance(p, (mpmath.mpf, mpmath.mpc)) for p in point):
        return to_mp(c)
    return float(c) if not any(isinstance(p, complex) for p in point) else complex(float(c))


def _monomial_str(e, names):
    parts = []
    for name, a in zip(names, e):
        if a == 1:
            parts.append(name)
        elif a:
            parts.append(f"{name}^{a}")
    return "*".join(parts)


def poly_str(p, names=None):
    """Canonical text form, e.g. ``27*s0^2 + 4*s1^3``."""
    if names is None:
        names = [f"s{i}" for i in range(p.nvars)]
    if p.is_zero():
        return "0"
    out = []
    for e, c in p.sorted_terms():
        mono = _monomial_str(e, names)
        neg = c < 0
        a = -c if neg else c
        if not mono:
            body = str(a)
        elif a == 1:
            body = mono
        else:
            body = f"{a}*{mono}"
        if not out:
            out.append(("-" if neg else "") + body)
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)


def exact_div(a, b):
    """Divide ``a`` by ``b`` exactly; raise if ``b`` does not divide ``a``."""
    if b.is_zero():
        raise ZeroDivisionError("division by zero polynomial")
    if b.is_constant():
        return a * (1 / b.constant_value())
    eb, cb = b.leading_term()
    q = {}
    r = a
    while r:
        er, cr = r.leading_term()
        if any(x < y for x, y in zip(er, eb)):
            raise AlgebraError("polynomial division is not exact")
        e = tuple(x - y for x, y in zip(er, eb))
        c = cr / cb
        q[e] = c
        r = r - b * MultiPoly(a.nvars, {e: c})
    return MultiPoly(a.nvars, q)


def divides(b, a):
    try:
        exact_div(a, b)
        return True
    except AlgebraError:
        return False


def poly_arith(a, b, op):
    """Exact ``add``, ``sub`` or ``mul`` of two polynomials."""
    if a.nvars != b.nvars:
        raise AlgebraError(f"variable-count mismatch: {a.nvars} vs {b.nvars}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise AlgebraError(f"unknown op {op!r}")


def weighted_homogeneous(p, weights):
    """Return the weighted degree if ``p`` is quasihomogeneous, else None."""
    degs = p.weighted_degrees(weights)
    return degs.pop() if len(degs) == 1 else None


# --------------------------------------------------------------------------
# polynomials in an auxiliary variable z with MultiPoly coefficients

def _trim(f):
    f = list(f)
    while f and f[-1].is_zero():
        f.pop()
    return f


def zpoly_deg(f):
    return len(_trim(f)) - 1


def zpoly_diff(f):
    return [f[i] * i for i in range(1, len(f))]


def _prem(a, b):
    """Pseudo-remainder of ``a`` by ``b`` in z."""
    a, b = _trim(a), _trim(b)
    da, db = len(a) - 1, len(b) - 1
    lb = b[-1]
    r = list(a)
    for _ in range(da - db + 1):
        if len(r) - 1 < db:
            r = [c * lb for c in r]
            continue
        lr = r[-1]
        shift = len(r) - 1 - db
        r = [c * lb for c in r]
        for i, c in enumerate(b):
            r[i + shift] = r[i + shift] - lr * c
        r = _trim(r)
        if not r:
            return []
    return r


def resultant_s0_oracle(f, g):
    """Resultant in z of two polynomials with MultiPoly coefficients.

    Uses the fraction-free subresultant pseudo-remainder sequence.

    Parameters
    ----------
    f, g : list of MultiPoly
        Coefficients in increasing powers of z.

    Returns
    -------
    MultiPoly
    """
    f, g = _trim(f), _trim(g)
    if not f or not g:
        raise AlgebraError("resultant of a zero polynomial")
    n = f[0].nvars
    one = MultiPoly.const(n, 1)
    s = 1
    A, B = f, g
    if len(A) < len(B):
        A, B = B, A
        if (len(A) - 1) % 2 and (len(B) - 1) % 2:
            s = -s
    if len(B) == 1:
        return B[0] ** (len(A) - 1) * s
    g_, h = one, one
    while len(B) > 1:
        da, db = len(A) - 1, len(B) - 1
        delta = da - db
        if da % 2 and db % 2:
            s = -s
        R = _prem(A, B)
        A = B
        if not R:
            return MultiPoly(n)
        div = g_ * h ** delta
        B = [exact_div(c, div) for c in R]
        g_ = A[-1]
        if delta == 0:
            pass
        else:
            h = exact_div(g_ ** delta, h ** (delta - 1))
    da = len(A) - 1
    res = exact_div(B[0] ** da, h ** (da - 1)) if da >= 1 else one
    return res * s


def bareiss_det(M):
    """Fraction-free determinant of a square matrix of MultiPoly."""
    n = len(M)
    if n == 0:
        raise AlgebraError("empty matrix")
    nv = M[0][0].nvars
    A = [list(r) for r in M]
    sign = 1
    prev = MultiPoly.const(nv, 1)
    for k in range(n - 1):
        if A[k][k].is_zero():
            for r in range(k + 1, n):
                if not A[r][k].is_zero():
                    A[k], A[r] = A[r], A[k]
                    sign = -sign
                    break
            else:
                return MultiPoly(nv)
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = exact_div(A[i][j] * A[k][k] - A[i][k] * A[k][j], prev)
        prev = A[k][k]
    return A[n - 1][n - 1] * sign


def matrix_rank_exact(M):
    """Rank of a matrix of rationals by fraction arithmetic."""
    A = [[as_fraction(x) for x in r] for r in M]
    if not A:
        return 0
    rows, cols = len(A), len(A[0])
    rank = 0
    for c in range(cols):
        piv = next((r for r in range(rank, rows) if A[r][c]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        for r in range(rows):
            if r != rank and A[r][c]:
                f = A[r][c] / A[rank][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[rank])]
        rank += 1
    return rank


# --------------------------------------------------------------------------
# univariate helpers (coefficient lists, low degree first)

def upoly_trim(p):
    p = list(p)
    while p and not p[-1]:
        p.pop()
    return p


def upoly_divmod(a, b):
    a, b = upoly_trim(a), upoly_trim(b)
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    r = list(a)
    while len(r) >= len(b) and r:
        c = r[-1] / b[-1]
        k = len(r) - len(b)
        q[k] = c
        for i, bc in enumerate(b):
            r[i + k] -= c * bc
        r = upoly_trim(r)
    return upoly_trim(q), r


def upoly_gcd(a, b):
    a, b = upoly_trim(a), upoly_trim(b)
    while b:
        a, b = b, upoly_divmod(a, b)[1]
    if not a:
        return []
    return [c / a[-1] for c in a]


def upoly_eval(p, x):
    acc = 0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def taylor_shift(p, t):
    """Coefficients of ``p(t + x)`` in powers of x."""
    c = list(p)
    n = len(c)
    for i in range(n):
        for j in range(n - 2, i - 1, -1):
            c[j] = c[j] + t * c[j + 1]
    return c


def rational_roots(p):
    """Rational roots of a rational polynomial, with multiplicities."""
    p = upoly_trim([as_fraction(c) for c in p])
    out = []
    if len(p) <= 1:
        return out, p
    while p and p[0] == 0:
        out.append(Fraction(0))
        p = p[1:]
    if len(p) <= 1:
        return out, p
    from math import lcm
    den = 1
    for c in p:
        den = lcm(den, c.denominator)
    ints = [int(c * den) for c in p]
    a0, an = abs(ints[0]), abs(ints[-1])

    def divisors(n):
        ds = set()
        i = 1
        while i * i <= n:
            if n % i == 0:
                ds.add(i)
                ds.add(n // i)
            i += 1
        return ds

    cands = set()
    for a in divisors(a0):
        for b in divisors(an):
            cands.add(Fraction(a, b))
            cands.add(Fraction(-a, b))
    for r in sorted(cands):
        while len(p) > 1 and upoly_eval(p, r) == 0:
            out.append(r)
            p, _ = upoly_divmod(p, [-r, Fraction(1)])
    return out, p


# --------------------------------------------------------------------------
# differential operators

class DiffOp:
    """Operator ``sum c(s) d_{s_j}^{0|1} d_{s0}^beta`` in normal order.

    Terms are keyed by ``(j, beta)`` where ``j`` is None or an index in
    ``1 .. nvars-1``. Coefficients sit to the left of all derivatives.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars, terms=None):
        self.nvars = nvars
        clean = {}
        for (j, b), c in (terms or {}).items():
            if j is not None and not 1 <= j < nvars:
                raise AlgebraError(f"d/ds{j} not a parameter direction")
            if b < 0:
                raise AlgebraError("negative derivative order")
            if not isinstance(c, MultiPoly):
                c = MultiPoly.const(nvars, c)
            if c.nvars != nvars:
                raise AlgebraError("coefficient variable count mismatch")
            if c:
                key = (j, b)
                clean[key] = clean[key] + c if key in clean else c
                if not clean[key]:
                    del clean[key]
        self._terms = clean

    @classmethod
    def d0(cls, nvars, power=1):
        return cls(nvars, {(None, power): 1})

    @classmethod
    def mult(cls, c, nvars=None):
        if isinstance(c, MultiPoly):
            return cls(c.nvars, {(None, 0): c})
        return cls(nvars, {(None, 0): c})

    @classmethod
    def dparam(cls, nvars, j, power=0):
        return cls(nvars, {(j, power): 1})

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, j, beta):
        return self._terms.get((j, beta), MultiPoly(self.nvars))

    def order(self):
        if not self._terms:
            return -1
        return max(b + (j is not None) for j, b in self._terms)

    def s0_order(self):
        return max((b for j, b in self._terms if j is None), default=-1)

    def is_pure(self):
        return all(j is None for j, _ in self._terms)

    def leading_coefficient(self):
        return self.coeff(None, self.s0_order())

    def is_zero(self):
        return not self._terms

    def __eq__(self, other):
        return isinstance(other, DiffOp) and self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def __add__(self, other):
        if not isinstance(other, DiffOp):
            other = DiffOp.mult(other if isinstance(other, MultiPoly) else MultiPoly.const(self.nvars, other))
        t = dict(self._terms)
        for k, c in other._terms.items():
            t[k] = t[k] + c if k in t else c
        return DiffOp(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return DiffOp(self.nvars, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, DiffOp):
            return weyl_mul(self, other)
        if isinstance(other, MultiPoly) or _is_exact(other):
            return weyl_mul(self, DiffOp.mult(other, self.nvars))
        return NotImplemented

    def __rmul__(self, other):
        # scalar or polynomial on the left
        if isinstance(other, MultiPoly) or _is_exact(other):
            return DiffOp(self.nvars, {k: c * other for k, c in self._terms.items()})
        return NotImplemented

    def map_coefficients(self, fn):
        return DiffOp(self.nvars, {k: fn(c) for k, c in self._terms.items()})

    def subs(self, values):
        return self.map_coefficients(lambda c: c.subs(values))

    def __str__(self):
        return op_str(self)

    __repr__ = __str__


def op_str(op, names=None):
    if op.is_zero():
        return "0"
    if names is None:
        names = [f"s{i}" for i in range(op.nvars)]
    parts = []
    for (j, b), c in sorted(op.items(), key=lambda kv: (-kv[0][1], kv[0][0] or 0)):
        d = []
        if j is not None:
            d.append(f"D{names[j]}")
        if b == 1:
            d.append(f"D{names[0]}")
        elif b:
            d.append(f"D{names[0]}^{b}")
        parts.append(f"({poly_str(c, names)})" + ("*" + "*".join(d) if d else ""))
    return " + ".join(parts)


def weyl_mul(a, b):
    """Normal-ordered product ``a * b``.

    Only one factor may carry a first-order ``d/ds_j`` term per product of
    terms; two such factors would give a second-order mixed term.
    """
    if a.nvars != b.nvars:
        raise AlgebraError("operators over different variable counts")
    n = a.nvars
    out = {}

    def add(key, c):
        if key in out:
            out[key] = out[key] + c
        else:
            out[key] = c

    for (ja, al), ca in a.items():
        for (jb, be), cb in b.items():
            if ja is not None and jb is not None:
                raise AlgebraError("unsupported mixed-derivative product shape")
            # d0^al * cb = sum_k C(al,k) (d0^k cb) d0^(al-k)
            dk = cb
            for k in range(al + 1):
                if k:
                    dk = dk.diff(0)
                if dk.is_zero():
                    break
                coef = dk * comb(al, k)
                rest = al - k + be
                if ja is None:
                    add((jb, rest), ca * coef)
                else:
                    # d_ja (coef X) = (d_ja coef) X + coef d_ja X
                    dcoef = coef.diff(ja)
                    if dcoef:
                        add((jb, rest), ca * dcoef)
                    add((ja, rest), ca * coef)
    return DiffOp(n, out)


def theta(nvars=1, var=0, shift=0):
    """Euler operator ``s0 d/ds0 + shift``."""
    x = MultiPoly.var(nvars, var)
    return DiffOp(nvars, {(None, 1): x, (None, 0): MultiPoly.const(nvars, shift)})


def nc_determinant(P):
    """Ordered non-commutative determinant.

    ``sum_pi sign(pi) P[pi(mu-1)][mu-1] ... P[pi(0)][0]`` with column
    ``mu-1`` leftmost.
    """
    mu = len(P)
    for row in P:
        for e in row:
            if not isinstance(e, DiffOp) or e.order() > 1 or not e.is_pure():
                raise AlgebraError("non-affine entry in operator matrix")
    nv = P[0][0].nvars
    total = DiffOp(nv)
    for perm in permutations(range(mu)):
        sgn = _perm_sign(perm)
        prod = None
        for col in range(mu - 1, -1, -1):
            e = P[perm[col]][col]
            prod = e if prod is None else weyl_mul(prod, e)
        total = total + (prod if sgn > 0 else -prod)
    return total


def _perm_sign(perm):
    perm = list(perm)
    sgn = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sgn = -sgn
    return sgn


# --------------------------------------------------------------------------
# truncated local expansions

class LocalSeries:
    """Truncated expansion ``sum a[n,k] (s0 - t)^(rho + n) log^k (s0 - t)``.

    Coefficients with ``n >= order`` are unknown. ``n`` may be negative.
    """

    __slots__ = ("center", "rho", "coeffs", "order")

    def __init__(self, center, rho, coeffs, order):
        self.center = center
        self.rho = rho
        self.coeffs = {k: v for k, v in coeffs.items() if v != 0}
        self.order = order
        for (n, _k) in self.coeffs:
            if n >= order:
                raise TruncationError("coefficient beyond declared truncation")

    @classmethod
    def monomial(cls, rho, center=Fraction(0), order=20, logpow=0):
        return cls(center, rho, {(0, logpow): Fraction(1)}, order)

    def coefficient(self, n, k=0):
        if n >= self.order:
            raise TruncationError(
                f"truncation order {self.order} too small for coefficient {n}")
        return self.coeffs.get((n, k), 0)

    def lowest(self):
        if not self.coeffs:
            return None
        return min(n for n, _ in self.coeffs)

    def log_rank(self):
        return max((k for _, k in self.coeffs), default=0)

    def derivative(self):
        out = {}
        for (n, k), a in self.coeffs.items():
            e = self.rho + n
            if e != 0:
                out[(n - 1, k)] = out.get((n - 1, k), 0) + a * e
            if k:
                out[(n - 1, k - 1)] = out.get((n - 1, k - 1), 0) + a * k
        return LocalSeries(self.center, self.rho, out, self.order - 1)

    def shift_mul(self, m, c):
        """Multiply by ``c (s0 - t)^m``."""
        return LocalSeries(self.center, self.rho,
                           {(n + m, k): a * c for (n, k), a in self.coeffs.items()},
                           self.order + m)

    def __add__(self, other):
        if self.rho != other.rho or self.center != other.center:
            raise AlgebraError("adding expansions with different anchors")
        out = dict(self.coeffs)
        for key, a in other.coeffs.items():
            out[key] = out.get(key, 0) + a
        order = min(self.order, other.order)
        return LocalSeries(self.center, self.rho,
                           {k: v for k, v in out.items() if k[0] < order}, order)


def apply_op(op, series):
    """Apply a pure ``d/ds0`` operator to a truncated local expansion.

    The operator coefficients may only involve ``s0``; they are expanded
    around the expansion center.
    """
    if not op.is_pure():
        raise AlgebraError("operator still has d/ds' terms; specialize first")
    maxb = max(op.s0_order(), 0)
    out = None
    for (_j, b), c in op.items():
        coeffs = c.univariate(0)
        shifted = taylor_shift(coeffs, series.center)
        d = series
        for _ in range(b):
            d = d.derivative()
        for m, cm in enumerate(shifted):
            if cm == 0:
                continue
            piece = d.shift_mul(m, cm)
            piece = LocalSeries(piece.center, piece.rho,
                                {k: v for k, v in piece.coeffs.items()
                                 if k[0] < series.order - maxb},
                                series.order - maxb)
            out = piece if out is None else out + piece
    if out is None:
        return LocalSeries(series.center, series.rho, {}, series.order - maxb)
    return out
