"""Numerical period integrals and checks of the symbolic claims.

Periods are ``int g(z) (F(z, s') + s0)^lam dz`` over a segment between two
roots of ``F + s0`` (Gauss-Jacobi with the endpoint exponent ``lam``) or
over the Pochhammer double loop around them. The branch of the power is
the principal one at the segment midpoint, continued along the path.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import roots_jacobi, roots_legendre

from .gauss_manin import derive_connection

MAX_PHASE_STEP = np.pi / 4


class PeriodError(RuntimeError):
    pass


class ClusterError(PeriodError):
    pass


@dataclass(frozen=True)
class CurveConfig:
    mu: int
    nu: int
    m: int
    s: tuple

    def __post_init__(self):
        if self.nu < 2:
            raise ValueError("nu must be at least 2")
        if len(self.s) != self.mu:
            raise ValueError("s must have mu entries (s0, s1, ..., s_{mu-1})")
        if self.lam <= -1:
            raise ValueError("lam must exceed -1")

    @property
    def lam(self):
        return Fraction(self.m, self.nu)

    def with_s0(self, s0):
        return CurveConfig(self.mu, self.nu, self.m, (s0,) + tuple(self.s[1:]))

    def poly(self):
        """Coefficients of ``F + s0``, highest degree first (numpy order)."""
        c = np.zeros(self.mu + 2, dtype=complex)
        c[0] = 1.0
        for l in range(1, self.mu):
            c[self.mu + 1 - l] = self.s[l]
        c[-1] = self.s[0]
        return c


@dataclass(frozen=True)
class CyclePath:
    a: int
    b: int
    kind: str = "segment"
    clearance: float = 0.0


@dataclass
class PeriodSample:
    value: complex
    errorEstimate: float
    config: CurveConfig
    cycle: CyclePath
    i: int
    lam: float
    anchor: complex = 0j
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {"re": self.value.real, "im": self.value.imag, "error": self.errorEstimate,
                "mu": self.config.mu, "nu": self.config.nu, "m": self.config.m,
                "s": [[complex(x).real, complex(x).imag] for x in self.config.s],
                "cycle": [self.cycle.a, self.cycle.b, self.cycle.kind],
                "i": self.i, "lam": self.lam, **self.meta}


# --------------------------------------------------------------------------
# fiber roots

def roots_of_fiber(cfg, tol=1e-9, cluster_tol=1e-6):
    """Roots of ``F(z, s') + s0``, polished by Newton steps.

    Multiple roots are reported as clusters; a near-collision between the
    exact-multiple and well-separated regimes raises :class:`ClusterError`.
    """
    c = cfg.poly()
    roots = np.roots(c)
    dc = np.polyder(c)
    for _ in range(3):
        f = np.polyval(c, roots)
        d = np.polyval(dc, roots)
        ok = np.abs(d) > 1e-12
        roots[ok] = roots[ok] - f[ok] / d[ok]
    scale = max(1.0, float(np.max(np.abs(roots))))
    res = np.abs(np.polyval(c, roots))
    if np.any(res > tol * scale ** (cfg.mu + 1) * 1e3):
        raise PeriodError(f"root residual {res.max():.3g} too large")
    roots = _snap_clusters(roots, cluster_tol * scale)
    order = np.lexsort((roots.imag, roots.real))
    return [complex(r) for r in roots[order]]


def _snap_clusters(roots, tol, band=100.0):
    """Replace tight clusters by their mean; refuse ambiguous separations."""
    out = roots.copy()
    for cl in root_clusters(roots, tol):
        if len(cl) > 1:
            out[cl] = np.mean(roots[cl])
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            d = abs(roots[i] - roots[j])
            if tol <= d < band * tol:
                raise ClusterError(f"ambiguous root cluster, diameter {d:.3g}")
    return out


def root_clusters(roots, tol):
    roots = list(roots)
    seen, out = set(), []
    for i, r in enumerate(roots):
        if i in seen:
            continue
        cl = [j for j, q in enumerate(roots) if abs(q - r) < tol]
        seen.update(cl)
        out.append(cl)
    return out


def fiber_root_multiplicities(cfg, tol=1e-6):
    roots = roots_of_fiber(cfg)
    scale = max(1.0, max(abs(r) for r in roots))
    return [len(cl) for cl in root_clusters(roots, tol * scale)]


# --------------------------------------------------------------------------
# integrand helpers

def _weight(i, weight):
    if weight is None:
        w = np.zeros(i + 1, dtype=complex)
        w[i] = 1.0
        return w
    return np.asarray(weight, dtype=complex)


def _unwrap_from(phases, start):
    """Continue a phase sequence from index ``start`` in both directions."""
    out = np.empty_like(phases)
    out[start] = phases[start]
    d = np.angle(np.exp(1j * np.diff(phases)))
    if np.any(np.abs(d) > MAX_PHASE_STEP):
        raise PeriodError("branch tracking step exceeded pi/4")
    out[start + 1:] = phases[start] + np.cumsum(d[start:])
    out[:start] = phases[start] - np.cumsum(d[:start][::-1])[::-1]
    return out


def _choose_branch(logval, hint):
    if hint is None:
        return logval
    k = np.round((hint.imag - logval.imag) / (2 * np.pi))
    return logval + 2j * np.pi * k


def _segment_jacobi(cfg, za, zb, lam, wpoly, n, hint=None):
    c = cfg.poly()
    x, w = roots_jacobi(n, lam, lam)
    for density in (8, 32, 128):
        # a phase jump above pi/4 triggers a denser continuity grid
        dense = np.linspace(-1, 1, density * n + 1)[1:-1]
        grid = np.concatenate([x, dense, [0.0]])
        order = np.argsort(grid, kind="stable")
        grid = grid[order]
        z = za + (zb - za) * (1 + grid) / 2
        h = np.polyval(c, z) / (1 - grid ** 2)
        mid = int(np.nonzero(grid == 0.0)[0][0])
        anchor = _choose_branch(np.log(complex(h[mid])), hint)
        ph = np.angle(h)
        ph[mid] = anchor.imag
        try:
            ph = _unwrap_from(ph, mid)
            break
        except PeriodError:
            continue
    else:
        raise PeriodError("branch tracking failed after refinement")
    logh = np.log(np.abs(h)) + 1j * ph
    back = np.empty_like(order)
    back[order] = np.arange(len(order))
    logx = logh[back[:n]]
    zx = za + (zb - za) * (1 + x) / 2
    g = np.polyval(wpoly[::-1], zx)
    val = np.sum(w * g * np.exp(lam * logx)) * (zb - za) / 2
    return val, anchor


def _segment_graded(cfg, za, zb, lam, wpoly, hint, h0, n=40):
    """Composite segment rule for endpoints with a nearby third root.

    End panels carry the Jacobi weight of the endpoint; interior panels
    grow geometrically from length ``h0`` and use Gauss-Legendre.
    """
    c = cfg.poly()
    L = abs(zb - za)
    u = (zb - za) / L
    edges = [0.0]
    h = h0
    while edges[-1] + h < L / 2:
        edges.append(edges[-1] + h)
        h *= 2
    left = edges + [L / 2]
    edges_all = sorted(set(left + [L - e for e in left]))
    panels = list(zip(edges_all[:-1], edges_all[1:]))
    xg, wg = roots_legendre(n)
    xa, wa = roots_jacobi(n, 0.0, lam)   # weight (1+x)^lam at the za end
    xb, wb = roots_jacobi(n, lam, 0.0)   # weight (1-x)^lam at the zb end
    # dense continuity grid along arclength
    dense = np.concatenate([np.linspace(a_, b_, 33) for a_, b_ in panels])
    tnode, kind, wts = [], [], []
    for k, (a_, b_) in enumerate(panels):
        if k == 0:
            x, w, tag = xa, wa, 1
        elif k == len(panels) - 1:
            x, w, tag = xb, wb, 2
        else:
            x, w, tag = xg, wg, 0
        tnode.append(a_ + (b_ - a_) * (1 + x) / 2)
        wts.append(w * (b_ - a_) / 2)
        kind.append(np.full(len(x), tag))
    tnode, wts, kind = map(np.concatenate, (tnode, wts, kind))
    p_a, p_b = panels[0][1], panels[-1][0]
    # interior log(F + s0), continued from the midpoint
    grid = np.unique(np.concatenate([dense[(dense >= p_a) & (dense <= p_b)],
                                     tnode[kind == 0], [L / 2]]))
    zg = za + u * grid
    fg = np.polyval(c, zg)
    mid = int(np.searchsorted(grid, L / 2))
    anchor = _choose_branch(np.log(complex(fg[mid])), hint)
    ph = np.angle(fg)
    ph[mid] = anchor.imag
    ph = _unwrap_from(ph, mid)
    logg = np.log(np.abs(fg)) + 1j * ph
    val = 0j
    sel = kind == 0
    ti = tnode[sel]
    li = logg[np.searchsorted(grid, ti)]
    zi = za + u * ti
    val += np.sum(wts[sel] * np.polyval(wpoly[::-1], zi) * np.exp(lam * li))
    for tag, (a_, b_), end_t, log_end in ((1, panels[0], p_a, logg[0]),
                                         (2, panels[-1], p_b, logg[-1])):
        # H = (F + s0) / (distance factor) is zero-free on the end panel
        tt = np.linspace(a_, b_, 129)[1:-1]
        tt = np.unique(np.concatenate([tt, tnode[kind == tag], [end_t]]))
        if tag == 1:
            fac = (tt - a_) / (b_ - a_)
            start = len(tt) - 1
        else:
            fac = (b_ - tt) / (b_ - a_)
            start = 0
        H = np.polyval(c, za + u * tt) / fac
        phH = np.angle(H)
        phH[start] = log_end.imag
        phH = _unwrap_from(phH, start)
        logH = np.log(np.abs(H)) + 1j * phH
        tn = tnode[kind == tag]
        lH = logH[np.searchsorted(tt, tn)]
        # (F + s0)^lam = ((1 +- x)/2)^lam H^lam; the weight supplies (1 +- x)^lam
        val += 2.0 ** (-lam) * np.sum(wts[kind == tag] * np.polyval(wpoly[::-1], za + u * tn)
                                   * np.exp(lam * lH))
    return val * u, anchor


def _pick_roots(cfg, cycle):
    roots = roots_of_fiber(cfg)
    za, zb = roots[cycle.a], roots[cycle.b]
    if abs(za - zb) < 1e-12:
        raise PeriodError("cycle endpoints coincide")
    others = [r for k, r in enumerate(roots) if k not in (cycle.a, cycle.b)]
    clear = _clearance(za, zb, others)
    if cycle.clearance and clear < cycle.clearance:
        raise PeriodError(f"path clearance {clear:.3g} below requested {cycle.clearance}")
    return za, zb, others, clear


def _clearance(za, zb, others):
    if not others:
        return np.inf
    d = zb - za
    best = np.inf
    for r in others:
        t = np.clip(((r - za) * np.conj(d)).real / abs(d) ** 2, 0, 1)
        best = min(best, abs(r - (za + t * d)))
    return best


def period(cfg, cycle, i=0, lam=None, weight=None, tol=1e-12, branch_hint=None,
           roots=None):
    """Period over a segment or Pochhammer loop between two fiber roots.

    Parameters
    ----------
    cfg : CurveConfig
    cycle : CyclePath
        Root indices refer to :func:`roots_of_fiber` ordering unless
        ``roots=(za, zb)`` is passed explicitly.
    i : int
        Power of z in the integrand (ignored if ``weight`` is given).
    lam : rational or float, optional
        Exponent override (defaults to ``m/nu``).
    weight : array, optional
        Polynomial coefficients (low degree first) replacing ``z^i``.
    """
    lam = float(cfg.lam if lam is None else lam)
    wpoly = _weight(i, weight)
    if roots is not None:
        za, zb = roots
    else:
        za, zb, _others, _clear = _pick_roots(cfg, cycle)
    if cycle.kind == "pochhammer":
        val, err, anchor = _pochhammer(cfg, za, zb, lam, wpoly, branch_hint)
    elif cycle.kind == "segment":
        if lam <= -1:
            val, err, anchor = regularized_segment(cfg, za, zb, lam, wpoly, branch_hint)
        else:
            others = [r for r in np.roots(cfg.poly())
                      if min(abs(r - za), abs(r - zb)) > 1e-12]
            near = min([min(abs(r - za), abs(r - zb)) for r in others] + [np.inf])
            graded = near < abs(zb - za) / 4
            prev = None
            for n in (40, 80, 160, 320):
                if graded:
                    val, anchor = _segment_graded(cfg, za, zb, lam, wpoly, branch_hint,
                                                  near / 2, n // 2)
                else:
                    val, anchor = _segment_jacobi(cfg, za, zb, lam, wpoly, n, branch_hint)
                if prev is not None:
                    err = abs(val - prev)
                    if err <= tol * max(1.0, abs(val)):
                        break
                prev = val
            else:
                if err > 1e-8 * max(1.0, abs(val)):
                    raise PeriodError(f"Gauss-Jacobi refinement did not converge (err={err:.3g})")
    else:
        raise ValueError(f"unknown cycle kind {cycle.kind!r}")
    return PeriodSample(complex(val), float(err), cfg, cycle, i, lam, anchor,
                        {"za": [za.real, za.imag], "zb": [zb.real, zb.imag]})


def x0_period(cfg, x0, root, i=0, lam=None, weight=None, branch_hint=None, n=60):
    """Path period from the regular point ``x0`` to a fiber root.

    Gauss-Jacobi with the endpoint exponent only at the root. The branch is
    principal at the path midpoint.
    """
    lam = float(cfg.lam if lam is None else lam)
    wpoly = _weight(i, weight)
    c = cfg.poly()
    za, zb = complex(x0), complex(root)
    if abs(np.polyval(c, za)) < 1e-12:
        raise PeriodError("x0 lies on the fiber")
    vals = []
    for nn in (n, 2 * n):
        x, w = roots_jacobi(nn, lam, 0.0)   # (1-x)^lam at the root end
        dense = np.linspace(-1, 1, 8 * nn + 1)
        grid = np.unique(np.concatenate([x, dense[:-1], [0.0]]))
        z = za + (zb - za) * (1 + grid) / 2
        h = np.polyval(c, z) / (1 - grid)
        mid = int(np.searchsorted(grid, 0.0))
        anchor = _choose_branch(np.log(complex(np.polyval(c, (za + zb) / 2))), branch_hint)
        ph = np.angle(h)
        ph[mid] = anchor.imag
        ph = _unwrap_from(ph, mid)
        logh = np.log(np.abs(h)) + 1j * ph
        lx = logh[np.searchsorted(grid, x)]
        zx = za + (zb - za) * (1 + x) / 2
        vals.append(np.sum(w * np.polyval(wpoly[::-1], zx) * np.exp(lam * lx)) * (zb - za) / 2)
    return complex(vals[-1]), float(abs(vals[-1] - vals[0])), anchor


def pochhammer_factor(lam):
    return (1 - np.exp(2j * np.pi * lam)) * (1 - np.exp(-2j * np.pi * lam))


def regularized_segment(cfg, za, zb, lam, wpoly, hint=None):
    """Analytic continuation in ``lam`` of the segment period."""
    fac = pochhammer_factor(lam)
    if abs(fac) < 1e-10:
        raise PeriodError("integer exponent: Pochhammer regularization degenerates")
    val, err, anchor = _pochhammer(cfg, za, zb, lam, wpoly, hint)
    return val / fac, err / abs(fac), anchor


def _line_panels(z_from, z_to, grade_start):
    """Geometrically graded panels from ``z_from`` (close to a root) to ``z_to``."""
    L = abs(z_to - z_from)
    edges = [0.0]
    h = grade_start
    while edges[-1] + h < L:
        edges.append(edges[-1] + h)
        h *= 2
    edges.append(L)
    d = (z_to - z_from) / L
    return [(z_from + d * a, z_from + d * b) for a, b in zip(edges[:-1], edges[1:])]


def _pochhammer(cfg, za, zb, lam, wpoly, hint=None, nline=32):
    """Double loop: (b-), (a+), (b+), (a-) from the midpoint.

    Orientation chosen so the result equals
    ``(1 - e^{2 pi i lam})(1 - e^{-2 pi i lam})`` times the segment period.
    The error estimate compares with the rule of half the node count.
    """
    coarse, _ = _pochhammer_rule(cfg, za, zb, lam, wpoly, hint, nline // 2)
    val, start = _pochhammer_rule(cfg, za, zb, lam, wpoly, hint, nline)
    return val, float(abs(val - coarse)), start


def _pochhammer_rule(cfg, za, zb, lam, wpoly, hint, nline):
    c = cfg.poly()
    roots = np.roots(c)
    others = [r for r in roots if min(abs(r - za), abs(r - zb)) > 1e-9]
    sep = abs(zb - za)
    dmin = min([abs(r - q) for r in others for q in (za, zb)] + [np.inf])
    r = min(sep / 4, dmin / 3)
    mid = (za + zb) / 2
    u = (zb - za) / sep
    xg, wg = roots_legendre(nline)

    pts, wts = [], []

    def line(p, q):
        # panels graded toward whichever end sits next to a root
        seg_pts, seg_w = [], []
        near_p = abs(p - za) < 1.5 * r or abs(p - zb) < 1.5 * r
        if near_p:
            panels = _line_panels(p, q, r)
        else:
            panels = [(b_, a_) for a_, b_ in _line_panels(q, p, r)][::-1]
        for a_, b_ in panels:
            zz = a_ + (b_ - a_) * (1 + xg) / 2
            seg_pts.append(zz)
            seg_w.append(wg * (b_ - a_) / 2)
        return np.concatenate(seg_pts), np.concatenate(seg_w)

    def circle(center, start, orient, narc=8):
        # Gauss-Legendre arcs: the integrand is not periodic across a turn
        th0 = np.angle(start - center)
        zs_, ws_ = [], []
        for k in range(narc):
            a_ = th0 + orient * 2 * np.pi * k / narc
            th = a_ + orient * (np.pi / narc) * (1 + xg)
            zs_.append(center + r * np.exp(1j * th))
            ws_.append(wg * 1j * orient * r * np.exp(1j * th) * (np.pi / narc))
        return np.concatenate(zs_), np.concatenate(ws_)

    pb, pa = zb - r * u, za + r * u
    seq = []
    for center, p, orient in ((zb, pb, -1), (za, pa, 1), (zb, pb, 1), (za, pa, -1)):
        seq.append(line(mid, p))
        seq.append(circle(center, p, orient))
        seq.append(line(p, mid))
    zs = np.concatenate([s[0] for s in seq])
    ws = np.concatenate([s[1] for s in seq])
    fz = np.polyval(c, zs)
    # continue the logarithm along the whole path, starting at the midpoint
    ph = np.angle(fz)
    d = np.angle(np.exp(1j * np.diff(ph)))
    if np.any(np.abs(d) > MAX_PHASE_STEP):
        raise PeriodError("branch tracking step exceeded pi/4 on the Pochhammer path")
    start = _choose_branch(np.log(complex(np.polyval(c, mid))), hint)
    ph0 = np.angle(fz[0])
    k0 = np.round((start.imag - ph0) / (2 * np.pi))
    phase = ph0 + 2 * np.pi * k0 + np.concatenate([[0.0], np.cumsum(d)])
    logf = np.log(np.abs(fz)) + 1j * phase
    g = np.polyval(wpoly[::-1], zs)
    return np.sum(ws * g * np.exp(lam * logf)), start


# --------------------------------------------------------------------------
# connection residual

def vanishing_pair(cfg):
    """Indices of the closest pair of fiber roots."""
    roots = roots_of_fiber(cfg)
    best = None
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            d = abs(roots[i] - roots[j])
            if best is None or d < best[0]:
                best = (d, i, j)
    return best[1], best[2]


def period_vector(cfg, cycle, lam=None, shift=0, hint=None):
    """``(K_0, ..., K_{mu-1})`` with optional exponent shift."""
    lam = cfg.lam if lam is None else lam
    vals = [period(cfg, cycle, i, lam=lam + shift, branch_hint=hint) for i in range(cfg.mu)]
    return np.array([v.value for v in vals]), max(v.errorEstimate for v in vals)


def connection_residual(cfg, cycle=None, cs=None, return_details=False):
    """``|S dK/ds0 - (L+V) K| / |(L+V) K|`` with ``dK/ds0 = lam K^(lam-1)``."""
    cs = cs or derive_connection(cfg.mu, cfg.nu, cfg.m)
    if cycle is None:
        a, b = vanishing_pair(cfg)
        cycle = CyclePath(a, b)
    K, e1 = period_vector(cfg, cycle)
    lam = cfg.lam
    K1, e2 = period_vector(cfg, cycle, shift=-1)
    dK = float(lam) * K1
    Sn, Rn = cs.numeric(cfg.s)
    lhs = Sn @ dK
    rhs = Rn @ K
    res = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    if return_details:
        return res, {"cond_S": float(np.linalg.cond(Sn)), "quad_error": max(e1, e2)}
    return res


# --------------------------------------------------------------------------
# applying operators to periods

def _falling(lam, n):
    out = 1.0
    for r in range(n):
        out *= (lam - r)
    return out


def apply_operator_numeric(op, cfg, cycle, base_weight=None):
    """Apply a mixed operator to ``int base (F+s0)^lam`` using exponent shifts.

    ``d/ds_j d^b/ds0^b`` acts as ``[lam]_{b+1}`` times the period with an
    extra ``z^j`` and exponent ``lam - b - 1``.
    Returns ``(value, scale)`` where ``scale`` sums term magnitudes.
    """
    lam = float(cfg.lam)
    base = _weight(0, base_weight)
    za, zb, _o, _c = _pick_roots(cfg, cycle)
    # operators specialized to a slice only see s0
    point = [complex(x) for x in cfg.s][:op.nvars]
    total, scale = 0j, 0.0
    cache = {}
    for (j, b), c in op.items():
        coef = complex(c.evaluate(point))
        if coef == 0:
            continue
        if j is None:
            shift, w = b, base
        else:
            shift = b + 1
            w = np.convolve(base, np.eye(1, j + 1, j)[0])
        key = (shift, tuple(w))
        if key not in cache:
            cache[key] = period(cfg, cycle, lam=lam - shift, weight=w, roots=(za, zb)).value
        term = coef * _falling(lam, shift) * cache[key]
        total += term
        scale += abs(term)
    return total, scale


def shift_weight(k, x0):
    """Coefficients of ``(z - x0)^k``, low degree first."""
    from math import comb
    x0 = complex(x0)
    return np.array([comb(k, j) * (-x0) ** (k - j) for j in range(k + 1)], dtype=complex)


def annihilator_residual(op, cfg, cycle=None):
    """Relative residual of an operator on its period (analytic derivatives).

    Shifted operators act on ``int (z - x0)^k (F + s0)^lam dz``.
    """
    if cycle is None:
        a, b = vanishing_pair(cfg)
        cycle = CyclePath(a, b)
    base = None
    if getattr(op, "shifted", False):
        base = shift_weight(op.k, float(op.x0))
    val, scale = apply_operator_numeric(op.body if hasattr(op, "body") else op, cfg, cycle,
                                        base_weight=base)
    return abs(val) / scale


def _track_roots(cfg, ref):
    roots = roots_of_fiber(cfg)
    out = []
    for r in ref:
        out.append(min(roots, key=lambda q: abs(q - r)))
    return out


def _period_at(cfg, s, ends, lam, weight):
    c2 = CurveConfig(cfg.mu, cfg.nu, cfg.m, tuple(s))
    za, zb = _track_roots(c2, ends)
    return period(c2, CyclePath(0, 1), lam=lam, weight=weight, roots=(za, zb)).value


def sampled_derivatives(cfg, cycle, directions, radius=0.05, n=24, lam=None, weight=None):
    """Mixed derivatives of a period from samples on small complex circles.

    ``directions`` is a tuple of variable indices, e.g. ``(0, 0, 1)`` for
    ``d^3/ds0^2 ds1``. Each variable is sampled on its own circle and the
    trapezoid rule applied to Cauchy's formula (a finite-difference stencil
    on a circle; no differentiation of the integrand).
    """
    from itertools import product
    from math import factorial
    lam = float(cfg.lam if lam is None else lam)
    za, zb, _o, _c = _pick_roots(cfg, cycle)
    counts = {}
    for d in directions:
        counts[d] = counts.get(d, 0) + 1
    vars_ = sorted(counts)
    th = 2 * np.pi * np.arange(n) / n
    total = 0j
    base = [complex(x) for x in cfg.s]
    for idx in product(range(n), repeat=len(vars_)):
        s = list(base)
        fac = 1.0 + 0j
        for v, k in zip(vars_, idx):
            e = radius * np.exp(1j * th[k])
            s[v] = base[v] + e
            fac *= e ** (-counts[v]) / n
        total += fac * _period_at(cfg, s, (za, zb), lam, weight)
    for v in vars_:
        total *= factorial(counts[v])
    return total


def annihilator_residual_sampled(op, cfg, cycle=None, radius=0.05, n=24):
    """Residual with every derivative taken from sampled stencils."""
    if cycle is None:
        a, b = vanishing_pair(cfg)
        cycle = CyclePath(a, b)
    body = op.body if hasattr(op, "body") else op
    point = [complex(x) for x in cfg.s]
    total, scale = 0j, 0.0
    for (j, b), c in body.items():
        coef = complex(c.evaluate(point))
        if coef == 0:
            continue
        dirs = (0,) * b + ((j,) if j is not None else ())
        if dirs:
            d = sampled_derivatives(cfg, cycle, dirs, radius, n)
        else:
            d = period(cfg, cycle, 0).value
        total += coef * d
        scale += abs(coef * d)
    return abs(total) / scale


# --------------------------------------------------------------------------
# exponent fitting

def critical_values(cfg):
    """Critical points of F(., s') and the s0 values where they become roots."""
    c = cfg.poly()
    c = c.copy()
    c[-1] = 0.0
    crit = np.roots(np.polyder(c))
    return [(complex(z), complex(-np.polyval(c, z))) for z in crit]


@dataclass
class ExponentFit:
    rho: float
    rho_uncertainty: float
    logRank: int
    coefficients: dict
    ladder: list
    log_ratio: float = None

    def to_dict(self):
        return {"rho": self.rho, "rho_uncertainty": self.rho_uncertainty,
                "logRank": self.logRank, "log_ratio": self.log_ratio,
                "coefficients": {k: [complex(v).real, complex(v).imag]
                                 for k, v in self.coefficients.items()},
                "ladder": self.ladder}


def _pair_near(roots, zc, k=2):
    return sorted(range(len(roots)), key=lambda i: abs(roots[i] - zc))[:k]


def fit_exponent(cfg, t0, zc=None, i=0, ladder=12, eps0=1e-2, direction=1.0,
                 neighbour=True, x0=None, weight=None):
    """Fit ``K(t0 + eps) ~ A eps^rho`` along a geometric ladder.

    The vanishing cycle joins the two roots that merge at the critical point
    ``zc``. For the log test each segment from a merging root to another
    root is filtered with ``prod_j (E - 2^-j)``, ``E`` the halving shift,
    which kills ``eps^j`` for ``j <= n`` but not ``eps^n log eps``. A
    segment may meet the vanishing cycle trivially, so all are tried.

    With ``x0`` given, ``t0`` is the value of ``s0`` where ``x0`` joins the
    fiber and the fitted period runs from ``x0`` to the approaching root;
    the log test is then applied to that path itself.
    """
    if x0 is not None:
        return _fit_endpoint(cfg, t0, x0, i, ladder, eps0, direction, weight)
    if zc is None:
        zc = min(critical_values(cfg), key=lambda p: abs(p[1] - t0))[0]
    others = [v for z, v in critical_values(cfg) if abs(z - zc) > 1e-9]
    eps_list = [eps0 * 2.0 ** (-e) for e in range(ladder)]
    if others and min(abs(v - t0) for v in others) < 4 * eps0:
        raise PeriodError("ladder enters another singular value's neighbourhood")
    V, N, rows = [], {}, []
    hintV = None
    hintN = {}
    bad = set()
    prev = None
    for eps in eps_list:
        c2 = cfg.with_s0(t0 + direction * eps)
        roots = roots_of_fiber(c2)
        # keep every root label continuous along the ladder
        if prev is not None:
            roots = [min(roots, key=lambda q: abs(q - r)) for r in prev]
        prev = roots
        if eps == eps_list[0]:
            ia, ib = _pair_near(roots, zc)
        pv = period(c2, CyclePath(ia, ib), i, branch_hint=hintV, roots=(roots[ia], roots[ib]))
        hintV = pv.anchor
        V.append(pv.value)
        row = {"eps": eps, "V_re": pv.value.real, "V_im": pv.value.imag}
        if neighbour:
            for ic in range(len(roots)):
                if ic in (ia, ib) or ic in bad:
                    continue
                try:
                    pn = period(c2, CyclePath(ia, ic), i, branch_hint=hintN.get(ic),
                                roots=(roots[ia], roots[ic]))
                except PeriodError:
                    # segment grazes another root; drop this neighbour
                    bad.add(ic)
                    N.pop(ic, None)
                    continue
                hintN[ic] = pn.anchor
                N.setdefault(ic, []).append(pn.value)
        rows.append(row)
    V = np.array(V)
    est = np.log2(np.abs(V[:-1]) / np.abs(V[1:]))
    rich = 2 * est[1:] - est[:-1]
    rho = float(rich[-1])
    unc = float(abs(rich[-1] - rich[-2])) if len(rich) > 1 else np.inf
    A = V[-1] / eps_list[-1] ** rho
    log_rank = 0
    best = None
    coeffs = {"A": A}
    n_int = int(round(rho))
    for ic, vals in N.items():
        ratio = _filter_ratio(vals, n_int)
        # log present: filtered values scale like eps^n, ratio 2^-n;
        # absent: next order eps^(n+1), ratio 2^-(n+1)
        hit = abs(rho - n_int) < 1e-3 and abs(np.log2(ratio) + n_int) < 0.25
        if best is None or hit:
            best = ratio
            # the neighbour's holomorphic part at t0, for Dulac expansions
            coeffs["N0"] = vals[-1]
            coeffs["N0_error"] = abs(vals[-1] - vals[-2])
        if hit:
            log_rank = 1
            break
    return ExponentFit(rho, unc, log_rank, coeffs, rows, best)


def snap_exponent(rho, unc=1e-6, max_den=24):
    """Nearest rational with small denominator, if within the uncertainty."""
    q = Fraction(rho).limit_denominator(max_den)
    if abs(float(q) - rho) <= max(unc, 1e-8) * 10:
        return q
    return None


def dulac_expansion(fit, t0, cycle="vanishing", tol=1e-4):
    """Dulac expansion of a fitted period.

    The vanishing cycle contributes ``A eps^rho``. The neighbouring cycle
    has a holomorphic part with value ``N0`` at ``t0`` plus
    ``eps^rho log^logRank`` (its coefficient is not fitted and only the
    leading pair matters when ``N0`` is nonzero).
    """
    from .bounds import DulacExpansion, DulacTerm
    rho = snap_exponent(fit.rho, tol)
    if rho is None:
        raise PeriodError(f"fitted exponent {fit.rho} is not near a small rational")
    A = complex(fit.coefficients["A"])
    if cycle == "vanishing":
        return DulacExpansion(t0, [DulacTerm(rho, 0, A, abs(A) * fit.rho_uncertainty)])
    if cycle == "neighbour":
        n0 = complex(fit.coefficients["N0"])
        err = float(fit.coefficients["N0_error"])
        return DulacExpansion(t0, [DulacTerm(0, 0, n0, err),
                                   DulacTerm(rho, fit.logRank, A, abs(A) * fit.rho_uncertainty)])
    raise ValueError(f"unknown cycle {cycle!r}")


def _richardson_rho(vals):
    vals = np.asarray(vals)
    est = np.log2(np.abs(vals[:-1]) / np.abs(vals[1:]))
    rich = 2 * est[1:] - est[:-1]
    unc = float(abs(rich[-1] - rich[-2])) if len(rich) > 1 else np.inf
    return float(rich[-1]), unc


def _filter_ratio(vals, n_int):
    g = np.asarray(vals)
    for j in range(n_int + 1):
        g = g[1:] - 2.0 ** (-j) * g[:-1]
    rr = np.abs(g[1:] / g[:-1])
    return float(rr[-3]) if len(rr) >= 3 else float(rr[-1])


def _fit_endpoint(cfg, t0, x0, i, ladder, eps0, direction, weight):
    eps_list = [eps0 * 2.0 ** (-e) for e in range(ladder)]
    vals, rows, hint = [], [], None
    for eps in eps_list:
        c2 = cfg.with_s0(t0 + direction * eps)
        roots = roots_of_fiber(c2)
        near = min(roots, key=lambda q: abs(q - x0))
        v, err, hint = x0_period(c2, x0, near, i=i, weight=weight, branch_hint=hint)
        vals.append(v)
        rows.append({"eps": eps, "V_re": v.real, "V_im": v.imag, "error": err})
    rho, unc = _richardson_rho(vals)
    n_int = int(round(rho))
    log_rank = 0
    ratio = None
    if abs(rho - n_int) < 1e-3:
        ratio = _filter_ratio(vals, n_int - 1)
        if abs(np.log2(ratio) + n_int) < 0.25:
            log_rank = 1
    A = vals[-1] / eps_list[-1] ** rho
    return ExponentFit(rho, unc, log_rank, {"A": A}, rows, ratio)


# --------------------------------------------------------------------------
# monodromy

def _system_rhs(cs, sprime):
    def A(s0):
        Sn, Rn = cs.numeric((s0,) + tuple(sprime))
        return np.linalg.solve(Sn, Rn)
    return A


def transport(cs, sprime, path, dpath, t_span=(0.0, 1.0), rtol=1e-12, atol=1e-14, y0=None):
    """Transport solutions of ``S u' = (L+V) u`` along ``s0 = path(t)``."""
    A = _system_rhs(cs, sprime)
    n = cs.size
    y0 = np.eye(n, dtype=complex) if y0 is None else np.asarray(y0, dtype=complex)
    shape = y0.shape

    def f(t, y):
        U = y.reshape(shape)
        return (dpath(t) * (A(path(t)) @ U)).ravel()

    sol = solve_ivp(f, t_span, y0.ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise PeriodError(f"transport failed: {sol.message}")
    return sol.y[:, -1].reshape(shape)


def circle_loop(center, radius, start_angle=0.0, orient=1):
    def path(t):
        return center + radius * np.exp(1j * (start_angle + orient * 2 * np.pi * t))

    def dpath(t):
        return 1j * orient * 2 * np.pi * radius * np.exp(1j * (start_angle + orient * 2 * np.pi * t))
    return path, dpath


def segment_path(p, q):
    return (lambda t: p + (q - p) * t), (lambda t: q - p)


def _check_loop_clear(center, radius, values, t0):
    for v in values:
        if abs(v - t0) < 1e-9:
            continue
        if abs(v - center) < radius * 1.2:
            raise PeriodError("loop too close to a second critical value")


def monodromy(cfg, around, radius=None, cs=None):
    """Monodromy matrix of the connection around ``s0 = around``.

    The base point is ``around + radius``; the returned matrix maps the
    fundamental matrix at the base point to its continuation (``U(end)``
    with ``U(start) = I``).
    """
    cs = cs or derive_connection(cfg.mu, cfg.nu, cfg.m)
    vals = [v for _, v in critical_values(cfg)]
    if radius is None:
        others = [abs(v - around) for v in vals if abs(v - around) > 1e-9]
        radius = 0.3 * min(others) if others else 1.0
    _check_loop_clear(around, radius, vals, around)
    path, dpath = circle_loop(around, radius)
    return transport(cs, cfg.s[1:], path, dpath)


def lasso(cs, sprime, base, center, radius):
    """Loop from ``base`` to a small circle around ``center`` and back."""
    d = center - base
    entry = center - radius * d / abs(d)
    p1, dp1 = segment_path(base, entry)
    U1 = transport(cs, sprime, p1, dp1)
    ang = np.angle(entry - center)
    p2, dp2 = circle_loop(center, radius, ang)
    U2 = transport(cs, sprime, p2, dp2)
    p3, dp3 = segment_path(entry, base)
    U3 = transport(cs, sprime, p3, dp3)
    return U3 @ U2 @ U1


def composite_monodromy(cfg, cs=None):
    """Lasso product around all critical values and the loop around infinity.

    The base point sits below all critical values; lassos are composed
    from the rightmost ray to the leftmost, which is homotopic to the
    counterclockwise big circle ``big``. ``M_inf`` is the clockwise big
    circle, so ``P @ M_inf`` should be the identity.
    """
    cs = cs or derive_connection(cfg.mu, cfg.nu, cfg.m)
    vals = [v for _, v in critical_values(cfg)]
    center = np.mean(vals)
    spread = max(abs(v - center) for v in vals) + 1.0
    R = 2.0 * spread
    base = center - 1j * R
    dmin = min([abs(a - b) for a in vals for b in vals if a != b] + [spread])
    r = 0.25 * dmin
    # counterclockwise around the base means increasing angle seen from the base
    order = sorted(vals, key=lambda v: np.angle((v - base) / (center - base)))
    P = np.eye(cs.size, dtype=complex)
    for v in order:
        P = lasso(cs, cfg.s[1:], base, v, r) @ P
    path, dpath = circle_loop(center, R, start_angle=-np.pi / 2, orient=-1)
    M_inf = transport(cs, cfg.s[1:], path, dpath)
    path, dpath = circle_loop(center, R, start_angle=-np.pi / 2, orient=1)
    big = transport(cs, cfg.s[1:], path, dpath)
    return P, M_inf, big


def transport_vector(cs, sprime, y0, center, radius):
    path, dpath = circle_loop(center, radius)
    return transport(cs, sprime, path, dpath, y0=np.asarray(y0, dtype=complex).reshape(-1, 1)).ravel()


def holomorphy_defect(cs, cfg, radius=None, cycle=None):
    """Transport a closed-cycle period vector of a shifted system around ``s~0``.

    Returns ``(closed, path)``: the relative change of the closed-cycle
    vector (should vanish) and of the ``x0``-path vector (generally not).
    """
    if not cs.shifted:
        raise PeriodError("expected a shifted connection system")
    sp = tuple(cfg.s[1:])
    point = [0j] + [complex(v) for v in sp]
    st = complex(cs.s_tilde0.evaluate(point))
    vals = [v for _, v in critical_values(cfg)]
    if radius is None:
        radius = 0.3 * min(abs(v - st) for v in vals)
    base = st + radius
    c2 = cfg.with_s0(base)
    x0 = float(cs.x0)
    w = [shift_weight(cs.k + j, x0) for j in range(cs.size)]
    a, b = vanishing_pair(c2)
    roots = roots_of_fiber(c2)
    closed = np.array([period(c2, CyclePath(a, b), weight=w[j]).value for j in range(cs.size)])
    path = np.array([x0_period(c2, x0, roots[a], weight=w[j])[0] for j in range(cs.size)])
    out = []
    for y0 in (closed, path):
        path_fn, dpath = circle_loop(st, radius)
        A = _system_rhs(cs, sp)

        def f(t, y):
            return dpath(t) * (A(path_fn(t)) @ y)

        sol = solve_ivp(f, (0.0, 1.0), y0, method="DOP853", rtol=1e-12, atol=1e-14)
        out.append(float(np.linalg.norm(sol.y[:, -1] - y0) / np.linalg.norm(y0)))
    return tuple(out)
