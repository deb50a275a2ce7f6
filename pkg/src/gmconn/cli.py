"""Command line entry point ``gmconn``.

Every record carries ``schema``, ``command``, ``tag`` and ``seed`` and is
emitted with sorted keys, so identical arguments give identical bytes.
Exit status: 0 on success, 1 on a failed check or domain error, 2 on bad
flags.
"""
import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import bounds, fuchs, gauss_manin, periods, verify
from .exact_algebra import AlgebraError

SCHEMA = "gmconn-report/1"
PREC_ENV = "GMCONN_MP_PREC"
SUPPORTED_PREC = (64, 128, 256)
DEFAULT_PREC = fuchs.MP_PREC


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# parsing helpers

def _rational(text):
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _rational_list(text):
    return tuple(_rational(t) for t in text.split(",") if t.strip())


def _complex(text):
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _complex_list(text):
    return tuple(_complex(t) for t in text.split(",") if t.strip())


def _pair(text):
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two indices a,b") from None
    return a, b


def _point_arg(text):
    text = text.strip()
    if text == "inf":
        return "inf"
    if text.startswith("omega"):
        j = int(text[6:] or 0) if text.startswith("omega^") else (0 if text == "omega" else None)
        if j is None:
            raise argparse.ArgumentTypeError(f"bad point {text!r}")
        return ("omega", j)
    return _rational(text)


def _mu(text):
    v = int(text)
    if not 2 <= v <= 8:
        raise argparse.ArgumentTypeError("mu must lie in 2..8")
    return v


def _pos2(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("nu must be at least 2")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    if x is None or isinstance(x, (bool, int, float, str)):
        return x
    return str(x)


def _mp_str(x):
    if isinstance(x, Fraction):
        return str(x)
    import mpmath
    return mpmath.nstr(x, 20)


# --------------------------------------------------------------------------
# subcommands; each returns (tag, result, rows-for-csv or None, ok)

def cmd_system(a):
    cs = gauss_manin.derive_connection(a.mu, a.nu, a.m)
    res = {"mu": a.mu, "nu": a.nu, "m": a.m, "lam": str(cs.lam),
           "S": [[str(c) for c in row] for row in cs.S],
           "L": [str(x) for x in cs.L],
           "V": [[str(c) for c in row] for row in cs.V],
           "V_is_zero": all(c.is_zero() for row in cs.V for c in row),
           "Delta": str(gauss_manin.discriminant(a.mu))}
    return "prop2.2", res, None, True


def cmd_strata(a):
    mu = len(a.point)
    gauss_manin.check_mu(mu)
    lab = gauss_manin.stratum_of(list(a.point), mu)
    return "strata", {"point": [str(v) for v in a.point], **lab.to_dict()}, None, True


def _operator(a):
    lam = Fraction(a.m, a.nu)
    kind = a.kind
    if kind == "annihilator":
        return fuchs.build_annihilator(gauss_manin.derive_connection(a.mu, a.nu, a.m),
                                       a.s_prime), "prop2.4.i"
    if kind == "literal":
        return fuchs.literal_determinant(gauss_manin.derive_connection(a.mu, a.nu, a.m),
                                         a.s_prime), "prop2.4.i.literal"
    if kind == "shifted":
        if a.s_prime is None:
            raise CliError("--s-prime is required for the shifted operator")
        cs = gauss_manin.derive_shifted_connection(a.mu, a.nu, a.m, a.k, a.x0, a.s_prime)
        return fuchs.build_shifted_annihilator(cs), "prop2.4.ii"
    if kind == "4.1'":
        return fuchs.op_41_prime(a.mu, lam, a.c), "eq4.1p"
    if kind == "4.2'":
        return fuchs.op_42_prime(a.mu, lam, a.k, a.c), "eq4.2p"
    if kind == "4.1":
        return fuchs.op_41(a.mu, lam, a.s1), "eq4.1"
    if kind == "4.2":
        return fuchs.op_42(a.mu, lam, a.k, a.s1), "eq4.2"
    raise CliError(f"unknown operator kind {kind}")


def _op_dict(op):
    body = op.body if isinstance(op, fuchs.FuchsOperator) else op
    terms = []
    for (j, b), c in sorted(body.items(), key=lambda kv: (kv[0][0] or 0, kv[0][1])):
        terms.append({"d_s": j, "d_s0_power": b, "coefficient": str(c)})
    out = {"order": body.s0_order(), "terms": terms}
    if isinstance(op, fuchs.FuchsOperator):
        out.update({"leading": str(op.leading), "construction": op.construction,
                    "apparent": None if op.apparent is None else str(op.apparent)})
    return out


def cmd_operator(a):
    op, tag = _operator(a)
    return tag, _op_dict(op), None, True


def cmd_exponents(a):
    op, tag = _operator(a)
    t = a.t
    if isinstance(t, tuple):
        t = Fraction(1) if t[1] % a.mu == 0 else fuchs.roots_of_unity(a.mu)[t[1] % a.mu]
    de = fuchs.indicial_polynomial(op, a.s_prime, t)
    res = {"t": _mp_str(t) if t != "inf" else "inf", "kappa": de.kappa,
           "exponents": [{"rho": _mp_str(e), "multiplicity": mlt} for e, mlt in de.roots]}
    if a.table:
        fam, pt = a.table.split("@")
        tab = fuchs.exponents_closed_form(a.mu, a.nu, a.m, a.k, fam, pt)
        res["table"] = [str(e) for e in tab.multiset()]
        res["table_agrees"] = [str(e) if isinstance(e, Fraction) else _mp_str(e)
                               for e in de.exponents().multiset()] == res["table"]
        return tag, res, None, res["table_agrees"]
    return tag, res, None, True


def cmd_isocheck(a):
    res = verify.check_isomonodromy(mus=(a.mu,), lam=Fraction(a.m, a.nu))
    return res.tag, res.to_dict(), None, res.passed


def cmd_bounds(a):
    q = bounds.BoundQuery(a.mu, a.nu, a.m, a.K, a.k1, a.point)
    rep = bounds.bound_report(q)
    res = rep.to_dict()
    res["n_estimate"] = None if rep.rho is None else bounds.n_estimate(rep.rho)
    if a.nu == 2 and a.mu % 2 == 0 and a.point == "branch":
        res["two_sheeted_form"] = bounds.bound_nu2(a.mu, a.K, a.m)
    return rep.formula, res, None, True


def _cfg(a):
    if a.s is None:
        raise CliError("--s is required")
    if len(a.s) != a.mu:
        raise CliError(f"--s needs {a.mu} entries (s0, s1, ..., s_mu-1)")
    return periods.CurveConfig(a.mu, a.nu, a.m, a.s)


def cmd_periods(a):
    cfg = _cfg(a)
    roots = periods.roots_of_fiber(cfg)
    cyc = periods.CyclePath(a.cycle[0], a.cycle[1], a.kind)
    p = periods.period(cfg, cyc, a.i)
    res = p.to_dict()
    res["roots"] = [[r.real, r.imag] for r in roots]
    if a.kind == "segment" and a.check_pochhammer:
        q = periods.period(cfg, periods.CyclePath(a.cycle[0], a.cycle[1], "pochhammer"), a.i)
        fac = periods.pochhammer_factor(float(cfg.lam))
        res["pochhammer_ratio_error"] = abs(q.value / fac - p.value) / abs(p.value)
    return "eq2.2", res, None, True


def cmd_residual(a):
    cfg = _cfg(a)
    r, info = periods.connection_residual(cfg, return_details=True)
    return "eq2.5", {"residual": r, **info}, None, r < verify.TOL_CONNECTION


def _t0(a, cfg):
    cv = periods.critical_values(cfg)
    if a.t0 is not None:
        zc, t0 = min(cv, key=lambda p: abs(p[1] - a.t0))
        return zc, a.t0 if abs(t0 - a.t0) > 1e-9 else t0
    zc, t0 = cv[a.critical]
    return zc, t0


def cmd_fit(a):
    cfg = _cfg(a)
    if a.x0 is not None:
        t0 = a.t0 if a.t0 is not None else -np.polyval(
            np.concatenate([cfg.poly()[:-1], [0]]), complex(a.x0))
        f = periods.fit_exponent(cfg, complex(t0), i=a.i, ladder=a.ladder, eps0=a.eps0,
                                 x0=float(a.x0))
        zc = None
    else:
        zc, t0 = _t0(a, cfg)
        f = periods.fit_exponent(cfg, t0, zc, i=a.i, ladder=a.ladder, eps0=a.eps0)
    res = {"t0": complex(t0), **f.to_dict()}
    rows = [{k: v for k, v in r.items()} for r in f.ladder]
    tag = "prop4.3" if a.x0 is None else "eq4.8"
    return tag, res, rows, True


def cmd_monodromy(a):
    cfg = _cfg(a)
    if a.around is None:
        _zc, t0 = periods.critical_values(cfg)[a.critical]
    else:
        t0 = a.around
    M = periods.monodromy(cfg, t0, a.radius)
    ev = np.linalg.eigvals(M)
    ev = ev[np.lexsort((np.round(ev.imag, 10), np.round(ev.real, 10)))]
    res = {"around": complex(t0), "matrix": M, "eigenvalues": ev,
           "expected_nontrivial": np.exp(2j * np.pi * (float(cfg.lam) + 0.5))}
    return "eq4.4", res, None, True


def cmd_verify(a):
    results = verify.run_suite(a.suite, mu=a.mu_filter, seed=a.seed)
    ok = all(r.passed for r in results)
    res = {"suite": a.suite, "passed": ok,
           "checks": [{**r.to_dict(), "line": r.line().rsplit(" (", 1)[0]} for r in results]}
    return "acceptance", res, None, ok


COMMANDS = {
    "system": cmd_system, "strata": cmd_strata, "operator": cmd_operator,
    "exponents": cmd_exponents, "isocheck": cmd_isocheck, "bounds": cmd_bounds,
    "periods": cmd_periods, "residual": cmd_residual, "fit": cmd_fit,
    "monodromy": cmd_monodromy, "verify": cmd_verify,
}


# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="gmconn", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key=value file with default flags")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, curve=True):
        sp.add_argument("--format", choices=("text", "json", "csv"), default="text")
        sp.add_argument("--json", dest="format", action="store_const", const="json")
        sp.add_argument("--seed", type=int, default=0)
        if curve:
            sp.add_argument("--mu", type=_mu, default=2)
            sp.add_argument("--nu", type=_pos2, default=2)
            sp.add_argument("--m", type=int, default=1)

    def opflags(sp):
        sp.add_argument("--kind", default="annihilator",
                        choices=("annihilator", "literal", "shifted", "4.1", "4.2", "4.1'", "4.2'"))
        sp.add_argument("--s-prime", type=_rational_list, default=None)
        sp.add_argument("--k", type=_nonneg, default=0)
        sp.add_argument("--x0", type=_rational, default=Fraction(0))
        sp.add_argument("--s1", type=_rational, default=Fraction(-1))
        sp.add_argument("--c", type=_rational, default=Fraction(1))

    common(sub.add_parser("system", help="connection matrices S, L, V and Delta"))
    sp = sub.add_parser("strata", help="stratum label of a rational point")
    common(sp, curve=False)
    sp.add_argument("--point", type=_rational_list, required=True)
    sp = sub.add_parser("operator", help="annihilating operators")
    common(sp)
    opflags(sp)
    sp = sub.add_parser("exponents", help="indicial roots at a point")
    common(sp)
    opflags(sp)
    sp.add_argument("--t", type=_point_arg, default=Fraction(1))
    sp.add_argument("--table", help="closed-form table to compare, e.g. \"4.2'@0\"")
    common(sub.add_parser("isocheck", help="exponents along D^(0) and the scaling orbit"))
    sp = sub.add_parser("bounds", help="zero-multiplicity bound")
    common(sp)
    sp.add_argument("--K", type=_nonneg, default=0)
    sp.add_argument("--k1", type=_nonneg, default=0)
    sp.add_argument("--point", choices=("branch", "regular"), default="branch")
    numeric_help = {"periods": "one period integral", "residual": "connection residual",
                    "fit": "local exponent fit at a critical value",
                    "monodromy": "monodromy around a critical value"}
    for name in ("periods", "residual", "fit", "monodromy"):
        sp = sub.add_parser(name, help=numeric_help[name])
        common(sp)
        sp.add_argument("--s", type=_complex_list)
        if name == "periods":
            sp.add_argument("--cycle", type=_pair, default=(0, 1))
            sp.add_argument("--i", type=_nonneg, default=0)
            sp.add_argument("--kind", choices=("segment", "pochhammer"), default="segment")
            sp.add_argument("--check-pochhammer", action="store_true")
        if name == "fit":
            sp.add_argument("--t0", type=_complex)
            sp.add_argument("--critical", type=_nonneg, default=0)
            sp.add_argument("--ladder", type=int, default=12)
            sp.add_argument("--eps0", type=float, default=1e-2)
            sp.add_argument("--i", type=_nonneg, default=0)
            sp.add_argument("--x0", type=_rational)
        if name == "monodromy":
            sp.add_argument("--around", type=_complex)
            sp.add_argument("--critical", type=_nonneg, default=0)
            sp.add_argument("--radius", type=float)
    sp = sub.add_parser("verify", help="run acceptance checks")
    common(sp, curve=False)
    sp.add_argument("--suite", choices=["all"] + list(verify.SUITES), default="all")
    sp.add_argument("--mu", dest="mu_filter", type=_mu)
    return p


def _read_config(path):
    flags = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"config line without '=': {line!r}")
            key, val = (x.strip() for x in line.split("=", 1))
            flags += [f"--{key}", val]
    return flags


def _apply_precision():
    val = os.environ.get(PREC_ENV)
    if not val:
        fuchs.MP_PREC = DEFAULT_PREC
        return
    try:
        prec = int(val)
    except ValueError:
        prec = None
    if prec not in SUPPORTED_PREC:
        raise CliError(f"{PREC_ENV} must be one of {SUPPORTED_PREC}")
    fuchs.MP_PREC = prec


def _emit(record, rows, fmt, out):
    if fmt == "json":
        out.write(json.dumps(_jsonable(record), sort_keys=True, indent=1) + "\n")
    elif fmt == "csv":
        table = rows if rows is not None else [_flatten(_jsonable(record["result"]))]
        buf = io.StringIO()
        keys = sorted({k for r in table for k in r})
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in table:
            w.writerow({k: _jsonable(r.get(k)) for k in keys})
        out.write(buf.getvalue())
    else:
        res = record["result"]
        if record["command"] == "verify":
            for c in res["checks"]:
                out.write(c["line"] + "\n")
        else:
            for k, v in sorted(_flatten(_jsonable(res)).items()):
                out.write(f"{k}: {v}\n")
        out.write(f"[{record['tag']}] seed={record['seed']} ok={record['ok']}\n")


def _flatten(d, prefix=""):
    out = {}
    if isinstance(d, dict):
        for k, v in d.items():
            out.update(_flatten(v, f"{prefix}{k}."))
        return out
    return {prefix.rstrip("."): d}


def main(argv=None, out=None):
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            extra = _read_config(args.config)
            rest = [x for i, x in enumerate(argv)
                    if x != "--config" and (i == 0 or argv[i - 1] != "--config")]
            idx = rest.index(args.command) + 1
            args = parser.parse_args(rest[:idx] + extra + rest[idx:])
        _apply_precision()
        tag, result, rows, ok = COMMANDS[args.command](args)
    except (CliError, AlgebraError, periods.PeriodError, bounds.BoundError,
            ValueError) as exc:
        record = {"schema": SCHEMA, "command": args.command, "ok": False,
                  "seed": getattr(args, "seed", 0),
                  "error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
        return 1
    record = {"schema": SCHEMA, "command": args.command, "tag": tag, "seed": args.seed,
              "ok": bool(ok), "result": result}
    _emit(record, rows, args.format, out)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
