"""neflab command line.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure,
3 verdict disagreement in ``battery``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import battery, catalog, cubic, ode, priors
from .errors import InvalidArgument, NeflabError
from .legendre import invert_mean_map, variance_at
from .schemas import SCHEMAS, jsonable, validate
from .verifier import ClassifyConfig, classify

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_DISAGREE = 0, 1, 2, 3

CSV_COLUMNS = {
    "catalog-list": ["id"],
    "eval": ["kind", "point", "k", "grad", "V", "psi"],
    "verify": ["beta", "property", "status", "point", "residual"],
    "priors": ["point", "log_density"],
    "ode-solve": ["power", "coeff"],
    "ode-match": ["name", "value"],
    "ode-integrate": ["m", "v", "closed_form"],
    "battery": ["family", "beta", "P1", "P2", "P3", "agreement"],
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidArgument(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _params(pairs):
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidArgument(f"--param expects key=value, got {item!r}")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise InvalidArgument(f"--param {key}: not a number") from exc
    return out


def _family(args):
    if not args.family:
        raise InvalidArgument("--family is required")
    return catalog.load_family(args.family, _params(args.param))


def build_parser():
    p = _Parser(prog="neflab", description="Natural exponential families: cubic construction and checks.")
    p.add_argument("--schema", action="store_true", help="print the JSON schema of the command output")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--seed", type=int, default=0, help="echoed into every report")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def fam_args(sp):
        sp.add_argument("--family", help="catalog id or descriptor file")
        sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="catalog parameter")

    cat = sub.add_parser("catalog", help="list or show catalog families")
    cat.add_argument("action", choices=["list", "show"])
    cat.add_argument("id", nargs="?")
    cat.add_argument("--param", action="append", metavar="KEY=VALUE")

    ev = sub.add_parser("eval", help="k, k' and V at points")
    fam_args(ev)
    ev.add_argument("--theta", action="append", default=[], help="canonical point, comma list")
    ev.add_argument("--mean", action="append", default=[], help="mean point, comma list")

    tr = sub.add_parser("transform", help="cubic construction (or its inverse)")
    fam_args(tr)
    tr.add_argument("--beta", required=False)
    tr.add_argument("--inverse", action="store_true")
    tr.add_argument("--k0", type=float, default=0.0)
    tr.add_argument("--lambda0", default=None)

    ve = sub.add_parser("verify", help="check the three cubic properties")
    fam_args(ve)
    ve.add_argument("--beta", default="auto", help='"auto" or a comma list (n = 1: candidates; n >= 2: one beta)')
    ve.add_argument("--properties", default="1,2,3")
    ve.add_argument("--tol-p1", type=float, default=1e-6)
    ve.add_argument("--tol-p2", type=float, default=1e-6)
    ve.add_argument("--tol-p3", type=float, default=1e-4)
    ve.add_argument("--grid", type=int, default=25, help="points per axis")

    pr = sub.add_parser("priors", help="prior densities, normalizer and parameter maps")
    fam_args(pr)
    pr.add_argument("--family-tag", choices=list(priors.TAGS), default=priors.PI)
    pr.add_argument("--t", type=float, required=False)
    pr.add_argument("--m0")
    pr.add_argument("--beta")
    pr.add_argument("--side", type=int, choices=[1, -1], default=1)
    pr.add_argument("--a")
    pr.add_argument("--b", type=float)
    pr.add_argument("--grid", type=int, default=0, help="points per axis of the density table (0: none)")

    od = sub.add_parser("ode", help="the real cubic variance ODE")
    osub = od.add_subparsers(dest="ode_command", parser_class=_Parser)
    so = osub.add_parser("solve")
    ma = osub.add_parser("match")
    it = osub.add_parser("integrate")
    for sp in (so, ma, it):
        sp.add_argument("--beta", type=float)
    for sp in (so, it):
        sp.add_argument("--a", type=float, default=0.0)
        sp.add_argument("--b", type=float, default=0.0)
    so.add_argument("--lambda", dest="lam", type=float, default=0.0)
    ma.add_argument("--poly", help='"c0,c1,c2,c3" ascending coefficients')
    it.add_argument("--m0", type=float, default=0.0)
    it.add_argument("--v0", type=float)
    it.add_argument("--span", type=float, help="end point of the integration")
    it.add_argument("--step-fraction", type=float, default=1.0 / 2048)

    ba = sub.add_parser("battery", help="run the standard battery and emit the agreement matrix")
    ba.add_argument("--tol-p1", type=float, default=1e-6)
    ba.add_argument("--tol-p2", type=float, default=1e-6)
    ba.add_argument("--tol-p3", type=float, default=1e-4)
    ba.add_argument("--grid", type=int, default=25)
    return p


# --- handlers: each returns (schema name, json object, csv rows, exit code) ---------


def cmd_catalog(args):
    if args.action == "list":
        ids = list(catalog.CATALOG_IDS)
        return "catalog-list", {"ids": ids}, [[i] for i in ids], EXIT_OK
    if not args.id:
        raise InvalidArgument("catalog show needs an id")
    fam = catalog.build(args.id, _params(args.param))
    return "catalog-show", {"descriptor": catalog.descriptor_to_dict(fam)}, None, EXIT_OK


def cmd_eval(args):
    fam = _family(args)
    n = fam.dimension
    if not args.theta and not args.mean:
        raise InvalidArgument("give at least one --theta or --mean point")
    trows, mrows, flat = [], [], []
    for text in args.theta:
        if fam.cumulant is None:
            raise InvalidArgument("family has no cumulant; use --mean")
        theta = np.array(_floats(text))
        if theta.size != n or not fam.cumulant.theta_domain.contains(theta):
            raise InvalidArgument(f"theta={text} is not in the canonical domain")
        C = fam.cumulant
        rec = {"theta": theta, "k": C.value(theta), "grad": C.grad(theta), "hess": C.hess(theta)}
        trows.append(rec)
        flat.append(["theta", text, rec["k"], _join(rec["grad"]), _join(rec["hess"].ravel()), ""])
    for text in args.mean:
        m = np.array(_floats(text))
        if m.size != n or not fam.mean_domain.contains(m):
            raise InvalidArgument(f"m={text} is not in the mean domain")
        psi = invert_mean_map(fam, m) if fam.cumulant is not None else None
        V = fam.variance(m) if fam.variance is not None else variance_at(fam, m)
        mrows.append({"m": m, "V": V, "psi": psi})
        flat.append(["mean", text, "", "", _join(V.ravel()), "" if psi is None else _join(psi)])
    return "eval", {"family": fam.name, "theta": trows, "mean": mrows}, flat, EXIT_OK


def cmd_transform(args):
    fam = _family(args)
    if args.beta is None:
        raise InvalidArgument("--beta is required")
    beta = _floats(args.beta)
    if args.inverse:
        out = cubic.inverse_transform_family(fam, beta)
    else:
        lam0 = None if args.lambda0 is None else _floats(args.lambda0)
        out = cubic.transform_family(fam, cubic.CubicConstructionParams(beta, args.k0, lam0))
    return "transform", {"descriptor": catalog.descriptor_to_dict(out)}, None, EXIT_OK


def _verify_config(args, betas="auto"):
    return ClassifyConfig(
        betas=betas,
        tol_p1=args.tol_p1,
        tol_p2=args.tol_p2,
        tol_p3=args.tol_p3,
        points_per_axis=args.grid,
        **({"properties": tuple(int(x) for x in _floats(args.properties))} if hasattr(args, "properties") else {}),
    )


def cmd_verify(args):
    fam = _family(args)
    if args.grid < 3:
        raise InvalidArgument("--grid must be >= 3")
    if args.beta == "auto":
        betas = "auto"
    else:
        vals = _floats(args.beta)
        betas = [[v] for v in vals] if fam.dimension == 1 else [vals]
    report = classify(fam, _verify_config(args, betas))
    rows = []
    for att in report.attempts:
        tag = "quadratic-mode" if att.beta is None else _join(att.beta)
        for res in att.results:
            if res.points is None:
                rows.append([tag, res.prop, res.status, "", ""])
                continue
            for pt, r in zip(res.points, res.point_residuals):
                rows.append([tag, res.prop, res.status, _join(np.atleast_1d(pt)), float(r)])
    return "verify", report.to_dict(), rows, EXIT_OK


def cmd_priors(args):
    fam = _family(args)
    n = fam.dimension
    if args.t is None or args.m0 is None:
        raise InvalidArgument("--t and --m0 are required")
    m0 = np.array(_floats(args.m0))
    beta = None if args.beta is None else np.array(_floats(args.beta))
    spec = priors.PriorSpec(args.family_tag, args.t, m0, beta=beta, side=args.side)
    spec.check(fam)
    out = {
        "family": fam.name,
        "family_tag": spec.family_tag,
        "t": spec.t,
        "m0": spec.m0,
        "beta": beta,
        "side": spec.side,
        "log_normalizer": priors.log_normalizer(spec, fam),
        "mass_check": None,
        "omega": None,
        "grid": [],
    }
    if spec.family_tag == priors.PI:
        th, mm = priors.pushforward_mass_check(fam, spec.t, spec.m0)
        out["mass_check"] = {"theta_log_mass": th, "mean_log_mass": mm, "difference": abs(th - mm)}
    if args.a is not None or args.b is not None:
        p = priors.OmegaParams(np.array(_floats(args.a)) if args.a else np.zeros(n), args.b or 0.0)
        if p.a.size != n:
            raise InvalidArgument("--a must have one entry per dimension")
        maps = {}
        for direction in ("psi-side", "kprime-side"):
            try:
                t1, m1 = priors.param_map(direction, spec.t, spec.m0, p)
                maps[direction] = {"t": t1, "m0": m1, "in_mean_domain": fam.mean_domain.contains(m1)}
            except InvalidArgument:
                maps[direction] = None
        out["omega"] = {
            "a": p.a,
            "b": p.b,
            "in_omega": priors.omega_contains(p, spec.t, spec.m0, fam.mean_domain),
            "psi_side": maps["psi-side"],
            "kprime_side": maps["kprime-side"],
        }
    rows = []
    if args.grid:
        if args.grid < 2:
            raise InvalidArgument("--grid must be 0 or >= 2")
        dom = priors.prior_domain(spec, fam)
        psi = priors._PsiCache(fam)
        for pt in dom.grid(args.grid):
            ld = priors.log_density(spec, fam, pt, psi=psi)
            out["grid"].append({"point": pt, "log_density": ld})
            rows.append([_join(pt), ld])
    return "priors", out, rows, EXIT_OK


def _ode_params(p):
    return {"beta": p.beta, "a": p.a, "b": p.b, "lam": p.lam}


def cmd_ode(args):
    sub = args.ode_command
    if sub is None:
        raise InvalidArgument("ode needs one of: solve, match, integrate")
    if args.beta is None:
        raise InvalidArgument("--beta is required")
    if sub == "solve":
        sol = ode.solve_closed_form(ode.OdeParams(args.beta, args.a, args.b, args.lam))
        res = float(np.max(np.abs(ode.ode_residual_poly(sol.coeffs, sol.params))))
        out = {"params": _ode_params(sol.params), "coeffs": sol.coeffs, "is_variance": sol.is_variance,
               "ode_residual": res}
        return "ode-solve", out, [[k, c] for k, c in enumerate(sol.coeffs)], EXIT_OK
    if sub == "match":
        if args.poly is None:
            raise InvalidArgument("--poly is required")
        coeffs = _floats(args.poly)
        p = ode.match_cubic_to_ode(coeffs, args.beta)
        out = {"beta": args.beta, "coeffs": coeffs, "matched": p is not None,
               "params": None if p is None else _ode_params(p)}
        rows = [["matched", p is not None]] + ([] if p is None else [[k, v] for k, v in _ode_params(p).items()])
        return "ode-match", out, rows, EXIT_OK
    if args.v0 is None or args.span is None:
        raise InvalidArgument("--v0 and --span are required")
    if not 0 < args.step_fraction <= 0.5:
        raise InvalidArgument("--step-fraction must lie in (0, 0.5]")
    traj = ode.integrate_numeric(args.beta, args.a, args.b, args.m0, args.v0, args.span, args.step_fraction)
    exact = ode.solve_closed_form(ode.OdeParams(args.beta, args.a, args.b, traj.lam))
    ex = exact(traj.m)
    table = np.stack([traj.m, traj.v, ex], axis=1)
    out = {
        "params": _ode_params(exact.params),
        "m0": args.m0,
        "v0": args.v0,
        "span": args.span,
        "sup_error": float(np.max(np.abs(traj.v - ex))),
        "trajectory": table,
    }
    return "ode-integrate", out, table.tolist(), EXIT_OK


def cmd_battery(args):
    cfg = ClassifyConfig(tol_p1=args.tol_p1, tol_p2=args.tol_p2, tol_p3=args.tol_p3, points_per_axis=args.grid)
    rows = battery.run_battery(config=cfg)
    matrix = battery.agreement_matrix(rows)
    agreement = all(r.report.agreement for r in rows)
    out = {
        "families": [r.to_dict() for r in rows],
        "matrix": matrix,
        "agreement": agreement,
        "all_expected": all(r.matches_expectation for r in rows),
    }
    flat = [[m["family"], m["beta"] if isinstance(m["beta"], str) else _join(m["beta"]),
             m["P1"], m["P2"], m["P3"], m["agreement"]] for m in matrix]
    return "battery", out, flat, EXIT_OK if agreement else EXIT_DISAGREE


HANDLERS = {
    "catalog": cmd_catalog,
    "eval": cmd_eval,
    "transform": cmd_transform,
    "verify": cmd_verify,
    "priors": cmd_priors,
    "ode": cmd_ode,
    "battery": cmd_battery,
}


def _join(v):
    return " ".join(repr(float(x)) for x in np.ravel(v))


def _schema_key(args):
    if args.command == "catalog":
        return f"catalog-{args.action}"
    if args.command == "ode":
        return f"ode-{args.ode_command}" if args.ode_command else None
    return args.command


def _emit_json(obj, out):
    out.write(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(str(exc))
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_INVALID

    if args.schema:
        key = _schema_key(args) if args.command else None
        _emit_json(SCHEMAS if key is None else SCHEMAS[key], stdout)
        return EXIT_OK
    if args.command is None:
        stderr.write(parser.format_usage())
        return EXIT_INVALID

    try:
        name, obj, rows, code = HANDLERS[args.command](args)
    except NeflabError as exc:
        stderr.write(f"neflab: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except FloatingPointError as exc:
        stderr.write(f"neflab: numerical failure: {exc}\n")
        return EXIT_NUMERIC

    obj = jsonable(dict(obj, seed=args.seed, command=name))
    validate(name, obj)
    if args.format == "csv":
        if name not in CSV_COLUMNS:
            stderr.write(f"neflab: no CSV projection for {name}; use --format json\n")
            return EXIT_INVALID
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS[name])
        w.writerows(jsonable(rows or []))
        stdout.write(buf.getvalue())
    else:
        _emit_json(obj, stdout)
    return code


def main():
    sys.exit(run())
