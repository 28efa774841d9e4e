"""Closed-form families, products, and the JSON descriptor format."""

from __future__ import annotations

import json

import jsonschema
import numpy as np
import sympy

from .core import CumulantFamily, FamilyDescriptor, VarianceModel, affine_image, jorgensen_power
from .domains import DomainSpec
from .errors import InvalidArgument, NotFound, ParseError, ValidationError
from .poly import Poly

MORRIS_IDS = (
    "normal",
    "poisson",
    "gamma",
    "binomial",
    "negative-binomial",
    "hyperbolic-cosine",
)
CATALOG_IDS = MORRIS_IDS + ("inverse-gaussian",)

_DEFAULTS = {
    "normal": {},
    "poisson": {},
    "gamma": {"shape": 1.0},
    "binomial": {"N": 1.0},
    "negative-binomial": {"shape": 1.0},
    "hyperbolic-cosine": {"shape": 1.0},
    "inverse-gaussian": {},
}

INF = np.inf


def _m(coeffs):
    return Poly.from_coeffs_1d(coeffs)


def _spec(cid, p):
    """(k, k', k'', theta_domain, mean_domain, variance coefficients) for a catalog id."""
    if cid == "normal":
        return (
            lambda t: 0.5 * t[0] ** 2,
            lambda t: np.array([t[0]]),
            lambda t: np.array([[1.0]]),
            DomainSpec.box([-INF], [INF], [[-3.0], [3.0]]),
            DomainSpec.box([-INF], [INF], [[-3.0], [3.0]]),
            [1.0],
        )
    if cid == "poisson":
        return (
            lambda t: np.exp(t[0]),
            lambda t: np.array([np.exp(t[0])]),
            lambda t: np.array([[np.exp(t[0])]]),
            DomainSpec.box([-INF], [INF], [[-3.0], [2.0]]),
            DomainSpec.box([0.0], [INF], [[0.0], [8.0]]),
            [0.0, 1.0],
        )
    if cid == "gamma":
        s = p["shape"]
        return (
            lambda t: -s * np.log(-t[0]),
            lambda t: np.array([-s / t[0]]),
            lambda t: np.array([[s / t[0] ** 2]]),
            DomainSpec.box([-INF], [0.0], [[-4.0], [-0.25]]),
            DomainSpec.box([0.0], [INF], [[0.0], [4.0 * s]]),
            [0.0, 0.0, 1.0 / s],
        )
    if cid == "binomial":
        N = p["N"]
        sig = lambda x: 0.5 * (1.0 + np.tanh(0.5 * x))  # noqa: E731
        return (
            lambda t: N * np.logaddexp(0.0, t[0]),
            lambda t: np.array([N * sig(t[0])]),
            lambda t: np.array([[N * sig(t[0]) * sig(-t[0])]]),
            DomainSpec.box([-INF], [INF], [[-3.0], [3.0]]),
            DomainSpec.box([0.0], [N], [[0.0], [N]]),
            [0.0, 1.0, -1.0 / N],
        )
    if cid == "negative-binomial":
        s = p["shape"]
        return (
            lambda t: -s * np.log(-np.expm1(t[0])),
            lambda t: np.array([s / np.expm1(-t[0])]),
            lambda t: np.array([[s * np.exp(-t[0]) / np.expm1(-t[0]) ** 2]]),
            DomainSpec.box([-INF], [0.0], [[-3.0], [-0.1]]),
            DomainSpec.box([0.0], [INF], [[0.0], [10.0 * s]]),
            [0.0, 1.0, 1.0 / s],
        )
    if cid == "hyperbolic-cosine":
        s = p["shape"]
        return (
            lambda t: -s * np.log(np.cos(t[0])),
            lambda t: np.array([s * np.tan(t[0])]),
            lambda t: np.array([[s / np.cos(t[0]) ** 2]]),
            DomainSpec.box([-np.pi / 2], [np.pi / 2], [[-1.4], [1.4]]),
            DomainSpec.box([-INF], [INF], [[-5.0 * s], [5.0 * s]]),
            [s, 0.0, 1.0 / s],
        )
    if cid == "inverse-gaussian":
        return (
            lambda t: -np.sqrt(-2.0 * t[0]),
            lambda t: np.array([(-2.0 * t[0]) ** -0.5]),
            lambda t: np.array([[(-2.0 * t[0]) ** -1.5]]),
            DomainSpec.box([-INF], [0.0], [[-4.0], [-0.05]]),
            DomainSpec.box([0.0], [INF], [[0.0], [3.0]]),
            [0.0, 0.0, 0.0, 1.0],
        )
    raise NotFound(f"unknown catalog id {cid!r}")


def _check_params(cid, params):
    if cid not in _DEFAULTS:
        raise NotFound(f"unknown catalog id {cid!r}; known: {', '.join(CATALOG_IDS)}")
    unknown = set(params) - set(_DEFAULTS[cid])
    if unknown:
        raise InvalidArgument(f"{cid}: unknown parameters {sorted(unknown)}")
    p = {**_DEFAULTS[cid], **{k: float(v) for k, v in params.items()}}
    if cid == "binomial" and (p["N"] < 1 or p["N"] != int(p["N"])):
        raise InvalidArgument("binomial N must be an integer >= 1")
    if cid == "negative-binomial" and p["shape"] < 1:
        raise InvalidArgument("negative-binomial shape must be >= 1")
    if cid in ("gamma", "hyperbolic-cosine") and not p["shape"] > 0:
        raise InvalidArgument(f"{cid} shape must be > 0")
    return p


def build(cid, params=None):
    """Catalog family by id with closed-form cumulant and polynomial variance."""
    p = _check_params(cid, dict(params or {}))
    k, g, h, tdom, mdom, vcoef = _spec(cid, p)
    cumulant = CumulantFamily(
        1, tdom, k, g, h, closed_form=True, mean_domain=mdom,
        recipe={"kind": cid, "params": {key: p[key] for key in sorted(p)}},
    )
    variance = VarianceModel.from_polys([[_m(vcoef)]], mdom)
    return FamilyDescriptor(cid, cumulant, variance, {"catalog": cid, "params": p})


def _embed(poly, i, n):
    return poly.compose([Poly.var(i, n)])


def _product_domain(doms, window_only=False):
    n = len(doms)
    window = np.array([[d.window[0, 0] for d in doms], [d.window[1, 0] for d in doms]])
    if all(d.kind != "predicate" for d in doms):
        lo = np.array([d.extent()[0][0] for d in doms])
        hi = np.array([d.extent()[1][0] for d in doms])
        return DomainSpec.box(lo, hi, window)
    return DomainSpec(
        n, "predicate", window,
        predicate=lambda x: all(d.contains(x[i : i + 1]) for i, d in enumerate(doms)),
    )


def product_family(parts):
    """Independent product of one-dimensional families."""
    parts = list(parts)
    if not parts:
        raise InvalidArgument("product of an empty list")
    for f in parts:
        if f.dimension != 1 or f.cumulant is None:
            raise InvalidArgument("product parts must be one-dimensional with a cumulant")
    n = len(parts)
    Cs = [f.cumulant for f in parts]

    def k(t):
        return sum(C.value(t[i : i + 1]) for i, C in enumerate(Cs))

    def grad(t):
        return np.concatenate([C.grad(t[i : i + 1]) for i, C in enumerate(Cs)])

    def hess(t):
        return np.diag([C.hess(t[i : i + 1])[0, 0] for i, C in enumerate(Cs)])

    tdom = _product_domain([C.theta_domain for C in Cs])
    mdom = _product_domain([f.mean_domain for f in parts])
    cumulant = CumulantFamily(
        n, tdom, k, grad, hess,
        closed_form=all(C.closed_form for C in Cs),
        mean_domain=mdom,
        recipe={"kind": "product", "parts": [C.recipe for C in Cs]},
    )
    variance = None
    if all(f.variance is not None and f.variance.is_polynomial for f in parts):
        rows = [
            [_embed(parts[i].variance.entries[0, 0], i, n) if i == j else Poly(n) for j in range(n)]
            for i in range(n)
        ]
        variance = VarianceModel.from_polys(rows, mdom)
    name = "product(" + ",".join(f.name for f in parts) + ")"
    return FamilyDescriptor(name, cumulant, variance, {"product_of": [f.name for f in parts]})


def _theta_symbols(n):
    return [sympy.Symbol(f"theta{i}", real=True) for i in range(n)]


def expression_cumulant(expr, dimension, theta_domain, mean_domain=None):
    """Cumulant from a sympy-parsable expression in theta0..theta{n-1} (``theta`` when n = 1)."""
    syms = _theta_symbols(dimension)
    local = {s.name: s for s in syms}
    if dimension == 1:
        local["theta"] = syms[0]
    try:
        e = sympy.sympify(expr, locals=local, rational=True)
    except (sympy.SympifyError, TypeError, SyntaxError) as exc:
        raise ParseError(f"cannot parse expression: {exc}", ("cumulant", "expr")) from exc
    extra = e.free_symbols - set(syms)
    if extra:
        raise ParseError(f"unknown symbols {sorted(map(str, extra))}", ("cumulant", "expr"))
    g = [sympy.diff(e, s) for s in syms]
    H = [[sympy.diff(gi, s) for s in syms] for gi in g]
    fk = sympy.lambdify([syms], e, "numpy")
    fg = sympy.lambdify([syms], g, "numpy")
    fh = sympy.lambdify([syms], H, "numpy")
    recipe = {
        "kind": "expression",
        "expr": str(expr),
        "theta_domain": theta_domain.to_json(),
    }
    if mean_domain is not None:
        recipe["mean_domain"] = mean_domain.to_json()
    return CumulantFamily(
        dimension,
        theta_domain,
        k=lambda t: float(fk(list(t))),
        grad_k=lambda t: np.array(fg(list(t)), dtype=float),
        hess_k=lambda t: np.array(fh(list(t)), dtype=float),
        closed_form=True,
        mean_domain=mean_domain,
        recipe=recipe,
    )


# --- JSON descriptor format -------------------------------------------------

_DOMAIN_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["box", "halfspace"]},
        "window": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}, "minItems": 2, "maxItems": 2},
        "lower": {"type": "array", "items": {"type": ["number", "null"]}},
        "upper": {"type": "array", "items": {"type": ["number", "null"]}},
        "A": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "b": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind", "window"],
    "additionalProperties": False,
}

DESCRIPTOR_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "neflab family descriptor",
    "type": "object",
    "$defs": {
        "domain": _DOMAIN_SCHEMA,
        "cumulant": {
            "type": "object",
            "properties": {
                "kind": {"type": "string"},
                "params": {"type": "object", "additionalProperties": {"type": "number"}},
                "expr": {"type": "string"},
                "theta_domain": {"$ref": "#/$defs/domain"},
                "mean_domain": {"$ref": "#/$defs/domain"},
                "parts": {"type": "array", "items": {"$ref": "#/$defs/cumulant"}},
                "base": {"$ref": "#/$defs/cumulant"},
                "beta": {"type": "array", "items": {"type": "number"}},
                "k0": {"type": "number"},
                "lambda0": {"type": "array", "items": {"type": "number"}},
                "a_map": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "b_shift": {"type": "array", "items": {"type": "number"}},
                "lam": {"type": "number"},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "variance": {
            "type": "object",
            "properties": {
                "entries": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "row": {"type": "integer", "minimum": 0},
                            "col": {"type": "integer", "minimum": 0},
                            "terms": {
                                "type": "array",
                                "items": {
                                    "type": "object",
                                    "properties": {
                                        "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                        "coeff": {"type": "number"},
                                    },
                                    "required": ["exponents", "coeff"],
                                    "additionalProperties": False,
                                },
                            },
                        },
                        "required": ["row", "col", "terms"],
                        "additionalProperties": False,
                    },
                },
                "mean_domain": {"$ref": "#/$defs/domain"},
            },
            "required": ["entries", "mean_domain"],
            "additionalProperties": False,
        },
    },
    "properties": {
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "cumulant": {"$ref": "#/$defs/cumulant"},
        "variance": {"$ref": "#/$defs/variance"},
        "provenance": {"type": "object"},
    },
    "required": ["name", "dimension"],
    "additionalProperties": False,
}


def _need(obj, key, path):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", path)
    return obj[key]


def cumulant_from_recipe(recipe, dimension=None, path=("cumulant",)):
    """Rebuild a CumulantFamily from its JSON recipe."""
    kind = recipe["kind"]
    if kind in CATALOG_IDS:
        fam = build(kind, recipe.get("params", {}))
        return fam.cumulant, fam
    if kind == "expression":
        n = dimension or 1
        tdom = DomainSpec.from_json(_need(recipe, "theta_domain", path), n, path + ("theta_domain",))
        mdom = None
        if "mean_domain" in recipe:
            mdom = DomainSpec.from_json(recipe["mean_domain"], n, path + ("mean_domain",))
        C = expression_cumulant(_need(recipe, "expr", path), n, tdom, mdom)
        return C, FamilyDescriptor("expression", C, None)
    if kind == "product":
        parts = [
            cumulant_from_recipe(r, 1, path + ("parts", i))[1]
            for i, r in enumerate(_need(recipe, "parts", path))
        ]
        fam = product_family(parts)
        return fam.cumulant, fam
    if kind in ("affine", "power", "cubic-transform"):
        base = _need(recipe, "base", path)
        base_dim = dimension
        _, bfam = cumulant_from_recipe(base, base_dim, path + ("base",))
        if kind == "affine":
            fam = affine_image(bfam, _need(recipe, "a_map", path), _need(recipe, "b_shift", path))
        elif kind == "power":
            fam = jorgensen_power(bfam, _need(recipe, "lam", path))
        else:
            from .cubic import CubicConstructionParams, transform_family

            params = CubicConstructionParams(
                beta=_need(recipe, "beta", path),
                k0=recipe.get("k0", 0.0),
                lambda0=recipe.get("lambda0"),
            )
            fam = transform_family(bfam, params)
        return fam.cumulant, fam
    raise ParseError(f"unknown cumulant kind {kind!r}", path + ("kind",))


def _variance_from_json(obj, n):
    mdom = DomainSpec.from_json(obj["mean_domain"], n, ("variance", "mean_domain"))
    rows = [[Poly(n) for _ in range(n)] for _ in range(n)]
    seen = set()
    for idx, entry in enumerate(obj["entries"]):
        path = ("variance", "entries", idx)
        i, j = entry["row"], entry["col"]
        if i >= n or j >= n:
            raise ParseError(f"entry index ({i},{j}) out of range for dimension {n}", path)
        if (i, j) in seen:
            raise ParseError(f"duplicate entry ({i},{j})", path)
        seen.add((i, j))
        terms = {}
        for t_idx, term in enumerate(entry["terms"]):
            exps = tuple(term["exponents"])
            if len(exps) != n:
                raise ParseError(f"exponents must have length {n}", path + ("terms", t_idx))
            terms[exps] = terms.get(exps, 0.0) + term["coeff"]
        rows[i][j] = Poly(n, terms)
    return VarianceModel.from_polys(rows, mdom)


def _variance_to_json(V):
    entries = []
    n = V.dimension
    for i in range(n):
        for j in range(n):
            p = V.entries[i, j]
            terms = [
                {"exponents": list(e), "coeff": c}
                for e, c in sorted(p.terms.items())
            ]
            entries.append({"row": i, "col": j, "terms": terms})
    return {"entries": entries, "mean_domain": V.mean_domain.to_json()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def descriptor_to_dict(fam):
    out = {"name": fam.name, "dimension": fam.dimension}
    if fam.cumulant is not None:
        if not fam.cumulant.recipe:
            raise InvalidArgument(f"cumulant of {fam.name!r} has no serializable recipe")
        out["cumulant"] = _jsonable(fam.cumulant.recipe)
    if fam.variance is not None:
        if not fam.variance.is_polynomial:
            raise InvalidArgument(f"variance of {fam.name!r} is numeric-only and not serializable")
        out["variance"] = _variance_to_json(fam.variance)
    if fam.provenance:
        out["provenance"] = _jsonable(fam.provenance)
    return out


def serialize_descriptor(fam):
    return json.dumps(descriptor_to_dict(fam), sort_keys=True, indent=2)


def parse_descriptor(text):
    """Parse and validate a JSON family descriptor."""
    try:
        obj = json.loads(text) if isinstance(text, (str, bytes)) else text
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(DESCRIPTOR_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ParseError(err.message, tuple(err.absolute_path))
    n = obj["dimension"]
    if "cumulant" not in obj and "variance" not in obj:
        raise ValidationError("descriptor needs a cumulant or a variance section")
    cumulant = None
    if "cumulant" in obj:
        try:
            cumulant, _ = cumulant_from_recipe(obj["cumulant"], n)
        except InvalidArgument as exc:
            raise ValidationError(str(exc)) from exc
        if cumulant.dimension != n:
            raise ValidationError(f"cumulant dimension {cumulant.dimension} != declared {n}")
    variance = _variance_from_json(obj["variance"], n) if "variance" in obj else None
    fam = FamilyDescriptor(obj["name"], cumulant, variance, obj.get("provenance", {}))
    if variance is not None:
        variance.check_positive_definite()
    fam.check_consistency()
    return fam


def load_family(ref, params=None):
    """Catalog id or path to a descriptor file."""
    if ref in CATALOG_IDS:
        return build(ref, params)
    try:
        with open(ref) as fh:
            return parse_descriptor(fh.read())
    except FileNotFoundError as exc:
        raise NotFound(f"{ref!r} is neither a catalog id nor a descriptor file") from exc
