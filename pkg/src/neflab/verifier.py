"""Checks of the three equivalent cubic properties on a family.

P1  log det k''(theta) - (n+2) log|1 + <beta, k'(theta)>|  is affine in (theta, k(theta))
P2  div V(m) - (n+2) / (1 + <beta, m>) V(m) beta  is affine in m
P3  mean-map image of PI_{t,m0} equals PI_TILDE at the mapped hyperparameters

``beta=None`` selects quadratic mode (no (1 + <beta, m>) factor). The
factor enters through its absolute value; ``side`` picks the connected part
of {1 + <beta, m> != 0} used for grids and supports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import priors
from .core import VarianceModel, as_vector
from .errors import DegenerateGrid, InvalidArgument, NeflabError
from .legendre import NewtonConfig, invert_grid, variance_at
from .ode import match_cubic_to_ode
from .priors import OmegaParams, PriorSpec

PASS, FAIL, NA, ERROR = "pass", "fail", "n/a", "error"


@dataclass
class FitResult:
    prop: str
    status: str
    a: Optional[np.ndarray] = None
    b: Optional[float] = None
    c: Optional[float] = None
    residual: float = float("nan")
    grid_size: int = 0
    tol: float = 0.0
    message: str = ""
    points: Optional[np.ndarray] = field(default=None, repr=False)
    point_residuals: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def passed(self):
        return self.status == PASS

    def to_dict(self):
        return {
            "property": self.prop,
            "status": self.status,
            "a": None if self.a is None else [float(x) for x in self.a],
            "b": None if self.b is None else float(self.b),
            "c": None if self.c is None else float(self.c),
            "residual": None if not np.isfinite(self.residual) else float(self.residual),
            "grid_size": int(self.grid_size),
            "tol": float(self.tol),
            "message": self.message,
        }


def _finish(prop, coef_a, coef_b, coef_c, resid_vec, tol, points, message=""):
    residual = float(np.max(np.abs(resid_vec))) if len(resid_vec) else float("nan")
    return FitResult(
        prop,
        PASS if residual < tol else FAIL,
        a=np.asarray(coef_a, dtype=float),
        b=float(coef_b),
        c=None if coef_c is None else float(coef_c),
        residual=residual,
        grid_size=len(points),
        tol=tol,
        message=message,
        points=np.asarray(points),
        point_residuals=np.asarray(resid_vec),
    )


def _beta_or_none(beta, n):
    if beta is None:
        return None
    b = as_vector(beta, n)
    if not np.any(b):
        raise InvalidArgument("beta = 0 is only available as quadratic mode (beta=None)")
    return b


def resolve_side(fam, beta, points_per_axis=25):
    """+1 if {1 + <beta, m> > 0} meets the mean domain, else -1 if the negative part does."""
    if beta is None:
        return 1
    grid = fam.mean_domain.grid(points_per_axis, shrink=0.0)
    u = 1.0 + grid @ beta
    if np.any(u > 0):
        return 1
    if np.any(u < 0):
        return -1
    raise InvalidArgument("mean domain lies on the hyperplane 1 + <beta, m> = 0")


def variance_model_of(fam):
    if fam.variance is not None:
        return fam.variance
    cfg = NewtonConfig()
    return VarianceModel(fam.dimension, fam.mean_domain, evaluator=lambda m: variance_at(fam, m, cfg))


def default_theta_grid(fam, beta, side=1, points_per_axis=25, shrink=0.05):
    C = fam.cumulant
    if beta is None:
        extra = None
    else:
        def extra(theta):
            return side * (1.0 + beta @ C.grad(theta)) > 0
    return C.theta_domain.grid(points_per_axis, shrink, extra=extra)


def default_mean_grid(fam, beta, side=1, points_per_axis=25, shrink=0.05):
    dom = fam.mean_domain if beta is None else priors.tilde_domain(fam.mean_domain, beta, side)
    return dom.grid(points_per_axis, shrink)


def _lstsq(X, y, prop):
    if X.shape[0] < X.shape[1] + 1:
        raise DegenerateGrid(f"{prop}: grid has {X.shape[0]} points, need at least {X.shape[1] + 1}")
    scale = np.max(np.abs(X), axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    if np.linalg.matrix_rank(Xs) < X.shape[1]:
        raise DegenerateGrid(f"{prop}: regressor matrix is rank deficient; enlarge the grid")
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    coef = coef / scale
    return coef, y - X @ coef


def _integrate_cumulative(f, xs):
    """Integral of f from xs[mid] to each xs[i] (xs sorted), by adaptive Simpson per gap."""
    total = np.zeros(len(xs))
    quad_eps = 1e-13
    for i in range(1, len(xs)):
        total[i] = total[i - 1] + priors.adaptive_simpson(f, xs[i - 1], xs[i], quad_eps)
    return total - total[len(xs) // 2]


def monge_ampere_fit(fam, beta, theta_grid=None, tol=1e-6, side=None, points_per_axis=25):
    """P1: least-squares fit of the Monge-Ampere identity on a grid in canonical coordinates."""
    n = fam.dimension
    beta = _beta_or_none(beta, n)
    side = resolve_side(fam, beta) if side is None else side
    if fam.cumulant is None:
        return _monge_ampere_from_variance(fam, beta, tol, side, points_per_axis)
    C = fam.cumulant
    if theta_grid is None:
        theta_grid = default_theta_grid(fam, beta, side, points_per_axis)
    theta_grid = np.asarray(theta_grid, dtype=float).reshape(-1, n)
    ys, rows = [], []
    for theta in theta_grid:
        if not C.theta_domain.contains(theta):
            raise InvalidArgument(f"grid point {theta.tolist()} is outside the canonical domain")
        sign, logdet = np.linalg.slogdet(C.hess(theta))
        if sign <= 0:
            raise InvalidArgument(f"k'' is not positive definite at {theta.tolist()}")
        y = logdet
        if beta is not None:
            u = 1.0 + beta @ C.grad(theta)
            if not side * u > 0:
                raise InvalidArgument(f"grid point {theta.tolist()} is outside the tilde domain")
            y -= (n + 2) * np.log(abs(u))
        ys.append(y)
        rows.append(np.concatenate([[1.0], theta, [C.value(theta)]]))
    coef, resid = _lstsq(np.array(rows).reshape(-1, n + 2), np.array(ys), "P1")
    return _finish("P1", coef[1 : n + 1], coef[n + 1], coef[0], resid, tol, theta_grid)


def _monge_ampere_from_variance(fam, beta, tol, side, points_per_axis):
    """P1 in mean coordinates for a variance-only real family.

    psi and k(psi) are rebuilt as integrals of 1/V and m/V; their unknown
    constants are absorbed into the fitted c.
    """
    if fam.dimension != 1:
        raise InvalidArgument("P1 without a cumulant is only available for n = 1")
    V = fam.variance
    grid = default_mean_grid(fam, beta, side, points_per_axis)
    ms = np.sort(grid[:, 0])
    v = lambda s: float(V(np.array([s]))[0, 0])  # noqa: E731
    psi = _integrate_cumulative(lambda s: 1.0 / v(s), ms)
    kpsi = _integrate_cumulative(lambda s: s / v(s), ms)
    y = np.log([v(s) for s in ms])
    if beta is not None:
        y = y - 3.0 * np.log(np.abs(1.0 + beta[0] * ms))
    X = np.stack([np.ones_like(ms), psi, kpsi], axis=1)
    coef, resid = _lstsq(X, y, "P1")
    return _finish("P1", coef[1:2], coef[2], coef[0], resid, tol, ms[:, None],
                   message="psi and k(psi) reconstructed by quadrature of the variance")


def trace_identity_residual(V, beta, mean_grid=None, tol=1e-6, side=None, points_per_axis=25):
    """P2: fit div V(m) - (n+2)/(1+<beta,m>) V(m) beta = a + b m on a mean grid."""
    n = V.dimension
    beta = _beta_or_none(beta, n)
    if side is None:
        side = 1
        if beta is not None:
            g = V.mean_domain.grid(points_per_axis, shrink=0.0)
            side = 1 if np.any(1.0 + g @ beta > 0) else -1
    if mean_grid is None:
        dom = V.mean_domain if beta is None else priors.tilde_domain(V.mean_domain, beta, side)
        mean_grid = dom.grid(points_per_axis)
    mean_grid = np.asarray(mean_grid, dtype=float).reshape(-1, n)
    rows, rhs = [], []
    for m in mean_grid:
        D = V.derivative(m)
        L = np.einsum("jii->j", D)
        if beta is not None:
            u = 1.0 + beta @ m
            if not side * u > 0:
                raise InvalidArgument(f"grid point {m.tolist()} has 1 + <beta, m> on the wrong side")
            L = L - (n + 2) / u * (V(m) @ beta)
        for j in range(n):
            e = np.zeros(n + 1)
            e[j] = 1.0
            e[n] = m[j]
            rows.append(e)
            rhs.append(L[j])
    coef, resid = _lstsq(np.array(rows), np.array(rhs), "P2")
    per_point = np.max(np.abs(resid.reshape(-1, n)), axis=1)
    return _finish("P2", coef[:n], coef[n], None, per_point, tol, mean_grid)


def default_prior_samples(fam, p, count=5, points_per_axis=25):
    """(t, m0) pairs whose kprime-side image lies in R+ x M."""
    grid = fam.mean_domain.grid(points_per_axis, shrink=0.2)
    if not len(grid):
        raise InvalidArgument("mean domain grid is empty")
    idx = np.linspace(0, len(grid) - 1, count + 2)[1:-1].round().astype(int)
    out = []
    for i, j in enumerate(idx):
        m0 = grid[j]
        t = max(1.0, 1.0 - p.b) + i
        for _ in range(40):
            if t + p.b > 0 and fam.mean_domain.contains((t * m0 - p.a) / (t + p.b)):
                break
            t *= 2.0
        else:
            raise InvalidArgument(f"no valid t found for m0={m0.tolist()}")
        out.append((t, m0))
    return out


def prior_pushforward_check(fam, beta, p, samples=None, mean_grid=None, tol=1e-4, side=None,
                            points_per_axis=25):
    """P3: k'(PI_{t,m0}) / PI_TILDE_{t1,m1} must be constant in m for every sample."""
    n = fam.dimension
    if beta is None:
        return FitResult("P3", NA, tol=tol, message="quadratic mode: prior check not applicable")
    beta = _beta_or_none(beta, n)
    side = resolve_side(fam, beta) if side is None else side
    if fam.cumulant is None:
        raise InvalidArgument("P3 needs a cumulant function")
    if mean_grid is None:
        mean_grid = default_mean_grid(fam, beta, side, points_per_axis)
    mean_grid = np.asarray(mean_grid, dtype=float).reshape(-1, n)
    if not len(mean_grid):
        raise InvalidArgument("tilde mean domain is empty")
    if samples is None:
        samples = default_prior_samples(fam, p)
    thetas = invert_grid(fam, mean_grid)
    C = fam.cumulant
    logdets = np.array([np.linalg.slogdet(C.hess(t))[1] for t in thetas])
    ks = np.array([C.value(t) for t in thetas])
    u = 1.0 + mean_grid @ beta
    if np.any(side * u <= 0):
        raise InvalidArgument("mean grid leaves the tilde domain")

    worst, worst_D, offsets = -1.0, None, []
    for t, m0 in samples:
        m0 = as_vector(m0, n)
        t1, m1 = priors.param_map("kprime-side", t, m0, p)
        if not fam.mean_domain.contains(m1):
            raise InvalidArgument(f"mapped m1={m1.tolist()} is outside the mean domain")
        PriorSpec(priors.PI, t, m0).check(fam)
        tilde = PriorSpec(priors.PI_TILDE, t1, m1, beta=beta, side=side)
        push = t * (thetas @ m0 - ks) - logdets
        tld = t1 * (thetas @ m1 - ks) - (n + 2) * np.log(np.abs(u))
        D = push - tld
        # spot-check the vectorized path against the module densities
        j = len(mean_grid) // 2
        ref = priors.pushforward_log_density(fam, t, m0, mean_grid[j]) - priors.log_density(
            tilde, fam, mean_grid[j]
        )
        if abs(ref - D[j]) > 1e-8 * max(1.0, abs(ref)):
            raise AssertionError("vectorized prior densities disagree with priors module")
        spread = float(np.max(D) - np.min(D))
        offsets.append(float(np.mean(D)))
        if spread > worst:
            worst, worst_D = spread, D - np.mean(D)
    res = _finish("P3", p.a, p.b, float(np.mean(offsets)), worst_D, tol, mean_grid,
                  message=f"{len(samples)} hyperparameter samples")
    res.residual = worst
    res.status = PASS if worst < tol else FAIL
    return res


def real_roots(coeffs, cluster=1e-4):
    """Real roots of an ascending-coefficient polynomial, merging multiple-root clusters."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
    if c.size <= 1:
        return []
    roots = list(np.roots(c[::-1]))
    groups = []
    for r in roots:
        for g in groups:
            if abs(np.mean(g) - r) < cluster * max(1.0, abs(r)):
                g.append(r)
                break
        else:
            groups.append([r])
    out = []
    for g in groups:
        mean = np.mean(g)
        if abs(mean.imag) < 1e-8 * max(1.0, abs(mean)):
            r = float(mean.real)
            snapped = round(r, 10)
            out.append(snapped if abs(snapped - r) < 1e-12 * max(1.0, abs(r)) else r)
    return sorted(out)


def beta_candidates(V, user=()):
    """-1/r for each nonzero real root r of a real polynomial variance, plus user values."""
    if V.dimension != 1:
        raise InvalidArgument("beta candidates from roots need n = 1")
    cands = []
    if V.is_polynomial:
        for r in real_roots(V.entries[0, 0].coeffs_1d()):
            if abs(r) > 1e-12:
                cands.append(-1.0 / r)
    cands.extend(float(x) for x in user)
    out = []
    for c in sorted(cands):
        if c != 0.0 and not any(abs(c - o) <= 1e-10 * max(1.0, abs(o)) for o in out):
            out.append(c)
    return out


def symmetry_check(V, m, alpha, gamma):
    """|V'(m)(V(m) alpha)(gamma) - V'(m)(V(m) gamma)(alpha)|_inf."""
    n = V.dimension
    m, alpha, gamma = as_vector(m, n), as_vector(alpha, n), as_vector(gamma, n)
    D = V.derivative(m)
    Vm = V(m)
    lhs = np.einsum("ijl,l->ij", D, Vm @ alpha) @ gamma
    rhs = np.einsum("ijl,l->ij", D, Vm @ gamma) @ alpha
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class VerdictReport:
    beta: Optional[np.ndarray]
    side: int
    p1: FitResult
    p2: FitResult
    p3: FitResult
    ode: Optional[object] = None

    @property
    def results(self):
        return [self.p1, self.p2, self.p3]

    @property
    def attempted(self):
        return [r for r in self.results if r.status in (PASS, FAIL)]

    @property
    def agreement(self):
        return len({r.status for r in self.attempted}) <= 1

    @property
    def passed(self):
        att = self.attempted
        return bool(att) and all(r.passed for r in att) and not self.errors

    @property
    def errors(self):
        return [r for r in self.results if r.status == ERROR]

    def to_dict(self):
        out = {
            "beta": "quadratic-mode" if self.beta is None else [float(x) for x in self.beta],
            "side": self.side,
            "P1": self.p1.to_dict(),
            "P2": self.p2.to_dict(),
            "P3": self.p3.to_dict(),
            "agreement": self.agreement,
            "pass": self.passed,
        }
        if self.ode is not None:
            out["ode"] = {"beta": self.ode.beta, "a": self.ode.a, "b": self.ode.b, "lam": self.ode.lam}
        return out


@dataclass(frozen=True)
class ClassifyConfig:
    betas: object = "auto"
    properties: tuple = (1, 2, 3)
    tol_p1: float = 1e-6
    tol_p2: float = 1e-6
    tol_p3: float = 1e-4
    points_per_axis: int = 25

    def __post_init__(self):
        if not set(self.properties) <= {1, 2, 3} or not self.properties:
            raise InvalidArgument("properties must be a nonempty subset of {1, 2, 3}")
        if min(self.tol_p1, self.tol_p2, self.tol_p3) <= 0:
            raise InvalidArgument("tolerances must be positive")


@dataclass
class ClassifyReport:
    family: str
    attempts: list

    @property
    def passed(self):
        return any(a.passed for a in self.attempts)

    @property
    def agreement(self):
        return all(a.agreement for a in self.attempts)

    @property
    def best(self):
        for a in self.attempts:
            if a.passed and a.beta is not None:
                return a
        for a in self.attempts:
            if a.passed:
                return a
        return None

    def to_dict(self):
        best = self.best
        return {
            "family": self.family,
            "pass": self.passed,
            "agreement": self.agreement,
            "best_beta": None if best is None else best.to_dict()["beta"],
            "attempts": [a.to_dict() for a in self.attempts],
        }


def _guard(prop, fail_tol, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (NeflabError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return FitResult(prop, ERROR, tol=fail_tol, message=f"{type(exc).__name__}: {exc}")


def _skipped(prop, tol):
    return FitResult(prop, NA, tol=tol, message="not requested")


def run_properties(fam, beta, config, V=None):
    """P1, P2, P3 at one beta (or quadratic mode)."""
    n = fam.dimension
    beta = _beta_or_none(beta, n)
    V = V or variance_model_of(fam)
    ppa = config.points_per_axis
    try:
        side = resolve_side(fam, beta, ppa)
    except NeflabError as exc:
        err = [FitResult(p, ERROR, message=str(exc)) for p in ("P1", "P2", "P3")]
        return VerdictReport(beta, 1, *err)
    props = set(config.properties)
    p1 = (_guard("P1", config.tol_p1, monge_ampere_fit, fam, beta, tol=config.tol_p1, side=side,
                 points_per_axis=ppa) if 1 in props else _skipped("P1", config.tol_p1))
    p2 = (_guard("P2", config.tol_p2, trace_identity_residual, V, beta, tol=config.tol_p2, side=side,
                 points_per_axis=ppa) if 2 in props else _skipped("P2", config.tol_p2))
    if 3 not in props:
        p3 = _skipped("P3", config.tol_p3)
    elif beta is None:
        p3 = prior_pushforward_check(fam, None, None, tol=config.tol_p3)
    else:
        src = p2 if p2.status in (PASS, FAIL) else p1
        if src.status in (PASS, FAIL):
            omega = OmegaParams(src.a, src.b)
            p3 = _guard("P3", config.tol_p3, prior_pushforward_check, fam, beta, omega,
                        tol=config.tol_p3, side=side, points_per_axis=ppa)
        else:
            p3 = FitResult("P3", ERROR, tol=config.tol_p3, message="no (a, b) available from P1/P2")
    report = VerdictReport(beta, side, p1, p2, p3)
    if report.passed and beta is not None and n == 1 and V.is_polynomial:
        report.ode = match_cubic_to_ode(V.entries[0, 0].coeffs_1d(), beta[0], tol=1e-8)
    return report


def candidate_betas(fam, config, user=()):
    n = fam.dimension
    user = list(user)
    if config.betas != "auto" and config.betas is not None:
        user.extend(config.betas)
    if n == 1:
        V = variance_model_of(fam)
        return [np.array([b]) for b in beta_candidates(V, [np.ravel(u)[0] for u in user])]
    out = [as_vector(u, n) for u in user]
    prov = fam.provenance or {}
    if prov.get("operation") == "cubic-transform" and "beta" in prov:
        out.append(as_vector(prov["beta"], n))
    uniq = []
    for b in out:
        if not any(np.allclose(b, u, rtol=0, atol=1e-10) for u in uniq):
            uniq.append(b)
    return sorted(uniq, key=lambda b: tuple(b))


def classify(fam, config=None, user_betas=()):
    """Quadratic mode, then every beta candidate; pass if any mode passes all checks."""
    config = config or ClassifyConfig()
    V = variance_model_of(fam)
    attempts = [run_properties(fam, None, config, V)]
    for beta in candidate_betas(fam, config, user_betas):
        attempts.append(run_properties(fam, beta, config, V))
    return ClassifyReport(fam.name, attempts)
