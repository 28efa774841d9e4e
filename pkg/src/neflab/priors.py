"""Conjugate-type prior families on canonical and mean parameters.

PI        on theta:  t (<m0, theta> - k(theta))
PI_STAR   on m:      t (<m0, psi(m)> - k(psi(m)))
PI_TILDE  on m:      PI_STAR - (n + 2) log|1 + <beta, m>|

All densities are unnormalized log-densities; normalizers come from
quadrature carried out in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_vector
from .domains import DomainSpec
from .errors import InvalidArgument, NonNormalizable, NumericalError
from .legendre import NewtonConfig, invert_mean_map

PI, PI_STAR, PI_TILDE = "PI", "PI_STAR", "PI_TILDE"
TAGS = (PI, PI_STAR, PI_TILDE)


@dataclass(frozen=True)
class PriorSpec:
    family_tag: str
    t: float
    m0: np.ndarray
    beta: Optional[np.ndarray] = None
    side: int = 1

    def __post_init__(self):
        if self.family_tag not in TAGS:
            raise InvalidArgument(f"family tag must be one of {TAGS}")
        if not (np.isfinite(self.t) and self.t > 0):
            raise InvalidArgument("t must be > 0")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "m0", as_vector(self.m0))
        if self.family_tag == PI_TILDE:
            if self.beta is None or not np.any(self.beta):
                raise InvalidArgument("PI_TILDE needs a nonzero beta")
            object.__setattr__(self, "beta", as_vector(self.beta, self.m0.size))
        if self.side not in (1, -1):
            raise InvalidArgument("side must be +1 or -1")

    def check(self, fam):
        if self.m0.size != fam.dimension:
            raise InvalidArgument("m0 dimension does not match the family")
        if not fam.mean_domain.contains(self.m0):
            raise InvalidArgument(f"m0={self.m0.tolist()} is not in the mean domain")


@dataclass(frozen=True)
class QuadratureConfig:
    points_per_axis: int = 16
    rel_tol: float = 1e-9
    max_doublings: int = 14
    panels: int = 32

    def __post_init__(self):
        if self.points_per_axis < 8 or not self.rel_tol > 0:
            raise InvalidArgument("quadrature needs points_per_axis >= 8 and rel_tol > 0")

    def scheme(self, n):
        return "adaptive-simpson" if n == 1 else "tensor-gauss-legendre"


@dataclass(frozen=True)
class OmegaParams:
    a: np.ndarray
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", as_vector(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", float(self.c))


def tilde_domain(mean_domain, beta, side=1):
    """M intersected with {side * (1 + <beta, m>) > 0}."""
    n = mean_domain.dimension
    beta = as_vector(beta, n)
    if mean_domain.kind in ("box", "halfspace"):
        H = mean_domain.as_halfspace()
        A = np.vstack([H.A, -side * beta[None, :]])
        b = np.concatenate([H.b, [float(side)]])
        dom = DomainSpec(n, "halfspace", mean_domain.window, A=A, b=b)
        if n == 1:
            lo, hi = dom.extent()
            wlo = max(mean_domain.window[0, 0], lo[0]) if np.isfinite(lo[0]) else mean_domain.window[0, 0]
            whi = min(mean_domain.window[1, 0], hi[0]) if np.isfinite(hi[0]) else mean_domain.window[1, 0]
            if whi > wlo:
                dom = dom.with_window([[wlo], [whi]])
            elif np.isfinite(lo[0]) and np.isfinite(hi[0]) and hi[0] > lo[0]:
                dom = dom.with_window([[lo[0]], [hi[0]]])
            elif np.isfinite(lo[0]) and hi[0] > lo[0]:
                dom = dom.with_window([[lo[0]], [lo[0] + mean_domain.window[1, 0] - mean_domain.window[0, 0]]])
        return dom
    return DomainSpec(
        n, "predicate", mean_domain.window,
        predicate=lambda m: mean_domain.contains(m) and side * (1.0 + beta @ m) > 0,
    )


def prior_domain(spec, fam):
    if spec.family_tag == PI:
        return fam.cumulant.theta_domain
    if spec.family_tag == PI_STAR:
        return fam.mean_domain
    return tilde_domain(fam.mean_domain, spec.beta, spec.side)


class _PsiCache:
    """psi with warm starts from the previous solution (quadrature sweeps are local)."""

    def __init__(self, fam, cfg=None):
        self.fam = fam
        self.cfg = cfg or NewtonConfig()
        self.prev = None

    def __call__(self, m):
        try:
            theta = invert_mean_map(self.fam, m, self.cfg, theta0=self.prev)
        except NumericalError:
            if self.prev is None:
                raise
            theta = invert_mean_map(self.fam, m, self.cfg)
        self.prev = theta
        return theta


def _star_value(fam, t, m0, theta):
    C = fam.cumulant
    return t * (m0 @ theta - C.value(theta))


def log_density(spec, fam, point, psi=None):
    """Unnormalized log-density; -inf outside the support."""
    x = as_vector(point, fam.dimension)
    if spec.family_tag == PI:
        if not fam.cumulant.theta_domain.contains(x):
            return -np.inf
        return _star_value(fam, spec.t, spec.m0, x)
    if not fam.mean_domain.contains(x):
        return -np.inf
    if spec.family_tag == PI_TILDE:
        u = 1.0 + spec.beta @ x
        if not spec.side * u > 0:
            return -np.inf
    theta = (psi or _PsiCache(fam))(x)
    val = _star_value(fam, spec.t, spec.m0, theta)
    if spec.family_tag == PI_TILDE:
        val -= (fam.dimension + 2) * np.log(abs(u))
    return val


def pushforward_log_density(fam, t, m0, m, psi=None):
    """Image of PI_{t, m0} under the mean map, unnormalized: PI_STAR - log det V."""
    m = as_vector(m, fam.dimension)
    if not fam.mean_domain.contains(m):
        return -np.inf
    theta = (psi or _PsiCache(fam))(m)
    sign, logdet = np.linalg.slogdet(fam.cumulant.hess(theta))
    if sign <= 0:
        raise NumericalError(f"variance is not positive definite at m={m.tolist()}")
    return _star_value(fam, float(t), as_vector(m0, fam.dimension), theta) - logdet


# --- quadrature --------------------------------------------------------------


def _simpson(fa, fm, fb, a, b):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, eps, max_depth=48, min_depth=3):
    """Adaptive Simpson with Richardson correction and absolute tolerance ``eps``."""
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    total = 0.0
    stack = [(a, b, fa, fm, fb, _simpson(fa, fm, fb, a, b), eps, 0)]
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = _simpson(fa, flm, fm, a, m)
        right = _simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth >= max_depth or (depth >= min_depth and abs(delta) <= 15.0 * tol):
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, flm, fm, left, tol / 2, depth + 1))
            stack.append((m, b, fm, frm, fb, right, tol / 2, depth + 1))
    return total


def _integrate_1d(f, a, b, quad):
    edges = np.linspace(a, b, quad.panels + 1)
    rough = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        rough += _simpson(f(lo), f(0.5 * (lo + hi)), f(hi), lo, hi)
    eps = quad.rel_tol * max(abs(rough), 1e-300) / quad.panels
    return sum(adaptive_simpson(f, lo, hi, eps) for lo, hi in zip(edges[:-1], edges[1:]))


def _gauss_box(f, lo, hi, quad, panels):
    n = lo.size
    x, w = np.polynomial.legendre.leggauss(quad.points_per_axis)
    nodes, weights = [], []
    for i in range(n):
        edges = np.linspace(lo[i], hi[i], panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    mesh = np.meshgrid(*nodes, indexing="ij")
    wmesh = np.meshgrid(*weights, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    wts = np.prod(np.stack([g.ravel() for g in wmesh], axis=-1), axis=-1)
    return float(sum(wi * f(p) for p, wi in zip(pts, wts)))


def _peak(logf, domain, lo, hi):
    axes = [np.linspace(l, h, 41) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    vals = [logf(p) for p in pts if domain.contains(p)]
    vals = [v for v in vals if np.isfinite(v)]
    if not vals:
        raise InvalidArgument("log-density is -inf on the whole sampling window")
    return max(vals)


def integrate_log_density(logf, domain, quad=None):
    """log of the integral of exp(logf) over ``domain``.

    Integrates over the window clipped to the known extent; infinite sides
    are extended by doubling until the added shell carries less than
    rel_tol of the mass.
    """
    quad = quad or QuadratureConfig()
    n = domain.dimension
    ext_lo, ext_hi = domain.extent()
    lo = np.where(np.isfinite(ext_lo), ext_lo, domain.window[0])
    hi = np.where(np.isfinite(ext_hi), ext_hi, domain.window[1])
    open_lo, open_hi = ~np.isfinite(ext_lo), ~np.isfinite(ext_hi)

    # reference level from a generous sample so exp() stays bounded
    width = hi - lo
    peak = _peak(logf, domain, np.where(open_lo, lo - width, lo), np.where(open_hi, hi + width, hi))

    def f(x):
        x = np.atleast_1d(x)
        if not domain.contains(x):
            return 0.0
        v = logf(x)
        return float(np.exp(v - peak)) if np.isfinite(v) else 0.0

    if n == 1:
        f1 = lambda s: f(np.array([s]))  # noqa: E731
        mass = _integrate_1d(f1, lo[0], hi[0], quad)
        for side, is_open in (("lo", open_lo[0]), ("hi", open_hi[0])):
            if not is_open:
                continue
            step = hi[0] - lo[0]
            edge = lo[0] if side == "lo" else hi[0]
            prev_shell = np.inf
            for _ in range(quad.max_doublings):
                a, b = (edge - step, edge) if side == "lo" else (edge, edge + step)
                shell = _integrate_1d(f1, a, b, quad)
                mass += shell
                edge = a if side == "lo" else b
                if shell < quad.rel_tol * mass:
                    break
                if shell > 2 * prev_shell:
                    raise NonNormalizable(f"tail mass grows on the {side} side")
                prev_shell = shell
                step *= 2
            else:
                raise NonNormalizable(f"tail on the {side} side does not decay")
    else:
        def box_mass(blo, bhi):
            prev, panels = None, 2
            while panels <= 64:
                val = _gauss_box(f, blo, bhi, quad, panels)
                if prev is not None and abs(val - prev) <= quad.rel_tol * max(abs(val), 1e-300):
                    return val
                prev, panels = val, panels * 2
            return val

        mass = box_mass(lo, hi)
        for _ in range(quad.max_doublings):
            if not (open_lo.any() or open_hi.any()):
                break
            w = hi - lo
            lo = np.where(open_lo, lo - w / 2, lo)
            hi = np.where(open_hi, hi + w / 2, hi)
            bigger = box_mass(lo, hi)
            grew = bigger - mass
            mass = bigger
            if abs(grew) < quad.rel_tol * mass:
                break
        else:
            raise NonNormalizable("mass keeps growing as the box expands")
    if not mass > 0:
        raise NonNormalizable("zero or negative mass")
    return float(np.log(mass) + peak)


def log_normalizer(spec, fam, quad=None):
    """log C with C * integral(exp(log_density)) = 1."""
    spec.check(fam)
    dom = prior_domain(spec, fam)
    psi = _PsiCache(fam)
    return -integrate_log_density(lambda x: log_density(spec, fam, x, psi=psi), dom, quad)


def normalizer(spec, fam, quad=None):
    return float(np.exp(log_normalizer(spec, fam, quad)))


def pushforward_mass_check(fam, t, m0, quad=None):
    """(log mass of PI over theta, log mass of its mean-map image over M)."""
    quad = quad or QuadratureConfig()
    spec = PriorSpec(PI, t, m0)
    spec.check(fam)
    theta_mass = integrate_log_density(
        lambda x: log_density(spec, fam, x), fam.cumulant.theta_domain, quad
    )
    psi = _PsiCache(fam)
    mean_mass = integrate_log_density(
        lambda m: pushforward_log_density(fam, t, m0, m, psi=psi), fam.mean_domain, quad
    )
    return theta_mass, mean_mass


def omega_contains(p, t, m0, mean_domain):
    """(t, m0) in Omega = {t > b, (t m0 + a) / (t - b) in M}."""
    if not t > p.b:
        return False
    m0 = as_vector(m0)
    return mean_domain.contains((t * m0 + p.a) / (t - p.b))


def param_map(direction, t, m0, p):
    """Hyperparameter maps between PI and PI_TILDE.

    psi-side:    (t - b, (t m0 + a) / (t - b))
    kprime-side: (t + b, (t m0 - a) / (t + b))
    """
    m0 = as_vector(m0)
    if direction == "psi-side":
        t1 = t - p.b
        if not t1 > 0:
            raise InvalidArgument(f"psi-side map needs t > b (t={t}, b={p.b})")
        return t1, (t * m0 + p.a) / t1
    if direction == "kprime-side":
        t1 = t + p.b
        if not t1 > 0:
            raise InvalidArgument(f"kprime-side map needs t + b > 0 (t={t}, b={p.b})")
        return t1, (t * m0 - p.a) / t1
    raise InvalidArgument(f"unknown direction {direction!r}")
