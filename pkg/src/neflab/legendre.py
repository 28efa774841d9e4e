"""Convex duality: invert the mean map and evaluate in mean coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_vector
from .errors import ConvergenceFailure, DomainEscape, InvalidArgument


@dataclass(frozen=True)
class NewtonConfig:
    max_iters: int = 100
    tol: float = 1e-12
    damping: float = 0.5
    max_halvings: int = 40
    init_strategy: str = "domain-center"

    def __post_init__(self):
        if self.tol <= 0 or self.max_iters < 1 or not 0 < self.damping < 1:
            raise InvalidArgument("NewtonConfig needs tol > 0, max_iters >= 1, damping in (0, 1)")
        if self.init_strategy not in ("domain-center", "user-supplied", "continuation-from-neighbor"):
            raise InvalidArgument(f"unknown init strategy {self.init_strategy!r}")


def newton_solve(residual, jacobian, x0, inside, cfg, scale=1.0):
    """Damped Newton for residual(x) = 0 keeping ``inside(x)`` true.

    Converges when ||residual||_inf <= cfg.tol * max(1, scale). Each step is
    shrunk by ``cfg.damping`` until the iterate is inside and the residual
    norm decreases.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _newton(residual, jacobian, x0, inside, cfg, scale)


def _newton(residual, jacobian, x0, inside, cfg, scale):
    x = np.array(x0, dtype=float)
    if not inside(x):
        raise DomainEscape(f"starting point {x.tolist()} is outside the domain")
    r = np.atleast_1d(residual(x))
    target = cfg.tol * max(1.0, scale)
    for _ in range(cfg.max_iters):
        rnorm = np.max(np.abs(r))
        if rnorm <= target:
            return x
        J = np.atleast_2d(jacobian(x))
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure("singular Jacobian", best=x, residual=rnorm) from exc
        t = 1.0
        for _ in range(cfg.max_halvings):
            cand = x + t * step
            if inside(cand):
                rc = np.atleast_1d(residual(cand))
                if np.all(np.isfinite(rc)) and np.linalg.norm(rc) < np.linalg.norm(r):
                    break
            t *= cfg.damping
        else:
            if rnorm <= 1e3 * target:
                # rounding floor: no representable step reduces the residual further
                return x
            raise DomainEscape(
                f"backtracking exhausted at x={x.tolist()} (residual {rnorm:.3e})"
            )
        x, r = cand, rc
    rnorm = np.max(np.abs(r))
    if rnorm <= target:
        return x
    raise ConvergenceFailure("Newton did not converge", best=x, residual=rnorm)


def _require_cumulant(fam):
    if fam.cumulant is None:
        raise InvalidArgument(f"family {fam.name!r} has no cumulant function")
    return fam.cumulant


def invert_mean_map(fam, m, cfg=None, theta0=None):
    """psi(m): the canonical parameter with k'(theta) = m."""
    return invert_cumulant(_require_cumulant(fam), m, cfg, theta0)


def invert_cumulant(C, m, cfg=None, theta0=None):
    """Newton on k'(theta) = m, or the family's own inverse when it provides one."""
    cfg = cfg or NewtonConfig()
    m = as_vector(m, C.dimension)
    if C.inverse_grad is not None:
        return as_vector(C.inverse_grad(m), C.dimension)
    dom = C.theta_domain
    if theta0 is None:
        theta0 = dom.interior_point()
    return newton_solve(
        lambda t: C.grad(t) - m,
        C.hess,
        theta0,
        dom.contains,
        cfg,
        scale=np.max(np.abs(m)),
    )


def invert_grid(fam, means, cfg=None):
    """psi over a sequence of means, warm-starting each solve from the previous one."""
    cfg = cfg or NewtonConfig()
    out = []
    prev = None
    for m in np.asarray(means, dtype=float).reshape(len(means), -1):
        try:
            theta = invert_mean_map(fam, m, cfg, theta0=prev)
        except (ConvergenceFailure, DomainEscape):
            if prev is None:
                raise
            theta = invert_mean_map(fam, m, cfg)
        out.append(theta)
        prev = theta
    return np.array(out)


def variance_at(fam, m, cfg=None):
    """V(m) = k''(psi(m)); falls back to the variance model when there is no cumulant."""
    if fam.cumulant is None:
        return fam.variance(m)
    return fam.cumulant.hess(invert_mean_map(fam, m, cfg))


def cumulant_at_mean(fam, m, cfg=None):
    """k(psi(m))."""
    return fam.cumulant.value(invert_mean_map(fam, m, cfg))


def psi_jacobian(fam, m, cfg=None):
    """Central-difference Jacobian of psi with h = 1e-5 * max(1, |m_i|)."""
    m = as_vector(m, fam.dimension)
    cfg = cfg or NewtonConfig()
    base = invert_mean_map(fam, m, cfg)
    cols = []
    for i in range(m.size):
        h = 1e-5 * max(1.0, abs(m[i]))
        e = np.zeros_like(m)
        e[i] = h
        plus = invert_mean_map(fam, m + e, cfg, theta0=base)
        minus = invert_mean_map(fam, m - e, cfg, theta0=base)
        cols.append((plus - minus) / (2 * h))
    return np.stack(cols, axis=-1)
