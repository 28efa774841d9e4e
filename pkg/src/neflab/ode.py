"""The real cubic variance ODE

    (1 + beta m) V'(m) - 3 beta V(m) = (a + b m)(1 + beta m)

whose solutions are exactly span{u, u^2, u^3} with u = 1 + beta m.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from .errors import InvalidArgument, SingularityError
from .poly import Poly


@dataclass(frozen=True)
class OdeParams:
    beta: float
    a: float = 0.0
    b: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        for name in ("beta", "a", "b", "lam"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.beta == 0.0:
            raise InvalidArgument("beta must be nonzero")


@dataclass(frozen=True)
class OdeSolution:
    params: OdeParams
    coeffs: np.ndarray  # ascending monomial coefficients c0..c3

    @property
    def poly(self):
        return Poly.from_coeffs_1d(self.coeffs)

    def __call__(self, m):
        return np.polynomial.polynomial.polyval(np.asarray(m, dtype=float), self.coeffs)

    def positive_on(self, lo, hi, samples=257):
        m = np.linspace(lo, hi, samples)[1:-1]
        return bool(np.all(self(m) > 0))

    @property
    def is_variance(self):
        """False when V <= 0 everywhere off the singular point, i.e. no interval can host a family."""
        roots = np.roots(self.coeffs[::-1]) if np.any(self.coeffs[1:]) else np.array([])
        cuts = sorted({r.real for r in roots if abs(r.imag) < 1e-12} | {-1.0 / self.params.beta})
        probes = [cuts[0] - 1.0] + [0.5 * (x + y) for x, y in zip(cuts, cuts[1:])] + [cuts[-1] + 1.0]
        return bool(np.any(self(np.array(probes)) > 0))


def _u_power_coeffs(beta, k):
    """Ascending monomial coefficients of (1 + beta m)^k."""
    return np.array([comb(k, j) * beta**j for j in range(k + 1)], dtype=float)


def ode_residual_poly(coeffs, p):
    """Coefficients of (1 + beta m) V' - 3 beta V - (a + b m)(1 + beta m)."""
    P = np.polynomial.polynomial
    V = np.asarray(coeffs, dtype=float)
    u = np.array([1.0, p.beta])
    lhs = P.polysub(P.polymul(u, P.polyder(V)), 3.0 * p.beta * V)
    return P.polysub(lhs, P.polymul([p.a, p.b], u))


def solve_closed_form(p):
    """V = lam u^3 - (b / beta^2) u^2 + ((b - beta a) / (2 beta^2)) u."""
    beta = p.beta
    c = (
        p.lam * _u_power_coeffs(beta, 3)
        + np.pad(-(p.b / beta**2) * _u_power_coeffs(beta, 2), (0, 1))
        + np.pad(((p.b - beta * p.a) / (2 * beta**2)) * _u_power_coeffs(beta, 1), (0, 2))
    )
    res = ode_residual_poly(c, p)
    scale = max(1.0, np.max(np.abs(c)), abs(p.a), abs(p.b))
    if np.max(np.abs(res)) > 1e-12 * scale * max(1.0, abs(beta)) ** 3:
        raise AssertionError(f"closed form does not satisfy the ODE (residual {np.max(np.abs(res)):.3e})")
    return OdeSolution(p, c)


def u_basis_coeffs(coeffs, beta):
    """Re-expand a cubic sum c_k m^k in powers of u = 1 + beta m: returns d_0..d_3."""
    c = np.zeros(4)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size > 4 and np.any(coeffs[4:]):
        raise InvalidArgument("polynomial degree exceeds 3")
    c[: min(4, coeffs.size)] = coeffs[:4]
    # m = (u - 1) / beta
    d = np.zeros(4)
    for k in range(4):
        for j in range(k + 1):
            d[j] += c[k] * comb(k, j) * (-1.0) ** (k - j) / beta**k
    return d


def match_cubic_to_ode(coeffs, beta, tol=1e-10):
    """(lam, a, b) with solve_closed_form reproducing ``coeffs``, or None."""
    beta = float(beta)
    if beta == 0.0:
        raise InvalidArgument("beta must be nonzero")
    if isinstance(coeffs, Poly):
        coeffs = coeffs.coeffs_1d()
    d = u_basis_coeffs(coeffs, beta)
    if abs(d[0]) > tol * max(1.0, np.max(np.abs(d))):
        return None
    b = -(beta**2) * d[2]
    a = (b - 2 * beta**2 * d[1]) / beta
    return OdeParams(beta=beta, a=a, b=b, lam=d[3])


def lam_from_initial(beta, a, b, m0, v0):
    u0 = 1.0 + beta * m0
    if u0 == 0.0:
        raise SingularityError("initial point sits on the singular point m = -1/beta", point=m0)
    A = -b / beta**2
    B = (b - beta * a) / (2 * beta**2)
    return (v0 - A * u0**2 - B * u0) / u0**3


@dataclass(frozen=True)
class Trajectory:
    m: np.ndarray
    v: np.ndarray
    lam: float


def integrate_numeric(beta, a, b, m0, v0, span, max_step_fraction=1.0 / 2048):
    """Classic RK4 on V' = [3 beta V + (a + b m)(1 + beta m)] / (1 + beta m).

    ``span`` is the end point (or (start, end) with start == m0).
    """
    beta, a, b, m0, v0 = map(float, (beta, a, b, m0, v0))
    if beta == 0.0:
        raise InvalidArgument("beta must be nonzero")
    end = float(span[-1]) if np.ndim(span) else float(span)
    if end == m0:
        raise InvalidArgument("empty integration span")
    sing = -1.0 / beta
    if min(m0, end) <= sing <= max(m0, end):
        raise SingularityError(f"span [{m0}, {end}] contains the singular point {sing}", point=sing)

    def rhs(m, v):
        u = 1.0 + beta * m
        return (3.0 * beta * v + (a + b * m) * u) / u

    steps = int(np.ceil(1.0 / max_step_fraction))
    h = (end - m0) / steps
    ms = m0 + h * np.arange(steps + 1)
    vs = np.empty(steps + 1)
    vs[0] = v = v0
    for i in range(steps):
        m = ms[i]
        k1 = rhs(m, v)
        k2 = rhs(m + h / 2, v + h / 2 * k1)
        k3 = rhs(m + h / 2, v + h / 2 * k2)
        k4 = rhs(m + h, v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        vs[i + 1] = v
    return Trajectory(ms, vs, lam_from_initial(beta, a, b, m0, v0))


def closed_form_vs_rk4(beta, a, b, m0, v0, span) -> tuple[float, Optional[Trajectory]]:
    """Sup-error between the RK4 trajectory and the closed form through (m0, v0)."""
    traj = integrate_numeric(beta, a, b, m0, v0, span)
    exact = solve_closed_form(OdeParams(beta, a, b, traj.lam))
    return float(np.max(np.abs(traj.v - exact(traj.m)))), traj
