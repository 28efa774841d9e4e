"""Simple cubic construction from simple quadratic families.

Variance level:  V(m)  = u (I + m b^T) V1(m / u) (I + b m^T),  u = 1 + <b, m>
Inverse:         V1(M) = w (I - M b^T) V(M / w) (I - b M^T),   w = 1 - <b, M>
Cumulant level:  k_mu(lam) = k_nu(theta) - k0,  lam = theta - b k_nu(theta) - lambda0
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import CumulantFamily, FamilyDescriptor, VarianceModel, as_vector
from .domains import DomainSpec
from .errors import (
    ConvergenceFailure,
    DomainEscape,
    EmptyDomainWarning,
    InvalidArgument,
    SingularityError,
)
from .legendre import NewtonConfig, invert_cumulant, newton_solve
from .poly import Poly, poly_matrix

# base-grid resolution used to seed implicit solves and size windows
_ANCHORS_PER_AXIS = 41


def _beta(beta, n=None):
    b = as_vector(beta, n)
    if not np.any(b):
        raise InvalidArgument("beta must be nonzero")
    return b


@dataclass(frozen=True)
class CubicConstructionParams:
    beta: np.ndarray
    k0: float = 0.0
    lambda0: np.ndarray = None

    def __post_init__(self):
        b = _beta(self.beta)
        object.__setattr__(self, "beta", b)
        lam0 = np.zeros(b.size) if self.lambda0 is None else as_vector(self.lambda0, b.size)
        object.__setattr__(self, "lambda0", lam0)
        object.__setattr__(self, "k0", float(self.k0))

    @property
    def k1(self):
        return -self.k0

    @property
    def theta1(self):
        return -self.lambda0 - self.beta * self.k0


def lam_from_theta(k_nu, theta, params):
    """Forward affine relation: lam = theta - beta k_nu(theta) - lambda0, k_mu = k_nu - k0."""
    return theta - params.beta * k_nu - params.lambda0, k_nu - params.k0


def theta_from_lam(k_mu, lam, params):
    """Inverse relation with k1 = -k0, theta1 = -lambda0 - beta k0."""
    return params.beta * k_mu + lam - params.theta1, k_mu - params.k1


def _window_from_points(pts, n):
    pts = np.asarray(pts).reshape(-1, n)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 1e-9 * np.maximum(1.0, np.abs(hi - lo))
    return np.stack([lo - pad, np.where(hi - lo > 0, hi, lo + 1.0) + pad])


def domain_beta(M, beta, samples_per_axis=101):
    """{m : 1 + <beta, m> > 0 and m / (1 + <beta, m>) in M}."""
    n = M.dimension
    b = _beta(beta, n)
    # window: image of sampled base means with 1 - <b, M> > 0 under M -> M / (1 - <b, M>)
    mesh = np.meshgrid(*M.axes(samples_per_axis, shrink=0.0), indexing="ij")
    base = np.stack([g.ravel() for g in mesh], axis=-1)
    keep = [x for x in base if M.contains(x) and 1.0 - b @ x > 1e-3]
    if keep:
        keep = np.array(keep)
        window = _window_from_points(keep / (1.0 - keep @ b)[:, None], n)
    else:
        warnings.warn(f"domain_beta: no sampled point survives for beta={b.tolist()}", EmptyDomainWarning)
        window = M.window
    if M.kind in ("box", "halfspace"):
        H = M.as_halfspace()
        A = np.vstack([H.A - np.outer(H.b, b), -b[None, :]])
        rhs = np.concatenate([H.b, [1.0]])
        return DomainSpec(n, "halfspace", window, A=A, b=rhs)

    def pred(m):
        u = 1.0 + b @ m
        return u > 0 and M.contains(m / u)

    return DomainSpec(n, "predicate", window, predicate=pred)


def _lin_poly_matrix(n, vec_polys, beta, sign):
    """I + sign * x beta^T as a Poly matrix (x the mean variables)."""
    return poly_matrix(
        [
            [Poly.const(1.0 if i == j else 0.0, n) + sign * beta[j] * vec_polys[i] for j in range(n)]
            for i in range(n)
        ]
    )


def _cleanup(mat, n):
    for i in range(n):
        for j in range(n):
            p = mat[i, j]
            mat[i, j] = p.prune(1e-13 * max(1.0, p.max_abs_coeff()))
    for i in range(n):
        for j in range(i + 1, n):
            avg = 0.5 * (mat[i, j] + mat[j, i])
            mat[i, j] = mat[j, i] = avg
    return mat


def forward_variance(V1, beta):
    """Cubic variance from a simple quadratic one (exact polynomial algebra)."""
    if not V1.is_polynomial:
        raise InvalidArgument("forward_variance needs a polynomial variance model")
    n = V1.dimension
    b = _beta(beta, n)
    if V1.degree > 2:
        raise InvalidArgument(f"base variance has degree {V1.degree} > 2")
    x = [Poly.var(i, n) for i in range(n)]
    Q = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            Q[i, j] = V1.entries[i, j].homogenize_rational(b, 2)
    A = _lin_poly_matrix(n, x, b, +1.0)
    P = A @ Q @ A.T
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            try:
                out[i, j] = P[i, j].divide_linear(b)
            except InvalidArgument as exc:
                raise InvalidArgument(
                    f"composition is not polynomial (base is not simple quadratic): {exc}"
                ) from exc
    return VarianceModel(n, domain_beta(V1.mean_domain, b), entries=_cleanup(out, n))


def inverse_variance(V, beta):
    """Recover the quadratic variance V1 from a cubic one built with the same beta."""
    if not V.is_polynomial:
        raise InvalidArgument("inverse_variance needs a polynomial variance model")
    n = V.dimension
    b = _beta(beta, n)
    x = [Poly.var(i, n) for i in range(n)]
    R = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            R[i, j] = V.entries[i, j].homogenize_rational(-b, 3)
    B = _lin_poly_matrix(n, x, b, -1.0)
    P = B @ R @ B.T
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = P[i, j].divide_linear(-b).divide_linear(-b)
    return VarianceModel(n, domain_beta(V.mean_domain, -b), entries=_cleanup(out, n))


@dataclass(eq=False)
class _ImplicitMap:
    """Solves lam = theta - beta k_nu(theta) - lambda0 for theta."""

    base: CumulantFamily
    params: CubicConstructionParams
    cfg: NewtonConfig = field(default_factory=lambda: NewtonConfig(tol=1e-13))

    def __post_init__(self):
        C = self.base
        b = self.params.beta
        if b.size != C.dimension:
            raise InvalidArgument("beta dimension does not match the base family")
        mesh = np.meshgrid(*C.theta_domain.axes(_ANCHORS_PER_AXIS, shrink=0.0), indexing="ij")
        thetas = np.stack([g.ravel() for g in mesh], axis=-1)
        thetas = np.array([t for t in thetas if self.admissible(t)]).reshape(-1, C.dimension)
        if not len(thetas):
            raise InvalidArgument(
                f"no base parameter with 1 - <beta, k'(theta)> > 0 for beta={b.tolist()}"
            )
        self.anchor_theta = thetas
        self.anchor_lam = np.array([self.lam_of(t) for t in thetas])
        self._cache = {}

    def admissible(self, theta):
        C = self.base
        if not C.theta_domain.contains(theta):
            return False
        g = C.grad(theta)
        return bool(np.all(np.isfinite(g)) and 1.0 - self.params.beta @ g > 0)

    def lam_of(self, theta):
        return lam_from_theta(self.base.value(theta), theta, self.params)[0]

    def solve(self, lam):
        lam = as_vector(lam, self.base.dimension)
        key = lam.tobytes()
        if key in self._cache:
            return self._cache[key]
        C, b = self.base, self.params.beta
        start = self.anchor_theta[np.argmin(np.sum((self.anchor_lam - lam) ** 2, axis=1))]

        def resid(t):
            return self.lam_of(t) - lam

        def jac(t):
            return np.eye(C.dimension) - np.outer(b, C.grad(t))

        theta = newton_solve(resid, jac, start, self.admissible, self.cfg, scale=np.max(np.abs(lam)))
        self.remember(lam, theta)
        return theta

    def remember(self, lam, theta):
        if len(self._cache) > 50000:
            self._cache.clear()
        self._cache[as_vector(lam).tobytes()] = theta

    def contains(self, lam):
        try:
            self.solve(lam)
            return True
        except (ConvergenceFailure, DomainEscape, InvalidArgument):
            return False


def _eval_at_theta(C, params, theta):
    b = params.beta
    M = C.grad(theta)
    w = 1.0 - b @ M
    if not w > 0:
        raise SingularityError(
            f"implicit Jacobian is singular at theta={theta.tolist()} (1 - <beta, k'> = {w:.3e})",
            point=theta,
        )
    m = M / w
    n = C.dimension
    left = np.eye(n) + np.outer(m, b)
    H = left @ C.hess(theta) @ left.T / w
    return C.value(theta) - params.k0, m, 0.5 * (H + H.T)


def transformed_cumulant_eval(base, params, lam, _solver=None):
    """(k_mu(lam), k_mu'(lam), k_mu''(lam)) via the implicit relation."""
    solver = _solver or _ImplicitMap(base, params)
    theta = solver.solve(lam)
    return _eval_at_theta(base, params, theta)


def transformed_cumulant(base, params):
    """CumulantFamily of the cubic transform of ``base``."""
    solver = _ImplicitMap(base, params)
    n = base.dimension
    window = _window_from_points(solver.anchor_lam, n)
    tdom = DomainSpec(n, "predicate", window, predicate=solver.contains)

    def ev(lam):
        return _eval_at_theta(base, params, solver.solve(lam))

    mdom = None if base.mean_domain is None else domain_beta(base.mean_domain, params.beta)

    def psi(m):
        # m = M / (1 - <beta, M>)  <=>  M = m / (1 + <beta, m>)
        u = 1.0 + params.beta @ m
        if not u > 0:
            raise DomainEscape(f"1 + <beta, m> = {u:.3e} <= 0: m={m.tolist()} is not a transformed mean")
        theta = invert_cumulant(base, m / u)
        lam = solver.lam_of(theta)
        solver.remember(lam, theta)
        return lam
    return CumulantFamily(
        n,
        tdom,
        k=lambda t: ev(t)[0],
        grad_k=lambda t: ev(t)[1],
        hess_k=lambda t: ev(t)[2],
        closed_form=base.closed_form,
        mean_domain=mdom,
        inverse_grad=psi,
        recipe={
            "kind": "cubic-transform",
            "base": base.recipe,
            "beta": params.beta.tolist(),
            "k0": params.k0,
            "lambda0": params.lambda0.tolist(),
        },
    )


def transform_family(fam, params):
    """Apply the cubic construction to a whole family descriptor."""
    if not isinstance(params, CubicConstructionParams):
        params = CubicConstructionParams(beta=params)
    variance = None
    if fam.variance is not None and fam.variance.is_polynomial:
        variance = forward_variance(fam.variance, params.beta)
    cumulant = transformed_cumulant(fam.cumulant, params) if fam.cumulant is not None else None
    if variance is None and cumulant is None:
        raise InvalidArgument("transform needs a polynomial variance or a cumulant")
    beta_txt = ",".join(f"{x:g}" for x in params.beta)
    prov = {
        "base": fam.name,
        "operation": "cubic-transform",
        "beta": params.beta.tolist(),
        "k0": params.k0,
        "lambda0": params.lambda0.tolist(),
    }
    return FamilyDescriptor(f"cubic({fam.name};beta={beta_txt})", cumulant, variance, prov)


def inverse_transform_family(fam, beta):
    """Variance-level inverse (the cumulant is not reconstructed)."""
    if fam.variance is None:
        raise InvalidArgument("inverse transform needs a variance model")
    b = _beta(beta, fam.dimension)
    V1 = inverse_variance(fam.variance, b)
    prov = {"base": fam.name, "operation": "cubic-inverse", "beta": b.tolist()}
    return FamilyDescriptor(f"cubic-inverse({fam.name})", None, V1, prov)
