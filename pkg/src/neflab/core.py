"""Domain model for natural exponential families.

A family is described by a cumulant function k on its canonical domain,
by a variance function on its mean domain, or by both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domains import DomainSpec
from .errors import InvalidArgument, ValidationError
from .poly import Poly, poly_matrix_eval

MAX_DEGREE = 3
_EPS = np.finfo(float).eps


def as_vector(x, n=None):
    if type(x) is np.ndarray and x.ndim == 1 and x.dtype == np.float64:
        v = x
    else:
        v = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if n is not None and v.size != n:
        raise InvalidArgument(f"expected length {n}, got {v.size}")
    if not np.isfinite(v).all():
        raise InvalidArgument("non-finite coordinates")
    return v


def pairing(theta, x):
    """Duality bracket <theta, x> between E* and E."""
    theta = as_vector(theta)
    x = as_vector(x)
    if theta.size != x.size:
        raise InvalidArgument(f"dimension mismatch: {theta.size} vs {x.size}")
    return float(theta @ x)


def _central(f, x, i, h):
    e = np.zeros_like(x)
    e[i] = h
    return (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)


def numeric_gradient(f, x):
    """Central differences with one Richardson step, h = cbrt(eps) * max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = np.cbrt(_EPS) * max(1.0, abs(x[i]))
        d1 = _central(f, x, i, h)
        d2 = _central(f, x, i, h / 2)
        cols.append((4 * d2 - d1) / 3)
    return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class CumulantFamily:
    dimension: int
    theta_domain: DomainSpec
    k: Callable
    grad_k: Optional[Callable] = None
    hess_k: Optional[Callable] = None
    closed_form: bool = True
    mean_domain: Optional[DomainSpec] = None
    recipe: dict = field(default_factory=dict)
    inverse_grad: Optional[Callable] = None  # psi, when it has a direct route

    def value(self, theta):
        return float(self.k(as_vector(theta, self.dimension)))

    def grad(self, theta):
        theta = as_vector(theta, self.dimension)
        if self.grad_k is not None:
            return np.asarray(self.grad_k(theta), dtype=float).reshape(self.dimension)
        return numeric_gradient(lambda t: self.k(t), theta).reshape(self.dimension)

    def hess(self, theta):
        theta = as_vector(theta, self.dimension)
        n = self.dimension
        if self.hess_k is not None:
            return np.asarray(self.hess_k(theta), dtype=float).reshape(n, n)
        H = numeric_gradient(self.grad, theta).reshape(n, n)
        return 0.5 * (H + H.T)


@dataclass(frozen=True, eq=False)
class VarianceModel:
    dimension: int
    mean_domain: DomainSpec
    entries: Optional[np.ndarray] = None
    evaluator: Optional[Callable] = None

    def __post_init__(self):
        n = self.dimension
        if self.entries is None and self.evaluator is None:
            raise InvalidArgument("variance model needs polynomial entries or an evaluator")
        if self.mean_domain.dimension != n:
            raise InvalidArgument("mean domain dimension mismatch")
        if self.entries is not None:
            E = np.asarray(self.entries, dtype=object)
            if E.shape != (n, n):
                raise InvalidArgument(f"entries must be {n}x{n}")
            for i in range(n):
                for j in range(n):
                    if not isinstance(E[i, j], Poly) or E[i, j].nvars != n:
                        raise InvalidArgument(f"entry ({i},{j}) is not a polynomial in {n} variables")
                    if E[i, j].degree > MAX_DEGREE:
                        raise ValidationError(
                            f"entry ({i},{j}) has degree {E[i, j].degree} > {MAX_DEGREE}"
                        )
            for i in range(n):
                for j in range(i + 1, n):
                    diff = E[i, j] - E[j, i]
                    scale = max(1.0, E[i, j].max_abs_coeff(), E[j, i].max_abs_coeff())
                    if diff.max_abs_coeff() > 1e-12 * scale:
                        raise ValidationError(f"entries ({i},{j}) and ({j},{i}) differ")
            object.__setattr__(self, "entries", E)

    @classmethod
    def from_polys(cls, rows, mean_domain):
        E = np.empty((len(rows), len(rows)), dtype=object)
        for i, row in enumerate(rows):
            for j, p in enumerate(row):
                E[i, j] = p
        return cls(len(rows), mean_domain, entries=E)

    @property
    def is_polynomial(self):
        return self.entries is not None

    @property
    def degree(self):
        if self.entries is None:
            return None
        return max(p.degree for p in self.entries.ravel())

    def __call__(self, m):
        m = as_vector(m, self.dimension)
        if self.entries is not None:
            return poly_matrix_eval(self.entries, m)
        return np.asarray(self.evaluator(m), dtype=float).reshape(self.dimension, self.dimension)

    def derivative(self, m):
        """Array D with D[i, j, l] = dV_ij / dm_l."""
        m = as_vector(m, self.dimension)
        n = self.dimension
        if self.entries is not None:
            D = np.empty((n, n, n))
            for i in range(n):
                for j in range(n):
                    for l in range(n):
                        D[i, j, l] = self.entries[i, j].deriv(l)(m)
            return D
        cols = []
        for l in range(n):
            h = 1e-5 * max(1.0, abs(m[l]))
            cols.append(_central(self.__call__, m, l, h))
        return np.stack(cols, axis=-1)

    def check_positive_definite(self, points_per_axis=7):
        for m in self.mean_domain.grid(points_per_axis):
            V = self(m)
            if np.max(np.abs(V - V.T)) > 1e-10 * max(1.0, np.max(np.abs(V))):
                raise ValidationError(f"V is not symmetric at m={m.tolist()}")
            if np.min(np.linalg.eigvalsh(V)) <= 0:
                raise ValidationError(f"V is not positive definite at m={m.tolist()}")


@dataclass(frozen=True, eq=False)
class FamilyDescriptor:
    name: str
    cumulant: Optional[CumulantFamily] = None
    variance: Optional[VarianceModel] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cumulant is None and self.variance is None:
            raise InvalidArgument("a family needs a cumulant or a variance model")
        if self.cumulant is not None and self.variance is not None:
            if self.cumulant.dimension != self.variance.dimension:
                raise InvalidArgument("cumulant and variance dimensions differ")

    @property
    def dimension(self):
        return (self.cumulant or self.variance).dimension

    @property
    def mean_domain(self):
        if self.variance is not None:
            return self.variance.mean_domain
        if self.cumulant.mean_domain is None:
            raise InvalidArgument(f"family {self.name!r} has no mean domain")
        return self.cumulant.mean_domain

    def check_consistency(self, points_per_axis=5, rtol=1e-7):
        """V(m) = k''(psi(m)) on a small grid when both representations exist."""
        if self.cumulant is None or self.variance is None:
            return
        from .legendre import NewtonConfig, invert_mean_map

        cfg = NewtonConfig()
        for theta in self.cumulant.theta_domain.grid(points_per_axis, shrink=0.1):
            m = self.cumulant.grad(theta)
            if not self.variance.mean_domain.contains(m):
                raise ValidationError(f"k'({theta.tolist()}) lies outside the mean domain")
            H = self.cumulant.hess(invert_mean_map(self, m, cfg))
            V = self.variance(m)
            if np.max(np.abs(H - V)) > rtol * max(1.0, np.max(np.abs(V))):
                raise ValidationError(
                    f"variance model disagrees with the cumulant Hessian at m={m.tolist()}"
                )


def _transform_entries(entries, lin, shift, outer):
    """outer @ [P(lin m + shift)] @ outer^T for an object matrix of Poly."""
    n = entries.shape[0]
    comp = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            comp[i, j] = entries[i, j].compose_affine(lin, shift)
    O = np.asarray(outer, dtype=float).astype(object)
    out = O @ comp @ O.T
    for i in range(n):
        for j in range(n):
            p = out[i, j] if isinstance(out[i, j], Poly) else Poly.const(out[i, j], n)
            out[i, j] = p.prune(1e-14 * max(1.0, p.max_abs_coeff()))
    for i in range(n):
        for j in range(i + 1, n):
            out[j, i] = out[i, j]
    return out


def affine_image(fam, a_map, b_shift):
    """Image of the family under x -> a_map @ x + b_shift."""
    n = fam.dimension
    A = np.atleast_2d(np.asarray(a_map, dtype=float))
    b = as_vector(b_shift, n)
    if A.shape != (n, n):
        raise InvalidArgument(f"a_map must be {n}x{n}")
    if abs(np.linalg.det(A)) < 1e-12 * max(1.0, np.max(np.abs(A))) ** n:
        raise InvalidArgument("a_map is singular")
    if np.array_equal(A, np.eye(n)) and not np.any(b):
        return fam
    Ainv = np.linalg.inv(A)
    inv_shift = -Ainv @ b

    variance = None
    if fam.variance is not None:
        V = fam.variance
        dom = V.mean_domain.affine_preimage(Ainv, inv_shift)
        if V.is_polynomial:
            variance = VarianceModel(n, dom, entries=_transform_entries(V.entries, Ainv, inv_shift, A))
        else:
            ev = V.evaluator
            variance = VarianceModel(n, dom, evaluator=lambda m: A @ ev(Ainv @ m + inv_shift) @ A.T)

    cumulant = None
    if fam.cumulant is not None:
        C = fam.cumulant
        At = A.T
        cumulant = CumulantFamily(
            n,
            C.theta_domain.affine_preimage(At, np.zeros(n)),
            k=lambda t: C.value(At @ t) + t @ b,
            grad_k=lambda t: A @ C.grad(At @ t) + b,
            hess_k=lambda t: A @ C.hess(At @ t) @ At,
            closed_form=C.closed_form,
            mean_domain=None if C.mean_domain is None else C.mean_domain.affine_preimage(Ainv, inv_shift),
            recipe={"kind": "affine", "base": C.recipe, "a_map": A.tolist(), "b_shift": b.tolist()},
        )
    prov = {"base": fam.name, "operation": "affine", "a_map": A.tolist(), "b_shift": b.tolist()}
    return FamilyDescriptor(f"affine({fam.name})", cumulant, variance, prov)


def jorgensen_power(fam, lam):
    """Convolution-power family: V_lam(m) = lam * V(m / lam), k_lam = lam * k."""
    lam = float(lam)
    if not np.isfinite(lam) or lam <= 0:
        raise InvalidArgument("power lambda must be > 0")
    if lam == 1.0:
        return fam
    n = fam.dimension
    scale = np.eye(n) / lam

    variance = None
    if fam.variance is not None:
        V = fam.variance
        dom = V.mean_domain.affine_preimage(scale, np.zeros(n))
        if V.is_polynomial:
            E = np.empty((n, n), dtype=object)
            for i in range(n):
                for j in range(n):
                    E[i, j] = V.entries[i, j].compose_affine(scale, np.zeros(n)) * lam
            variance = VarianceModel(n, dom, entries=E)
        else:
            ev = V.evaluator
            variance = VarianceModel(n, dom, evaluator=lambda m: lam * ev(m / lam))

    cumulant = None
    if fam.cumulant is not None:
        C = fam.cumulant
        cumulant = CumulantFamily(
            n,
            C.theta_domain,
            k=lambda t: lam * C.value(t),
            grad_k=lambda t: lam * C.grad(t),
            hess_k=lambda t: lam * C.hess(t),
            closed_form=C.closed_form,
            mean_domain=None if C.mean_domain is None else C.mean_domain.affine_preimage(scale, np.zeros(n)),
            recipe={"kind": "power", "base": C.recipe, "lam": lam},
        )
    prov = {"base": fam.name, "operation": "power", "lam": lam}
    return FamilyDescriptor(f"power({fam.name},{lam:g})", cumulant, variance, prov)
