"""Sparse multivariate polynomials keyed by exponent multi-index.

Coefficients are plain floats. Matrices of polynomials are numpy object
arrays, so ``A @ B`` works through the operator overloads below.
"""

from __future__ import annotations

import itertools
from numbers import Real

import numpy as np

from .errors import InvalidArgument


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars, terms=None):
        self.nvars = int(nvars)
        clean = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars or any(e < 0 for e in exp):
                raise InvalidArgument(f"bad exponent {exp} for {self.nvars} variables")
            c = float(c)
            if c != 0.0:
                clean[exp] = clean.get(exp, 0.0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0.0}

    @classmethod
    def const(cls, c, nvars):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, i, nvars):
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): 1.0})

    @classmethod
    def linear(cls, coeffs, const=0.0):
        """const + sum_i coeffs[i] * x_i"""
        coeffs = np.asarray(coeffs, dtype=float)
        n = coeffs.size
        p = cls.const(const, n)
        for i, c in enumerate(coeffs):
            p = p + c * cls.var(i, n)
        return p

    @classmethod
    def from_coeffs_1d(cls, coeffs):
        """Univariate polynomial from ascending coefficients c0, c1, ..."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    def coeffs_1d(self, length=None):
        if self.nvars != 1:
            raise InvalidArgument("coeffs_1d needs a univariate polynomial")
        deg = max(self.degree, 0)
        out = np.zeros(max(deg + 1, length or 0))
        for (k,), c in self.terms.items():
            out[k] = c
        return out

    @property
    def degree(self):
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.terms.values())

    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise InvalidArgument("polynomials in different numbers of variables")
            return other
        if isinstance(other, (Real, np.floating, np.integer)):
            return Poly.const(float(other), self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Poly(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = {}
        for (e1, c1), (e2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            terms[e] = terms.get(e, 0.0) + c1 * c2
        return Poly(self.nvars, terms)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Poly):
            raise InvalidArgument("use divide_linear for polynomial division")
        return self * (1.0 / float(scalar))

    def __pow__(self, k):
        out = Poly.const(1.0, self.nvars)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return False
        return self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        parts = []
        for e, c in sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0])):
            mono = "*".join(
                f"m{i}" if k == 1 else f"m{i}^{k}" for i, k in enumerate(e) if k
            )
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return "Poly(" + " + ".join(parts) + ")"

    def __call__(self, x):
        """Evaluate at points ``x`` of shape (..., nvars)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.nvars,):
            raise InvalidArgument(f"expected trailing dimension {self.nvars}, got {x.shape}")
        out = np.zeros(x.shape[:-1])
        for e, c in self.terms.items():
            out = out + c * np.prod(x ** np.asarray(e, dtype=float), axis=-1)
        return out

    def deriv(self, i):
        terms = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            d = list(e)
            d[i] -= 1
            terms[tuple(d)] = terms.get(tuple(d), 0.0) + c * e[i]
        return Poly(self.nvars, terms)

    def homogeneous_part(self, d):
        return Poly(self.nvars, {e: c for e, c in self.terms.items() if sum(e) == d})

    def prune(self, tol):
        return Poly(self.nvars, {e: c for e, c in self.terms.items() if abs(c) > tol})

    def max_abs_coeff(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def compose(self, subs):
        """Substitute polynomial ``subs[i]`` for variable i."""
        if len(subs) != self.nvars:
            raise InvalidArgument("need one substitution per variable")
        target = subs[0].nvars if subs else 0
        out = Poly(target)
        powers = [dict() for _ in subs]
        for e, c in self.terms.items():
            term = Poly.const(c, target)
            for i, k in enumerate(e):
                if k:
                    if k not in powers[i]:
                        powers[i][k] = subs[i] ** k
                    term = term * powers[i][k]
            out = out + term
        return out

    def compose_affine(self, lin, shift):
        """Return the polynomial x -> P(lin @ x + shift)."""
        lin = np.atleast_2d(np.asarray(lin, dtype=float))
        shift = np.asarray(shift, dtype=float).reshape(-1)
        subs = [Poly.linear(lin[i], shift[i]) for i in range(self.nvars)]
        return self.compose(subs)

    def homogenize_rational(self, lin, degree):
        """Clear denominators in P(x / u) where u = 1 + <lin, x>.

        Returns Q with Q(x) = u(x)**degree * P(x / u(x)); requires
        degree >= deg P.
        """
        if self.degree > degree:
            raise InvalidArgument(f"degree {self.degree} exceeds homogenization degree {degree}")
        u = Poly.linear(lin, 1.0)
        out = Poly(self.nvars)
        for e, c in self.terms.items():
            mono = Poly(self.nvars, {e: c})
            out = out + mono * u ** (degree - sum(e))
        return out

    def divide_linear(self, lin, tol=1e-9):
        """Exact division by u = 1 + <lin, x>.

        Solves Q_d = P_d - l * Q_{d-1} degree by degree and raises if the
        remainder is not zero to relative tolerance ``tol``.
        """
        if not np.any(lin):
            return self + Poly(self.nvars)
        ell = Poly.linear(lin, 0.0)
        deg = self.degree
        if deg <= 0:
            if self.is_zero():
                return Poly(self.nvars)
            raise InvalidArgument("constant polynomial is not divisible by 1 + <l, x>")
        q_parts = []
        prev = Poly(self.nvars)
        for d in range(deg):
            cur = self.homogeneous_part(d) - ell * prev
            q_parts.append(cur)
            prev = cur
        remainder = self.homogeneous_part(deg) - ell * prev
        scale = max(self.max_abs_coeff(), 1.0)
        if remainder.max_abs_coeff() > tol * scale:
            raise InvalidArgument(
                f"not divisible by 1 + <l, x>: remainder {remainder.max_abs_coeff():.3e}"
            )
        out = Poly(self.nvars)
        for part in q_parts:
            out = out + part
        return out


def poly_matrix_eval(mat, x):
    """Evaluate an (r, c) object array of Poly at points (..., n)."""
    x = np.asarray(x, dtype=float)
    r, c = mat.shape
    out = np.empty(x.shape[:-1] + (r, c))
    for i in range(r):
        for j in range(c):
            out[..., i, j] = mat[i, j](x)
    return out


def poly_matrix(rows):
    arr = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for j, p in enumerate(row):
            arr[i, j] = p
    return arr


def identity_poly_matrix(n):
    return poly_matrix(
        [[Poly.const(1.0 if i == j else 0.0, n) for j in range(n)] for i in range(n)]
    )
