"""Open domains in R^n with an explicit finite sampling window.

Three representations: axis boxes (bounds may be infinite), strict
half-space intersections ``A x < b``, and arbitrary predicates. Every
domain carries ``window``, a finite box used for grids and quadrature;
membership never depends on the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument, ParseError


def _as_window(window, n):
    w = np.asarray(window, dtype=float).reshape(2, n)
    if not np.all(np.isfinite(w)) or np.any(w[0] >= w[1]):
        raise InvalidArgument(f"window must be finite with lo < hi, got {w.tolist()}")
    return w


@dataclass(frozen=True, eq=False)
class DomainSpec:
    dimension: int
    kind: str
    window: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    predicate: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        n = self.dimension
        object.__setattr__(self, "window", _as_window(self.window, n))
        if self.kind == "box":
            lo = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, float)
            hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, float)
            if lo.shape != (n,) or hi.shape != (n,) or np.any(lo >= hi):
                raise InvalidArgument("box bounds must have length n with lower < upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "halfspace":
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            b = np.asarray(self.b, dtype=float).reshape(-1)
            if A.shape != (b.size, n):
                raise InvalidArgument("halfspace A must be (rows, n) matching b")
            object.__setattr__(self, "A", A)
            object.__setattr__(self, "b", b)
        elif self.kind == "predicate":
            if self.predicate is None:
                raise InvalidArgument("predicate domain needs a predicate")
        else:
            raise InvalidArgument(f"unknown domain kind {self.kind!r}")

    @classmethod
    def box(cls, lower, upper, window):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls(lower.size, "box", window, lower=lower, upper=upper)

    @classmethod
    def real_line(cls, window):
        return cls.box([-np.inf], [np.inf], window)

    def contains(self, x):
        if type(x) is not np.ndarray or x.ndim != 1 or x.dtype != np.float64:
            x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dimension or not np.isfinite(x).all():
            return False
        if self.kind == "box":
            return bool((x > self.lower).all() and (x < self.upper).all())
        if self.kind == "halfspace":
            return bool((self.A @ x < self.b).all())
        return bool(self.predicate(x))

    def contains_many(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dimension)
        return np.array([self.contains(p) for p in pts], dtype=bool)

    def axes(self, points_per_axis=25, shrink=0.05):
        lo, hi = self.window
        pad = shrink * (hi - lo)
        return [np.linspace(l + p, h - p, points_per_axis) for l, h, p in zip(lo, hi, pad)]

    def grid(self, points_per_axis=25, shrink=0.05, extra=None):
        """Tensor grid over the shrunk window, keeping only members.

        ``extra`` is an optional further membership predicate.
        """
        mesh = np.meshgrid(*self.axes(points_per_axis, shrink), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        keep = [p for p in pts if self.contains(p) and (extra is None or extra(p))]
        return np.array(keep).reshape(-1, self.dimension)

    def extent(self):
        """Best known per-axis (lo, hi) of the domain itself, possibly infinite."""
        if self.kind == "box":
            return self.lower.copy(), self.upper.copy()
        if self.kind == "halfspace" and self.dimension == 1:
            lo, hi = -np.inf, np.inf
            for a, b in zip(self.A[:, 0], self.b):
                if a > 0:
                    hi = min(hi, b / a)
                elif a < 0:
                    lo = max(lo, b / a)
                elif b <= 0:
                    return np.array([0.0]), np.array([0.0])
            return np.array([lo]), np.array([hi])
        return self.window[0].copy(), self.window[1].copy()

    def interior_point(self):
        center = self.window.mean(axis=0)
        if self.contains(center):
            return center
        for ppa in (5, 11, 25):
            pts = self.grid(ppa, shrink=0.0)
            if len(pts):
                return pts[len(pts) // 2]
        raise InvalidArgument("no interior point found inside the sampling window")

    def with_window(self, window):
        return replace(self, window=window)

    def affine_preimage(self, lin, shift):
        """Domain {x : lin @ x + shift in self}; ``lin`` must be invertible."""
        n = self.dimension
        L = np.atleast_2d(np.asarray(lin, dtype=float)).reshape(n, n)
        c = np.asarray(shift, dtype=float).reshape(n)
        if abs(np.linalg.det(L)) < 1e-300:
            raise InvalidArgument("affine map is singular")
        Linv = np.linalg.inv(L)
        corners = np.array(np.meshgrid(*self.window.T, indexing="ij")).reshape(n, -1).T
        mapped = (corners - c) @ Linv.T
        window = np.stack([mapped.min(axis=0), mapped.max(axis=0)])
        if self.kind == "box":
            if np.allclose(L, np.diag(np.diag(L))):
                d = np.diag(L)
                lo = (self.lower - c) / d
                hi = (self.upper - c) / d
                return DomainSpec.box(np.minimum(lo, hi), np.maximum(lo, hi), window)
            return self.as_halfspace().affine_preimage(L, c)
        if self.kind == "halfspace":
            return DomainSpec(n, "halfspace", window, A=self.A @ L, b=self.b - self.A @ c)
        pred = self.predicate
        return DomainSpec(n, "predicate", window, predicate=lambda x: pred(L @ x + c))

    def as_halfspace(self):
        if self.kind == "halfspace":
            return self
        if self.kind != "box":
            raise InvalidArgument("predicate domains have no half-space form")
        rows, rhs = [], []
        for i in range(self.dimension):
            e = np.zeros(self.dimension)
            e[i] = 1.0
            if np.isfinite(self.upper[i]):
                rows.append(e)
                rhs.append(self.upper[i])
            if np.isfinite(self.lower[i]):
                rows.append(-e)
                rhs.append(-self.lower[i])
        if not rows:
            rows, rhs = [np.zeros(self.dimension)], [1.0]
        return DomainSpec(self.dimension, "halfspace", self.window, A=np.array(rows), b=np.array(rhs))

    def to_json(self):
        def fin(v):
            return [None if not np.isfinite(x) else float(x) for x in v]

        out = {"kind": self.kind, "window": self.window.tolist()}
        if self.kind == "box":
            out["lower"] = fin(self.lower)
            out["upper"] = fin(self.upper)
        elif self.kind == "halfspace":
            out["A"] = self.A.tolist()
            out["b"] = self.b.tolist()
        else:
            raise InvalidArgument("predicate domains are not serializable")
        return out

    @classmethod
    def from_json(cls, obj, dimension, path=()):
        try:
            kind = obj["kind"]
            window = obj["window"]
            if kind == "box":
                lower = [-np.inf if v is None else v for v in obj["lower"]]
                upper = [np.inf if v is None else v for v in obj["upper"]]
                dom = cls(dimension, "box", window, lower=np.array(lower, float), upper=np.array(upper, float))
            elif kind == "halfspace":
                dom = cls(dimension, "halfspace", window, A=obj["A"], b=obj["b"])
            else:
                raise ParseError(f"unsupported domain kind {kind!r}", path + ("kind",))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed domain: {exc}", path) from exc
        return dom
