"""Shared generators for tests (plain module, imported by test files)."""

import numpy as np

from neflab.core import VarianceModel
from neflab.domains import DomainSpec
from neflab.poly import Poly


def random_simple_quadratic(rng, n):
    """V1(M) = c M M^T + sum_k M_k S_k + S_0 with symmetric S_k (degree <= 2).

    The quadratic part proportional to M M^T is what keeps the cubic
    construction polynomial for n >= 2; in n = 1 every quadratic qualifies.
    """
    x = [Poly.var(i, n) for i in range(n)]
    c = rng.uniform(-1, 1)
    mats = []
    for _ in range(n + 1):
        S = rng.uniform(-1, 1, size=(n, n))
        mats.append(S + S.T)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            p = c * x[i] * x[j] + Poly.const(mats[0][i, j], n)
            for k in range(n):
                p = p + mats[k + 1][i, j] * x[k]
            row.append(p)
        rows.append(row)
    dom = DomainSpec.box(np.full(n, -np.inf), np.full(n, np.inf), np.array([np.full(n, -1.0), np.full(n, 1.0)]))
    return VarianceModel.from_polys(rows, dom)


def random_beta(rng, n):
    b = rng.uniform(-2, 2, size=n)
    b[np.abs(b) < 0.1] = 0.5
    return b


def coeff_gap(A, B):
    """Max coefficient difference between two Poly matrices, and the coefficient scale."""
    n = A.shape[0]
    gap = max((A[i, j] - B[i, j]).max_abs_coeff() for i in range(n) for j in range(n))
    scale = max(max(A[i, j].max_abs_coeff(), 1.0) for i in range(n) for j in range(n))
    return gap, scale
