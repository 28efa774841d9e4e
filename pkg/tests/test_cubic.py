import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import support
from neflab import catalog
from neflab.core import VarianceModel
from neflab.cubic import (
    CubicConstructionParams,
    domain_beta,
    forward_variance,
    inverse_variance,
    lam_from_theta,
    theta_from_lam,
    transform_family,
    transformed_cumulant_eval,
)
from neflab.domains import DomainSpec
from neflab.errors import EmptyDomainWarning, InvalidArgument
from neflab.poly import Poly

NORMAL, POISSON = catalog.build("normal"), catalog.build("poisson")
POISSON2 = catalog.product_family([POISSON, POISSON])


def coeffs(V):
    return V.entries[0, 0].coeffs_1d()


def test_forward_examples():
    assert coeffs(forward_variance(NORMAL.variance, 1.0)) == pytest.approx([1, 3, 3, 1])
    assert coeffs(forward_variance(POISSON.variance, 1.0)) == pytest.approx([0, 1, 2, 1])


def test_forward_product_poisson_against_formula(rng):
    b = np.array([1.0, 0.0])
    V = forward_variance(POISSON2.variance, b)
    assert V.degree <= 3
    for _ in range(20):
        m = rng.uniform(0.1, 5.0, size=2)
        u = 1 + b @ m
        A = np.eye(2) + np.outer(m, b)
        direct = u * A @ np.diag(m / u) @ A.T
        assert np.allclose(V(m), direct, rtol=1e-12)


def test_inverse_examples():
    assert coeffs(inverse_variance(forward_variance(NORMAL.variance, 1.0), 1.0)) == pytest.approx([1.0])
    V1 = inverse_variance(forward_variance(POISSON.variance, 1.0), 1.0)
    assert coeffs(V1) == pytest.approx([0.0, 1.0])


def test_forward_rejects_bad_input():
    x = Poly.var(0, 1)
    dom = DomainSpec.box([0.0], [np.inf], [[0.0], [1.0]])
    with pytest.raises(InvalidArgument):
        forward_variance(VarianceModel.from_polys([[x**3]], dom), 1.0)
    with pytest.raises(InvalidArgument):
        forward_variance(POISSON.variance, 0.0)


@given(st.integers(0, 10_000), st.sampled_from([1, 2]))
def test_round_trip_and_degrees(seed, n):
    rng = np.random.default_rng(seed)
    V1 = support.random_simple_quadratic(rng, n)
    b = support.random_beta(rng, n)
    V = forward_variance(V1, b)
    assert V.degree <= 3
    back = inverse_variance(V, b)
    assert back.degree <= 2
    gap, scale = support.coeff_gap(V1.entries, back.entries)
    assert gap < 1e-12 * scale


@given(st.integers(0, 10_000), st.sampled_from([1, 2, 3]))
def test_det_factor(seed, n):
    rng = np.random.default_rng(seed)
    m, b = rng.normal(size=n), rng.normal(size=n)
    assert np.linalg.det(np.eye(n) + np.outer(m, b)) == pytest.approx(1 + b @ m, abs=1e-12 * (1 + abs(b @ m)))


def test_determinant_identity_on_grid():
    for V1, b in ((POISSON.variance, np.array([1.0])), (POISSON2.variance, np.array([1.0, 0.5]))):
        n = V1.dimension
        V = forward_variance(V1, b)
        for m in V.mean_domain.grid(9):
            u = 1 + b @ m
            lhs = np.linalg.det(V(m))
            rhs = u ** (n + 2) * np.linalg.det(V1(m / u))
            assert lhs == pytest.approx(rhs, rel=1e-9)


def test_domain_beta_examples():
    d = domain_beta(NORMAL.mean_domain, np.array([1.0]))
    assert d.contains([-0.9]) and not d.contains([-1.1])
    d = domain_beta(POISSON.mean_domain, np.array([1.0]))
    assert d.contains([0.01]) and not d.contains([-0.01]) and not d.contains([-2.0])
    binom = catalog.build("binomial", {"N": 2})
    d = domain_beta(binom.mean_domain, np.array([1.0]))
    for m in (-0.5, 0.5, 10.0, 1e6):
        assert d.contains([m]) == (m > -1 and 0 < m / (1 + m) < 2)


def test_domain_beta_empty_warns():
    dom = DomainSpec.box([2.0], [3.0], [[2.0], [3.0]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        domain_beta(dom, np.array([1.0]))
    assert any(issubclass(w.category, EmptyDomainWarning) for w in caught)


def test_origin_fixed_point():
    for beta in (0.5, -2.0):
        k, g, _ = transformed_cumulant_eval(NORMAL.cumulant, CubicConstructionParams(beta), np.array([0.0]))
        assert k == pytest.approx(0.0, abs=1e-14) and g[0] == pytest.approx(0.0, abs=1e-12)


def test_cumulant_variance_coherence():
    fam = transform_family(POISSON, 1.0)
    C = fam.cumulant
    for m in np.linspace(0.2, 6.0, 10):
        lam = C.inverse_grad(np.array([m]))
        k, g, H = transformed_cumulant_eval(POISSON.cumulant, CubicConstructionParams(1.0), lam)
        assert g[0] == pytest.approx(m, rel=1e-10)
        assert H[0, 0] == pytest.approx(m * (1 + m) ** 2, rel=1e-7)


def test_cumulant_variance_coherence_2d():
    b = np.array([1.0, 0.0])
    fam = transform_family(POISSON2, b)
    for m in fam.mean_domain.grid(4, shrink=0.2):
        lam = fam.cumulant.inverse_grad(m)
        assert np.allclose(fam.cumulant.grad(lam), m, rtol=1e-10)
        assert np.allclose(fam.cumulant.hess(lam), fam.variance(m), rtol=1e-7)


def test_inverse_relations_compose(rng):
    params = CubicConstructionParams(0.7, k0=0.3, lambda0=[-0.2])
    kn = POISSON.cumulant
    for _ in range(10):
        theta = np.array([rng.uniform(-3, -0.5)])
        lam, k_mu = lam_from_theta(kn.value(theta), theta, params)
        theta_back, k_back = theta_from_lam(k_mu, lam, params)
        assert np.allclose(theta_back, theta, atol=1e-12)
        assert k_back == pytest.approx(kn.value(theta), abs=1e-9)
    assert params.k1 == pytest.approx(-0.3)
    assert params.theta1 == pytest.approx(0.2 - 0.7 * 0.3)


def test_implicit_solve_matches_forward_map():
    params = CubicConstructionParams(1.0, k0=0.1, lambda0=[0.2])
    fam = transform_family(POISSON, params)
    theta = np.array([-1.3])
    lam = lam_from_theta(POISSON.cumulant.value(theta), theta, params)[0]
    assert fam.cumulant.value(lam) == pytest.approx(np.exp(-1.3) - 0.1, rel=1e-12)
