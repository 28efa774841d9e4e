import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neflab import catalog, cubic
from neflab.errors import InvalidArgument
from neflab.priors import (
    PI,
    PI_STAR,
    PI_TILDE,
    OmegaParams,
    PriorSpec,
    QuadratureConfig,
    log_density,
    log_normalizer,
    normalizer,
    omega_contains,
    param_map,
    pushforward_log_density,
    pushforward_mass_check,
)

NORMAL, POISSON, IG = (catalog.build(c) for c in ("normal", "poisson", "inverse-gaussian"))


def test_log_density_examples():
    spec = PriorSpec(PI, 1.0, [0.0])
    for th in (-1.0, 0.5):
        assert log_density(spec, NORMAL, [th]) == pytest.approx(-th * th / 2)
    assert log_density(PriorSpec(PI_STAR, 2.0, [1.0]), POISSON, [1.0]) == pytest.approx(-2.0)
    star = log_density(PriorSpec(PI_STAR, 2.0, [1.0]), POISSON, [0.0 + 1e-300])
    assert np.isfinite(star)


def test_tilde_equals_star_where_u_is_one():
    # at m = 0 the correction -(n+2) log|1 + beta m| vanishes
    t, m0 = 1.5, [0.4]
    a = log_density(PriorSpec(PI_TILDE, t, m0, beta=[2.0]), NORMAL, [0.0])
    b = log_density(PriorSpec(PI_STAR, t, m0), NORMAL, [0.0])
    assert a == pytest.approx(b, abs=1e-14)


def test_outside_support_is_minus_inf():
    assert log_density(PriorSpec(PI_STAR, 1.0, [1.0]), POISSON, [-1.0]) == -math.inf
    assert log_density(PriorSpec(PI, 1.0, [1.0]), IG, [0.5]) == -math.inf
    assert log_density(PriorSpec(PI_TILDE, 1.0, [1.0], beta=[-1.0]), POISSON, [2.0]) == -math.inf


def test_prior_spec_validation():
    with pytest.raises(InvalidArgument):
        PriorSpec(PI, 0.0, [1.0])
    with pytest.raises(InvalidArgument):
        PriorSpec(PI_TILDE, 1.0, [1.0])
    with pytest.raises(InvalidArgument):
        PriorSpec("PI_HAT", 1.0, [1.0])


@pytest.mark.parametrize("t,m0", [(1.0, 0.0), (2.5, 0.7), (0.6, -1.2)])
def test_normal_normalizer(t, m0):
    mass = math.sqrt(2 * math.pi / t) * math.exp(t * m0 * m0 / 2)
    assert normalizer(PriorSpec(PI, t, [m0]), NORMAL) == pytest.approx(1 / mass, rel=1e-8)


def test_poisson_normalizer_gamma_oracle():
    # int exp(t(m0 theta - e^theta)) dtheta = Gamma(t m0) / t^(t m0)
    t, m0 = 2.0, 1.5
    expect = math.lgamma(t * m0) - t * m0 * math.log(t)
    assert -log_normalizer(PriorSpec(PI, t, [m0]), POISSON) == pytest.approx(expect, rel=1e-9)


def test_two_dimensional_gaussian_normalizer():
    fam = catalog.product_family([NORMAL, NORMAL])
    t, m0 = 1.3, np.array([0.2, -0.4])
    expect = math.log(2 * math.pi / t) + t * (m0 @ m0) / 2
    assert -log_normalizer(PriorSpec(PI, t, m0), fam) == pytest.approx(expect, rel=1e-8)


def test_pushforward_examples():
    assert pushforward_log_density(POISSON, 1.0, [1.0], [1.0]) == pytest.approx(-1.0, abs=1e-12)
    assert pushforward_log_density(IG, 1.0, [1.0], [1.0]) == pytest.approx(0.5, abs=1e-12)
    for m in (-1.0, 0.0, 2.0):
        star = log_density(PriorSpec(PI_STAR, 2.0, [0.3]), NORMAL, [m])
        assert pushforward_log_density(NORMAL, 2.0, [0.3], [m]) == pytest.approx(star, abs=1e-12)


@pytest.mark.parametrize("fam,t,m0", [(POISSON, 2.0, [1.5]), (IG, 3.0, [1.0]), (NORMAL, 1.0, [0.5])])
def test_pushforward_mass_conservation(fam, t, m0):
    quad = QuadratureConfig()
    th, mm = pushforward_mass_check(fam, t, m0, quad)
    assert abs(math.exp(th - mm) - 1) < 2 * quad.rel_tol


def test_omega_examples():
    dom = POISSON.mean_domain
    zero = OmegaParams([0.0], 0.0)
    assert omega_contains(zero, 1.0, [1.0], dom) and not omega_contains(zero, 1.0, [-1.0], dom)
    assert not omega_contains(OmegaParams([0.0], 1.0), 0.5, [1.0], dom)
    assert omega_contains(OmegaParams([1.0], 1.0), 2.0, [0.0], dom)


def test_param_map_examples():
    zero = OmegaParams([0.0], 0.0)
    for d in ("psi-side", "kprime-side"):
        t1, m1 = param_map(d, 2.0, [0.7], zero)
        assert t1 == 2.0 and m1[0] == 0.7
    t1, m1 = param_map("kprime-side", 2.0, [1.0], OmegaParams([1.0], 1.0))
    assert t1 == pytest.approx(3.0) and m1[0] == pytest.approx(1 / 3)
    p = OmegaParams([1.0], 1.0)
    t1, m1 = param_map("psi-side", 5.0, [2.0], p)
    assert param_map("kprime-side", t1, m1, p)[0] == pytest.approx(5.0)
    assert param_map("kprime-side", t1, m1, p)[1][0] == pytest.approx(2.0)
    with pytest.raises(InvalidArgument):
        param_map("psi-side", 0.5, [1.0], p)


@given(
    st.floats(0.1, 20), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5)
)
def test_param_map_round_trip(t, m0a, m0b, a, b):
    p = OmegaParams([a, -a], b)
    if not t - b > 1e-3:
        return
    m0 = np.array([m0a, m0b])
    t1, m1 = param_map("psi-side", t, m0, p)
    t2, m2 = param_map("kprime-side", t1, m1, p)
    assert abs(t2 - t) < 1e-12 * max(1, t)
    assert np.max(np.abs(m2 - m0)) < 1e-12 * max(1, np.max(np.abs(m0)), abs(a) / (t - b))


def test_tilde_matches_pushforward_for_cube():
    fam = cubic.transform_family(NORMAL, 1.0)  # V = (1 + m)^3
    zero = OmegaParams([0.0], 0.0)
    grid = np.linspace(-0.8, 4.0, 25)
    for t, m0 in ((1.0, 0.5), (2.0, 1.0), (3.0, -0.3), (5.0, 2.0), (8.0, 0.0)):
        t1, m1 = param_map("kprime-side", t, [m0], zero)
        tilde = PriorSpec(PI_TILDE, t1, m1, beta=[1.0])
        D = [pushforward_log_density(fam, t, [m0], [m]) - log_density(tilde, fam, [m]) for m in grid]
        assert np.ptp(D) < 1e-6
