import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neflab.errors import InvalidArgument, SingularityError
from neflab.ode import (
    OdeParams,
    closed_form_vs_rk4,
    integrate_numeric,
    match_cubic_to_ode,
    ode_residual_poly,
    solve_closed_form,
    u_basis_coeffs,
)

nonzero = st.floats(-3, 3).filter(lambda b: abs(b) > 0.05)
par = st.floats(-3, 3)


def test_solve_examples():
    assert solve_closed_form(OdeParams(1, 0, 0, 1)).coeffs == pytest.approx([1, 3, 3, 1])
    assert solve_closed_form(OdeParams(1, -3, 3, 1)).coeffs == pytest.approx([1, 0, 0, 1])
    neg = solve_closed_form(OdeParams(1, 1, 1, 0))
    assert neg.coeffs == pytest.approx([-1, -2, -1, 0])
    assert not neg.is_variance
    assert solve_closed_form(OdeParams(1, 0, 0, 1)).is_variance
    with pytest.raises(InvalidArgument):
        OdeParams(0.0)


def test_match_examples():
    p = match_cubic_to_ode([1, 3, 3, 1], 1.0)
    assert (p.lam, p.a, p.b) == pytest.approx((1, 0, 0))
    assert match_cubic_to_ode([0, 0, 0, 1], 1.0) is None
    p = match_cubic_to_ode([-8, 12, -6, 1], -0.5)  # (m - 2)^3
    assert (p.lam, p.a, p.b) == pytest.approx((-8, 0, 0))
    assert solve_closed_form(p).coeffs == pytest.approx([-8, 12, -6, 1])
    with pytest.raises(InvalidArgument):
        match_cubic_to_ode([0, 0, 0, 0, 1], 1.0)


def test_integrate_examples():
    m0 = 0.5
    err, _ = closed_form_vs_rk4(1.0, 0.0, 0.0, m0, (1 + m0) ** 3, 3.0)
    assert err < 1e-8
    err, traj = closed_form_vs_rk4(1.0, -3.0, 3.0, m0, m0**3 + 1, 2.5)
    assert err < 1e-8 and np.allclose(traj.v, traj.m**3 + 1, atol=1e-8)
    with pytest.raises(SingularityError):
        integrate_numeric(1.0, 0.0, 0.0, -1.0, 0.0, 1.0)
    with pytest.raises(SingularityError):
        integrate_numeric(1.0, 0.0, 0.0, 0.0, 1.0, -2.0)


@given(nonzero, par, par, par)
def test_closed_form_residual(beta, a, b, lam):
    sol = solve_closed_form(OdeParams(beta, a, b, lam))
    u = np.array([1.0, beta])
    P = np.polynomial.polynomial
    m = np.linspace(-2, 2, 100)
    resid = (P.polyval(m, u) * P.polyval(m, P.polyder(sol.coeffs)) - 3 * beta * sol(m)
             - (a + b * m) * P.polyval(m, u))
    assert np.max(np.abs(resid)) < 1e-10 * max(1, np.max(np.abs(sol(m))), abs(a), abs(b)) * max(1, abs(beta))
    assert np.max(np.abs(ode_residual_poly(sol.coeffs, sol.params))) < 1e-10 * max(1, abs(a), abs(b), abs(lam))


@given(nonzero, par, par, par)
def test_match_recovers_parameters(beta, a, b, lam):
    sol = solve_closed_form(OdeParams(beta, a, b, lam))
    p = match_cubic_to_ode(sol.coeffs, beta)
    scale = max(1, abs(a), abs(b), abs(lam)) / min(1, abs(beta)) ** 3
    assert p is not None
    assert abs(p.a - a) < 1e-9 * scale and abs(p.b - b) < 1e-9 * scale and abs(p.lam - lam) < 1e-9 * scale


@given(nonzero, st.lists(par, min_size=4, max_size=4), st.floats(0.1, 3))
def test_constant_component_obstruction(beta, d, c0):
    # cubic with a nonzero (1 + beta m)^0 component is never an ODE solution for that beta
    d = np.array([c0] + d[1:])
    from math import comb

    coeffs = np.zeros(4)
    for k in range(4):  # sum d_k (1 + beta m)^k
        for j in range(k + 1):
            coeffs[j] += d[k] * comb(k, j) * beta**j
    assert u_basis_coeffs(coeffs, beta)[0] == pytest.approx(c0, abs=1e-8 * max(1, np.max(np.abs(d))))
    assert match_cubic_to_ode(coeffs, beta) is None


@given(nonzero, par, par, st.floats(0.05, 1.0), st.floats(0.1, 3.0))
def test_rk4_matches_closed_form(beta, a, b, dist, v0):
    m0 = -1 / beta + (dist if beta > 0 else -dist)
    end = m0 + (1.0 if beta > 0 else -1.0)
    err, traj = closed_form_vs_rk4(beta, a, b, m0, v0, end)
    assert err < 1e-8 * max(1.0, np.max(np.abs(traj.v)))
