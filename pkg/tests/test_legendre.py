import numpy as np
import pytest

from neflab import catalog
from neflab.errors import ConvergenceFailure
from neflab.legendre import (
    NewtonConfig,
    cumulant_at_mean,
    invert_grid,
    invert_mean_map,
    newton_solve,
    psi_jacobian,
    variance_at,
)

NORMAL, POISSON, IG = (catalog.build(c) for c in ("normal", "poisson", "inverse-gaussian"))


def scalar(x):
    return float(np.ravel(x)[0])


@pytest.mark.parametrize("m", [-2.0, 0.0, 1.7])
def test_normal_psi_is_identity(m):
    assert scalar(invert_mean_map(NORMAL, [m])) == pytest.approx(m, abs=1e-12)


def test_closed_form_inverses():
    assert scalar(invert_mean_map(POISSON, [2.0])) == pytest.approx(np.log(2.0), abs=1e-12)
    assert scalar(invert_mean_map(IG, [1.0])) == pytest.approx(-0.5, abs=1e-12)


def test_variance_examples():
    assert scalar(variance_at(NORMAL, [0.4])) == pytest.approx(1.0)
    assert scalar(variance_at(POISSON, [3.0])) == pytest.approx(3.0, rel=1e-12)
    assert scalar(variance_at(IG, [2.0])) == pytest.approx(8.0, rel=1e-10)


def test_cumulant_at_mean_examples():
    assert cumulant_at_mean(NORMAL, [0.0]) == pytest.approx(0.0, abs=1e-15)
    assert cumulant_at_mean(POISSON, [2.0]) == pytest.approx(2.0, rel=1e-12)
    assert cumulant_at_mean(IG, [1.0]) == pytest.approx(-1.0, rel=1e-12)


@pytest.mark.parametrize("cid", catalog.CATALOG_IDS)
def test_round_trip_and_monotone_gradient(cid):
    fam = catalog.build(cid)
    C = fam.cumulant
    grid = C.theta_domain.grid(25)
    means = np.array([C.grad(t) for t in grid])
    back = invert_grid(fam, means)
    assert np.max(np.abs(back - grid)) < 1e-9
    for i in range(len(grid) - 1):
        assert (means[i + 1] - means[i]) @ (grid[i + 1] - grid[i]) > 0


def test_product_family_round_trip():
    fam = catalog.product_family([catalog.build("poisson"), catalog.build("gamma")])
    for theta in fam.cumulant.theta_domain.grid(6):
        m = fam.cumulant.grad(theta)
        assert np.allclose(invert_mean_map(fam, m), theta, atol=1e-9)
        J = psi_jacobian(fam, m)
        assert np.allclose(variance_at(fam, m) @ J, np.eye(2), atol=1e-6)


def test_convergence_failure_carries_best_iterate():
    cfg = NewtonConfig(max_iters=3)
    with pytest.raises(ConvergenceFailure) as info:
        newton_solve(lambda x: np.arctan(x) - 1.0, lambda x: np.diag(1 / (1 + x**2)),
                     np.array([30.0]), lambda x: True, cfg)
    assert info.value.best is not None and info.value.residual > 0
