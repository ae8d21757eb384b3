import numpy as np
import pytest
from scipy import integrate

from ergodic_riskctl import (ModelSpec, eval_H, lambda_partials,
                             principal_eigenpair, rayleigh_quotient,
                             scale_density)
from ergodic_riskctl.model import Side
from ergodic_riskctl.sturm import fd_top_eigenvalues

import fd_oracle


def test_neumann_constant_cost_limit():
    # k_+ = k_- = 0 turns the Robin conditions into Neumann ones and a
    # constant running cost h0 makes the constant function an eigenfunction
    # with lambda0 = h0 (outside the cost assumptions, valid for the solver).
    h0 = 0.37
    m = ModelSpec.custom_poly(b=[0.1, -0.5], sigma=[1.0], h=[h0],
                              k_plus=[0.0], k_minus=[0.0])
    sol = principal_eigenpair(m, -1.0, 1.0, theta=2.0)
    assert sol.lambda0 == pytest.approx(h0, abs=1e-10)
    assert np.allclose(sol.phi_deriv, 0.0, atol=1e-8)
    assert np.allclose(sol.phi, sol.phi[0], rtol=1e-10)
    assert rayleigh_quotient(m, sol) == pytest.approx(h0, abs=1e-8)


def test_matches_independent_dense_oracle(bm):
    sol = principal_eigenpair(bm, -1.0, 1.0, theta=1.0)
    oracle = fd_oracle.richardson_eigenvalue(bm, -1.0, 1.0, 1.0, n=600)
    assert sol.lambda0 == pytest.approx(oracle, abs=1e-5)


def test_oracle_dominance_and_gap(bm):
    # shooting matches the oracle's top eigenvalue and exceeds its second
    sol = principal_eigenpair(bm, -1.0, 1.0, theta=1.0)
    top2 = fd_top_eigenvalues(bm, -1.0, 1.0, 1.0, n=2000, k=2)
    assert top2[0] > top2[1]  # simple eigenvalue
    assert sol.lambda0 == pytest.approx(top2[0], abs=1e-4)
    assert sol.lambda0 > top2[1] + 0.1


def test_eigenfunction_invariants(ou_shifted):
    th = 0.8
    sol = principal_eigenpair(ou_shifted, -2.1, 1.9, theta=th)
    m = ou_shifted
    assert np.all(sol.phi > 0.0)
    assert sol.grid[0] == -2.1 and sol.grid[-1] == 1.9
    # normalization int (2 theta q / sigma^2) phi^2 = 1
    q = scale_density(m, sol.grid)
    weight = 2.0 * th * q / m.sigma_sq(sol.grid)
    norm = integrate.simpson(weight * sol.phi**2, x=sol.grid)
    assert norm == pytest.approx(1.0, rel=1e-8)
    # Robin boundary residuals
    scale = max(1.0, sol.phi[0], sol.phi[-1])
    res_a = th * m.push_cost_up(-2.1) * sol.phi[0] + sol.phi_deriv[0]
    res_b = th * m.push_cost_down(1.9) * sol.phi[-1] - sol.phi_deriv[-1]
    assert abs(res_a) <= 1e-8 * scale
    assert abs(res_b) <= 1e-8 * scale


def test_ode_residual_on_grid(bm):
    sol = principal_eigenpair(bm, -1.0, 1.0, theta=1.0, grid_size=4001)
    x, phi = sol.grid, sol.phi
    dx = x[1] - x[0]
    d2 = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / dx**2
    resid = (0.5 * bm.sigma_sq(x[1:-1]) * d2 + bm.drift(x[1:-1]) * sol.phi_deriv[1:-1]
             + sol.theta * (bm.running_cost(x[1:-1]) - sol.lambda0) * phi[1:-1])
    scale = max(1.0, np.max(np.abs(sol.theta * (bm.running_cost(x) - sol.lambda0) * phi)))
    assert np.max(np.abs(resid)) / scale <= 1e-6


def test_grid_refinement_second_order(bm):
    lams = [fd_top_eigenvalues(bm, -1.0, 1.0, 1.0, n=n, k=1)[0]
            for n in (250, 500, 1000, 2000)]
    gaps = np.abs(np.diff(lams))
    ratios = gaps[:-1] / gaps[1:]
    assert np.all(ratios > 3.5)  # second-order scheme: ratio -> 4


def test_rayleigh_identity(bm):
    sol = principal_eigenpair(bm, -1.0, 1.0, theta=1.0)
    assert rayleigh_quotient(bm, sol) == pytest.approx(sol.lambda0, abs=1e-6)


def test_invalid_interval(bm):
    with pytest.raises(ValueError):
        principal_eigenpair(bm, 1.0, -1.0, theta=1.0)
    with pytest.raises(ValueError):
        principal_eigenpair(bm, 0.0, 1e-9, theta=1.0)


def test_partials_match_finite_differences(bm):
    a, b, th = -1.0, 1.0, 1.0
    da, db, dth = lambda_partials(bm, a, b, th)
    eps = 1e-4

    def lam(aa, bb, tt):
        return principal_eigenpair(bm, aa, bb, tt).lambda0

    fd_a = (lam(a + eps, b, th) - lam(a - eps, b, th)) / (2 * eps)
    fd_b = (lam(a, b + eps, th) - lam(a, b - eps, th)) / (2 * eps)
    fd_t = (lam(a, b, th + eps) - lam(a, b, th - eps)) / (2 * eps)
    assert da == pytest.approx(fd_a, rel=1e-4)
    assert db == pytest.approx(fd_b, rel=1e-4)
    assert dth == pytest.approx(fd_t, rel=1e-4)
    assert dth > 0.0


def test_partials_symmetry_and_formula(bm):
    # reflection symmetry of the symmetric preset: d_alpha = -d_beta
    da, db, dth = lambda_partials(bm, -1.3, 1.3, 0.7)
    assert da == pytest.approx(-db, rel=1e-8)
    assert dth > 0.0
    # the closed forms evaluated by hand from the eigenpair
    sol = principal_eigenpair(bm, -1.3, 1.3, 0.7)
    w = 2.0 * 0.7 / bm.sigma_sq(-1.3)  # q = 1 for the driftless preset
    expect_da = w * sol.phi[0] ** 2 * (sol.lambda0
                                       - eval_H(bm, 0.7, -1.3, Side.MINUS))
    assert da == pytest.approx(expect_da, rel=1e-10)
