"""Principal eigenpair of the Robin Sturm-Liouville problem on [alpha, beta].

The ODE in self-adjoint form is

    (q u')' + (2 theta q / sigma^2) (h - lambda) q-weighted u = 0,

equivalently (1/2) sigma^2 u'' + b u' + theta (h - lambda) u = 0, with
boundary conditions

    theta k_+(alpha) u(alpha) + u'(alpha) = 0,
    theta k_-(beta)  u(beta)  - u'(beta)  = 0.

The solver brackets the largest eigenvalue with a second-order finite
difference discretisation (Richardson-extrapolated), then refines it by
shooting on (u, q u') and root-finding the beta-side Robin residual.
The returned eigenfunction is zero-free, positive, and normalised so that
int (2 theta q / sigma^2) phi^2 = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, interpolate, linalg, optimize

from .errors import NumericsError
from .model import ModelSpec, Side, as_theta, eval_H

__all__ = [
    "EigenSolution",
    "principal_eigenpair",
    "rayleigh_quotient",
    "lambda_partials",
    "fd_top_eigenvalues",
]

_MIN_INTERVAL = 1e-8


@dataclass(frozen=True)
class EigenSolution:
    """Principal eigenvalue and normalised zero-free eigenfunction."""

    alpha: float
    beta: float
    theta: float
    lambda0: float
    grid: np.ndarray
    phi: np.ndarray
    phi_deriv: np.ndarray

    def log_deriv(self) -> np.ndarray:
        """phi'/phi on the grid (the scaled value gradient)."""
        return self.phi_deriv / self.phi


def _scale_fn(model: ModelSpec, alpha: float, beta: float) -> Callable:
    """Fast q(x) on [alpha, beta]; exact for constant volatility."""
    if model.has_constant_volatility:
        p = model._log_scale_poly()
        return lambda x: np.exp(p(x))
    xs = np.linspace(alpha, beta, 2001)
    f = 2.0 * model.drift(xs) / model.sigma_sq(xs)
    logq = integrate.cumulative_simpson(f, x=xs, initial=0.0) + model.log_scale(alpha)
    spline = interpolate.CubicSpline(xs, logq)
    return lambda x: np.exp(spline(x))


def fd_top_eigenvalues(model: ModelSpec, alpha: float, beta: float, theta,
                       n: int, k: int = 2) -> np.ndarray:
    """Top-k eigenvalues of the second-order finite-difference discretisation.

    Robin conditions are imposed by ghost-node elimination; the boundary rows
    are rescaled so the generalized pencil reduces to a symmetric tridiagonal
    standard problem.  Returns eigenvalues in descending order.
    """
    th = as_theta(theta).theta
    xs = np.linspace(alpha, beta, n + 1)
    dx = (beta - alpha) / n
    qf = _scale_fn(model, alpha, beta)
    q_half = qf(xs[:-1] + 0.5 * dx)            # q at midpoints i+1/2
    q_lo = qf(alpha - 0.5 * dx)                # ghost midpoints
    q_hi = qf(beta + 0.5 * dx)
    w = 2.0 * th * qf(xs) / model.sigma_sq(xs)
    hh = model.running_cost(xs)
    ka = model.push_cost_up(alpha)
    kb = model.push_cost_down(beta)

    diag = np.empty(n + 1)
    off = np.empty(n)
    diag[1:-1] = -(q_half[:-1] + q_half[1:]) / dx**2 + w[1:-1] * hh[1:-1]
    off[1:-1] = q_half[1:-1] / dx**2
    bdiag = w.copy()

    # row 0: ghost u_{-1} = u_1 + 2 dx theta k_+ u_0, rescaled for symmetry
    s0 = q_half[0] / (q_half[0] + q_lo)
    diag[0] = s0 * (-(q_half[0] + q_lo) / dx**2 + 2.0 * th * ka * q_lo / dx
                    + w[0] * hh[0])
    off[0] = s0 * (q_half[0] + q_lo) / dx**2
    bdiag[0] = s0 * w[0]

    # row n: ghost u_{n+1} = u_{n-1} + 2 dx theta k_- u_n
    sn = q_half[-1] / (q_half[-1] + q_hi)
    diag[-1] = sn * (-(q_half[-1] + q_hi) / dx**2 + 2.0 * th * kb * q_hi / dx
                     + w[-1] * hh[-1])
    off[-1] = sn * (q_half[-1] + q_hi) / dx**2
    bdiag[-1] = sn * w[-1]

    # reduce A v = lam B v to symmetric tridiagonal C y = lam y
    r = 1.0 / np.sqrt(bdiag)
    cd = diag * r * r
    ce = off * r[:-1] * r[1:]
    vals = linalg.eigh_tridiagonal(cd, ce, eigvals_only=True, select="i",
                                   select_range=(n + 1 - k, n))
    return vals[::-1]


def _shoot(model: ModelSpec, alpha: float, beta: float, theta: float,
           lam: float, qf: Callable, t_eval=None, rtol: float = 1e-10):
    """Integrate (u, p = q u') from alpha with the alpha-side Robin condition
    built in; return the solve_ivp result."""
    ka = float(model.push_cost_up(alpha))
    y0 = [1.0, -qf(alpha) * theta * ka]

    def rhs(x, y):
        q = qf(x)
        w = 2.0 * theta * q / model.sigma_sq(x)
        return [y[1] / q, -w * (model.running_cost(x) - lam) * y[0]]

    sol = integrate.solve_ivp(rhs, (alpha, beta), y0, method="DOP853",
                              rtol=rtol, atol=1e-13, t_eval=t_eval,
                              dense_output=False)
    if not sol.success:
        raise NumericsError(f"shooting integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise NumericsError("shooting integration overflowed")
    return sol


def principal_eigenpair(model: ModelSpec, alpha: float, beta: float, theta,
                        grid_size: int = 2001, fd_n: int = 1200,
                        rtol: float = 1e-10,
                        max_expand: int = 60) -> EigenSolution:
    """Largest eigenvalue and its zero-free normalised eigenfunction."""
    th = as_theta(theta).theta
    if not alpha < beta:
        raise ValueError(f"need alpha < beta, got [{alpha}, {beta}]")
    if beta - alpha < _MIN_INTERVAL:
        raise ValueError(f"interval length {beta - alpha:.3e} below {_MIN_INTERVAL:g}")

    qf = _scale_fn(model, alpha, beta)
    kb = float(model.push_cost_down(beta))

    # stage 1: bracket via FD eigenvalues, Richardson-extrapolated
    l_coarse = fd_top_eigenvalues(model, alpha, beta, th, fd_n // 2, k=2)
    l_fine = fd_top_eigenvalues(model, alpha, beta, th, fd_n, k=2)
    lam_est = l_fine[0] + (l_fine[0] - l_coarse[0]) / 3.0
    gap = max(l_fine[0] - l_fine[1], 1e-8 * max(1.0, abs(lam_est)))

    def residual(lam: float) -> float:
        s = _shoot(model, alpha, beta, th, lam, qf, rtol=rtol)
        u, p = s.y[0, -1], s.y[1, -1]
        return th * kb * u - p / qf(beta)

    # stage 2: expand a bracket around the estimate until the Robin residual
    # changes sign, then refine
    delta = max(4.0 * abs(l_fine[0] - l_coarse[0]), 1e-10 * max(1.0, abs(lam_est)))
    lo, hi = lam_est - delta, lam_est + delta
    f_lo, f_hi = residual(lo), residual(hi)
    n_expand = 0
    while f_lo * f_hi > 0.0:
        n_expand += 1
        if n_expand > max_expand or hi - lo > 2.0 * gap:
            raise NumericsError(
                f"no sign change of the Robin residual in [{lo:.12g}, {hi:.12g}] "
                f"(FD estimate {lam_est:.12g}, gap {gap:.3g})")
        delta *= 2.0
        lo, hi = lam_est - delta, lam_est + delta
        f_lo, f_hi = residual(lo), residual(hi)
    lam0 = optimize.brentq(residual, lo, hi, xtol=1e-13, rtol=1e-15)

    # final pass on the output grid
    grid = np.linspace(alpha, beta, grid_size)
    s = _shoot(model, alpha, beta, th, lam0, qf, t_eval=grid, rtol=rtol)
    u = s.y[0]
    up = s.y[1] / qf(grid)
    if np.any(u <= 0.0):
        raise NumericsError(
            "refined eigenfunction is not zero-free; the bracket captured a "
            "lower eigenvalue")

    weight = 2.0 * th * qf(grid) / model.sigma_sq(grid)
    norm_sq = integrate.simpson(weight * u * u, x=grid)
    c = 1.0 / np.sqrt(norm_sq)
    return EigenSolution(alpha=float(alpha), beta=float(beta), theta=th,
                         lambda0=float(lam0), grid=grid, phi=c * u,
                         phi_deriv=c * up)


def rayleigh_quotient(model: ModelSpec, sol: EigenSolution) -> float:
    """Boundary-substituted Rayleigh quotient of the stored eigenpair.

    For a true normalised eigenpair this reproduces ``sol.lambda0``.
    """
    th = sol.theta
    qf = _scale_fn(model, sol.alpha, sol.beta)
    q = qf(sol.grid)
    boundary = th * (qf(sol.alpha) * model.push_cost_up(sol.alpha) * sol.phi[0] ** 2
                     + qf(sol.beta) * model.push_cost_down(sol.beta) * sol.phi[-1] ** 2)
    integrand = q * (2.0 * th * model.running_cost(sol.grid)
                     / model.sigma_sq(sol.grid) * sol.phi**2
                     - sol.phi_deriv**2)
    return float(boundary + integrate.simpson(integrand, x=sol.grid))


def lambda_partials(model: ModelSpec, alpha: float, beta: float, theta,
                    sol: Optional[EigenSolution] = None,
                    **solver_kwargs) -> Tuple[float, float, float]:
    """Closed-form partial derivatives of lambda0 w.r.t. (alpha, beta, theta).

    d_alpha = (2 theta q(a)/sigma^2(a)) phi(a)^2 (lambda - H_minus(a)),
    d_beta  = -(2 theta q(b)/sigma^2(b)) phi(b)^2 (lambda - H_plus(b)),
    d_theta = (1/theta) int q (phi')^2.
    """
    th = as_theta(theta).theta
    if sol is None:
        sol = principal_eigenpair(model, alpha, beta, th, **solver_kwargs)
    qf = _scale_fn(model, alpha, beta)
    lam = sol.lambda0
    wa = 2.0 * th * qf(alpha) / model.sigma_sq(alpha)
    wb = 2.0 * th * qf(beta) / model.sigma_sq(beta)
    d_alpha = wa * sol.phi[0] ** 2 * (lam - eval_H(model, th, alpha, Side.MINUS))
    d_beta = -wb * sol.phi[-1] ** 2 * (lam - eval_H(model, th, beta, Side.PLUS))
    d_theta = integrate.simpson(qf(sol.grid) * sol.phi_deriv**2, x=sol.grid) / th
    return float(d_alpha), float(d_beta), float(d_theta)
