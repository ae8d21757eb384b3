"""Optimal reflection boundaries, HJB verification and comparative statics.

The optimal interval [alpha_star, beta_star] and growth rate lambda_star
solve

    lambda(alpha_star, beta_star, theta) = H_minus(alpha_star, theta)
                                         = H_plus(beta_star, theta),

with alpha_star = Gamma(beta_star), where Gamma maps beta >= beta_plus to
the unique point <= alpha_minus at the same H level.  The root in beta of
g(beta) = lambda(Gamma(beta), beta, theta) - H_plus(beta, theta) is bracketed
by doubling steps from beta_plus and refined by Brent's method; each g
evaluation is one eigenpair solve.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import interpolate, optimize

from .errors import AssumptionError
from .model import (ModelSpec, Side, TurningPoints, as_theta, eval_H,
                    find_turning_points)
from .sturm import EigenSolution, lambda_partials, principal_eigenpair

__all__ = [
    "BoundarySolution",
    "HjbReport",
    "SweepRow",
    "SweepTable",
    "gamma_map",
    "solve_boundaries",
    "reflection_solution",
    "value_gradient",
    "value_hessian",
    "verify_hjb",
    "theta_sweep",
]

logger = logging.getLogger(__name__)


@dataclass
class BoundarySolution:
    """Free boundaries, optimal rate and the eigenpair on the optimal interval."""

    alpha_star: float
    beta_star: float
    lambda_star: float
    eigen: EigenSolution
    residual_alpha: float
    residual_beta: float
    iterations: int
    _wx_spline: object = field(default=None, repr=False, compare=False)

    def interior_gradient_spline(self):
        if self._wx_spline is None:
            wx = self.eigen.log_deriv() / self.eigen.theta
            self._wx_spline = interpolate.CubicSpline(self.eigen.grid, wx)
        return self._wx_spline


@dataclass(frozen=True)
class HjbReport:
    """Worst-case margins and residuals of the HJB branches on a probe grid.

    Margins must be >= -tol and residuals <= tol for a PASS verdict.
    """

    outer_left_margin: float
    outer_right_margin: float
    band_lower_margin: float      # min of (w_x + k_plus) on the interior
    band_upper_margin: float      # min of (k_minus - w_x) on the interior
    riccati_residual: float
    pasting_wx_alpha: float
    pasting_wx_beta: float
    pasting_wxx_alpha: float
    pasting_wxx_beta: float
    tolerance: float
    passed: bool

    def rows(self):
        return [
            ("outer_left_margin", self.outer_left_margin),
            ("outer_right_margin", self.outer_right_margin),
            ("band_lower_margin", self.band_lower_margin),
            ("band_upper_margin", self.band_upper_margin),
            ("riccati_residual", self.riccati_residual),
            ("pasting_wx_alpha", self.pasting_wx_alpha),
            ("pasting_wx_beta", self.pasting_wx_beta),
            ("pasting_wxx_alpha", self.pasting_wxx_alpha),
            ("pasting_wxx_beta", self.pasting_wxx_beta),
        ]


def gamma_map(model: ModelSpec, theta, tp: TurningPoints, beta: float,
              horizon: float = 1e6) -> float:
    """The point Gamma(beta) <= alpha_minus with
    H_minus(Gamma(beta)) = H_plus(beta), for beta >= beta_plus."""
    th = as_theta(theta).theta
    if beta < tp.beta_plus - 1e-12:
        raise ValueError(f"gamma_map requires beta >= beta_plus = {tp.beta_plus}")
    target = float(eval_H(model, th, beta, Side.PLUS))
    am = tp.alpha_minus
    h_am = float(eval_H(model, th, am, Side.MINUS))
    tol = 1e-9 * max(1.0, abs(target))
    if target < h_am - tol:
        raise AssumptionError(
            "h-ass1", f"H_minus(alpha_minus) = {h_am:.6g} exceeds the target level "
            f"H_plus(beta) = {target:.6g}; Gamma(beta) does not exist")
    if target <= h_am + tol:
        return am

    def f(x):
        return float(eval_H(model, th, x, Side.MINUS)) - target

    step = max(1.0, abs(am))
    lo = am - step
    while f(lo) < 0.0:
        step *= 2.0
        lo = am - step
        if step > horizon:
            raise AssumptionError(
                "Hpm-lims", f"H_minus failed to reach level {target:.6g} within "
                f"x >= {am - horizon:.3g}")
    return float(optimize.brentq(f, lo, am, xtol=1e-13, rtol=1e-15))


def solve_boundaries(model: ModelSpec, theta,
                     beta_tol: float = 1e-10,
                     initial_step: float = 0.1,
                     horizon: float = 1e6,
                     grid_size: int = 2001,
                     fd_n: int = 1200) -> BoundarySolution:
    """Unique (alpha_star, beta_star, lambda_star) for the given model and theta."""
    th = as_theta(theta).theta
    tp = find_turning_points(model, th, horizon=horizon)
    bp = tp.beta_plus
    n_eval = 0

    def g(beta: float) -> float:
        nonlocal n_eval
        n_eval += 1
        a = gamma_map(model, th, tp, beta, horizon=horizon)
        # coarse eigen settings suffice during bracketing; Brent tolerance on
        # beta dominates the final residuals
        sol = principal_eigenpair(model, a, beta, th, grid_size=201, fd_n=fd_n)
        return sol.lambda0 - float(eval_H(model, th, beta, Side.PLUS))

    # find a starting point with g > 0 (g diverges as the interval shrinks)
    step = initial_step
    while True:
        b_lo = bp + step
        if b_lo - gamma_map(model, th, tp, b_lo, horizon=horizon) >= 1e-6:
            g_lo = g(b_lo)
            if g_lo > 0.0:
                break
        step *= 0.5
        if step < 1e-6:
            raise AssumptionError(
                "SL-lambda-J", "g(beta) is not positive just above beta_plus; "
                "cannot bracket the free boundary")

    # expand by doubling until the sign change
    b_hi = b_lo
    while True:
        b_hi = bp + 2.0 * (b_hi - bp)
        if b_hi - bp > horizon:
            raise AssumptionError(
                "Hpm-lims", f"g(beta) kept its sign out to beta = beta_plus + {horizon:g}")
        g_hi = g(b_hi)
        if g_hi <= 0.0:
            break
        b_lo = b_hi

    beta_star = float(optimize.brentq(g, b_lo, b_hi, xtol=beta_tol, rtol=1e-15))
    alpha_star = gamma_map(model, th, tp, beta_star, horizon=horizon)
    eigen = principal_eigenpair(model, alpha_star, beta_star, th,
                                grid_size=grid_size, fd_n=fd_n)
    lam = eigen.lambda0
    res_a = abs(float(eval_H(model, th, alpha_star, Side.MINUS)) - lam)
    res_b = abs(float(eval_H(model, th, beta_star, Side.PLUS)) - lam)
    logger.info("solved boundaries: alpha*=%.12g beta*=%.12g lambda*=%.12g "
                "(%d eigen solves)", alpha_star, beta_star, lam, n_eval)
    return BoundarySolution(alpha_star=alpha_star, beta_star=beta_star,
                            lambda_star=lam, eigen=eigen,
                            residual_alpha=res_a, residual_beta=res_b,
                            iterations=n_eval)


def reflection_solution(model: ModelSpec, theta, alpha: float, beta: float,
                        lambda_override: Optional[float] = None,
                        grid_size: int = 2001) -> BoundarySolution:
    """BoundarySolution for an arbitrary reflection interval, e.g. to feed a
    perturbed candidate into :func:`verify_hjb`."""
    th = as_theta(theta).theta
    eigen = principal_eigenpair(model, alpha, beta, th, grid_size=grid_size)
    lam = eigen.lambda0 if lambda_override is None else float(lambda_override)
    res_a = abs(float(eval_H(model, th, alpha, Side.MINUS)) - lam)
    res_b = abs(float(eval_H(model, th, beta, Side.PLUS)) - lam)
    return BoundarySolution(alpha_star=float(alpha), beta_star=float(beta),
                            lambda_star=lam, eigen=eigen,
                            residual_alpha=res_a, residual_beta=res_b,
                            iterations=0)


def value_gradient(sol: BoundarySolution, model: ModelSpec, theta, x):
    """w_x(x): -k_plus left of alpha_star, phi'/(theta phi) inside,
    k_minus right of beta_star.  Vectorised over x."""
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    out = np.empty_like(xs)
    left = xs <= sol.alpha_star
    right = xs >= sol.beta_star
    mid = ~(left | right)
    out[left] = -model.push_cost_up(xs[left])
    out[right] = model.push_cost_down(xs[right])
    if np.any(mid):
        out[mid] = sol.interior_gradient_spline()(xs[mid])
    return float(out[0]) if scalar else out


def _interior_hessian(sol: BoundarySolution, model: ModelSpec, theta, xs):
    """w_xx on the interior via the Riccati ODE rewritten for the
    log-derivative (avoids differentiating the interpolant)."""
    th = as_theta(theta).theta
    wx = sol.interior_gradient_spline()(xs)
    ssq = model.sigma_sq(xs)
    return (2.0 * (sol.lambda_star - model.running_cost(xs)
                   - model.drift(xs) * wx) / ssq - th * wx * wx)


def value_hessian(sol: BoundarySolution, model: ModelSpec, theta, x):
    """w_xx(x): -k_plus' left, ODE-derived value inside, k_minus' right."""
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    out = np.empty_like(xs)
    left = xs <= sol.alpha_star
    right = xs >= sol.beta_star
    mid = ~(left | right)
    out[left] = -model.push_cost_up.d1(xs[left])
    out[right] = model.push_cost_down.d1(xs[right])
    if np.any(mid):
        out[mid] = _interior_hessian(sol, model, theta, xs[mid])
    return float(out[0]) if scalar else out


def verify_hjb(sol: BoundarySolution, model: ModelSpec, theta,
               n_probe: int = 10_000, span_factor: float = 5.0,
               tolerance: float = 1e-6) -> HjbReport:
    """Branch-by-branch check of the HJB equation on a probe grid."""
    th = as_theta(theta).theta
    a, b, lam = sol.alpha_star, sol.beta_star, sol.lambda_star
    width = b - a
    probe = np.linspace(a - span_factor * width, b + span_factor * width, n_probe)

    left = probe[probe <= a]
    right = probe[probe >= b]
    inner = probe[(probe > a) & (probe < b)]

    outer_left = float(np.min(eval_H(model, th, left, Side.MINUS) - lam))
    outer_right = float(np.min(eval_H(model, th, right, Side.PLUS) - lam))

    wx = sol.interior_gradient_spline()(inner)
    band_lower = float(np.min(wx + model.push_cost_up(inner)))
    band_upper = float(np.min(model.push_cost_down(inner) - wx))

    # interior HJB residual with the hessian reconstructed from the stored
    # eigenfunction derivative (independent of the Riccati rewrite)
    spl = sol.interior_gradient_spline()
    wxx = spl.derivative()(inner)
    ssq = model.sigma_sq(inner)
    riccati = float(np.max(np.abs(
        0.5 * ssq * wxx + 0.5 * th * ssq * wx * wx
        + model.drift(inner) * wx + model.running_cost(inner) - lam)))

    wx_a = float(spl(a))
    wx_b = float(spl(b))
    pasting_wx_a = abs(wx_a + model.push_cost_up(a))
    pasting_wx_b = abs(wx_b - model.push_cost_down(b))
    wxx_a = float(_interior_hessian(sol, model, th, np.array([a]))[0])
    wxx_b = float(_interior_hessian(sol, model, th, np.array([b]))[0])
    pasting_wxx_a = abs(wxx_a + model.push_cost_up.d1(a))
    pasting_wxx_b = abs(wxx_b - model.push_cost_down.d1(b))

    margins = (outer_left, outer_right, band_lower, band_upper)
    residuals = (riccati, pasting_wx_a, pasting_wx_b, pasting_wxx_a, pasting_wxx_b)
    passed = all(m >= -tolerance for m in margins) and all(r <= tolerance for r in residuals)
    return HjbReport(outer_left_margin=outer_left, outer_right_margin=outer_right,
                     band_lower_margin=band_lower, band_upper_margin=band_upper,
                     riccati_residual=riccati,
                     pasting_wx_alpha=pasting_wx_a, pasting_wx_beta=pasting_wx_b,
                     pasting_wxx_alpha=pasting_wxx_a, pasting_wxx_beta=pasting_wxx_b,
                     tolerance=tolerance, passed=passed)


@dataclass(frozen=True)
class SweepRow:
    theta: float
    alpha_star: float
    beta_star: float
    lambda_star: float
    dlambda_dtheta: float
    status: str


@dataclass(frozen=True)
class SweepTable:
    rows: tuple

    def to_csv(self, path, fmt: str = "%.17g") -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["theta", "alpha_star", "beta_star", "lambda_star",
                        "dlambda_dtheta", "status"])
            for r in self.rows:
                w.writerow([fmt % r.theta, fmt % r.alpha_star, fmt % r.beta_star,
                            fmt % r.lambda_star, fmt % r.dlambda_dtheta, r.status])


def theta_sweep(model: ModelSpec, thetas: Sequence[float],
                **solver_kwargs) -> SweepTable:
    """Solve the free-boundary problem for each theta; failed rows are marked
    and the sweep continues."""
    ths = [as_theta(t).theta for t in thetas]
    if not ths or any(b <= a for a, b in zip(ths, ths[1:])):
        raise ValueError("thetas must be nonempty and strictly increasing")
    rows = []
    for th in ths:
        try:
            sol = solve_boundaries(model, th, **solver_kwargs)
            _, _, d_theta = lambda_partials(model, sol.alpha_star, sol.beta_star,
                                            th, sol=sol.eigen)
            rows.append(SweepRow(th, sol.alpha_star, sol.beta_star,
                                 sol.lambda_star, d_theta, "ok"))
        except Exception as exc:  # row-level isolation, sweep continues
            logger.warning("sweep row theta=%g failed: %s", th, exc)
            rows.append(SweepRow(th, float("nan"), float("nan"),
                                 float("nan"), float("nan"), f"failed: {exc}"))
    return SweepTable(rows=tuple(rows))
