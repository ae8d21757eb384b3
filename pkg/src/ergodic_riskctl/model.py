"""Problem data: diffusion coefficients, cost functions and derived quantities.

The controlled diffusion is dX = b(X) dt + dxi + sigma(X) dW with running
cost h(X) and proportional push costs k_plus (upward) / k_minus (downward).
All coefficient fields are polynomials, so every derivative the solver needs
is exact.  The module also evaluates the two switching functions

    H_minus(x, theta) = theta/2 sigma^2 k_+^2 - sigma^2/2 k_+' - b k_+ + h
    H_plus (x, theta) = theta/2 sigma^2 k_-^2 + sigma^2/2 k_-' + b k_- + h

whose negative regions locate the turning points, and the scale density
q(x) = exp(int_0^x 2b/sigma^2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize

from .errors import AssumptionError, InvalidModelError, NumericsError

__all__ = [
    "Side",
    "PolyField",
    "RiskParam",
    "ModelSpec",
    "TurningPoints",
    "eval_H",
    "find_turning_points",
    "scale_density",
]


class Side(enum.Enum):
    MINUS = "minus"
    PLUS = "plus"


@dataclass(frozen=True)
class PolyField:
    """A polynomial coefficient field with exact derivatives."""

    poly: Polynomial

    @classmethod
    def from_coef(cls, coef: Sequence[float]) -> "PolyField":
        return cls(Polynomial(np.asarray(coef, dtype=float)))

    @classmethod
    def constant(cls, value: float) -> "PolyField":
        return cls.from_coef([float(value)])

    def __call__(self, x):
        return self.poly(x)

    def d1(self, x):
        return self.poly.deriv(1)(x)

    def d2(self, x):
        return self.poly.deriv(2)(x)

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.poly.coef == 0.0))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.poly.coef[1:] == 0.0)) if self.poly.coef.size > 1 else True

    def coefficients(self) -> list:
        return [float(c) for c in self.poly.coef]


@dataclass(frozen=True)
class RiskParam:
    """Risk-sensitivity parameter theta > 0 (dimensionless)."""

    theta: float

    def __post_init__(self):
        if not (self.theta > 0.0 and math.isfinite(self.theta)):
            raise ValueError(f"theta must be positive and finite, got {self.theta}")


def as_theta(theta) -> RiskParam:
    return theta if isinstance(theta, RiskParam) else RiskParam(float(theta))


@dataclass(frozen=True)
class TurningPoints:
    """Endpoints of the negative regions of H_minus and H_plus.

    When H never dips below zero on a side, the two points on that side
    coincide at the minimiser of H on that side.
    """

    alpha_minus: float
    alpha_plus: float
    beta_minus: float
    beta_plus: float

    def __post_init__(self):
        if self.alpha_minus > self.alpha_plus or self.beta_minus > self.beta_plus:
            raise ValueError("turning points must satisfy alpha_minus <= alpha_plus, "
                             "beta_minus <= beta_plus")


@dataclass(frozen=True)
class ModelSpec:
    """Diffusion and cost data for the control problem.

    Use the classmethod constructors (:meth:`ou_quadratic`,
    :meth:`bm_quadratic`, :meth:`custom_poly`) rather than the raw
    constructor.
    """

    drift: PolyField
    volatility: PolyField
    running_cost: PolyField
    push_cost_up: PolyField
    push_cost_down: PolyField
    form: str
    params: dict = field(default_factory=dict)
    sigma_sq_bound: float = math.inf
    k_bound: float = math.inf

    # -- constructors ----------------------------------------------------

    @classmethod
    def ou_quadratic(cls, gamma: float, mu: float, sigma: float,
                     c: float, K: float) -> "ModelSpec":
        """Mean-reverting drift gamma*(mu - x), constant volatility,
        quadratic running cost c*x^2, constant push costs K."""
        if gamma <= 0 or sigma <= 0 or c <= 0 or K <= 0:
            raise InvalidModelError("ou_quadratic requires gamma, sigma, c, K > 0")
        return cls(
            drift=PolyField.from_coef([gamma * mu, -gamma]),
            volatility=PolyField.constant(sigma),
            running_cost=PolyField.from_coef([0.0, 0.0, c]),
            push_cost_up=PolyField.constant(K),
            push_cost_down=PolyField.constant(K),
            form="ou_quadratic",
            params={"gamma": gamma, "mu": mu, "sigma": sigma, "c": c, "K": K},
            sigma_sq_bound=2.0 * sigma * sigma,
            k_bound=2.0 * K,
        )

    @classmethod
    def bm_quadratic(cls, sigma: float, c: float, K: float) -> "ModelSpec":
        """Driftless diffusion with constant volatility, quadratic running
        cost c*x^2 and constant push costs K."""
        if sigma <= 0 or c <= 0 or K <= 0:
            raise InvalidModelError("bm_quadratic requires sigma, c, K > 0")
        return cls(
            drift=PolyField.constant(0.0),
            volatility=PolyField.constant(sigma),
            running_cost=PolyField.from_coef([0.0, 0.0, c]),
            push_cost_up=PolyField.constant(K),
            push_cost_down=PolyField.constant(K),
            form="bm_quadratic",
            params={"sigma": sigma, "c": c, "K": K},
            sigma_sq_bound=2.0 * sigma * sigma,
            k_bound=2.0 * K,
        )

    @classmethod
    def custom_poly(cls, b: Sequence[float], sigma: Sequence[float],
                    h: Sequence[float], k_plus: Sequence[float],
                    k_minus: Sequence[float],
                    sigma_sq_bound: float = math.inf,
                    k_bound: float = math.inf) -> "ModelSpec":
        """Arbitrary polynomial coefficient lists (ascending powers)."""
        return cls(
            drift=PolyField.from_coef(b),
            volatility=PolyField.from_coef(sigma),
            running_cost=PolyField.from_coef(h),
            push_cost_up=PolyField.from_coef(k_plus),
            push_cost_down=PolyField.from_coef(k_minus),
            form="custom_poly",
            params={
                "b": list(map(float, b)),
                "sigma": list(map(float, sigma)),
                "h": list(map(float, h)),
                "k_plus": list(map(float, k_plus)),
                "k_minus": list(map(float, k_minus)),
            },
            sigma_sq_bound=sigma_sq_bound,
            k_bound=k_bound,
        )

    # -- evaluation helpers ----------------------------------------------

    def sigma_sq(self, x):
        s = self.volatility(x)
        return s * s

    def check_at(self, x) -> None:
        """Raise if the coefficient bounds fail at x (scalar or array)."""
        ssq = np.asarray(self.sigma_sq(x))
        if np.any(ssq <= 0.0):
            raise InvalidModelError(f"sigma^2 <= 0 at x={x}")
        if np.any(ssq >= self.sigma_sq_bound):
            raise InvalidModelError(f"sigma^2 exceeds declared bound at x={x}")
        for name, k in (("k_plus", self.push_cost_up),
                        ("k_minus", self.push_cost_down)):
            kv = np.asarray(k(x))
            if np.any(kv <= 0.0):
                raise InvalidModelError(f"{name} <= 0 at x={x}")
            if np.any(kv >= self.k_bound):
                raise InvalidModelError(f"{name} exceeds declared bound at x={x}")
        if np.any(np.asarray(self.running_cost(x)) < 0.0):
            raise InvalidModelError(f"running cost h < 0 at x={x}")

    @property
    def has_constant_volatility(self) -> bool:
        return self.volatility.is_constant

    def _log_scale_poly(self) -> Optional[Polynomial]:
        # closed-form antiderivative of 2b/sigma^2 exists when sigma is constant
        if not self.has_constant_volatility:
            return None
        ssq = float(self.volatility.poly.coef[0]) ** 2
        integrand = Polynomial(2.0 * self.drift.poly.coef / ssq)
        return integrand.integ(lbnd=0.0)

    def log_scale(self, x):
        """log q(x) = int_0^x 2b/sigma^2, vectorised over x."""
        p = self._log_scale_poly()
        if p is not None:
            return p(x)
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([self._log_scale_scalar(v) for v in xs])
        return out[0] if np.isscalar(x) or np.asarray(x).ndim == 0 else out

    def _log_scale_scalar(self, x: float) -> float:
        if x == 0.0:
            return 0.0
        val, err = integrate.quad(lambda y: 2.0 * self.drift(y) / self.sigma_sq(y),
                                  0.0, x, epsabs=1e-12, epsrel=1e-12, limit=200)
        if err > 1e-8 * max(1.0, abs(val)):
            raise NumericsError(f"scale-density quadrature achieved error {err:.3e} only")
        return val

    def to_dict(self) -> dict:
        return {"form": self.form, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        form = d.get("form")
        params = d.get("params", {})
        if form == "ou_quadratic":
            return cls.ou_quadratic(**params)
        if form == "bm_quadratic":
            return cls.bm_quadratic(**params)
        if form == "custom_poly":
            return cls.custom_poly(**params)
        raise InvalidModelError(f"unknown model form {form!r}")


# -- switching functions and turning points -------------------------------

def eval_H(model: ModelSpec, theta, x, side: Side):
    """Evaluate H_minus or H_plus at x (scalar or array)."""
    th = as_theta(theta).theta
    model.check_at(x)
    ssq = model.sigma_sq(x)
    b = model.drift(x)
    h = model.running_cost(x)
    if side is Side.MINUS:
        k = model.push_cost_up(x)
        kd = model.push_cost_up.d1(x)
        return 0.5 * th * ssq * k * k - 0.5 * ssq * kd - b * k + h
    if side is Side.PLUS:
        k = model.push_cost_down(x)
        kd = model.push_cost_down.d1(x)
        return 0.5 * th * ssq * k * k + 0.5 * ssq * kd + b * k + h
    raise ValueError(f"unknown side {side!r}")


def _H_unchecked(model: ModelSpec, theta: float, side: Side):
    """Vectorised H evaluation without bound checks, for internal scans."""
    if side is Side.MINUS:
        k, kd, sgn = model.push_cost_up, model.push_cost_up.d1, -1.0
    else:
        k, kd, sgn = model.push_cost_down, model.push_cost_down.d1, 1.0

    def f(x):
        ssq = model.sigma_sq(x)
        return (0.5 * theta * ssq * k(x) * k(x) + sgn * 0.5 * ssq * kd(x)
                + sgn * model.drift(x) * k(x) + model.running_cost(x))

    return f


def _side_turning_points(model: ModelSpec, theta: float, side: Side,
                         horizon: float, divergence_margin: float):
    H = _H_unchecked(model, theta, side)

    # expand a symmetric scan window until the minimiser sits strictly inside
    L = 4.0
    while True:
        xs = np.linspace(-L, L, 4001)
        vals = H(xs)
        i = int(np.argmin(vals))
        if 0 < i < len(xs) - 1 and vals[0] > vals[i] and vals[-1] > vals[i]:
            break
        L *= 2.0
        if L > horizon:
            raise AssumptionError(
                "Hpm-lims" if side is Side.PLUS else "Hpm-lims",
                f"no interior minimum of H_{side.value} within |x| <= {horizon:g}")
    res = optimize.minimize_scalar(H, bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                                   options={"xatol": 1e-12})
    xm, Hm = float(res.x), float(res.fun)

    # golden section stalls near sqrt(eps); polish via the derivative's root
    fd = 1e-6 * max(1.0, abs(xm))
    dH = lambda x: (H(x + fd) - H(x - fd)) / (2.0 * fd)
    lo_d, hi_d = xm - 1e-3, xm + 1e-3
    if dH(lo_d) < 0.0 < dH(hi_d):
        xm = float(optimize.brentq(dH, lo_d, hi_d, xtol=1e-13, rtol=1e-15))
        Hm = float(H(xm))

    # divergence check toward the relevant infinity
    direction = 1.0 if side is Side.PLUS else -1.0
    step = max(1.0, abs(xm))
    while H(xm + direction * step) <= Hm + divergence_margin:
        step *= 2.0
        if step > horizon:
            raise AssumptionError(
                "Hpm-lims",
                f"H_{side.value} failed to grow by {divergence_margin:g} within "
                f"|x| <= {horizon:g} of its minimum")

    # single-negative-interval structure check on the scan grid
    neg = vals < 0.0
    runs = int(np.count_nonzero(np.diff(neg.astype(int)) == 1) + (1 if neg[0] else 0))
    if runs > 1:
        raise AssumptionError(
            "h-ass1" if side is Side.MINUS else "h-ass2",
            f"H_{side.value} has {runs} negative intervals; expected at most one")

    if Hm >= 0.0:
        return xm, xm

    # bracket each root by geometric expansion away from the minimiser
    def expand(direction_):
        s = max(1e-3, 1e-3 * abs(xm))
        while H(xm + direction_ * s) < 0.0:
            s *= 2.0
            if s > horizon:
                raise AssumptionError(
                    "Hpm-lims",
                    f"H_{side.value} stays negative out to |x| = {horizon:g}")
        return xm + direction_ * s

    left = optimize.brentq(H, expand(-1.0), xm, xtol=1e-12, rtol=1e-15)
    right = optimize.brentq(H, xm, expand(1.0), xtol=1e-12, rtol=1e-15)
    return float(left), float(right)


def find_turning_points(model: ModelSpec, theta, horizon: float = 1e6,
                        divergence_margin: float = 1e6) -> TurningPoints:
    """Locate the negative regions of H_minus and H_plus.

    Raises :class:`AssumptionError` when the unimodal sign structure or the
    divergence of H at the relevant infinity fails within the search horizon.
    """
    th = as_theta(theta).theta
    am, ap = _side_turning_points(model, th, Side.MINUS, horizon, divergence_margin)
    bm, bp = _side_turning_points(model, th, Side.PLUS, horizon, divergence_margin)
    return TurningPoints(alpha_minus=am, alpha_plus=ap, beta_minus=bm, beta_plus=bp)


def scale_density(model: ModelSpec, x) -> float:
    """q(x) = exp(int_0^x 2b/sigma^2); q(0) = 1 exactly."""
    return np.exp(model.log_scale(x))
