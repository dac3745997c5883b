"""Closed-form machinery for the transaction-cost optimal investment problem.

Positions are written in polar coordinates, bank = b*cos(theta) and stock =
b*sin(theta).  Potential (CRRA) utility makes the value function homothetic,
so it factors as b**gamma * V(theta, t) and everything reduces to a single
angular variable on a bounded interval (beta1, beta2).  This module collects
the quantities that are known exactly: the admissible angles, the PDE
coefficients, the terminal payoff, the gradient-constraint ratios that define
the buying/selling regions, the explicit extension of V into those regions,
and the map back to the Dai-Yi cartesian variables (z, v).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

BUY = "buy"
SELL = "sell"


@dataclass(frozen=True)
class ModelParams:
    """Market and utility constants.

    r, alpha are yearly rates, sigma a yearly volatility, gamma the CRRA
    exponent in (0, 1), lam/mu the proportional costs on purchases/sales and
    T the horizon in years.  alpha > r and lam + mu > 0 are standing
    assumptions of the model.
    """

    r: float
    alpha: float
    sigma: float
    gamma: float
    lam: float
    mu: float
    T: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must lie in [0, 1)")
        if not self.lam + self.mu > 0.0:
            raise ValueError("lam + mu must be positive")
        if not self.alpha > self.r:
            raise ValueError("alpha must exceed r")
        if not self.T > 0.0:
            raise ValueError("T must be positive")


@dataclass(frozen=True)
class PolarDomain:
    """Angular domain plus the critical times and limits of the frontiers.

    t_hat0 is the latest time at which the buying frontier can leave zero
    (reported raw, it may fall outside [0, T]); t_hat1, when it exists, is
    the time at which the buying frontier crosses pi/2; merton_z is the
    frictionless Merton line in the cartesian variable z; sr_terminal is the
    angle the selling frontier approaches as t -> T.
    """

    beta1: float
    beta2: float
    t_hat0: float
    t_hat1: Optional[float]
    merton_z: float
    sr_terminal: float

    def __post_init__(self):
        if not self.beta1 < 0.0 < 0.5 * math.pi < self.beta2 < math.pi:
            raise ValueError("angles out of order: need beta1 < 0 < pi/2 < beta2 < pi")
        if self.t_hat1 is not None and not self.t_hat1 < self.t_hat0:
            raise ValueError("t_hat1 must precede t_hat0 when it exists")


def _cost_factor(side: str, p: ModelParams) -> float:
    if side == BUY:
        return 1.0 + p.lam
    if side == SELL:
        return 1.0 - p.mu
    raise ValueError(f"side must be {BUY!r} or {SELL!r}, got {side!r}")


def domain_angles(p: ModelParams) -> tuple[float, float]:
    """Endpoints of the solvency wedge: beta1 in (-pi/2, 0), beta2 in (pi/2, pi)."""
    beta1 = math.atan(-1.0 / (1.0 + p.lam))
    beta2 = math.atan(-1.0 / (1.0 - p.mu)) + math.pi
    return beta1, beta2


def _arccot(x: float) -> float:
    # branch with range (0, pi), the one the angular frontier lives on
    return math.atan2(1.0, x)


def critical_quantities(p: ModelParams) -> PolarDomain:
    """Evaluate every closed-form quantity of the angular domain.

    t_hat1 is absent whenever alpha - r - (1-gamma)*sigma^2 <= 0.  t_hat0 is
    reported even when negative or beyond T; the solver simply never (or
    always) uses the zero-buying-frontier branch in that case.
    """
    beta1, beta2 = domain_angles(p)
    cost_span = math.log((1.0 + p.lam) / (1.0 - p.mu))
    t_hat0 = p.T - cost_span / (p.alpha - p.r)
    excess = p.alpha - p.r - (1.0 - p.gamma) * p.sigma**2
    t_hat1 = p.T - cost_span / excess if excess > 0.0 else None
    merton_z = -excess / (p.alpha - p.r)
    sr_terminal = _arccot((1.0 - p.mu) * merton_z)
    return PolarDomain(
        beta1=beta1,
        beta2=beta2,
        t_hat0=t_hat0,
        t_hat1=t_hat1,
        merton_z=merton_z,
        sr_terminal=sr_terminal,
    )


def coefficients(theta, p: ModelParams):
    """Coefficients (g0, g1, g2) of the angular operator g2*V'' + g1*V' + g0*V.

    g2 >= 0 everywhere and vanishes exactly where sin(theta)*cos(theta) does.
    Accepts scalars or arrays.
    """
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    c = np.cos(theta)
    s2 = s * s
    c2 = c * c
    g2 = 0.5 * p.sigma**2 * s2 * c2
    g1 = (p.gamma - 1.0) * p.sigma**2 * c * s * s2 + (p.alpha - p.r) * s * c
    g0 = p.gamma * (0.5 * p.sigma**2 * s2 * ((p.gamma - 1.0) * s2 + c2)
                    + p.alpha * s2 + p.r * c2)
    if theta.ndim == 0:
        return float(g0), float(g1), float(g2)
    return g0, g1, g2


def terminal_value(theta, p: ModelParams):
    """Terminal condition V(theta, T): liquidation utility of the unit circle.

    Continuous on (beta1, beta2) with a kink at theta = 0 where both branches
    equal 1/gamma.  Raises outside the open domain.
    """
    theta = np.asarray(theta, dtype=float)
    beta1, beta2 = domain_angles(p)
    if np.any(theta <= beta1) or np.any(theta >= beta2):
        raise ValueError("theta outside the open solvency wedge (beta1, beta2)")
    s = np.sin(theta)
    c = np.cos(theta)
    sell_branch = c + (1.0 - p.mu) * s
    buy_branch = c + (1.0 + p.lam) * s
    base = np.where(theta > 0.0, sell_branch, buy_branch)
    out = base**p.gamma / p.gamma
    if theta.ndim == 0:
        return float(out)
    return out


def gradient_ratio(theta, side: str, p: ModelParams):
    """Binding-constraint ratio V_theta / V on the given side.

    gamma*((k cos - sin)/(k sin + cos)) with k = 1+lam (buy) or 1-mu (sell).
    The denominator is positive throughout (beta1, beta2) on the relevant
    side, so the ratio is finite there.
    """
    k = _cost_factor(side, p)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(theta)
    c = np.cos(theta)
    out = p.gamma * (k * c - s) / (k * s + c)
    if theta.ndim == 0:
        return float(out)
    return out


def extend(theta, frontier_theta: float, frontier_value: float, side: str,
           p: ModelParams):
    """Closed-form continuation of V across a frontier.

    Integrates the binding gradient constraint from the anchor
    (frontier_theta, frontier_value): the result matches the anchor value at
    the frontier and satisfies gradient_ratio identically along the way.
    The solver applies the buy form below the buying frontier and the sell
    form above the selling one; the formula itself is valid wherever its
    numerator stays positive, which is checked here (it degenerates exactly
    at beta1 on the buy side and beta2 on the sell side).
    """
    if not frontier_value > 0.0:
        raise ValueError("frontier_value must be positive")
    k = _cost_factor(side, p)
    beta1, beta2 = domain_angles(p)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= beta1) or np.any(theta >= beta2):
        raise ValueError("extension evaluated outside the solvency wedge")
    if not beta1 < frontier_theta < beta2:
        raise ValueError("frontier angle outside the solvency wedge")
    num = k * np.sin(theta) + np.cos(theta)
    den = k * math.sin(frontier_theta) + math.cos(frontier_theta)
    out = frontier_value * (num / den)**p.gamma
    if theta.ndim == 0:
        return float(out)
    return out


def to_cartesian(theta, V, V_theta, p: ModelParams):
    """Map (V, V_theta) at angle theta to the Dai-Yi variables (z, v).

    z = cot(theta) and v = -(V_theta sin^2 - gamma sin cos V) / (gamma V).
    On a buy extension this gives v = 1/(z + 1 + lam); on a sell extension
    v = 1/(z + 1 - mu).
    """
    theta = np.asarray(theta, dtype=float)
    V = np.asarray(V, dtype=float)
    V_theta = np.asarray(V_theta, dtype=float)
    if np.any(V <= 0.0):
        raise ValueError("V must be positive")
    s = np.sin(theta)
    c = np.cos(theta)
    with np.errstate(divide="ignore"):
        z = c / s
    v = -(V_theta * s * s - p.gamma * s * c * V) / (p.gamma * V)
    if theta.ndim == 0:
        return float(z), float(v)
    return z, v
