"""Closed-form Merton solution for CRRA consumption utility.

With ``u(c) = c**(1-R)/(1-R)`` and no cap on the risky position,

    V(x) = A**(-R) x**(1-R) / (1-R),   c*(x) = A x,   pi*(x) = (mu-r)/(sigma^2 R) x,
    A = [delta - (1-R)(r + theta/R)] / R,  theta = (mu-r)^2 / (2 sigma^2).

The formula is only used as an oracle after :func:`merton_residual`
confirms that it zeroes the unconstrained HJB equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MarketParams


@dataclass(frozen=True)
class MertonSolution:
    A: float
    value_coeff: float
    pi_prop: float
    R: float

    def value(self, x):
        return self.value_coeff * np.asarray(x, dtype=float) ** (1.0 - self.R)

    def dvalue(self, x):
        return (1.0 - self.R) * self.value_coeff * np.asarray(x, dtype=float) ** (-self.R)

    def d2value(self, x):
        R = self.R
        return -R * (1.0 - R) * self.value_coeff * np.asarray(x, dtype=float) ** (-R - 1.0)


def merton_solution(market: MarketParams, R: float) -> MertonSolution:
    if not 0 < R < 1:
        raise ValueError("R must lie in (0, 1)")
    A = (market.delta - (1.0 - R) * (market.r + market.theta / R)) / R
    if A <= 0:
        raise ValueError(f"consumption propensity A={A:.6g} <= 0: value is infinite")
    coeff = A ** (-R) / (1.0 - R)
    return MertonSolution(A=A, value_coeff=coeff, pi_prop=market.excess / (market.sigma**2 * R), R=R)


def merton_value(market: MarketParams, R: float, x):
    """Unconstrained value ``A**(-R) x**(1-R) / (1-R)``."""
    return merton_solution(market, R).value(x)


def merton_policy(market: MarketParams, R: float) -> tuple[float, float]:
    """Consumption propensity ``A`` and risky proportion ``(mu-r)/(sigma^2 R)``."""
    sol = merton_solution(market, R)
    return sol.A, sol.pi_prop


def merton_residual(market: MarketParams, R: float, x) -> np.ndarray:
    """Relative residual of the closed form in the unconstrained ODE

        delta V = -theta V'^2 / V'' + p(V') + r x V',
        p(zeta) = R/(1-R) zeta**(-(1-R)/R),

    evaluated with exact derivatives.
    """
    sol = merton_solution(market, R)
    x = np.asarray(x, dtype=float)
    v, dv, d2v = sol.value(x), sol.dvalue(x), sol.d2value(x)
    p = R / (1.0 - R) * dv ** (-(1.0 - R) / R)
    rhs = -market.theta * dv**2 / d2v + p + market.r * x * dv
    return (market.delta * v - rhs) / (market.delta * v)


def merton_dual(market: MarketParams, R: float, y):
    """Closed-form dual of the Merton value, sampled at increasing ``y``.

    ``v(y) = R/(1-R) B**(1/R) y**(1-1/R)`` with ``B = (1-R) value_coeff``.
    """
    from .dual import DualSolution

    sol = merton_solution(market, R)
    y = np.asarray(y, dtype=float)
    B = (1.0 - R) * sol.value_coeff
    H = (y / B) ** (-1.0 / R)
    v = R / (1.0 - R) * B ** (1.0 / R) * y ** (1.0 - 1.0 / R)
    d2v = H / (R * y)
    return DualSolution(y=y, v=v, dv=-H, d2v=d2v, H=H, J=v + y * H)
