"""Where the borrowing cap binds: the binding margin, the certification
function ``m`` and the free boundary ``x*`` for a constant cap ``g = L``.

Sign convention: with ``V'' < 0`` the cap binds exactly when

    -(mu-r) V' / (sigma^2 V'') >= L   <=>   Y = (mu-r) V' + sigma^2 L V'' >= 0,

so ``Y >= 0`` marks the constrained region.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .hjb import ConcavityError, ValueSolution
from .model import CobbDouglas, Constraint, MarketParams, Utility


class SignPattern(str, enum.Enum):
    NO_CHANGE = "NoChange"
    POSITIVE_TO_NEGATIVE = "PositiveToNegative"
    NEGATIVE_TO_POSITIVE = "NegativeToPositive"
    MULTIPLE = "Multiple"


class RegionInconsistency(RuntimeError):
    """Certified sign pattern but the solver flags switch more than once."""


def _pick(values, node):
    return values if node is None else values[node]


def unconstrained_candidate(solution: ValueSolution, market: MarketParams) -> np.ndarray:
    """Risky dollar demand ``-(mu-r) V' / (sigma^2 V'')``; ``inf`` where ``V'' >= 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(solution.d2v < 0,
                        -market.excess * solution.dv / (market.sigma**2 * solution.d2v),
                        np.inf)


def compute_Y(solution: ValueSolution, market: MarketParams, L: float, node=None):
    """Binding margin ``(mu-r) V' + sigma^2 L V''``, nonnegative where the cap binds."""
    Y = market.excess * solution.dv + market.sigma**2 * L * solution.d2v
    return _pick(Y, node)


def binding_at(solution: ValueSolution, market: MarketParams, constraint: Constraint,
               node: int) -> bool:
    """True when the unconstrained demand at ``node`` reaches ``g(x)``."""
    x = solution.x[node]
    g = float(constraint.g(x))
    if math.isinf(g):
        return False
    if not solution.d2v[node] < 0:
        raise ConcavityError(node, float(x))
    cand = -market.excess * solution.dv[node] / (market.sigma**2 * solution.d2v[node])
    return bool(cand >= g)


def compute_m(solution: ValueSolution, utility: Utility, market: MarketParams, L: float,
              node=None):
    """Certification function evaluated on the solved marginal value ``V'``.

        m = -(mu-r) p_x - sigma^2 L [p_xx + 2 p_xz] - p_zz (mu-r)^2 V'^2 / (sigma^2 L)
            + r (mu-r) V'

    with the dual partials taken at ``(x, V'(x))``.
    """
    x, dv = solution.x, solution.dv
    if node is not None:
        x, dv = x[node], dv[node]
    d = utility.dual(x, dv)
    s2L = market.sigma**2 * L
    k = market.excess
    return (-k * d.p_x - s2L * (d.p_xx + 2.0 * d.p_xzeta)
            - d.p_zetazeta * k**2 * dv**2 / s2L + market.r * k * dv)


def additive_m(solution: ValueSolution, utility, market: MarketParams, L: float, node=None):
    """Closed form of ``m`` for the additive utility with CRRA parts (``r = 0``).

        m = -beta [mu v' + sigma^2 L v''] + K'(V'/alpha) mu^2 V'^2 / (alpha sigma^2 L),
        K(zeta) = zeta**(-1/R_u).
    """
    x, dv = solution.x, solution.dv
    if node is not None:
        x, dv = x[node], dv[node]
    a, b, Ru, Rv = utility.alpha, utility.beta, utility.R_u, utility.R_v
    mu, s2L = market.excess, market.sigma**2 * L
    vp = x ** (-Rv)
    vpp = -Rv * x ** (-Rv - 1.0)
    Kp = -(1.0 / Ru) * (dv / a) ** (-1.0 / Ru - 1.0)
    return -b * (mu * vp + s2L * vpp) + Kp * mu**2 * dv**2 / (a * s2L)


def multiplicative_n(utility: Utility, market: MarketParams, L: float,
                     solution: ValueSolution, node=None):
    """Reduced certification function for the Cobb-Douglas utility.

    ``m = K0 V'**e x**(q-2) n`` with ``K0 > 0``, so ``n`` carries the sign of
    ``m``. The ``r`` term vanishes when ``r = 0``.
    """
    if not isinstance(utility, CobbDouglas):
        raise TypeError("multiplicative_n needs a CobbDouglas utility")
    s, q, e, k0 = utility.exponents
    x, dv = solution.x, solution.dv
    if node is not None:
        x, dv = x[node], dv[node]
    mu = market.excess
    s2L = market.sigma**2 * L
    n = (-mu * q * x - mu**2 / s2L * e * (e - 1.0) * x**2
         - s2L * (q * (q - 1.0) + 2.0 * q * e * x / dv))
    return n + market.r * mu * dv ** (1.0 - e) * x ** (2.0 - q) / k0


def multiplicative_prefactor(utility: CobbDouglas, solution: ValueSolution, node=None):
    s, q, e, k0 = utility.exponents
    x, dv = solution.x, solution.dv
    if node is not None:
        x, dv = x[node], dv[node]
    return k0 * dv**e * x ** (q - 2.0)


def classify_sign_pattern(values, deadband: float = 1e-8) -> SignPattern:
    """Sign pattern of a sampled function; ``|v| <= deadband * max|v|`` counts as zero."""
    v = np.asarray(values, dtype=float)
    scale = np.max(np.abs(v)) if v.size else 0.0
    s = np.sign(np.where(np.abs(v) <= deadband * scale, 0.0, v))
    s = s[s != 0]
    if s.size == 0:
        return SignPattern.NO_CHANGE
    changes = np.flatnonzero(np.diff(s))
    if changes.size == 0:
        return SignPattern.NO_CHANGE
    if changes.size > 1:
        return SignPattern.MULTIPLE
    return (SignPattern.POSITIVE_TO_NEGATIVE if s[0] > 0
            else SignPattern.NEGATIVE_TO_POSITIVE)


@dataclass(frozen=True)
class SmoothFit:
    xstar: float
    left: tuple[float, float, float]
    right: tuple[float, float, float]

    @property
    def dV(self) -> float:
        return abs(self.left[0] - self.right[0])

    @property
    def dV1(self) -> float:
        return abs(self.left[1] - self.right[1])

    @property
    def dV2(self) -> float:
        return abs(self.left[2] - self.right[2])

    @property
    def rel(self) -> tuple[float, float, float]:
        """Mismatches of V, V', V'' relative to the left-hand values."""
        return (self.dV / abs(self.left[0]), self.dV1 / abs(self.left[1]),
                self.dV2 / abs(self.left[2]))


@dataclass(frozen=True)
class RegionReport:
    xstar: float | None
    y_samples: np.ndarray
    m_samples: np.ndarray
    sign_pattern: SignPattern
    certified: bool
    transitions: int
    smooth_fit: SmoothFit | None = None
    m_root: float | None = None
    diagnostic: str = ""

    def to_dict(self) -> dict:
        sf = None
        if self.smooth_fit is not None:
            sf = {"xstar": self.smooth_fit.xstar, "left": list(self.smooth_fit.left),
                  "right": list(self.smooth_fit.right),
                  "dV": self.smooth_fit.dV, "dV1": self.smooth_fit.dV1, "dV2": self.smooth_fit.dV2}
        return {"xstar": self.xstar, "sign_pattern": self.sign_pattern.value,
                "certified": self.certified, "transitions": self.transitions,
                "m_root": self.m_root, "smooth_fit": sf, "diagnostic": self.diagnostic,
                "y_samples": [float(v) for v in self.y_samples],
                "m_samples": [float(v) for v in self.m_samples]}


def _sign_change_root(x, values, deadband=1e-8):
    """Linear-interpolated location of the first sign change."""
    v = np.asarray(values, dtype=float)
    scale = np.max(np.abs(v))
    s = np.sign(np.where(np.abs(v) <= deadband * scale, 0.0, v))
    nz = np.flatnonzero(s)
    for a, b in zip(nz[:-1], nz[1:]):
        if s[a] != s[b]:
            return float(x[a] + (x[b] - x[a]) * v[a] / (v[a] - v[b]))
    return None


def certify_two_region(solution: ValueSolution, utility: Utility, market: MarketParams,
                       L: float, refine: bool = True) -> RegionReport:
    """Classify the sign pattern of ``m`` and check the solver's region flags.

    ``certified`` holds for no sign change or a single change from positive
    to negative. A certified report whose flags switch more than once raises
    :class:`RegionInconsistency`.
    """
    m = compute_m(solution, utility, market, L)
    Y = compute_Y(solution, market, L)
    pattern = classify_sign_pattern(m)
    certified = pattern in (SignPattern.NO_CHANGE, SignPattern.POSITIVE_TO_NEGATIVE)
    flags = solution.constrained.astype(int)
    switches = np.flatnonzero(np.diff(flags))
    m_root = _sign_change_root(solution.x, m) if pattern != SignPattern.NO_CHANGE else None
    if certified and (switches.size > 1 or (switches.size == 1 and flags[0] == 1)):
        raise RegionInconsistency(
            f"m certifies two regions but region flags switch {switches.size} times "
            f"(first at x={solution.x[switches[0]]:.6g})")
    xstar = None
    fit = None
    diag = ""
    if switches.size == 1 and flags[0] == 0:
        j = switches[0]
        xstar = float(0.5 * (solution.x[j] + solution.x[j + 1]))
        if refine and certified:
            fit = _refine(solution, market, L, j)
            xstar = fit.xstar
    elif switches.size == 0:
        diag = "cap never binds on the grid"
    return RegionReport(xstar=xstar, y_samples=Y, m_samples=m, sign_pattern=pattern,
                        certified=certified, transitions=int(switches.size),
                        smooth_fit=fit, m_root=m_root, diagnostic=diag)


def _one_sided(x, vals, x0, k=4, deg=2):
    """Polynomial through ``k`` nodes evaluated at ``x0``."""
    coef = np.polyfit(x - x0, vals, deg)
    return float(coef[-1])


def _refine(solution: ValueSolution, market: MarketParams, L: float, j: int,
            skip: int = 1, k: int = 4, deg: int = 2) -> SmoothFit:
    x = solution.x
    gap = unconstrained_candidate(solution, market) - L
    lo, hi = x[j], x[j + 1]
    # cubic through the four nodes around the bracket
    sl = slice(max(j - 1, 0), min(j + 3, x.size))
    cub = np.polyfit(x[sl] - lo, gap[sl], min(3, x[sl].size - 1))
    xs = lo + brentq(lambda t: np.polyval(cub, t), 0.0, hi - lo, xtol=1e-6 * lo * 1e-3,
                     rtol=1e-12)
    left_idx = np.arange(j - skip - k + 1, j - skip + 1)
    right_idx = np.arange(j + 1 + skip, j + 1 + skip + k)
    if left_idx[0] < 0 or right_idx[-1] >= x.size:
        raise ValueError("free boundary too close to the grid edge for one-sided fits")
    sides = []
    for idx in (left_idx, right_idx):
        sides.append(tuple(_one_sided(x[idx], arr[idx], xs, k, deg)
                           for arr in (solution.v, solution.dv, solution.d2v)))
    return SmoothFit(float(xs), sides[0], sides[1])


def refine_xstar(solution: ValueSolution, utility: Utility, market: MarketParams,
                 constraint: Constraint) -> SmoothFit | None:
    """Root of the interpolated gap ``candidate - L`` and one-sided V, V', V''.

    Returns None (with no error) when the cap never binds on the grid.
    """
    if not constraint.is_constant:
        raise ValueError("refine_xstar needs a constant cap")
    flags = solution.constrained.astype(int)
    switches = np.flatnonzero(np.diff(flags))
    if switches.size == 0:
        return None
    if switches.size > 1 or flags[0] == 1:
        raise RegionInconsistency("region flags do not form two regions")
    return _refine(solution, market, constraint.L, int(switches[0]))
