"""Market parameters, utility and constraint definitions, and the
Legendre-Fenchel dual of the instantaneous utility.

Every utility works on numpy arrays (broadcasting) as well as on floats.
The dual of ``f(c, x)`` in the consumption argument is

    p(x, zeta) = max_{c >= 0} f(c, x) - c * zeta

with maximiser ``I(x, zeta)`` (the inverse marginal utility).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

ArrayLike = "float | np.ndarray"


# --------------------------------------------------------------------------
# market
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MarketParams:
    """Market and preference-environment constants.

    Parameters
    ----------
    mu, r, sigma : float
        Risky drift, risk-free rate and volatility. ``mu > r >= 0``.
    delta : float
        Discount rate.
    gamma_growth, m_growth : float
        Exponent and constant of the utility growth bound
        ``f(c, x) <= M (1 + c**gamma + x**gamma)``. The same exponent enters
        the well-posedness inequality.
    """

    mu: float
    r: float
    sigma: float
    delta: float
    gamma_growth: float = 0.5
    m_growth: float = 2.0

    def __post_init__(self):
        vals = (self.mu, self.r, self.sigma, self.delta, self.gamma_growth, self.m_growth)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("market parameters must be finite")
        if not self.mu > self.r:
            raise ValueError(f"need mu > r, got mu={self.mu}, r={self.r}")
        if self.r < 0:
            raise ValueError(f"need r >= 0, got {self.r}")
        if self.sigma <= 0 or self.delta <= 0:
            raise ValueError("sigma and delta must be positive")
        if not 0 < self.gamma_growth < 1:
            raise ValueError("gamma_growth must lie in (0, 1)")
        if self.m_growth <= 0:
            raise ValueError("m_growth must be positive")

    @property
    def theta(self) -> float:
        """Squared Sharpe ratio over two, ``(mu - r)**2 / (2 sigma**2)``."""
        return (self.mu - self.r) ** 2 / (2.0 * self.sigma**2)

    @property
    def excess(self) -> float:
        return self.mu - self.r

    def well_posedness_bound(self) -> float:
        g = self.gamma_growth
        return self.r * g + g * (self.mu - self.r) ** 2 / (2.0 * self.sigma**2 * (1.0 - g))

    def is_well_posed(self) -> bool:
        """Exact rational check of ``delta > r g + g (mu-r)^2 / (2 sigma^2 (1-g))``."""
        mu, r, s, d, g = (Fraction(v) for v in
                          (self.mu, self.r, self.sigma, self.delta, self.gamma_growth))
        return d > r * g + g * (mu - r) ** 2 / (2 * s**2 * (1 - g))


# --------------------------------------------------------------------------
# dual value container
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DualValue:
    """Value of ``p(x, zeta)``, its maximiser and partial derivatives."""

    p: np.ndarray
    c_star: np.ndarray
    p_x: np.ndarray
    p_zeta: np.ndarray
    p_xx: np.ndarray
    p_xzeta: np.ndarray
    p_zetazeta: np.ndarray


class InnerMaximizationError(RuntimeError):
    """Bracketing of the consumption first-order condition failed."""

    def __init__(self, msg: str, bracket: tuple[float, float]):
        super().__init__(f"{msg} (last bracket [{bracket[0]:.6g}, {bracket[1]:.6g}])")
        self.bracket = bracket


def _f(a):
    return np.asarray(a, dtype=float)


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


# --------------------------------------------------------------------------
# utilities
# --------------------------------------------------------------------------


class Utility:
    """Base class for instantaneous utilities ``f(c, x)``.

    Subclasses supply ``f`` and its first and second partials. The default
    dual and inverse marginal are numerical (bisection plus envelope
    identities); built-in variants override them with closed forms.
    """

    tag = "custom"
    wealth_only = False

    def f(self, c, x):
        raise NotImplementedError

    def f_c(self, c, x):
        raise NotImplementedError

    def f_x(self, c, x):
        raise NotImplementedError

    def f_cc(self, c, x):
        raise NotImplementedError

    def f_cx(self, c, x):
        raise NotImplementedError

    def f_xx(self, c, x):
        raise NotImplementedError

    # -- dual ---------------------------------------------------------------

    def inverse_marginal(self, x, zeta):
        """Consumption ``c`` solving ``f_c(c, x) = zeta`` (0 at a corner)."""
        return _out(_bisect_inverse_marginal(self, _f(x), _f(zeta)))

    def dual(self, x, zeta) -> DualValue:
        x, zeta = np.broadcast_arrays(_f(x), _f(zeta))
        c = _bisect_inverse_marginal(self, x, zeta)
        p = self.f(c, x) - c * zeta
        p_x = self.f_x(c, x)
        hx = np.maximum(1e-6, 1e-6 * np.abs(x))
        hz = np.maximum(1e-6, 1e-6 * np.abs(zeta))
        # envelope identities, second partials by central differences
        px_plus = self.f_x(_bisect_inverse_marginal(self, x + hx, zeta), x + hx)
        px_minus = self.f_x(_bisect_inverse_marginal(self, x - hx, zeta), x - hx)
        p_xx = (px_plus - px_minus) / (2 * hx)
        c_zp = _bisect_inverse_marginal(self, x, zeta + hz)
        c_zm = _bisect_inverse_marginal(self, x, zeta - hz)
        p_xzeta = (self.f_x(c_zp, x) - self.f_x(c_zm, x)) / (2 * hz)
        p_zz = -(c_zp - c_zm) / (2 * hz)
        return DualValue(*(_out(a) for a in (p, c, p_x, -c, p_xx, p_xzeta, p_zz)))

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} cannot be serialised")


def _bisect_inverse_marginal(u: Utility, x: np.ndarray, zeta: np.ndarray,
                             c_lo: float = 1e-12, rtol: float = 1e-12) -> np.ndarray:
    """Vectorised bisection of ``f_c(c, x) = zeta`` on ``[c_lo, c_hi]``.

    ``f_c`` is strictly decreasing in ``c``; ``c_hi`` is doubled until the
    sign changes. Where ``f_c(c_lo, x) <= zeta`` the optimum is the corner 0.
    """
    x, zeta = np.broadcast_arrays(_f(x), _f(zeta))
    shape = x.shape
    x = x.ravel()
    zeta = zeta.ravel()
    out = np.zeros_like(x)
    lo = np.full_like(x, c_lo)
    active = u.f_c(lo, x) > zeta
    if not np.all(np.isfinite(u.f_c(lo, x))):
        bad = int(np.flatnonzero(~np.isfinite(u.f_c(lo, x)))[0])
        raise ValueError(f"non-finite marginal utility at c={c_lo}, x={x[bad]}")
    if not active.any():
        return out.reshape(shape)
    xa, za = x[active], zeta[active]
    lo = lo[active]
    hi = np.maximum(2 * lo, 1.0)
    for _ in range(2100):
        need = u.f_c(hi, xa) > za
        if not need.any():
            break
        lo = np.where(need, hi, lo)
        hi = np.where(need, 2 * hi, hi)
        if np.any(hi > 1e300):
            k = int(np.flatnonzero(hi > 1e300)[0])
            raise InnerMaximizationError("no sign change of f_c - zeta", (lo[k], hi[k]))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = u.f_c(mid, xa) > za
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= rtol * hi):
            break
    else:
        k = int(np.argmax((hi - lo) / hi))
        raise InnerMaximizationError("bisection did not converge", (lo[k], hi[k]))
    out[active] = 0.5 * (lo + hi)
    return out.reshape(shape)


def _crra(z, R):
    return z ** (1.0 - R) / (1.0 - R)


def _check_exponent(name, R):
    if not 0 < R < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {R}")


@dataclass(frozen=True)
class CrraConsumption(Utility):
    """``f(c, x) = c**(1-R) / (1-R)``."""

    R: float
    tag = "crra_consumption"

    def __post_init__(self):
        _check_exponent("R", self.R)

    def f(self, c, x):
        return _crra(_f(c), self.R) + 0.0 * _f(x)

    def f_c(self, c, x):
        return _f(c) ** (-self.R) + 0.0 * _f(x)

    def f_x(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def f_cc(self, c, x):
        return -self.R * _f(c) ** (-self.R - 1.0) + 0.0 * _f(x)

    def f_cx(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def f_xx(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def inverse_marginal(self, x, zeta):
        return _out(_f(zeta) ** (-1.0 / self.R) + 0.0 * _f(x))

    def dual(self, x, zeta):
        x, zeta = np.broadcast_arrays(_f(x), _f(zeta))
        R = self.R
        c = zeta ** (-1.0 / R)
        p = R / (1.0 - R) * zeta ** (-(1.0 - R) / R)
        z = np.zeros_like(p)
        return DualValue(*(_out(a) for a in (p, c, z, -c, z, z, c / (R * zeta))))

    def to_dict(self):
        return {"type": self.tag, "R": self.R}


@dataclass(frozen=True)
class CrraWealth(Utility):
    """Wealth-only utility ``f(c, x) = x**(1-R) / (1-R)``; optimal c is 0."""

    R: float
    tag = "crra_wealth"
    wealth_only = True

    def __post_init__(self):
        _check_exponent("R", self.R)

    def f(self, c, x):
        return _crra(_f(x), self.R) + 0.0 * _f(c)

    def f_c(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def f_x(self, c, x):
        return _f(x) ** (-self.R) + 0.0 * _f(c)

    def f_cc(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def f_cx(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def f_xx(self, c, x):
        return -self.R * _f(x) ** (-self.R - 1.0) + 0.0 * _f(c)

    def inverse_marginal(self, x, zeta):
        return _out(0.0 * _f(x) * _f(zeta))

    def dual(self, x, zeta):
        x, zeta = np.broadcast_arrays(_f(x), _f(zeta))
        R = self.R
        z = np.zeros_like(x)
        return DualValue(*(_out(a) for a in (
            _crra(x, R), z, x ** (-R), z, -R * x ** (-R - 1.0), z, z)))

    def to_dict(self):
        return {"type": self.tag, "R": self.R}


@dataclass(frozen=True)
class Additive(Utility):
    """``f(c, x) = alpha c**(1-R_u)/(1-R_u) + beta x**(1-R_v)/(1-R_v)``."""

    alpha: float
    beta: float
    R_u: float
    R_v: float
    tag = "additive"

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        _check_exponent("R_u", self.R_u)
        _check_exponent("R_v", self.R_v)

    def f(self, c, x):
        return self.alpha * _crra(_f(c), self.R_u) + self.beta * _crra(_f(x), self.R_v)

    def f_c(self, c, x):
        return self.alpha * _f(c) ** (-self.R_u) + 0.0 * _f(x)

    def f_x(self, c, x):
        return self.beta * _f(x) ** (-self.R_v) + 0.0 * _f(c)

    def f_cc(self, c, x):
        return -self.alpha * self.R_u * _f(c) ** (-self.R_u - 1.0) + 0.0 * _f(x)

    def f_cx(self, c, x):
        return 0.0 * _f(c) * _f(x)

    def f_xx(self, c, x):
        return -self.beta * self.R_v * _f(x) ** (-self.R_v - 1.0) + 0.0 * _f(c)

    def inverse_marginal(self, x, zeta):
        return _out((self.alpha / _f(zeta)) ** (1.0 / self.R_u) + 0.0 * _f(x))

    def dual(self, x, zeta):
        x, zeta = np.broadcast_arrays(_f(x), _f(zeta))
        Ru, Rv, b = self.R_u, self.R_v, self.beta
        c = (self.alpha / zeta) ** (1.0 / Ru)
        p = c * zeta * Ru / (1.0 - Ru) + b * _crra(x, Rv)
        z = np.zeros_like(p)
        return DualValue(*(_out(a) for a in (
            p, c, b * x ** (-Rv), -c, -b * Rv * x ** (-Rv - 1.0), z, c / (Ru * zeta))))

    def to_dict(self):
        return {"type": self.tag, "alpha": self.alpha, "beta": self.beta,
                "R_u": self.R_u, "R_v": self.R_v}


@dataclass(frozen=True)
class CobbDouglas(Utility):
    """``f(c, x) = (c**a x**b)**(1-R) / (1-R)`` with ``a + b < 1``."""

    a: float
    b: float
    R: float
    tag = "cobb_douglas"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.a + self.b < 1):
            raise ValueError("need a > 0, b > 0, a + b < 1")
        _check_exponent("R", self.R)

    @property
    def exponents(self) -> tuple[float, float, float, float]:
        """``(s, q, e, K0)`` with ``p = K0 zeta**e x**q`` and ``s = a (1-R)``."""
        s = self.a * (1.0 - self.R)
        q = self.b * (1.0 - self.R) / (1.0 - s)
        e = s / (s - 1.0)
        k0 = self.a ** (1.0 / (1.0 - s)) * (1.0 / s - 1.0)
        return s, q, e, k0

    def f(self, c, x):
        return (_f(c) ** self.a * _f(x) ** self.b) ** (1.0 - self.R) / (1.0 - self.R)

    def f_c(self, c, x):
        c, x = _f(c), _f(x)
        s = self.a * (1 - self.R)
        return self.a * c ** (s - 1.0) * x ** (self.b * (1 - self.R))

    def f_x(self, c, x):
        c, x = _f(c), _f(x)
        t = self.b * (1 - self.R)
        return self.b * c ** (self.a * (1 - self.R)) * x ** (t - 1.0)

    def f_cc(self, c, x):
        c, x = _f(c), _f(x)
        s = self.a * (1 - self.R)
        return self.a * (s - 1.0) * c ** (s - 2.0) * x ** (self.b * (1 - self.R))

    def f_cx(self, c, x):
        c, x = _f(c), _f(x)
        s, t = self.a * (1 - self.R), self.b * (1 - self.R)
        return self.a * t * c ** (s - 1.0) * x ** (t - 1.0)

    def f_xx(self, c, x):
        c, x = _f(c), _f(x)
        s, t = self.a * (1 - self.R), self.b * (1 - self.R)
        return self.b * (t - 1.0) * c ** s * x ** (t - 2.0)

    def inverse_marginal(self, x, zeta):
        s = self.a * (1 - self.R)
        xb = _f(x) ** (self.b * (1 - self.R))
        return _out((self.a * xb / _f(zeta)) ** (1.0 / (1.0 - s)))

    def dual(self, x, zeta):
        x, zeta = np.broadcast_arrays(_f(x), _f(zeta))
        s, q, e, k0 = self.exponents
        p = k0 * zeta**e * x**q
        c = np.asarray(self.inverse_marginal(x, zeta), dtype=float)
        return DualValue(*(_out(a) for a in (
            p, c, q * p / x, e * p / zeta, q * (q - 1.0) * p / x**2,
            q * e * p / (x * zeta), e * (e - 1.0) * p / zeta**2)))

    def to_dict(self):
        return {"type": self.tag, "a": self.a, "b": self.b, "R": self.R}


@dataclass(frozen=True, eq=False)
class Custom(Utility):
    """Utility given by vectorised callbacks.

    The inverse marginal is found by bisection and the dual's second
    partials by central differences of envelope quantities.
    """

    f_fn: Callable
    f_c_fn: Callable
    f_x_fn: Callable
    f_cc_fn: Callable
    f_cx_fn: Callable
    f_xx_fn: Callable
    name: str = "custom"
    wealth_only: bool = False

    def f(self, c, x):
        return _f(self.f_fn(_f(c), _f(x)))

    def f_c(self, c, x):
        return _f(self.f_c_fn(_f(c), _f(x)))

    def f_x(self, c, x):
        return _f(self.f_x_fn(_f(c), _f(x)))

    def f_cc(self, c, x):
        return _f(self.f_cc_fn(_f(c), _f(x)))

    def f_cx(self, c, x):
        return _f(self.f_cx_fn(_f(c), _f(x)))

    def f_xx(self, c, x):
        return _f(self.f_xx_fn(_f(c), _f(x)))


UTILITY_TYPES = {cls.tag: cls for cls in (CrraConsumption, CrraWealth, Additive, CobbDouglas)}


def utility_from_dict(d: dict) -> Utility:
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in UTILITY_TYPES:
        raise ValueError(f"unknown utility type {kind!r}")
    return UTILITY_TYPES[kind](**d)


def dual_p(utility: Utility, x, zeta) -> DualValue:
    """Legendre-Fenchel dual of the utility in consumption, with partials."""
    if np.any(_f(x) <= 0) or np.any(_f(zeta) <= 0):
        raise ValueError("dual_p needs x > 0 and zeta > 0")
    return utility.dual(x, zeta)


def inverse_marginal(utility: Utility, x, zeta):
    """Consumption solving ``f_c(c, x) = zeta``; 0 for wealth-only utilities."""
    if np.any(_f(x) <= 0) or np.any(_f(zeta) <= 0):
        raise ValueError("inverse_marginal needs x > 0 and zeta > 0")
    return utility.inverse_marginal(x, zeta)


# --------------------------------------------------------------------------
# borrowing constraint
# --------------------------------------------------------------------------


class Constraint:
    """Cap ``g(x)`` on the dollar amount held in the risky asset."""

    tag = "custom"
    L: float

    def g(self, x):
        raise NotImplementedError

    def dg(self, x):
        raise NotImplementedError

    def d2g(self, x):
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        return float(self.dg(0.0))

    @property
    def is_constant(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise TypeError(f"{type(self).__name__} cannot be serialised")


@dataclass(frozen=True)
class ConstantL(Constraint):
    """``g(x) = L``. ``L = inf`` is accepted as the no-constraint sentinel."""

    L: float
    tag = "constant"

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"need L > 0, got {self.L}")

    def g(self, x):
        return _out(np.full_like(_f(x), self.L))

    def dg(self, x):
        return _out(np.zeros_like(_f(x)))

    def d2g(self, x):
        return _out(np.zeros_like(_f(x)))

    @property
    def is_constant(self):
        return True

    def to_dict(self):
        return {"type": self.tag, "L": self.L}


@dataclass(frozen=True)
class Linear(Constraint):
    """``g(x) = k x + L``."""

    k: float
    L: float
    tag = "linear"

    def __post_init__(self):
        if self.k < 0 or not self.L > 0:
            raise ValueError("need k >= 0 and L > 0")

    def g(self, x):
        return _out(self.k * _f(x) + self.L)

    def dg(self, x):
        return _out(np.full_like(_f(x), self.k))

    def d2g(self, x):
        return _out(np.zeros_like(_f(x)))

    @property
    def is_constant(self):
        return self.k == 0

    def to_dict(self):
        return {"type": self.tag, "k": self.k, "L": self.L}


@dataclass(frozen=True, eq=False)
class CustomConcave(Constraint):
    """Cap given by callables ``g, g', g''`` with floor ``L``."""

    g_fn: Callable
    dg_fn: Callable
    d2g_fn: Callable
    L: float

    def g(self, x):
        return _out(self.g_fn(_f(x)))

    def dg(self, x):
        return _out(self.dg_fn(_f(x)))

    def d2g(self, x):
        return _out(self.d2g_fn(_f(x)))


CONSTRAINT_TYPES = {"constant": ConstantL, "linear": Linear}


def constraint_from_dict(d: dict) -> Constraint:
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in CONSTRAINT_TYPES:
        raise ValueError(f"unknown constraint type {kind!r}")
    return CONSTRAINT_TYPES[kind](**d)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    mandatory: bool
    detail: str = ""
    first_violation: tuple | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    wealth_only_mode: bool = False

    @property
    def ok(self) -> bool:
        """True when every mandatory check passed."""
        return all(ch.passed for ch in self.checks if ch.mandatory)

    def __getitem__(self, name: str) -> Check:
        for ch in self.checks:
            if ch.name == name:
                return ch
        raise KeyError(name)

    def failed(self, mandatory_only: bool = False) -> list[Check]:
        return [ch for ch in self.checks
                if not ch.passed and (ch.mandatory or not mandatory_only)]

    def lines(self) -> list[str]:
        out = []
        for ch in self.checks:
            status = "PASS" if ch.passed else ("FAIL" if ch.mandatory else "flag")
            extra = f"  first violation at {ch.first_violation}" if ch.first_violation else ""
            out.append(f"[{status}] {ch.name}: {ch.detail}{extra}")
        if self.wealth_only_mode:
            out.append("wealth-only mode: optimal consumption is identically zero")
        return out


@dataclass(frozen=True)
class ProbeLattice:
    """Probe points ``(c, x)`` in ``(0, c_max] x (0, x_max]``."""

    c_max: float = 10.0
    x_max: float = 10.0
    n: int = 100
    span: float = 1e-4

    def __post_init__(self):
        if self.n < 100:
            raise ValueError("probe lattice needs at least 100 points per axis")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.geomspace(self.span * self.c_max, self.c_max, self.n)
        x = np.geomspace(self.span * self.x_max, self.x_max, self.n)
        return c, x


def _first(mask, C, X):
    idx = np.argwhere(mask)
    if idx.size == 0:
        return None
    i, j = idx[0]
    return (float(C[i, j]), float(X[i, j]))


def validate(market: MarketParams, utility: Utility, constraint: Constraint,
             probes: ProbeLattice | None = None) -> ValidationReport:
    """Probe-based check of the standing assumptions.

    Violations are reported, not raised. Callbacks returning non-finite
    values at a probe raise ``ValueError`` naming that probe.
    """
    probes = probes or ProbeLattice()
    c, x = probes.axes()
    C, X = np.meshgrid(c, x, indexing="ij")
    vals = {}
    for nm in ("f", "f_c", "f_x", "f_cc", "f_cx", "f_xx"):
        v = np.broadcast_to(getattr(utility, nm)(C, X), C.shape)
        bad = ~np.isfinite(v)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(f"{nm} is not finite at probe (c={C[i, j]:.6g}, x={X[i, j]:.6g})")
        vals[nm] = v
    f, fc, fx, fcc, fcx, fxx = (vals[k] for k in ("f", "f_c", "f_x", "f_cc", "f_cx", "f_xx"))
    checks = []

    f00 = float(np.asarray(utility.f(0.0, 0.0)))
    checks.append(Check("utility_zero_at_origin", abs(f00) <= 1e-12, True, f"f(0,0)={f00:.3g}"))

    neg = (fc < 0) | (fx < 0)
    checks.append(Check("marginal_utility_nonnegative", not neg.any(), True,
                        "f_c >= 0 and f_x >= 0", _first(neg, C, X)))
    checks.append(Check("marginal_utility_positive_c", not (fc <= 0).any(), False,
                        "f_c > 0 (strict)", _first(fc <= 0, C, X)))
    checks.append(Check("marginal_utility_positive_x", not (fx <= 0).any(), False,
                        "f_x > 0 (strict)", _first(fx <= 0, C, X)))

    # Inada in c: marginal utility explodes as c -> 0
    fc_small = np.asarray(utility.f_c(1e-12, x), dtype=float)
    fc_one = np.asarray(utility.f_c(1.0, x), dtype=float)
    inada = bool(np.all(fc_small > 1e3 * np.maximum(fc_one, 1e-300)))
    checks.append(Check("inada_consumption", inada, False, "f_c(0+, x) = +inf"))
    wealth_only = bool(utility.wealth_only or np.all(fc == 0))

    det = fcc * fxx - fcx**2
    scale = np.maximum(np.abs(fcc * fxx), fcx**2) + 1e-300
    weak = (fcc > 0) | (fxx > 0) | (det < -1e-10 * scale)
    checks.append(Check("hessian_negative_semidefinite", not weak.any(), True,
                        "f jointly concave", _first(weak, C, X)))
    strict = (fcc >= 0) | (det <= 0)
    checks.append(Check("hessian_negative_definite", not strict.any(), False,
                        "f_cc < 0 and det > 0 (strict)", _first(strict, C, X)))

    g, M = market.gamma_growth, market.m_growth
    over = f > M * (1.0 + C**g + X**g) * (1 + 1e-12)
    checks.append(Check("growth_bound", not over.any(), True,
                        f"f <= {M:g} (1 + c^{g:g} + x^{g:g})", _first(over, C, X)))

    wp = market.is_well_posed()
    checks.append(Check("well_posedness", wp, True,
                        f"delta={market.delta:.6g} vs bound {market.well_posedness_bound():.6g}"))

    gx = np.asarray(constraint.g(x), dtype=float)
    dg = np.asarray(constraint.dg(x), dtype=float)
    d2g = np.asarray(constraint.d2g(x), dtype=float)
    for nm, v in (("g", gx), ("g'", dg), ("g''", d2g)):
        bad = np.isnan(v)
        if bad.any():
            raise ValueError(f"{nm} is not a number at probe x={x[bad][0]:.6g}")
    lip = constraint.lipschitz if np.isfinite(gx).all() else math.inf

    def xfirst(mask):
        return (float(x[mask][0]),) if mask.any() else None

    checks.append(Check("constraint_floor", bool(constraint.L > 0 and np.all(gx >= constraint.L)),
                        True, f"g(x) >= L = {constraint.L:g}", xfirst(gx < constraint.L)))
    checks.append(Check("constraint_increasing", bool(np.all(dg >= 0)), True, "g' >= 0",
                        xfirst(dg < 0)))
    checks.append(Check("constraint_concave", bool(np.all(d2g <= 0)), True, "g'' <= 0",
                        xfirst(d2g > 0)))
    checks.append(Check("constraint_lipschitz", bool(np.isfinite(lip) and np.all(dg <= lip * (1 + 1e-12))),
                        True, f"g' <= {lip:g}", xfirst(dg > lip * (1 + 1e-12))))
    return ValidationReport(tuple(checks), wealth_only_mode=wealth_only)
