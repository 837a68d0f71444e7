"""Monte Carlo check of a policy table against the solved value.

Paths follow the Euler-Maruyama scheme

    X <- X + ((mu-r) pi + r X - c) dt + sigma pi sqrt(dt) Z

with ``(c, pi)`` read from the policy table's monotone cubic interpolant,
and accumulate ``exp(-delta t) f(c, X) dt`` at the left end of every step.
Wealth that reaches zero is absorbed and earns nothing from then on. Above
``x_max`` the controls are frozen at their ``x_max`` values; below ``x_min``
they are scaled proportionally to wealth, the small-wealth behaviour of
every solved case.

The truncation at ``T`` is covered by :func:`tail_bound`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass

import numba as nb
import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import Additive, CobbDouglas, CrraConsumption, CrraWealth, MarketParams, Utility
from .policy import PolicyTable
from .rng import _INV_2_24, ZIG_RATIO, ZIG_X, _zig_slow, fill_words, split_seed

log = logging.getLogger(__name__)

FREEZE_LIMIT = 0.01


class FreezeError(RuntimeError):
    """More than 1% of paths reached ``x_max``: the grid is too short."""


class AdmissibilityError(ValueError):
    """A policy table breaks ``0 <= pi <= g(x)`` or ``c >= 0``."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``dt`` defaults to ``1e-4 * horizon``.
    """

    x0: float
    horizon: float
    n_paths: int
    seed: int
    dt: float | None = None

    def __post_init__(self):
        if self.dt is None:
            object.__setattr__(self, "dt", 1e-4 * self.horizon)
        if not self.horizon > 0 or not self.x0 > 0:
            raise ValueError("horizon and x0 must be positive")
        if not 0 < self.dt <= 1e-3 * self.horizon * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} must lie in (0, 1e-3 * horizon]")
        if self.n_paths < 1000:
            raise ValueError("n_paths must be at least 1000")
        split_seed(self.seed)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimResult:
    estimate: float
    stderr: float
    absorbed_frac: float
    tail_bound: float
    frozen_frac: float
    n_paths: int
    n_steps: int
    warning: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DominanceReport:
    optimal: SimResult
    alternative: SimResult
    mean_diff: float
    stderr_diff: float

    @property
    def z_score(self) -> float:
        if self.stderr_diff == 0:
            return math.inf if self.mean_diff > 0 else (0.0 if self.mean_diff == 0 else -math.inf)
        return self.mean_diff / self.stderr_diff

    @property
    def violation(self) -> bool:
        """Alternative beats the optimal policy by more than 3 standard errors."""
        return self.mean_diff < -3.0 * self.stderr_diff

    def to_dict(self) -> dict:
        return {"optimal": self.optimal.to_dict(), "alternative": self.alternative.to_dict(),
                "mean_diff": self.mean_diff, "stderr_diff": self.stderr_diff,
                "z_score": self.z_score, "violation": self.violation}


# --------------------------------------------------------------------------
# kernel
# --------------------------------------------------------------------------

_CRRA_C, _CRRA_X, _ADDITIVE, _COBB = 0, 1, 2, 3


def _utility_code(utility: Utility):
    if isinstance(utility, CrraConsumption):
        return _CRRA_C, np.array([utility.R, 0.0, 0.0, 0.0])
    if isinstance(utility, CrraWealth):
        return _CRRA_X, np.array([utility.R, 0.0, 0.0, 0.0])
    if isinstance(utility, Additive):
        return _ADDITIVE, np.array([utility.alpha, utility.beta, utility.R_u, utility.R_v])
    if isinstance(utility, CobbDouglas):
        return _COBB, np.array([utility.a, utility.b, utility.R, 0.0])
    raise TypeError(f"no compiled reward for {type(utility).__name__}; "
                    "simulation supports the closed-form utility variants")


@nb.njit(error_model="numpy")
def _power(z, e):
    return math.sqrt(z) if e == 0.5 else z**e


@nb.njit(error_model="numpy")
def _reward(code, prm, c, x):
    if code == _CRRA_C:
        return _power(c, 1.0 - prm[0]) / (1.0 - prm[0])
    if code == _CRRA_X:
        return _power(x, 1.0 - prm[0]) / (1.0 - prm[0])
    if code == _ADDITIVE:
        return (prm[0] * _power(c, 1.0 - prm[2]) / (1.0 - prm[2])
                + prm[1] * _power(x, 1.0 - prm[3]) / (1.0 - prm[3]))
    return (c ** prm[0] * x ** prm[1]) ** (1.0 - prm[2]) / (1.0 - prm[2])


_BLOCKS = 512
_GROUP = 8


@nb.njit(cache=True, error_model="numpy")
def _kernel(k0, k1, x0, n_steps, dt, mu_r, r, sigma, delta, code, prm,
            xb, coef, cap_const, lut, lut_base, lut_shift, X, ratio, out, flags):
    """Simulate ``out.size`` paths of one policy.

    Paths advance in interleaved groups so that independent updates overlap
    in the pipeline; each path still sees exactly its own normals. Row ``k``
    of ``coef`` holds the cubic coefficients of c, pi and the cap on
    interval ``k``; ``cap_const`` (if finite) replaces the cap cubic.
    ``flags[i]`` holds bit 1 for absorption and bit 2 for reaching ``x_max``.
    """
    n_paths = out.size
    nx = xb.size - 1
    sq = math.sqrt(dt)
    decay = math.exp(-delta * dt)
    x_lo = xb[0]
    x_hi = xb[nx]
    # frozen controls above x_max
    t_hi = x_hi - xb[nx - 1]
    e = coef[nx - 1]
    c_hi = max(((e[0] * t_hi + e[1]) * t_hi + e[2]) * t_hi + e[3], 0.0)
    p_hi = ((e[4] * t_hi + e[5]) * t_hi + e[6]) * t_hi + e[7]
    g_hi = ((e[8] * t_hi + e[9]) * t_hi + e[10]) * t_hi + e[11]
    p_hi = min(max(p_hi, 0.0), g_hi)
    c_lo = coef[0, 3] / x_lo
    p_lo = coef[0, 7] / x_lo
    use_cap_cubic = not math.isfinite(cap_const)
    fbuf = np.empty(1)
    ubuf = fbuf.view(np.uint64)
    sh = np.uint64(lut_shift)
    w0 = np.empty((_GROUP, _BLOCKS), np.uint32)
    w1 = np.empty((_GROUP, _BLOCKS), np.uint32)
    xs = np.empty(_GROUP)
    accs = np.empty(_GROUP)
    fls = np.zeros(_GROUP, np.int64)
    for first in range(0, n_paths, _GROUP):
        size = min(_GROUP, n_paths - first)
        for g in range(size):
            xs[g] = x0
            accs[g] = 0.0
            fls[g] = 0
        disc = dt
        n = 0
        live = size
        while n < n_steps and live > 0:
            blocks = min(_BLOCKS, (n_steps - n + 1) // 2)
            for g in range(size):
                if fls[g] & 1 == 0:
                    fill_words(k0, k1, np.uint32(first + g), np.uint32(n >> 1), blocks,
                               w0[g], w1[g])
            steps = min(2 * blocks, n_steps - n)
            for m in range(steps):
                for g in range(size):
                    fl = fls[g]
                    if fl & 1:
                        continue
                    x = xs[g]
                    # ziggurat fast branch, as in rng._normals
                    w = w0[g, m >> 1] if m % 2 == 0 else w1[g, m >> 1]
                    li = w & np.uint32(127)
                    u = 2.0 * (np.float64(w >> np.uint32(8)) * _INV_2_24) - 1.0
                    if abs(u) < ratio[li]:
                        z = u * X[li]
                    else:
                        z = _zig_slow(k0, k1, np.uint32(first + g), np.uint32(n + m), li, u, X, ratio)
                    if x <= x_lo:
                        c = c_lo * x
                        p = p_lo * x
                    elif x >= x_hi:
                        c = c_hi
                        p = p_hi
                    else:
                        fbuf[0] = x
                        k = lut[np.int64(ubuf[0] >> sh) - lut_base]
                        k += np.int64(x >= xb[k + 1])
                        while k < nx - 1 and x >= xb[k + 1]:
                            k += 1
                        t = x - xb[k]
                        c = ((coef[k, 0] * t + coef[k, 1]) * t + coef[k, 2]) * t + coef[k, 3]
                        p = ((coef[k, 4] * t + coef[k, 5]) * t + coef[k, 6]) * t + coef[k, 7]
                        if use_cap_cubic:
                            cap = ((coef[k, 8] * t + coef[k, 9]) * t + coef[k, 10]) * t + coef[k, 11]
                        else:
                            cap = cap_const
                        c = max(c, 0.0)
                        p = min(max(p, 0.0), cap)
                    accs[g] += disc * _reward(code, prm, c, x)
                    x += (mu_r * p + r * x - c) * dt + sigma * p * sq * z
                    if x >= x_hi:
                        fl |= 2
                    if x <= 0.0:
                        x = 0.0
                        fl |= 1
                        live -= 1
                    xs[g] = x
                    fls[g] = fl
                disc *= decay
            n += steps
        for g in range(size):
            out[first + g] = accs[g]
            flags[first + g] = fls[g]


def _coefficients(table: PolicyTable):
    """Rows ``k`` = cubic coefficients of c, pi and the cap on interval ``k``,
    plus the constant cap value (``inf`` when the cap varies)."""
    g = np.asarray(table.g, dtype=float)
    if np.all(np.isfinite(g)):
        cg = table.g_interp.c
        cap_const = float(g[0]) if np.all(g == g[0]) else math.inf
    else:
        # no cap information: never clamp below the interpolated pi
        cg = np.zeros_like(table.pi_interp.c)
        cg[3] = np.finfo(float).max
        cap_const = float(np.finfo(float).max)
    coef = np.concatenate([table.c_interp.c, table.pi_interp.c, cg]).T
    return np.ascontiguousarray(coef), cap_const


def _bucket_table(xb: np.ndarray):
    """O(1) interval lookup keyed on the top bits of the float64 pattern.

    Those bits are a piecewise-linear log2, so buckets are close to
    log-uniform. ``shift`` is chosen so that no bucket holds more than one
    interior node, which makes a single compare enough after the lookup.
    Returns ``(table, base, shift)`` with ``table[b]`` the interval holding
    the start of bucket ``b``.
    """
    bits = xb.view(np.uint64)
    for shift in range(52 - 4, 52 - 21, -1):
        keys = (bits >> np.uint64(shift)).astype(np.int64)
        if np.all(np.diff(keys[1:-1]) >= 1):
            break
    base = int(keys[0])
    size = int(keys[-1]) - base + 1
    starts = ((np.arange(size, dtype=np.int64) + base).astype(np.uint64) << np.uint64(shift)).view(np.float64)
    starts[0] = xb[0]
    table = np.searchsorted(xb, starts, side="right") - 1
    table = np.clip(table, 0, xb.size - 2).astype(np.int64)
    return table, base, shift


def _check_admissible(table: PolicyTable):
    if np.any(table.c < 0) or np.any(table.pi < 0):
        raise AdmissibilityError("policy has negative consumption or risky position")
    if np.any(table.pi > table.g * (1 + 1e-12)):
        k = int(np.flatnonzero(table.pi > table.g * (1 + 1e-12))[0])
        raise AdmissibilityError(f"pi exceeds the cap at x={table.x[k]:.6g}")


def _simulate(table, market, utility, config):
    _check_admissible(table)
    if not table.x_min <= config.x0 <= table.x_max:
        raise ValueError("x0 outside the policy grid")
    code, prm = _utility_code(utility)
    k0, k1 = split_seed(config.seed)
    coef, cap_const = _coefficients(table)
    xb = np.ascontiguousarray(table.x, dtype=float)
    lut, lut_base, lut_shift = _bucket_table(xb)
    # without a risky position every path is the same deterministic curve
    riskless = not np.any(table.pi > 0)
    n = 1 if riskless else config.n_paths
    out = np.zeros(n)
    flags = np.zeros(n, dtype=np.int8)
    _kernel(np.uint32(k0), np.uint32(k1), float(config.x0), config.n_steps, float(config.dt),
            market.excess, market.r, market.sigma, market.delta, code, prm,
            xb, coef, cap_const, lut, lut_base, lut_shift, ZIG_X, ZIG_RATIO, out, flags)
    if riskless:
        out = np.full(config.n_paths, out[0])
        flags = np.full(config.n_paths, flags[0], dtype=np.int8)
    return out, flags


def _summarise(rewards, flags, n_steps, tail, target=None) -> SimResult:
    n = rewards.size
    est = float(np.sum(rewards) / n)
    # identical paths (riskless policy) have no sampling error; np.std would
    # report the round-off of the mean instead
    same = bool(np.all(rewards == rewards[0]))
    se = 0.0 if same else float(np.std(rewards, ddof=1) / math.sqrt(n))
    frozen = float(np.count_nonzero(flags & 2) / n)
    if frozen > FREEZE_LIMIT:
        raise FreezeError(f"{100 * frozen:.2f}% of paths reached x_max; widen the grid")
    warning = ""
    if target is not None and tail > target:
        warning = f"tail bound {tail:.3g} exceeds requested precision {target:.3g}"
        log.warning(warning)
    return SimResult(estimate=est, stderr=se, absorbed_frac=float(np.count_nonzero(flags & 1) / n),
                     tail_bound=tail, frozen_frac=frozen, n_paths=n, n_steps=n_steps,
                     warning=warning)


def simulate_value(table: PolicyTable, market: MarketParams, utility: Utility,
                   config: SimConfig, tail_target: float | None = None,
                   paths_csv=None) -> SimResult:
    """Discounted reward of ``table`` from ``config.x0``, averaged over paths.

    ``tail_target`` attaches a warning when the truncation bound exceeds it.
    ``paths_csv`` writes one row per path (index, reward, absorbed, frozen).
    """
    out, flags = _simulate(table, market, utility, config)
    tail = tail_bound(table, market, utility, config.x0, config.horizon)
    if paths_csv is not None:
        _write_paths(paths_csv, out, flags)
    return _summarise(out, flags, config.n_steps, tail, tail_target)


def dominance_check(table_opt: PolicyTable, table_alt: PolicyTable, market: MarketParams,
                    utility: Utility, config: SimConfig,
                    tail_target: float | None = None) -> DominanceReport:
    """Paired simulation of two tables on common random numbers.

    Both legs draw path ``i``'s normals from the same counters, so the
    optimal leg is bit-identical to ``simulate_value(table_opt, ...)``.
    """
    if not np.array_equal(table_alt.x, table_opt.x):
        raise ValueError("both policy tables must share the wealth grid")
    _check_admissible(table_alt)
    res, rewards = [], []
    for tab in (table_opt, table_alt):
        out, flags = _simulate(tab, market, utility, config)
        tail = tail_bound(tab, market, utility, config.x0, config.horizon)
        res.append(_summarise(out, flags, config.n_steps, tail, tail_target))
        rewards.append(out)
    d = rewards[0] - rewards[1]
    n = d.size
    return DominanceReport(optimal=res[0], alternative=res[1], mean_diff=float(np.sum(d) / n),
                           stderr_diff=float(np.std(d, ddof=1) / math.sqrt(n)))


def _write_paths(path, rewards, flags):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("path", "reward", "absorbed", "frozen"))
        for i, (v, f) in enumerate(zip(rewards, flags)):
            w.writerow((i, repr(float(v)), int(f & 1), int(bool(f & 2))))


# --------------------------------------------------------------------------
# truncation bound
# --------------------------------------------------------------------------


def _envelope(x, y, slopes):
    """Affine majorants ``a + b x`` of the interpolated data, one per slope.

    On each interval the monotone cubic stays between its end values, so
    ``max(y_k, y_k+1) - b x_k`` bounds the intercept there.
    """
    top = np.maximum(y[:-1], y[1:])
    return [(float(max(np.max(top - b * x[:-1]), y[0] - b * x[0], 0.0)), float(b)) for b in slopes]


def tail_bound(table: PolicyTable, market: MarketParams, utility: Utility, x0: float,
               horizon: float) -> float:
    """Upper bound on ``E int_T^inf exp(-delta t) f(c_t, X_t) dt``.

    Controls of the simulated dynamics are bounded: ``pi <= pi_max`` and
    ``c <= min(a + b x, c_max)`` for any affine majorant of the table. So
    ``E X_t <= m(t)`` with ``m' = (mu-r) pi_max + r m``, ``m(0) = x0``.
    ``f`` is nondecreasing in ``c`` and jointly concave, so
    ``x -> f(min(a + b x, c_max), x)`` is concave and nondecreasing and
    Jensen gives ``E f(c_t, X_t) <= f(min(a + b m, c_max), m)``. The bound
    minimises over a family of slopes ``b``.
    """
    x, c, pi = table.x, np.maximum(table.c, 0.0), np.maximum(table.pi, 0.0)
    pi_max = float(np.max(pi))
    c_max = float(np.max(c))
    k, r, d = market.excess * pi_max, market.r, market.delta

    def m(t):
        if r == 0:
            return x0 + k * t
        return (x0 + k / r) * math.exp(r * t) - k / r

    slopes = np.concatenate([[0.0], np.geomspace(1e-4, 10.0, 41) * max(c_max, 1e-300)])
    best = math.inf
    for a, b in _envelope(x, c, slopes):
        def integrand(t, a=a, b=b):
            mt = m(t)
            return math.exp(-d * t) * float(utility.f(min(a + b * mt, c_max), mt))
        val, _ = quad(integrand, horizon, math.inf, limit=200)
        best = min(best, val)
    return float(best)


def horizon_for(table: PolicyTable, market: MarketParams, utility: Utility, x0: float,
                target: float, t_max: float = 1e4) -> float:
    """Smallest horizon (to 1e-3) whose tail bound is at most ``target``."""
    def gap(T):
        return tail_bound(table, market, utility, x0, T) - target
    if gap(t_max) > 0:
        raise ValueError("tail bound does not reach the target")
    if gap(0.0) <= 0:
        return 0.0
    T = brentq(gap, 0.0, t_max, xtol=1e-4)
    return math.ceil(T * 1000.0) / 1000.0


def merton_table(table: PolicyTable, consumption_rate: float, pi_prop: float = 0.0) -> PolicyTable:
    """Alternative policy on the same grid: ``c = rate x``, ``pi = min(pi_prop x, g)``."""
    x = table.x
    pi = np.minimum(pi_prop * x, table.g)
    return PolicyTable(x=x.copy(), c=consumption_rate * x, pi=pi, constrained=pi >= table.g,
                       g=table.g.copy(), constraint=table.constraint)
