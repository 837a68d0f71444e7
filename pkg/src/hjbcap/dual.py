"""Dual coordinates for the unconstrained region.

On the slack region the Legendre-type change of variables ``y = V'(x)``,
``v(y) = V(x) - x y`` turns the fully nonlinear HJB equation into the
quasilinear ODE

    delta (v - y v') = theta y^2 v'' + p(-v', y) - r y v',
    theta = (mu-r)^2 / (2 sigma^2),

whose residual on the solved grid is an independent smoothness check.
The wealth and value along the dual grid are ``H(y) = -v'(y)`` and
``J(y) = v - y v'``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .hjb import ValueSolution
from .model import MarketParams, Utility


@dataclass(frozen=True)
class DualSolution:
    y: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray
    H: np.ndarray
    J: np.ndarray

    def __len__(self) -> int:
        return int(np.size(self.y))


class DualError(ValueError):
    """Raised when a primal solution cannot be mapped to dual coordinates."""


def to_dual(solution: ValueSolution) -> DualSolution:
    """Map the unconstrained nodes of ``solution`` to increasing ``y``."""
    keep = ~solution.constrained
    # stay on the leading slack block; the region is (0, x*)
    if keep.any() and not keep[0]:
        raise DualError("lowest node is constrained")
    stop = np.argmin(keep) if not keep.all() else keep.size
    x = solution.x[:stop]
    if x.size < 2:
        raise DualError(f"need at least two unconstrained nodes, got {x.size}")
    dv, v, d2v = solution.dv[:stop], solution.v[:stop], solution.d2v[:stop]
    bad = np.flatnonzero(np.diff(dv) >= 0)
    if bad.size:
        raise DualError(f"V' not strictly decreasing at nodes {bad[:10].tolist()}")
    rev = slice(None, None, -1)
    y = dv[rev].copy()
    H = x[rev].copy()
    J = v[rev].copy()
    return DualSolution(y=y, v=J - H * y, dv=-H, d2v=-1.0 / d2v[rev], H=H, J=J)


def _central(y, f):
    """Three-point first and second differences on a nonuniform grid (interior)."""
    hm = y[1:-1] - y[:-2]
    hp = y[2:] - y[1:-1]
    f0, fm, fp = f[1:-1], f[:-2], f[2:]
    d1 = (hm**2 * fp - hp**2 * fm + (hp**2 - hm**2) * f0) / (hm * hp * (hm + hp))
    d2 = 2.0 * (hm * fp + hp * fm - (hm + hp) * f0) / (hm * hp * (hm + hp))
    return d1, d2


def dual_residual(dual: DualSolution, market: MarketParams, utility: Utility) -> float:
    """Sup over interior dual nodes of the ODE residual, over ``delta max|v|``.

    Derivatives are recomputed from ``dual.v`` by finite differences, so the
    stored ``dv``/``d2v`` samples play no part in the check.
    """
    y, v = np.asarray(dual.y, float), np.asarray(dual.v, float)
    if y.size < 3:
        raise DualError("dual grid needs at least three nodes")
    d1, d2 = _central(y, v)
    yi = y[1:-1]
    H = -d1
    p = utility.dual(np.maximum(H, 0.0), yi).p
    lhs = market.delta * (v[1:-1] - yi * d1)
    rhs = market.theta * yi**2 * d2 + p - market.r * d1 * yi
    return float(np.max(np.abs(lhs - rhs)) / (market.delta * np.max(np.abs(v))))


def integrate_dual(market: MarketParams, utility: Utility, y_start: float, v_start: float,
                   dv_start: float, y_end: float, n_out: int = 201,
                   rtol: float = 1e-9, blowup: float = 1e12) -> DualSolution:
    """Integrate the dual ODE as an initial value problem from ``y_start``.

    Uses an adaptive Runge-Kutta 4(5) pair. Raises :class:`DualError` when
    ``H = -v'`` turns negative or ``|v''|`` exceeds ``blowup``.
    """
    if y_start <= 0 or y_end <= 0:
        raise ValueError("y must stay positive")
    if y_end == y_start:
        H0 = -dv_start
        return DualSolution(y=np.array([y_start]), v=np.array([v_start]),
                            dv=np.array([dv_start]), d2v=np.array([np.nan]),
                            H=np.array([H0]), J=np.array([v_start + y_start * H0]))
    th = market.theta

    def d2(y, v, dv):
        p = utility.dual(-dv, y).p
        return (market.delta * (v - y * dv) - p + market.r * dv * y) / (th * y * y)

    def rhs(y, s):
        v, dv = s
        if dv > 0:
            return [dv, 0.0]
        return [dv, d2(y, v, dv)]

    def negative_h(y, s):
        return -s[1]
    negative_h.terminal = True

    def overflow(y, s):
        return blowup - abs(d2(y, s[0], s[1])) if s[1] < 0 else 1.0
    overflow.terminal = True

    ys = np.geomspace(y_start, y_end, n_out)
    sol = solve_ivp(rhs, (y_start, y_end), [v_start, dv_start], method="RK45",
                    t_eval=ys, rtol=rtol, atol=1e-12 * max(abs(v_start), 1.0),
                    events=(negative_h, overflow))
    if sol.status == 1:
        which = "H turned negative" if sol.t_events[0].size else "v'' blew up"
        y_last = float(sol.t_events[0][0] if sol.t_events[0].size else sol.t_events[1][0])
        raise DualError(f"{which} at y={y_last:.6g}")
    if not sol.success:
        raise DualError(sol.message)
    y, v, dv = sol.t, sol.y[0], sol.y[1]
    d2v = np.array([d2(a, b, c) for a, b, c in zip(y, v, dv)])
    H = -dv
    return DualSolution(y=y, v=v, dv=dv, d2v=d2v, H=H, J=v + y * H)


COLUMNS = ("y", "v", "dv", "d2v", "H", "J")


def write_csv(dual: DualSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in zip(*(getattr(dual, c) for c in COLUMNS)):
            w.writerow([repr(float(a)) for a in row])


def read_csv(path) -> DualSolution:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected columns {header}")
        data = np.array([[float(a) for a in row] for row in r])
    return DualSolution(*(data[:, k].copy() for k in range(len(COLUMNS))))
