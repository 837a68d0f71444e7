"""Monotone policy-iteration solver for the constrained consumption-investment HJB

    delta V = max_{0 <= pi <= g(x)} [(mu-r) pi V' + sigma^2 pi^2 V'' / 2]
              + max_{c >= 0} [f(c, x) - c V'] + r x V',      x > 0.

The equation is discretised in ``z = log x``. For a fixed policy the
linear operator is

    delta W - B W_z - (A/2) W_zz = f,
    A = sigma^2 pi^2 / x^2,   B = ((mu-r) pi + r x - c) / x - A/2,

with central differences for ``W_z`` and ``W_zz``. Where the cell Peclet
number is too large for central differencing to be monotone the diffusion is
raised to ``max(A, B h+, -B h-)``; at that level the stencil coincides with
one-sided upwinding of the drift, so the scheme is monotone at every node
while staying second order wherever diffusion dominates. Both ends carry a
power-law Dirichlet condition ``C x**q`` fitted through the two neighbouring
nodes and refreshed every iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .model import Constraint, MarketParams, Utility

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (last residual {residual:.3e})")
        self.residual = residual


class ConcavityError(RuntimeError):
    def __init__(self, node: int, x: float):
        super().__init__(f"value function lost concavity at node {node} (x={x:.6g})")
        self.node = node
        self.x = x


@dataclass(frozen=True, eq=False)
class WealthGrid:
    """Strictly increasing wealth nodes ``x_0 > 0, ..., x_N``."""

    nodes: np.ndarray
    spacing: str = "log"

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", x)
        x.setflags(write=False)
        if x.ndim != 1 or x.size < 201:
            raise ValueError("a wealth grid needs at least 200 intervals")
        if x[0] <= 0 or np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be positive and strictly increasing")
        if x[0] > 1e-4 * x[-1] * (1 + 1e-12):
            raise ValueError("need x_min <= 1e-4 x_max")

    @classmethod
    def log_spaced(cls, x_max: float = 10.0, n: int = 1000, ratio: float = 1e-4) -> "WealthGrid":
        """``n`` log-uniform intervals on ``[ratio * x_max, x_max]``."""
        return cls(np.geomspace(ratio * x_max, x_max, n + 1), "log")

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def x_min(self) -> float:
        return float(self.nodes[0])

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    def refined(self, factor: int = 2) -> "WealthGrid":
        """Insert ``factor - 1`` nodes in every interval (uniformly in log x)."""
        z = np.log(self.nodes)
        t = np.arange(factor) / factor
        zf = np.concatenate([(z[:-1, None] + np.diff(z)[:, None] * t).ravel(), z[-1:]])
        xf = np.exp(zf)
        xf[::factor] = self.nodes
        return WealthGrid(xf, self.spacing)

    def extended(self, factor: float = 2.0) -> "WealthGrid":
        """Same nodes plus log-uniform continuation up to ``factor * x_max``."""
        z = np.log(self.nodes)
        h = z[-1] - z[-2]
        extra = int(np.ceil(np.log(factor) / h - 1e-9))
        ze = z[-1] + h * np.arange(1, extra + 1)
        return WealthGrid(np.concatenate([self.nodes, np.exp(ze)]), self.spacing)

    def __eq__(self, other):
        return isinstance(other, WealthGrid) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-10
    max_iter: int = 500
    relax: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.relax <= 1:
            raise ValueError("relax must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class ValueSolution:
    """Grid solution of the HJB equation.

    ``dv`` and ``d2v`` are the derivative samples the scheme actually uses, so
    the HJB residual evaluated with them is the scheme's own residual.
    ``c`` and ``pi`` are the maximising controls at the converged values.
    """

    grid: WealthGrid
    v: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray
    constrained: np.ndarray
    c: np.ndarray
    pi: np.ndarray
    iterations: int = 0
    residual_sup: float = 0.0
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("v", "dv", "d2v", "c", "pi"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        flags = np.array(self.constrained, dtype=bool)
        flags.setflags(write=False)
        object.__setattr__(self, "constrained", flags)
        deg = np.zeros_like(flags) if self.degenerate is None else np.array(self.degenerate, dtype=bool)
        deg.setflags(write=False)
        object.__setattr__(self, "degenerate", deg)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def region(self) -> np.ndarray:
        return np.where(self.constrained, "constrained", "unconstrained")

    @property
    def candidate(self) -> np.ndarray:
        """Unconstrained dollar demand per node (``inf`` where ``d2v >= 0``)."""
        raise AttributeError("use region.unconstrained_candidate(solution, market)")

    def __eq__(self, other):
        if not isinstance(other, ValueSolution):
            return NotImplemented
        return (self.grid == other.grid and self.iterations == other.iterations
                and self.residual_sup == other.residual_sup
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("v", "dv", "d2v", "constrained", "c", "pi", "degenerate")))


# --------------------------------------------------------------------------
# discretisation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Stencil:
    x: np.ndarray
    z: np.ndarray
    hm: np.ndarray
    hp: np.ndarray
    d1: tuple  # coefficients on W[i-1], W[i], W[i+1]
    d2: tuple

    @classmethod
    def build(cls, x):
        z = np.log(x)
        hm = z[1:-1] - z[:-2]
        hp = z[2:] - z[1:-1]
        P = hp * hm * (hp + hm)
        d1 = (-hp**2 / P, (hp**2 - hm**2) / P, hm**2 / P)
        d2 = (2 * hp / P, -2 * (hp + hm) / P, 2 * hm / P)
        return cls(x, z, hm, hp, d1, d2)

    def apply(self, coef, W):
        return coef[0] * W[:-2] + coef[1] * W[1:-1] + coef[2] * W[2:]


def _coefficients(st: _Stencil, market: MarketParams, c, pi):
    """Diffusion ``A``, drift ``B`` and monotone diffusion ``A_eff`` at interior nodes."""
    x = st.x[1:-1]
    c, pi = c[1:-1], pi[1:-1]
    A = market.sigma**2 * pi**2 / x**2
    B = (market.excess * pi + market.r * x - c) / x - 0.5 * A
    A_eff = np.maximum(A, np.maximum(B * st.hp, -B * st.hm))
    return A, B, A_eff


def _edge_rows(W, z):
    """Boundary rows ``(a_edge, a_near, a_far, rhs)`` for both ends.

    The edge value continues the power law through its two neighbours,
    ``log W_e = (1+k) log W_n - k log W_f``, linearised about the current
    iterate (``W`` is None on the first pass, when a square-root law is used).
    """
    rows = []
    for e, n, f in ((0, 1, 2), (-1, -2, -3)):
        k = (z[e] - z[n]) / (z[n] - z[f])
        if W is not None and W[e] > 0 and W[n] > 0 and W[f] > 0:
            F = np.log(W[e]) - (1 + k) * np.log(W[n]) + k * np.log(W[f])
            rows.append((1.0, -(1 + k) * W[e] / W[n], k * W[e] / W[f], -W[e] * F))
        elif W is None:
            rows.append((1.0, -np.exp(0.5 * (z[e] - z[n])), 0.0, 0.0))
        else:
            rows.append((1.0, 0.0, 0.0, 0.0))
    return rows


def _scheme_derivatives(st: _Stencil, W, A, B, A_eff):
    """``dv``, ``d2v`` consistent with the monotone stencil (interior nodes)."""
    x = st.x[1:-1]
    D1 = st.apply(st.d1, W)
    D2 = st.apply(st.d2, W)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(B != 0, (A_eff - A) / (2.0 * B), 0.0)
    Wz = D1 + corr * D2
    return Wz / x, (D2 - Wz) / x**2


def _edge_derivatives(st: _Stencil, W):
    """Derivatives implied by the power-law boundary fits."""
    z, x = st.z, st.x
    out = []
    for i, j in ((0, 1), (-1, -2)):
        if W[i] > 0 and W[j] > 0:
            q = np.log(W[i] / W[j]) / (z[i] - z[j])
        else:
            q = 0.0
        out.append((q * W[i] / x[i], q * (q - 1.0) * W[i] / x[i] ** 2))
    return out


def _full_derivatives(st, W, A, B, A_eff):
    dv = np.empty_like(W)
    d2v = np.empty_like(W)
    dv[1:-1], d2v[1:-1] = _scheme_derivatives(st, W, A, B, A_eff)
    (dv[0], d2v[0]), (dv[-1], d2v[-1]) = _edge_derivatives(st, W)
    return dv, d2v


def _solve_linear(st: _Stencil, market, fvals, A, B, A_eff, W_prev):
    n = st.x.size
    P = st.hp * st.hm * (st.hp + st.hm)
    lower = st.hp * (A_eff - B * st.hp) / P       # coefficient on W[i-1]
    upper = st.hm * (A_eff + B * st.hm) / P       # coefficient on W[i+1]
    # banded storage: ab[2 + i - j, j] = a[i, j]
    ab = np.zeros((5, n))
    ab[2, 1:-1] = market.delta + lower + upper
    ab[1, 2:] = -upper
    ab[3, :-2] = -lower
    rhs = np.zeros(n)
    rhs[1:-1] = fvals[1:-1]
    (l0, l1, l2, lr), (r0, r1, r2, rr) = _edge_rows(W_prev, st.z)
    ab[2, 0], ab[1, 1], ab[0, 2], rhs[0] = l0, l1, l2, lr
    ab[2, n - 1], ab[3, n - 2], ab[4, n - 3], rhs[-1] = r0, r1, r2, rr
    return solve_banded((2, 2), ab, rhs)


def _improve(utility: Utility, market: MarketParams, x, g, dv, d2v, c_prev):
    """Per-node maximisers ``c = I(x, dv)`` and ``pi = clip(candidate, 0, g)``."""
    ok = dv > 0
    c = c_prev.copy()
    if ok.any():
        with np.errstate(all="ignore"):
            cand_c = np.asarray(utility.inverse_marginal(x[ok], dv[ok]), dtype=float)
        good = np.isfinite(cand_c)
        idx = np.flatnonzero(ok)[good]
        c[idx] = np.maximum(cand_c[good], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.where(d2v < 0, -market.excess * dv / (market.sigma**2 * d2v), np.inf)
    cand = np.where(dv > 0, cand, np.where(d2v < 0, 0.0, np.inf))
    degenerate = ~(d2v < 0)
    pi = np.clip(cand, 0.0, g)
    constrained = cand >= g
    return c, pi, constrained, degenerate


def _initial_policy(utility, market, x, g):
    if utility.wealth_only:
        c = np.zeros_like(x)
    else:
        c = market.delta * x
    pi = np.minimum(market.excess / market.sigma**2 * x, g)
    return c, pi


def _stalled(history: list[float], tol: float, window: int = 4, floor: float = 100.0) -> bool:
    """Change stuck within ``floor * tol`` with no progress over ``window`` iterations.

    Policies recomputed from second differences carry round-off of order
    ``eps / h**2``, so the change can hover just above a tight ``tol``.
    """
    if len(history) < window + 1:
        return False
    recent = history[-window:]
    return max(recent) <= floor * tol and min(recent) >= 0.5 * history[-window - 1]


def solve_hjb(market: MarketParams, utility: Utility, constraint: Constraint,
              grid: WealthGrid | None = None, params: SolverParams | None = None,
              check: bool = True) -> ValueSolution:
    """Howard policy iteration for the HJB equation on ``grid``.

    Raises
    ------
    ValueError
        If the problem is not well posed or the cap is not finite on the grid.
    ConvergenceError
        If the value change does not fall below ``params.tol`` (relative to
        ``max |v|``) within ``params.max_iter`` iterations.
    ConcavityError
        If the converged values are not concave.
    """
    grid = grid or WealthGrid.log_spaced()
    params = params or SolverParams()
    if check and not market.is_well_posed():
        raise ValueError("discount rate violates the well-posedness bound; V is infinite")
    x = grid.nodes
    g = np.asarray(constraint.g(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(g)):
        raise ValueError("borrowing cap must be finite on the grid")
    st = _Stencil.build(x)
    c, pi = _initial_policy(utility, market, x, g)
    W = None
    change = np.inf
    history: list[float] = []
    for it in range(1, params.max_iter + 1):
        A, B, A_eff = _coefficients(st, market, c, pi)
        fvals = np.asarray(utility.f(c, x), dtype=float) * np.ones_like(x)
        W_new = _solve_linear(st, market, fvals, A, B, A_eff, W)
        if W is not None and params.relax < 1:
            W_new = params.relax * W_new + (1 - params.relax) * W
        scale = max(np.max(np.abs(W_new)), 1e-300)
        change = np.inf if W is None else np.max(np.abs(W_new - W)) / scale
        W = W_new
        dv, d2v = _full_derivatives(st, W, A, B, A_eff)
        c_new, pi_new, constrained, degenerate = _improve(utility, market, x, g, dv, d2v, c)
        log.debug("iteration %d: relative change %.3e", it, change)
        history.append(change)
        if change <= params.tol or np.max(np.abs(W)) == 0.0:
            break
        if _stalled(history, params.tol):
            log.debug("round-off floor reached at relative change %.3e", change)
            break
        c, pi = c_new, pi_new
    else:
        raise ConvergenceError(f"policy iteration did not converge in {params.max_iter} iterations",
                               float(change))

    scale = np.max(np.abs(W))
    interior_bad = d2v[1:-1] * x[1:-1] ** 2 > 1e-8 * scale
    if interior_bad.any():
        node = int(np.flatnonzero(interior_bad)[0]) + 1
        raise ConcavityError(node, float(x[node]))
    if degenerate[1:-1].any() and scale > 0:
        log.warning("%d nodes with d2v >= 0 at convergence", int(degenerate[1:-1].sum()))
    sol = ValueSolution(grid=grid, v=W, dv=dv, d2v=d2v, constrained=constrained,
                        c=c_new, pi=pi_new, iterations=it, degenerate=degenerate)
    res = hjb_residual(sol, market, utility, constraint)
    return replace(sol, residual_sup=res)


# --------------------------------------------------------------------------
# residual and convergence study
# --------------------------------------------------------------------------


def hamiltonian(market: MarketParams, utility: Utility, x, g, dv, d2v) -> np.ndarray:
    """``max_{0<=pi<=g}[(mu-r) pi dv + sigma^2 pi^2 d2v/2] + p(x, dv) + r x dv``."""
    x, g, dv, d2v = (np.asarray(a, dtype=float) for a in (x, g, dv, d2v))
    with np.errstate(all="ignore"):
        cand = np.where(d2v < 0, -market.excess * dv / (market.sigma**2 * d2v), np.inf)
        pi = np.clip(cand, 0.0, g)
        pi_term = market.excess * pi * dv + 0.5 * market.sigma**2 * pi**2 * d2v
        pi_term = np.where(pi == 0.0, 0.0, pi_term)
        p = np.asarray(utility.dual(x, dv).p, dtype=float)
        out = pi_term + p + market.r * x * dv
    return np.where(np.isfinite(out), out, np.inf)


def hjb_residual(solution: ValueSolution, market: MarketParams, utility: Utility,
                 constraint: Constraint) -> float:
    """Sup over interior nodes of ``|delta v - H(x, dv, d2v)|``."""
    x = solution.x[1:-1]
    g = np.asarray(constraint.g(x), dtype=float) * np.ones_like(x)
    H = hamiltonian(market, utility, x, g, solution.dv[1:-1], solution.d2v[1:-1])
    res = np.abs(market.delta * solution.v[1:-1] - H)
    return float(np.max(res))


@dataclass(frozen=True)
class ConvergenceTable:
    n: tuple[int, ...]
    differences: tuple[float, ...]
    orders: tuple[float, ...]

    @property
    def order(self) -> float:
        """Observed order from the finest pair of differences."""
        return self.orders[-1] if self.orders else float("nan")

    def rows(self):
        for k, n in enumerate(self.n):
            d = self.differences[k - 1] if k else float("nan")
            o = self.orders[k - 2] if k >= 2 else float("nan")
            yield n, d, o


def _common(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(fine, coarse)
    idx = np.clip(idx, 0, fine.size - 1)
    lo = np.clip(idx - 1, 0, fine.size - 1)
    pick = np.where(np.abs(fine[lo] - coarse) < np.abs(fine[idx] - coarse), lo, idx)
    if not np.allclose(fine[pick], coarse, rtol=1e-12, atol=0):
        raise ValueError("grids are not nested")
    return pick


def refine_study(market: MarketParams, utility: Utility, constraint: Constraint,
                 grids, params: SolverParams | None = None) -> ConvergenceTable:
    """Sup-norm differences of successive solutions on common nodes.

    The observed order is ``log(d_{k-1} / d_k) / log(refinement factor)``.
    """
    grids = list(grids)
    if len(grids) < 3:
        raise ValueError("a refinement study needs at least three grids")
    sols = [solve_hjb(market, utility, constraint, g, params) for g in grids]
    diffs, factors = [], []
    for a, b in zip(sols[:-1], sols[1:]):
        pick = _common(a.x, b.x)
        diffs.append(float(np.max(np.abs(b.v[pick] - a.v))))
        factors.append(b.grid.n / a.grid.n)
    orders = []
    for k in range(1, len(diffs)):
        with np.errstate(all="ignore"):
            orders.append(float(np.log(diffs[k - 1] / diffs[k]) / np.log(factors[k])))
    return ConvergenceTable(tuple(g.n for g in grids), tuple(diffs), tuple(orders))


def far_field_check(market: MarketParams, utility: Utility, constraint: Constraint,
                    grid: WealthGrid, params: SolverParams | None = None,
                    base: ValueSolution | None = None) -> float:
    """Relative change on the inner half of ``grid`` when ``x_max`` is doubled."""
    base = base or solve_hjb(market, utility, constraint, grid, params)
    wide = solve_hjb(market, utility, constraint, grid.extended(2.0), params)
    n = grid.nodes.size
    sl = slice(n // 4, n - n // 4)
    v0 = base.v[sl]
    v1 = wide.v[: n][sl]
    return float(np.max(np.abs(v1 - v0) / np.abs(v0)))
