"""Feedback controls read off a converged value function."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .hjb import ConcavityError, ValueSolution
from .model import Constraint, MarketParams, Utility

log = logging.getLogger(__name__)

REGION_NAMES = ("Unconstrained", "Constrained")
COLUMNS = ("x", "c", "pi", "pi_bar", "region")


@dataclass(frozen=True)
class PolicyTable:
    """Per-node consumption rate, risky dollar amount and region flag.

    ``g`` holds the cap at the nodes; ``constraint`` is kept when available
    so that interpolated positions can be clamped to the exact cap.
    """

    x: np.ndarray
    c: np.ndarray
    pi: np.ndarray
    constrained: np.ndarray
    g: np.ndarray
    constraint: Constraint | None = field(default=None, compare=False)

    @property
    def pi_bar(self) -> np.ndarray:
        return self.pi / self.x

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @cached_property
    def c_interp(self) -> PchipInterpolator:
        return PchipInterpolator(self.x, self.c, extrapolate=False)

    @cached_property
    def pi_interp(self) -> PchipInterpolator:
        return PchipInterpolator(self.x, self.pi, extrapolate=False)

    @cached_property
    def g_interp(self) -> PchipInterpolator:
        return PchipInterpolator(self.x, self.g, extrapolate=False)

    def cap(self, x):
        if self.constraint is not None:
            return np.asarray(self.constraint.g(x), dtype=float) * np.ones_like(x)
        if not np.all(np.isfinite(self.g)):
            return np.full(np.shape(x), np.inf)
        return self.g_interp(x)

    def __eq__(self, other):
        if not isinstance(other, PolicyTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("x", "c", "pi", "constrained", "g"))

    __hash__ = None


def extract_policy(solution: ValueSolution, utility: Utility, market: MarketParams,
                   constraint: Constraint) -> PolicyTable:
    """``c = I(x, V')`` and ``pi = min(-(mu-r) V' / (sigma^2 V''), g(x))`` per node."""
    x, dv, d2v = solution.x, solution.dv, solution.d2v
    bad = np.flatnonzero(~(d2v < 0))
    if bad.size:
        raise ConcavityError(int(bad[0]), float(x[bad[0]]))
    g = np.asarray(constraint.g(x), dtype=float) * np.ones_like(x)
    c = np.asarray(utility.inverse_marginal(x, dv), dtype=float) * np.ones_like(x)
    cand = -market.excess * dv / (market.sigma**2 * d2v)
    constrained = cand >= g
    pi = np.where(constrained, g, cand)
    if utility.wealth_only is False and np.any(np.diff(c) < 0):
        log.warning("consumption is not monotone in wealth at %d nodes",
                    int(np.sum(np.diff(c) < 0)))
    return PolicyTable(x=x.copy(), c=c, pi=pi, constrained=constrained, g=g,
                       constraint=constraint)


def policy_at(table: PolicyTable, x) -> tuple:
    """Monotone cubic interpolation of ``(c, pi)`` at wealth ``x``.

    ``pi`` is clamped to ``[0, g(x)]`` and ``c`` to ``[0, inf)``. Raises
    ``ValueError`` outside ``[x_min, x_max]``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < table.x_min) or np.any(xa > table.x_max) or np.any(np.isnan(xa)):
        raise ValueError(f"wealth outside the policy grid [{table.x_min:.6g}, {table.x_max:.6g}]")
    c = np.maximum(table.c_interp(xa), 0.0)
    pi = np.clip(table.pi_interp(xa), 0.0, table.cap(xa))
    if xa.ndim == 0:
        return float(c), float(pi)
    return c, pi


def write_csv(table: PolicyTable, path, header: list[str] | None = None) -> None:
    """Write ``x, c, pi, pi_bar, region``; ``header`` lines are prefixed with ``#``."""
    with open(path, "w", newline="") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for xi, ci, pii, pbi, fl in zip(table.x, table.c, table.pi, table.pi_bar, table.constrained):
            w.writerow([repr(float(xi)), repr(float(ci)), repr(float(pii)), repr(float(pbi)),
                        REGION_NAMES[int(fl)]])


def read_csv(path, constraint: Constraint | None = None) -> PolicyTable:
    """Inverse of :func:`write_csv`. Without ``constraint`` the cap at each
    node is taken from ``pi`` on constrained nodes and ``+inf`` elsewhere."""
    rows = []
    with open(path, newline="") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        r = csv.reader(lines)
        header = next(r)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected policy columns {header}")
        rows = list(r)
    x = np.array([float(a[0]) for a in rows])
    c = np.array([float(a[1]) for a in rows])
    pi = np.array([float(a[2]) for a in rows])
    try:
        constrained = np.array([REGION_NAMES.index(a[4]) for a in rows], dtype=bool)
    except ValueError as exc:
        raise ValueError(f"unknown region tag in {path}") from exc
    if constraint is not None:
        g = np.asarray(constraint.g(x), dtype=float) * np.ones_like(x)
    else:
        g = np.where(constrained, pi, np.inf)
    return PolicyTable(x=x, c=c, pi=pi, constrained=constrained, g=g, constraint=constraint)
