"""Problem configuration files and tabular output.

A configuration is one JSON object::

    {
      "market":     {"mu": 0.07, "r": 0.0, "sigma": 0.2, "delta": 0.1},
      "utility":    {"type": "crra_consumption", "R": 0.5},
      "constraint": {"type": "constant", "L": 1.0},
      "grid":       {"x_max": 10.0, "n": 1000, "ratio": 1e-4},
      "solver":     {"tol": 1e-10, "max_iter": 500, "relax": 1.0},
      "sim":        {"x0": 1.0, "n_paths": 100000, "seed": 7, "dt": 0.001}
    }

``grid``, ``solver`` and ``sim`` may be omitted. Unknown keys are errors.
Floats are written with ``repr`` so a load/dump cycle is bit-exact.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .hjb import SolverParams, ValueSolution, WealthGrid
from .model import (CONSTRAINT_TYPES, UTILITY_TYPES, Constraint, MarketParams, Utility,
                    constraint_from_dict, utility_from_dict)

__version__ = "0.1.0"


class ConfigError(ValueError):
    """Malformed configuration: bad JSON, unknown or missing keys, wrong types."""


@dataclass(frozen=True)
class GridSpec:
    x_max: float = 10.0
    n: int = 1000
    ratio: float = 1e-4

    def build(self) -> WealthGrid:
        return WealthGrid.log_spaced(self.x_max, self.n, self.ratio)


@dataclass(frozen=True)
class SimSpec:
    """Simulation block. ``horizon = None`` sizes the horizon from the tail
    bound so that it stays below ``tail_rel * V(x0)``."""

    x0: float = 1.0
    n_paths: int = 100_000
    seed: int = 0
    dt: float | None = None
    horizon: float | None = None
    tail_rel: float = 1e-3


@dataclass(frozen=True)
class ProblemConfig:
    market: MarketParams
    utility: Utility
    constraint: Constraint
    grid: GridSpec = GridSpec()
    solver: SolverParams = SolverParams()
    sim: SimSpec | None = None

    def to_dict(self) -> dict:
        d = {"market": dataclasses.asdict(self.market), "utility": self.utility.to_dict(),
             "constraint": self.constraint.to_dict(), "grid": dataclasses.asdict(self.grid),
             "solver": dataclasses.asdict(self.solver)}
        if self.sim is not None:
            d["sim"] = dataclasses.asdict(self.sim)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


_TOP = ("market", "utility", "constraint", "grid", "solver", "sim")


def _fields(cls) -> dict:
    return {f.name: f.type for f in dataclasses.fields(cls)}


def _number(block, key, v, integer=False, optional=False):
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{block}.{key}: expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{block}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v) if isinstance(v, int) else v


def _plain(block: str, raw, cls, ints=(), optional=()):
    if not isinstance(raw, dict):
        raise ConfigError(f"{block}: expected an object")
    allowed = _fields(cls)
    extra = sorted(set(raw) - set(allowed))
    if extra:
        raise ConfigError(f"{block}: unknown field(s) {', '.join(extra)}")
    kw = {k: _number(block, k, v, k in ints, k in optional) for k, v in raw.items()}
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{block}: {exc}") from None


def _tagged(block: str, raw, registry, build):
    if not isinstance(raw, dict):
        raise ConfigError(f"{block}: expected an object")
    kind = raw.get("type")
    if kind not in registry:
        raise ConfigError(f"{block}.type: unknown variant {kind!r} "
                          f"(known: {', '.join(sorted(registry))})")
    allowed = {f.name for f in dataclasses.fields(registry[kind])}
    extra = sorted(set(raw) - allowed - {"type"})
    if extra:
        raise ConfigError(f"{block}: unknown field(s) {', '.join(extra)} for {kind}")
    missing = sorted(allowed - set(raw))
    if missing:
        raise ConfigError(f"{block}: missing field(s) {', '.join(missing)} for {kind}")
    for k, v in raw.items():
        if k != "type":
            _number(block, k, v)
    return build({k: (float(v) if k != "type" else v) for k, v in raw.items()})


def config_from_dict(d) -> ProblemConfig:
    """Build a :class:`ProblemConfig`.

    Structural problems raise :class:`ConfigError`; parameter values that
    violate a domain rule (for example ``L <= 0``) raise plain ``ValueError``.
    """
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    extra = sorted(set(d) - set(_TOP))
    if extra:
        raise ConfigError(f"unknown top-level field(s) {', '.join(extra)}")
    for key in ("market", "utility", "constraint"):
        if key not in d:
            raise ConfigError(f"missing block {key!r}")
    market = _plain("market", d["market"], MarketParams)
    utility = _tagged("utility", d["utility"], UTILITY_TYPES, utility_from_dict)
    constraint = _tagged("constraint", d["constraint"], CONSTRAINT_TYPES, constraint_from_dict)
    grid = _plain("grid", d.get("grid", {}), GridSpec, ints=("n",))
    solver = _plain("solver", d.get("solver", {}), SolverParams, ints=("max_iter",))
    sim = None
    if d.get("sim") is not None:
        sim = _plain("sim", d["sim"], SimSpec, ints=("n_paths", "seed"),
                     optional=("dt", "horizon"))
    return ProblemConfig(market, utility, constraint, grid, solver, sim)


def loads_config(text: str) -> ProblemConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(d)


def load_config(path) -> ProblemConfig:
    with open(path) as fh:
        return loads_config(fh.read())


def header_lines(config: ProblemConfig) -> list[str]:
    return [f"hjbcap {__version__}", f"config_sha256 {config.digest()}"]


def header_dict(config: ProblemConfig) -> dict:
    return {"version": __version__, "config_sha256": config.digest()}


# --------------------------------------------------------------------------
# value tables
# --------------------------------------------------------------------------

VALUE_COLUMNS = ("x", "V", "dV", "d2V", "region")


def write_value_csv(solution: ValueSolution, path, header: list[str] | None = None) -> None:
    """Write ``x, V, dV, d2V, region``; ``header`` lines are prefixed with ``#``."""
    with open(path, "w", newline="") as fh:
        for line in header or ():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VALUE_COLUMNS)
        for row in zip(solution.x, solution.v, solution.dv, solution.d2v, solution.constrained):
            w.writerow([repr(float(a)) for a in row[:4]]
                       + ["Constrained" if row[4] else "Unconstrained"])


def read_value_csv(path) -> dict[str, np.ndarray]:
    """Columns of a value table as arrays; ``region`` becomes a bool mask."""
    with open(path, newline="") as fh:
        r = csv.reader(ln for ln in fh if not ln.startswith("#"))
        header = next(r)
        if tuple(header) != VALUE_COLUMNS:
            raise ValueError(f"unexpected value columns {header}")
        rows = list(r)
    out = {k: np.array([float(a[i]) for a in rows]) for i, k in enumerate(VALUE_COLUMNS[:4])}
    out["constrained"] = np.array([a[4] == "Constrained" for a in rows])
    return out


def dump_json(obj, path) -> None:
    """Deterministic JSON (sorted keys, ``repr`` floats, non-finite as null)."""
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj
