"""Command-line front end.

    hjbcap validate --config cfg.json
    hjbcap solve    --config cfg.json --out DIR [--grid-n N] [--xmax F]
    hjbcap sweep    --config cfg.json --out DIR --sweep-param L --values 0.5,1,2
    hjbcap simulate --config cfg.json --out DIR [--policy policy.csv] [--seed U64]

Exit codes: 0 success, 1 domain failure (validation, convergence, bad
parameter values), 2 usage or parse error. ``HJB_LOG`` sets the log level
(``debug``, ``info``, ``warning``, ``error``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import dual, montecarlo, policy, region
from .hjb import ConcavityError, ConvergenceError, ValueSolution, hjb_residual, solve_hjb
from .io import (ConfigError, ProblemConfig, SimSpec, dump_json, header_dict, header_lines,
                 load_config, write_value_csv)
from .model import ConstantL, Linear, validate

log = logging.getLogger("hjbcap")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
SWEEP_COLUMNS = ("L", "xstar", "V_x0", "pi_bar_x0")


def value_at(solution: ValueSolution, x0: float) -> float:
    """Cubic spline of ``V`` in ``log x`` evaluated at ``x0``."""
    if not solution.x[0] <= x0 <= solution.x[-1]:
        raise ValueError(f"x0={x0} outside the grid")
    return float(CubicSpline(np.log(solution.x), solution.v)(math.log(x0)))


def _apply_overrides(cfg: ProblemConfig, args) -> ProblemConfig:
    grid = cfg.grid
    if getattr(args, "grid_n", None) is not None:
        grid = dataclasses.replace(grid, n=args.grid_n)
    if getattr(args, "xmax", None) is not None:
        grid = dataclasses.replace(grid, x_max=args.xmax)
    sim = cfg.sim
    if getattr(args, "seed", None) is not None:
        sim = dataclasses.replace(sim or SimSpec(), seed=args.seed)
    return dataclasses.replace(cfg, grid=grid, sim=sim)


def _solve(cfg: ProblemConfig) -> ValueSolution:
    return solve_hjb(cfg.market, cfg.utility, cfg.constraint, cfg.grid.build(), cfg.solver)


def _region_report(cfg: ProblemConfig, sol: ValueSolution) -> dict:
    if cfg.constraint.is_constant and math.isfinite(cfg.constraint.L):
        return region.certify_two_region(sol, cfg.utility, cfg.market, cfg.constraint.L).to_dict()
    switches = int(np.count_nonzero(np.diff(sol.constrained.astype(int))))
    return {"xstar": None, "certified": None, "transitions": switches,
            "diagnostic": "certification applies to a constant cap only"}


def _diagnostics(cfg: ProblemConfig, sol: ValueSolution) -> dict:
    scale = cfg.market.delta * float(np.max(np.abs(sol.v)))
    res = hjb_residual(sol, cfg.market, cfg.utility, cfg.constraint)
    out = {"iterations": sol.iterations, "hjb_residual": res,
           "hjb_residual_rel": res / scale if scale > 0 else None,
           "n_constrained": int(np.count_nonzero(sol.constrained)),
           "n_nodes": int(sol.x.size)}
    try:
        out["dual_residual"] = dual.dual_residual(dual.to_dual(sol), cfg.market, cfg.utility)
    except dual.DualError as exc:
        out["dual_residual"] = None
        out["dual_note"] = str(exc)
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_validate(cfg: ProblemConfig, args) -> int:
    report = validate(cfg.market, cfg.utility, cfg.constraint)
    for line in report.lines():
        print(line)
    if not report.ok:
        names = ", ".join(ch.name for ch in report.failed(mandatory_only=True))
        print(f"validation failed: {names}")
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_solve(cfg: ProblemConfig, args) -> int:
    out = _outdir(args)
    sol = _solve(cfg)
    table = policy.extract_policy(sol, cfg.utility, cfg.market, cfg.constraint)
    head = header_lines(cfg)
    write_value_csv(sol, out / "value.csv", head)
    policy.write_csv(table, out / "policy.csv", head)
    reg = _region_report(cfg, sol)
    dump_json({**header_dict(cfg), **reg}, out / "region.json")
    dump_json({**header_dict(cfg), **_diagnostics(cfg, sol)}, out / "diagnostics.json")
    xs = reg.get("xstar")
    print(f"converged in {sol.iterations} iterations; "
          + (f"x* = {xs:.6g}" if xs is not None else "cap never binds"))
    return EXIT_OK


def cmd_sweep(cfg: ProblemConfig, args) -> int:
    if args.sweep_param != "L":
        raise ConfigError(f"unsupported sweep parameter {args.sweep_param!r} (only L)")
    if not args.values:
        raise ConfigError("--values is required for sweep")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: cannot parse {args.values!r}") from None
    if not values:
        raise ConfigError("--values is empty")
    out = _outdir(args)
    x0 = cfg.sim.x0 if cfg.sim else 1.0
    rows = []
    for L in values:
        c = cfg.constraint
        cap = Linear(c.k, L) if isinstance(c, Linear) else ConstantL(L)
        sub = dataclasses.replace(cfg, constraint=cap)
        sol = _solve(sub)
        table = policy.extract_policy(sol, sub.utility, sub.market, cap)
        xs = None
        if cap.is_constant:
            fit = region.refine_xstar(sol, sub.utility, sub.market, cap)
            xs = None if fit is None else fit.xstar
        _, pi0 = policy.policy_at(table, x0)
        rows.append((L, xs, value_at(sol, x0), pi0 / x0))
    order = sorted(rows, key=lambda r: r[0])
    found = [r[1] for r in order if r[1] is not None]
    increasing = all(b > a for a, b in zip(found, found[1:]))
    with open(out / "sweep.csv", "w", newline="") as fh:
        for line in header_lines(cfg):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for L, xs, v, pb in rows:
            w.writerow([repr(L), "" if xs is None else repr(xs), repr(v), repr(pb)])
    dump_json({**header_dict(cfg), "x0": x0, "xstar_increasing_in_L": increasing,
               "rows": [dict(zip(SWEEP_COLUMNS, r)) for r in rows]}, out / "sweep.json")
    print(f"{len(rows)} solves; x* increasing in L: {str(increasing).lower()}")
    return EXIT_OK


def cmd_simulate(cfg: ProblemConfig, args) -> int:
    out = _outdir(args)
    sim = cfg.sim or SimSpec()
    sol = _solve(cfg)
    if args.policy:
        table = policy.read_csv(args.policy, cfg.constraint)
    else:
        table = policy.extract_policy(sol, cfg.utility, cfg.market, cfg.constraint)
    v0 = value_at(sol, sim.x0)
    target = sim.tail_rel * abs(v0)
    T = sim.horizon
    if T is None:
        T = montecarlo.horizon_for(table, cfg.market, cfg.utility, sim.x0, target)
    dt = sim.dt if sim.dt is not None else min(1e-3, 1e-3 * T)
    conf = montecarlo.SimConfig(sim.x0, T, sim.n_paths, sim.seed, dt)
    res = montecarlo.simulate_value(table, cfg.market, cfg.utility, conf, tail_target=target)
    allowance = 3.0 * res.stderr + res.tail_bound + 1e-2 * abs(v0)
    gap = abs(res.estimate - v0)
    consistent = gap <= allowance
    dump_json({**header_dict(cfg), **res.to_dict(), "x0": sim.x0, "horizon": T, "dt": dt,
               "seed": sim.seed, "value_x0": v0, "gap": gap, "allowance": allowance,
               "consistent": consistent}, out / "sim.json")
    print(f"estimate {res.estimate:.6g} +- {res.stderr:.2g}, V(x0) {v0:.6g}: "
          + ("consistent" if consistent else "INCONSISTENT"))
    return EXIT_OK if consistent else EXIT_DOMAIN


COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "sweep": cmd_sweep,
            "simulate": cmd_simulate}


def _outdir(args) -> Path:
    if not args.out:
        raise ConfigError("--out is required")
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hjbcap", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", metavar="DIR")
        s.add_argument("--seed", type=_u64, metavar="U64")
        s.add_argument("--grid-n", type=int, metavar="N")
        s.add_argument("--xmax", type=float, metavar="F")
        if name == "sweep":
            s.add_argument("--sweep-param", default="L", metavar="NAME")
            s.add_argument("--values", metavar="CSVLIST")
        if name == "simulate":
            s.add_argument("--policy", metavar="PATH")
    return p


def _setup_logging():
    level = os.environ.get("HJB_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ConvergenceError, ConcavityError, region.RegionInconsistency,
            montecarlo.FreezeError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
