"""Simulate the extracted policy and compare with the grid value.

Uses the counter-based Gaussian stream, so the numbers printed here are the
same on every run. Paired against a riskless consumption rule on common
random numbers, the optimal policy wins by a wide margin.

    python3 demos/monte_carlo_check.py [n_paths]
"""

import sys

from hjbcap import (ConstantL, CrraConsumption, MarketParams, SimConfig, dominance_check,
                    extract_policy, merton_policy, solve_hjb)
from hjbcap.cli import value_at
from hjbcap.montecarlo import horizon_for, merton_table

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
market = MarketParams(mu=0.07, r=0.0, sigma=0.2, delta=0.1)
u, cap = CrraConsumption(0.5), ConstantL(1.0)
sol = solve_hjb(market, u, cap)
table = extract_policy(sol, u, market, cap)

x0 = 1.0
v0 = value_at(sol, x0)
T = horizon_for(table, market, u, x0, 1e-3 * v0)
print(f"V({x0}) = {v0:.5f}; horizon with tail bound below 1e-3 V: T = {T}")

alt = merton_table(table, merton_policy(market, u.R)[0], pi_prop=0.0)
rep = dominance_check(table, alt, market, u, SimConfig(x0, T, n_paths, seed=20261017, dt=1e-3))
o, a = rep.optimal, rep.alternative
print(f"optimal policy : {o.estimate:.5f} +- {o.stderr:.5f} (tail {o.tail_bound:.1e})")
print(f"riskless rule  : {a.estimate:.5f}")
print(f"difference     : {rep.mean_diff:.4f} +- {rep.stderr_diff:.4f}  (z = {rep.z_score:.0f})")
print(f"|estimate - V| = {abs(o.estimate - v0):.4f}, "
      f"allowance = {3 * o.stderr + o.tail_bound + 1e-2 * v0:.4f}")
