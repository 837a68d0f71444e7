"""The slack region in dual coordinates.

Maps the solved value function to ``v(y) = V(x) - x y`` with ``y = V'(x)``,
checks the dual ODE residual, and re-integrates the dual ODE as an initial
value problem from the low-wealth end to see how far it tracks the grid.

    python3 demos/dual_ode.py
"""

import numpy as np

from hjbcap import (ConstantL, CrraConsumption, MarketParams, dual_residual, integrate_dual,
                    solve_hjb, to_dual)

market = MarketParams(mu=0.07, r=0.0, sigma=0.2, delta=0.1)
u = CrraConsumption(0.5)
sol = solve_hjb(market, u, ConstantL(1.0))
d = to_dual(sol)
print(f"{len(d)} slack nodes, y in [{d.y[0]:.4g}, {d.y[-1]:.4g}]")
print(f"dual ODE residual / (delta max|v|): {dual_residual(d, market, u):.2e}")

# integrate from the largest y (lowest wealth) down towards the boundary
k = len(d) - 1
ivp = integrate_dual(market, u, d.y[k], d.v[k], d.dv[k], d.y[0], n_out=6)
for y, H in zip(ivp.y, ivp.H):
    print(f"  y={y:9.4g}  wealth from IVP {H:9.5f}  from grid {np.interp(y, d.y, d.H):9.5f}")
