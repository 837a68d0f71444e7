"""Where does the borrowing cap start to bind?

Solves the CRRA consumption problem with a constant cap L for a few values
of L, certifies the two-region structure, and prints the free boundary x*
together with the smooth-fit mismatch of V', V'' across it.

    python3 demos/free_boundary.py
"""

from hjbcap import (ConstantL, CrraConsumption, MarketParams, certify_two_region,
                    extract_policy, solve_hjb)

market = MarketParams(mu=0.07, r=0.0, sigma=0.2, delta=0.1)
u = CrraConsumption(0.5)
merton_share = market.excess / (market.sigma**2 * u.R)
print(f"uncapped risky share (mu-r)/(sigma^2 R) = {merton_share:.3f}")
print(f"{'L':>5} {'x*':>9} {'L/share':>9} {'certified':>9} {'dV1 rel':>9} {'dV2 rel':>9}")
for L in (0.25, 0.5, 1.0, 2.0, 4.0):
    cap = ConstantL(L)
    sol = solve_hjb(market, u, cap)
    rep = certify_two_region(sol, u, market, L)
    fit = rep.smooth_fit
    print(f"{L:5.2f} {rep.xstar:9.5f} {L / merton_share:9.5f} {str(rep.certified):>9} "
          f"{fit.rel[1]:9.1e} {fit.rel[2]:9.1e}")

# the cap binds later than the naive guess L / share: anticipating the cap,
# the investor takes slightly less risk than the uncapped rule below x*
table = extract_policy(sol, u, market, cap)
k = len(table.x) // 2
print(f"\nL=4: at x={table.x[k]:.3f}, pi/x={table.pi_bar[k]:.3f} "
      f"({'constrained' if table.constrained[k] else 'unconstrained'})")
