import math

import numpy as np
import pytest

from hjbcap.hjb import WealthGrid, solve_hjb
from hjbcap.model import ConstantL, CrraWealth, Custom, MarketParams
from hjbcap.montecarlo import (AdmissibilityError, FreezeError, SimConfig, dominance_check,
                               horizon_for, merton_table, simulate_value, tail_bound)
from hjbcap.policy import PolicyTable, extract_policy
from hjbcap.reference import merton_policy


@pytest.fixture(scope="module")
def setup(capped):
    market, u, cap, sol = capped
    return market, u, extract_policy(sol, u, market, cap)


def cfg(**kw):
    base = dict(x0=1.0, horizon=2.0, n_paths=2000, seed=11, dt=1e-3)
    return SimConfig(**{**base, **kw})


class TestConfig:
    def test_default_dt(self):
        assert SimConfig(1.0, 50.0, 1000, 0).dt == pytest.approx(5e-3)

    @pytest.mark.parametrize("kw", [dict(dt=0.01), dict(n_paths=999), dict(horizon=0.0),
                                    dict(x0=-1.0), dict(seed=-3), dict(seed=2**64)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)

    def test_steps(self):
        assert cfg().n_steps == 2000


class TestRiskless:
    def test_consumption_only_matches_discrete_sum(self, setup):
        market, u, table = setup
        A, _ = merton_policy(market, 0.5)
        alt = merton_table(table, A)
        c = cfg(horizon=5.0)
        res = simulate_value(alt, market, u, c)
        n = np.arange(c.n_steps)
        x = (1.0 - A * c.dt) ** n
        exact = np.sum(c.dt * np.exp(-market.delta * c.dt * n) * 2.0 * np.sqrt(A * x))
        assert res.estimate == pytest.approx(exact, rel=1e-11)
        assert res.stderr == 0.0
        cont = 4 * math.sqrt(A) / (2 * market.delta + A) * (1 - math.exp(-(market.delta + A / 2) * 5))
        assert res.estimate == pytest.approx(cont, rel=1e-3)

    def test_zero_policy_earns_nothing(self, setup):
        market, u, table = setup
        zero = merton_table(table, 0.0)
        res = simulate_value(zero, market, u, cfg())
        assert res.estimate == 0.0 and res.stderr == 0.0 and res.absorbed_frac == 0.0


class TestEstimator:
    def test_deterministic(self, setup):
        market, u, table = setup
        assert simulate_value(table, market, u, cfg()) == simulate_value(table, market, u, cfg())

    def test_seed_matters(self, setup):
        market, u, table = setup
        a = simulate_value(table, market, u, cfg(seed=1))
        b = simulate_value(table, market, u, cfg(seed=2))
        assert a.estimate != b.estimate

    def test_dominance_leg_is_simulate_value(self, setup):
        market, u, table = setup
        alt = merton_table(table, merton_policy(market, 0.5)[0])
        rep = dominance_check(table, alt, market, u, cfg())
        assert rep.optimal == simulate_value(table, market, u, cfg())
        assert rep.z_score > 3 and not rep.violation
        assert set(rep.to_dict()) >= {"optimal", "alternative", "z_score"}

    def test_stderr_scaling(self, setup):
        market, u, table = setup
        a = simulate_value(table, market, u, cfg(n_paths=2000))
        b = simulate_value(table, market, u, cfg(n_paths=8000))
        assert 0.4 < b.stderr / a.stderr < 0.6

    def test_paths_are_a_prefix(self, setup, tmp_path):
        market, u, table = setup
        simulate_value(table, market, u, cfg(n_paths=1000), paths_csv=tmp_path / "a.csv")
        simulate_value(table, market, u, cfg(n_paths=1500), paths_csv=tmp_path / "b.csv")
        a = (tmp_path / "a.csv").read_text().splitlines()
        b = (tmp_path / "b.csv").read_text().splitlines()
        assert a[0] == "path,reward,absorbed,frozen" and len(a) == 1001
        assert b[: len(a)] == a

    def test_wealth_utility_short_horizon(self, market):
        u, cap = CrraWealth(0.5), ConstantL(1.0)
        sol = solve_hjb(market, u, cap)
        t = extract_policy(sol, u, market, cap)
        res = simulate_value(t, market, u, cfg(horizon=0.5, n_paths=4000, dt=5e-4))
        # over a short window X stays close to x0, so the reward is about 2 * 0.5
        assert res.estimate == pytest.approx(2 * (1 - math.exp(-0.05)) / 0.1, rel=2e-2)


class TestGuards:
    def test_inadmissible_policy(self, setup):
        market, u, table = setup
        bad = PolicyTable(x=table.x, c=table.c, pi=table.pi * 1.5, constrained=table.constrained,
                          g=table.g)
        with pytest.raises(AdmissibilityError):
            simulate_value(bad, market, u, cfg())

    def test_freeze(self, market, crra):
        cap = ConstantL(1.0)
        sol = solve_hjb(market, crra, cap, WealthGrid.log_spaced(2.0, 400))
        t = extract_policy(sol, crra, market, cap)
        with pytest.raises(FreezeError):
            simulate_value(t, market, crra, cfg(x0=1.9, horizon=20.0))

    def test_custom_utility_unsupported(self, setup):
        market, _, table = setup
        u = Custom(*(lambda c, x: 0 * c for _ in range(6)))
        with pytest.raises(TypeError):
            simulate_value(table, market, u, cfg())

    def test_x0_outside_grid(self, setup):
        market, u, table = setup
        with pytest.raises(ValueError):
            simulate_value(table, market, u, cfg(x0=100.0))


class TestTail:
    def test_decreasing_in_horizon(self, setup):
        market, u, table = setup
        b = [tail_bound(table, market, u, 1.0, T) for T in (1.0, 10.0, 50.0)]
        assert b[0] > b[1] > b[2] > 0

    def test_horizon_for_meets_target(self, setup):
        market, u, table = setup
        T = horizon_for(table, market, u, 1.0, 0.05)
        assert tail_bound(table, market, u, 1.0, T) <= 0.05
        assert tail_bound(table, market, u, 1.0, T - 0.01) > 0.05

    def test_bounds_riskless_tail(self, setup):
        market, u, table = setup
        A, _ = merton_policy(market, 0.5)
        alt = merton_table(table, A)
        T = 5.0
        exact_tail = 4 * math.sqrt(A) / (2 * market.delta + A) * math.exp(-(market.delta + A / 2) * T)
        assert tail_bound(alt, market, u, 1.0, T) >= exact_tail
