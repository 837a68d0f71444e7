import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjbcap.hjb import (ConvergenceError, SolverParams, WealthGrid, far_field_check,
                        hjb_residual, refine_study, solve_hjb)
from hjbcap.model import ConstantL, CrraConsumption, Linear, MarketParams
from hjbcap.reference import merton_value


class TestGrid:
    def test_log_spaced(self):
        g = WealthGrid.log_spaced(10.0, 400)
        assert g.n == 400
        assert g.x_min == pytest.approx(1e-3) and g.x_max == 10.0

    @pytest.mark.parametrize("nodes", [np.geomspace(1e-3, 10, 100),
                                       np.linspace(-1, 10, 300),
                                       np.geomspace(1e-2, 10, 300)])
    def test_rejects(self, nodes):
        with pytest.raises(ValueError):
            WealthGrid(nodes)

    def test_refined_contains_coarse(self):
        g = WealthGrid.log_spaced(10.0, 250)
        f = g.refined(2)
        assert f.n == 500
        np.testing.assert_array_equal(f.nodes[::2], g.nodes)

    def test_extended(self):
        g = WealthGrid.log_spaced(10.0, 250)
        e = g.extended(2.0)
        np.testing.assert_array_equal(e.nodes[: g.nodes.size], g.nodes)
        assert e.x_max >= 20.0 * (1 - 1e-12)

    def test_nodes_read_only(self):
        with pytest.raises(ValueError):
            WealthGrid.log_spaced().nodes[0] = 1.0


class TestSolve:
    def test_merton_recovery_coarse(self, market, crra):
        sol = solve_hjb(market, crra, ConstantL(1e6), WealthGrid.log_spaced(10.0, 400))
        inner = slice(40, -40)
        np.testing.assert_allclose(sol.v[inner], merton_value(market, 0.5, sol.x[inner]),
                                   rtol=1e-3)
        assert not sol.constrained.any()

    def test_positive_rate(self, crra):
        m = MarketParams(0.07, 0.02, 0.2, 0.1)
        sol = solve_hjb(m, crra, ConstantL(1e6), WealthGrid.log_spaced(10.0, 800))
        inner = slice(80, -80)
        np.testing.assert_allclose(sol.v[inner], merton_value(m, 0.5, sol.x[inner]), rtol=1e-3)

    def test_shape_of_solution(self, capped):
        market, u, cap, sol = capped
        assert np.all(np.diff(sol.v) > 0)
        assert np.all(sol.dv > 0) and np.all(sol.d2v < 0)
        assert np.all(sol.pi <= 1.0) and np.all(sol.c >= 0)

    def test_residual_matches_stored(self, capped):
        market, u, cap, sol = capped
        assert hjb_residual(sol, market, u, cap) == sol.residual_sup
        assert sol.residual_sup <= 1e-6 * market.delta * np.max(np.abs(sol.v))

    def test_linear_cap_between_constant_caps(self, market, crra, capped):
        lo = capped[3]
        lin = solve_hjb(market, crra, Linear(0.5, 1.0))
        hi = solve_hjb(market, crra, ConstantL(6.0))
        assert np.all(lin.v >= lo.v - 1e-9) and np.all(lin.v <= hi.v + 1e-9)

    def test_deterministic(self, market, crra):
        a = solve_hjb(market, crra, ConstantL(1.0))
        b = solve_hjb(market, crra, ConstantL(1.0))
        assert a == b

    def test_ill_posed_rejected(self, crra):
        with pytest.raises(ValueError, match="well-posedness"):
            solve_hjb(MarketParams(0.07, 0.0, 0.2, 0.05), crra, ConstantL(1.0))

    def test_iteration_cap(self, market, crra):
        with pytest.raises(ConvergenceError):
            solve_hjb(market, crra, ConstantL(1.0), params=SolverParams(max_iter=2))

    def test_infinite_cap_rejected(self, market, crra):
        with pytest.raises(ValueError):
            solve_hjb(market, crra, ConstantL(float("inf")))

    @settings(max_examples=8, deadline=None)
    @given(L1=st.floats(0.2, 3.0), L2=st.floats(0.2, 3.0))
    def test_value_increases_with_cap(self, market, crra, L1, L2):
        lo, hi = sorted((L1, L2))
        a = solve_hjb(market, crra, ConstantL(lo))
        b = solve_hjb(market, crra, ConstantL(hi))
        scale = np.max(np.abs(b.v))
        assert np.all(a.v <= b.v + 1e-9 * scale)
        assert np.all(b.v[100:-100] <= merton_value(market, 0.5, b.x[100:-100]) * (1 + 1e-4))


class TestStudies:
    def test_refine_study_order(self, market, crra):
        grids = [WealthGrid.log_spaced(10.0, n) for n in (250, 500, 1000)]
        t = refine_study(market, crra, ConstantL(1.0), grids)
        assert t.order >= 1
        assert t.differences[1] < t.differences[0]
        assert len(list(t.rows())) == 3

    def test_refine_study_needs_three(self, market, crra):
        with pytest.raises(ValueError):
            refine_study(market, crra, ConstantL(1.0), [WealthGrid.log_spaced()] * 2)

    def test_far_field(self, market, crra):
        assert far_field_check(market, crra, ConstantL(1.0), WealthGrid.log_spaced()) < 1e-6
