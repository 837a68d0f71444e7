import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjbcap.hjb import WealthGrid, solve_hjb
from hjbcap.model import ConstantL, Linear
from hjbcap.region import (RegionInconsistency, SignPattern, additive_m, binding_at,
                           certify_two_region, classify_sign_pattern, compute_m, compute_Y,
                           multiplicative_n, multiplicative_prefactor, refine_xstar,
                           unconstrained_candidate)


class TestSignPattern:
    @pytest.mark.parametrize("vals,expected", [
        ([-3, -2, -1], SignPattern.NO_CHANGE),
        ([3, 1, -1, -2], SignPattern.POSITIVE_TO_NEGATIVE),
        ([-1, 0, 2], SignPattern.NEGATIVE_TO_POSITIVE),
        ([1, -1, 1], SignPattern.MULTIPLE),
        ([0, 0, 0], SignPattern.NO_CHANGE),
        ([1, 1e-12, -1e-12, 1], SignPattern.NO_CHANGE),
    ])
    def test_cases(self, vals, expected):
        assert classify_sign_pattern(vals) == expected

    @given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=30),
           st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=30))
    def test_single_crossing(self, pos, neg):
        vals = np.array(pos + [-v for v in neg])
        assert classify_sign_pattern(vals, deadband=0.0) == SignPattern.POSITIVE_TO_NEGATIVE
        assert classify_sign_pattern(-vals, deadband=0.0) == SignPattern.NEGATIVE_TO_POSITIVE


class TestBindingMargin:
    def test_Y_sign_matches_flags(self, capped):
        market, u, cap, sol = capped
        Y = compute_Y(sol, market, 1.0)
        np.testing.assert_array_equal(Y >= 0, sol.constrained)

    def test_binding_at(self, capped):
        market, u, cap, sol = capped
        for k in (0, 300, 700, sol.x.size - 1):
            assert binding_at(sol, market, cap, k) == bool(sol.constrained[k])
        assert not binding_at(sol, market, ConstantL(float("inf")), 500)

    def test_candidate_is_the_slack_position(self, capped):
        market, u, cap, sol = capped
        cand = unconstrained_candidate(sol, market)
        slack = ~sol.constrained
        np.testing.assert_allclose(sol.pi[slack], cand[slack], rtol=1e-12)
        assert np.all(cand[sol.constrained] >= 1.0)


class TestCertification:
    def test_crra_consumption(self, capped):
        market, u, cap, sol = capped
        rep = certify_two_region(sol, u, market, 1.0)
        assert rep.certified and rep.sign_pattern == SignPattern.NO_CHANGE
        assert rep.transitions == 1 and rep.m_root is None
        assert np.all(rep.m_samples < 0)
        j = np.argmax(sol.constrained)
        assert sol.x[j - 1] <= rep.xstar <= sol.x[j]

    def test_wealth_only_root(self, market, solved_cases):
        u, cap, sol = solved_cases["crra_wealth"]
        rep = certify_two_region(sol, u, market, 1.0)
        assert rep.sign_pattern == SignPattern.POSITIVE_TO_NEGATIVE
        # the root sits where the unconstrained proportion (mu-r)/(sigma^2 R) hits L / x
        assert rep.m_root == pytest.approx(0.04 * 0.5 / 0.07, rel=1e-3)

    def test_additive_closed_form(self, market, solved_cases):
        u, cap, sol = solved_cases["additive"]
        np.testing.assert_allclose(additive_m(sol, u, market, 1.0),
                                   compute_m(sol, u, market, 1.0), rtol=1e-10, atol=1e-12)

    def test_multiplicative_reduction(self, market, solved_cases):
        u, cap, sol = solved_cases["cobb_douglas"]
        m = compute_m(sol, u, market, 1.0)
        n = multiplicative_n(u, market, 1.0, sol)
        np.testing.assert_allclose(multiplicative_prefactor(u, sol) * n, m, rtol=1e-9,
                                   atol=1e-12 * np.max(np.abs(m)))
        with pytest.raises(TypeError):
            multiplicative_n(solved_cases["additive"][0], market, 1.0, sol)

    def test_all_cases_certify(self, market, solved_cases):
        for name, (u, cap, sol) in solved_cases.items():
            rep = certify_two_region(sol, u, market, cap.L)
            assert rep.certified, name
            assert rep.smooth_fit is not None
            assert rep.to_dict()["sign_pattern"] == rep.sign_pattern.value

    def test_inconsistent_flags_raise(self, capped):
        market, u, cap, sol = capped
        flags = sol.constrained.copy()
        flags[100:110] = True
        with pytest.raises(RegionInconsistency):
            certify_two_region(dataclasses.replace(sol, constrained=flags), u, market, 1.0)

    def test_never_binding(self, merton):
        market, u, cap, sol = merton
        rep = certify_two_region(sol, u, market, cap.L)
        assert rep.xstar is None and rep.transitions == 0 and rep.diagnostic
        assert refine_xstar(sol, u, market, cap) is None


class TestSmoothFit:
    def test_mismatch_shrinks(self, market, crra):
        fits = []
        for n in (1000, 2000, 4000):
            sol = solve_hjb(market, crra, ConstantL(1.0), WealthGrid.log_spaced(10.0, n))
            fits.append(refine_xstar(sol, crra, market, ConstantL(1.0)))
        for a, b in zip(fits, fits[1:]):
            assert all(x / y >= 2 for x, y in zip(a.rel, b.rel))
        assert fits[-1].xstar == pytest.approx(fits[-2].xstar, rel=1e-5)

    def test_needs_constant_cap(self, capped):
        market, u, cap, sol = capped
        with pytest.raises(ValueError):
            refine_xstar(sol, u, market, Linear(0.1, 1.0))
