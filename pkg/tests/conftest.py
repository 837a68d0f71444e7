import numpy as np
import pytest

from hjbcap.hjb import WealthGrid, solve_hjb
from hjbcap.model import (Additive, CobbDouglas, ConstantL, CrraConsumption, CrraWealth,
                          MarketParams)


@pytest.fixture(scope="session")
def market():
    return MarketParams(mu=0.07, r=0.0, sigma=0.2, delta=0.1)


@pytest.fixture(scope="session")
def crra():
    return CrraConsumption(0.5)


@pytest.fixture(scope="session")
def capped(market, crra):
    """CRRA consumption-only, constant cap L = 1, default grid."""
    cap = ConstantL(1.0)
    return market, crra, cap, solve_hjb(market, crra, cap)


@pytest.fixture(scope="session")
def merton(market, crra):
    cap = ConstantL(1e6)
    return market, crra, cap, solve_hjb(market, crra, cap, WealthGrid.log_spaced(10.0, 1000))


CASES = {
    "crra_consumption": (CrraConsumption(0.5), ConstantL(1.0)),
    "crra_consumption_R07": (CrraConsumption(0.7), ConstantL(1.0)),
    "crra_wealth": (CrraWealth(0.5), ConstantL(1.0)),
    "additive": (Additive(1.0, 0.5, 0.5, 0.5), ConstantL(1.0)),
    "cobb_douglas": (CobbDouglas(0.5, 0.2, 0.5), ConstantL(1.0)),
}


@pytest.fixture(scope="session")
def solved_cases(market):
    return {k: (u, c, solve_hjb(market, u, c)) for k, (u, c) in CASES.items()}


def rel(a, b):
    return np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
