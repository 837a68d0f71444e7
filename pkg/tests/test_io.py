import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hjbcap.io import (ConfigError, GridSpec, ProblemConfig, SimSpec, config_from_dict,
                       load_config, loads_config, read_value_csv, write_value_csv)
from hjbcap.hjb import SolverParams
from hjbcap.model import Additive, ConstantL, Linear, MarketParams

BASE = {
    "market": {"mu": 0.07, "r": 0.0, "sigma": 0.2, "delta": 0.1},
    "utility": {"type": "crra_consumption", "R": 0.5},
    "constraint": {"type": "constant", "L": 1.0},
}


def test_defaults_filled():
    cfg = config_from_dict(BASE)
    assert cfg.grid == GridSpec() and cfg.solver == SolverParams() and cfg.sim is None
    assert cfg.market == MarketParams(0.07, 0.0, 0.2, 0.1)


def test_full_round_trip(tmp_path):
    cfg = ProblemConfig(MarketParams(0.07, 0.01, 0.2, 0.1), Additive(1.0, 0.3, 0.5, 0.6),
                        Linear(0.25, 1.5), GridSpec(20.0, 800, 1e-4), SolverParams(1e-9, 50, 0.9),
                        SimSpec(2.0, 5000, 2**63 + 17, 1e-3, 10.0, 1e-3))
    (tmp_path / "c.json").write_text(cfg.dumps())
    back = load_config(tmp_path / "c.json")
    assert back == cfg
    assert back.dumps() == cfg.dumps() and back.digest() == cfg.digest()


finite = st.floats(allow_nan=False, allow_infinity=False)


@given(mu=st.floats(0.01, 1.0), sigma=st.floats(1e-3, 2.0), delta=st.floats(1e-3, 5.0),
       R=st.floats(0.01, 0.99), L=st.floats(1e-6, 1e6), seed=st.integers(0, 2**64 - 1))
def test_round_trip_is_bit_exact(mu, sigma, delta, R, L, seed):
    d = {"market": {"mu": mu, "r": 0.0, "sigma": sigma, "delta": delta},
         "utility": {"type": "crra_consumption", "R": R},
         "constraint": {"type": "constant", "L": L},
         "sim": {"x0": 1.0, "n_paths": 1000, "seed": seed}}
    cfg = config_from_dict(d)
    back = loads_config(cfg.dumps())
    assert back == cfg
    for k in ("mu", "sigma", "delta"):
        assert getattr(back.market, k).hex() == float(d["market"][k]).hex()
    assert back.sim.seed == seed


@pytest.mark.parametrize("patch,msg", [
    ({"extra": 1}, "unknown top-level"),
    ({"market": {**BASE["market"], "kappa": 1}}, "market: unknown field"),
    ({"utility": {"type": "crra_consumption", "R": 0.5, "beta": 1}}, "unknown field"),
    ({"utility": {"type": "exp", "R": 0.5}}, "unknown variant"),
    ({"utility": {"type": "additive", "alpha": 1.0}}, "missing field"),
    ({"constraint": {"type": "constant", "L": "1"}}, "expected a number"),
    ({"grid": {"n": 10.5}}, "expected an integer"),
    ({"solver": {"tol": True}}, "expected a number"),
    ({"market": [1, 2]}, "expected an object"),
])
def test_structural_errors(patch, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict({**BASE, **patch})


def test_missing_block():
    with pytest.raises(ConfigError, match="constraint"):
        config_from_dict({k: v for k, v in BASE.items() if k != "constraint"})


def test_parse_error_has_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        loads_config('{"market":\n ,}')


def test_domain_errors_are_not_config_errors():
    with pytest.raises(ValueError) as info:
        config_from_dict({**BASE, "constraint": {"type": "constant", "L": -1.0}})
    assert not isinstance(info.value, ConfigError)


def test_infinite_cap_survives():
    cfg = config_from_dict({**BASE, "constraint": {"type": "constant", "L": float("inf")}})
    assert loads_config(cfg.dumps()).constraint == ConstantL(float("inf"))


def test_value_csv_round_trip(capped, tmp_path):
    sol = capped[3]
    write_value_csv(sol, tmp_path / "v.csv", ["hjbcap test"])
    back = read_value_csv(tmp_path / "v.csv")
    np.testing.assert_array_equal(back["x"], sol.x)
    np.testing.assert_array_equal(back["V"], sol.v)
    np.testing.assert_array_equal(back["d2V"], sol.d2v)
    np.testing.assert_array_equal(back["constrained"], sol.constrained)


def test_digest_tracks_content():
    a = config_from_dict(BASE)
    b = config_from_dict({**BASE, "constraint": {"type": "constant", "L": 1.0000000000000002}})
    assert a.digest() != b.digest()
    assert json.loads(a.dumps())["grid"]["n"] == 1000
