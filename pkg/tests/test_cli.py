import csv
import json
import subprocess
import sys

import pytest

from hjbcap.cli import main

MARKET = {"mu": 0.07, "r": 0.0, "sigma": 0.2, "delta": 0.1}


def write(tmp_path, name="cfg.json", **blocks):
    d = {"market": MARKET, "utility": {"type": "crra_consumption", "R": 0.5},
         "constraint": {"type": "constant", "L": 1.0}, **blocks}
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


class TestValidate:
    def test_ok(self, tmp_path, capsys):
        assert main(["validate", "--config", write(tmp_path)]) == 0
        assert "[PASS] well_posedness" in capsys.readouterr().out

    def test_small_discount(self, tmp_path, capsys):
        cfg = write(tmp_path, market={**MARKET, "delta": 0.05})
        assert main(["validate", "--config", cfg]) == 1
        assert "well_posedness" in capsys.readouterr().out.splitlines()[-1]

    def test_malformed(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"market": {"mu": 0.07,,}}')
        assert main(["validate", "--config", str(p)]) == 2
        assert "line 1, column" in capsys.readouterr().err

    def test_usage(self, tmp_path):
        assert main(["validate"]) == 2
        assert main(["frobnicate", "--config", "x"]) == 2
        assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2


class TestSolve:
    def test_constrained(self, tmp_path):
        out = tmp_path / "o"
        assert main(["solve", "--config", write(tmp_path), "--out", str(out)]) == 0
        region = json.loads((out / "region.json").read_text())
        assert region["certified"] is True and region["xstar"] == pytest.approx(0.3797, rel=1e-3)
        diag = json.loads((out / "diagnostics.json").read_text())
        assert diag["dual_residual"] < 1e-3 and diag["hjb_residual_rel"] < 1e-6
        for f in ("value.csv", "policy.csv"):
            lines = (out / f).read_text().splitlines()
            assert lines[0].startswith("# hjbcap ") and lines[1].startswith("# config_sha256 ")
        assert diag["config_sha256"] == region["config_sha256"]

    def test_merton_has_no_boundary(self, tmp_path):
        cfg = write(tmp_path, constraint={"type": "constant", "L": 1e6})
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        assert json.loads((tmp_path / "o" / "region.json").read_text())["xstar"] is None

    def test_overrides(self, tmp_path):
        out = tmp_path / "o"
        assert main(["solve", "--config", write(tmp_path), "--out", str(out),
                     "--grid-n", "300", "--xmax", "20"]) == 0
        rows = (out / "value.csv").read_text().splitlines()[3:]
        assert len(rows) == 301 and float(rows[-1].split(",")[0]) == 20.0

    def test_non_convergent(self, tmp_path):
        cfg = write(tmp_path, solver={"max_iter": 2})
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_linear_cap(self, tmp_path):
        cfg = write(tmp_path, constraint={"type": "linear", "k": 0.2, "L": 1.0})
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        assert json.loads((tmp_path / "o" / "region.json").read_text())["certified"] is None

    def test_missing_out(self, tmp_path):
        assert main(["solve", "--config", write(tmp_path)]) == 2


class TestSweep:
    def read(self, out):
        with open(out / "sweep.csv") as fh:
            return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))

    def test_increasing(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["sweep", "--config", write(tmp_path), "--out", str(out),
                     "--sweep-param", "L", "--values", "0.5,1,2"]) == 0
        rows = self.read(out)
        xs = [float(r["xstar"]) for r in rows]
        assert xs[0] < xs[1] < xs[2]
        assert [float(r["pi_bar_x0"]) for r in rows] == [0.5, 1.0, 2.0]
        assert json.loads((out / "sweep.json").read_text())["xstar_increasing_in_L"] is True
        assert "increasing in L: true" in capsys.readouterr().out

    def test_single(self, tmp_path):
        out = tmp_path / "o"
        assert main(["sweep", "--config", write(tmp_path), "--out", str(out),
                     "--values", "1.5"]) == 0
        assert len(self.read(out)) == 1

    @pytest.mark.parametrize("values,code", [("0.5,-1", 1), ("0", 1), ("a,b", 2), ("", 2)])
    def test_bad_values(self, tmp_path, values, code):
        assert main(["sweep", "--config", write(tmp_path), "--out", str(tmp_path / "o"),
                     "--values", values]) == code

    def test_other_parameter(self, tmp_path):
        assert main(["sweep", "--config", write(tmp_path), "--out", str(tmp_path / "o"),
                     "--sweep-param", "sigma", "--values", "0.1"]) == 2


class TestSimulate:
    SIM = {"x0": 1.0, "n_paths": 2000, "seed": 5, "horizon": 40.0, "dt": 0.01}

    def test_consistent(self, tmp_path):
        out = tmp_path / "o"
        assert main(["simulate", "--config", write(tmp_path, sim=self.SIM), "--out", str(out)]) == 0
        res = json.loads((out / "sim.json").read_text())
        assert res["consistent"] and res["gap"] <= res["allowance"]
        assert res["n_paths"] == 2000 and res["n_steps"] == 4000

    def test_policy_file_and_seed(self, tmp_path):
        cfg = write(tmp_path, sim=self.SIM)
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
        pol = str(tmp_path / "s" / "policy.csv")
        for k, seed in enumerate(("7", "7", "8")):
            assert main(["simulate", "--config", cfg, "--out", str(tmp_path / f"m{k}"),
                         "--policy", pol, "--seed", seed]) == 0
        files = [(tmp_path / f"m{k}" / "sim.json").read_bytes() for k in range(3)]
        assert files[0] == files[1] != files[2]
        assert json.loads(files[0])["seed"] == 7

    def test_bad_seed(self, tmp_path):
        assert main(["simulate", "--config", write(tmp_path), "--out", str(tmp_path / "o"),
                     "--seed", "-1"]) == 2


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hjbcap.cli", "validate", "--config",
                        write(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and "well_posedness" in r.stdout


def test_log_level_from_environment(tmp_path):
    env = {"HJB_LOG": "debug", "PATH": ""}
    r = subprocess.run([sys.executable, "-m", "hjbcap.cli", "solve", "--config", write(tmp_path),
                        "--out", str(tmp_path / "o")], capture_output=True, text=True, env=env)
    assert r.returncode == 0 and "DEBUG hjbcap.hjb: iteration 1" in r.stderr
