from __future__ import annotations

import json

import pytest

from pmlmc import config as cfgmod
from pmlmc.cli import main, split_dotted
from pmlmc.errors import ConfigError
from pmlmc.metrics import read_sweep_csv

SMALL = ["--model", "synthetic", "--p", "8", "--q", "1,2,4", "--samples", "60,20,8", "--seed", "3"]


def _run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestPartition:
    def test_even_family_json(self, capsys):
        code, out, _ = _run(capsys, ["partition", "--p", "32", "--q", "4,8,16", "--json"])
        data = json.loads(out)
        assert code == 0
        roots = {lv["level"]: [g["root"] for g in lv["groups"]] for lv in data["levels"]}
        assert roots == {0: list(range(1, 33, 4)), 1: [1, 9, 17, 25], 2: [1, 17]}

    def test_remainder_family_text(self, capsys, tmp_path):
        path = tmp_path / "fam.json"
        code, out, _ = _run(capsys, ["partition", "--p", "30", "--q", "3,6,15", "--out", str(path)])
        assert code == 0 and "level 1" in out
        data = json.loads(path.read_text())
        level1 = next(lv for lv in data["levels"] if lv["level"] == 1)
        assert [g["root"] for g in level1["groups"]] == [1, 7, 13, 16, 22, 28]

    def test_q_exceeds_p(self, capsys):
        code, out, err = _run(capsys, ["partition", "--p", "4", "--q", "5"])
        assert code == 2 and out == ""
        assert err.startswith("pmlmc: error: InvalidSpec:") and "q exceeds p" in err
        assert err.count("\n") == 1

    def test_bad_list(self, capsys):
        code, _, err = _run(capsys, ["partition", "--p", "4", "--q", "a,b"])
        assert code == 2 and "InvalidArgs" in err


class TestRun:
    def test_simulate_report(self, capsys):
        code, out, _ = _run(capsys, ["simulate", *SMALL])
        rep = json.loads(out)
        assert code == 0 and rep["mode"] == "simulate"
        assert [lv["N"] for lv in rep["levels"]] == [60, 20, 8]
        c = rep["core_time"]
        assert c["active"] + c["idle"] + c["manage"] == pytest.approx(rep["processors"] * rep["t_w"], rel=1e-9)

    def test_simulate_is_byte_identical(self, capsys):
        a = _run(capsys, ["simulate", *SMALL])[1]
        b = _run(capsys, ["simulate", *SMALL])[1]
        assert a == b

    def test_run_mode_matches_simulate(self, capsys):
        sim = json.loads(_run(capsys, ["simulate", *SMALL])[1])
        exe = json.loads(_run(capsys, ["run", *SMALL])[1])
        assert exe["mode"] == "execute"
        assert exe["estimate"] == sim["estimate"]
        assert [lv["N"] for lv in exe["levels"]] == [lv["N"] for lv in sim["levels"]]

    def test_outputs_and_config_file(self, capsys, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[partition]\np = 4\nq = 1,2\n[estimator]\nsamples = 30,10\n"
                       "[model]\nname = pause\nmu = 1e-3\nsigma = 0\n")
        out, tl, log = tmp_path / "r.json", tmp_path / "t.json", tmp_path / "m.jsonl"
        code, stdout, _ = _run(capsys, ["simulate", "--config", str(ini), "--out", str(out),
                                         "--timeline", str(tl), "--log", str(log), "--costs.latency", "1e-6"])
        assert code == 0 and stdout == ""
        rep = json.loads(out.read_text())
        assert rep["estimate"] == 1e-3 and rep["t_w"] > 0
        assert json.loads(tl.read_text())["p"] == 4
        lines = log.read_text().splitlines()
        assert lines and all("type" in json.loads(x) for x in lines)

    def test_adaptive_elliptic(self, capsys):
        code, out, _ = _run(capsys, ["simulate", "--model", "elliptic1d", "--p", "16", "--q", "1,2,4,8,16",
                                      "--levels", "2", "--samples", "20,10,5", "--eps", "5e-4", "--adaptive",
                                      "--model.coarse_elements", "8", "--model.qoi", "integral"])
        rep = json.loads(out)
        assert code == 0 and rep["iterations"] >= 1 and rep["converged"]
        assert rep["error_estimate"] <= 5e-4

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_model_failure_exit(self, capsys):
        code, _, err = _run(capsys, ["simulate", "--model", "elliptic1d", "--p", "2", "--q", "1",
                                      "--samples", "4", "--model.log_std", "1e200"])
        assert code == 1 and err.startswith("pmlmc: error: ModelFailure:")

    def test_unknown_key(self, capsys):
        code, _, err = _run(capsys, ["simulate", "--run.colour", "red"])
        assert code == 2 and "ConfigError" in err

    def test_unknown_flag(self, capsys):
        code, _, err = _run(capsys, ["simulate", "--frobnicate"])
        assert code == 2 and err.startswith("pmlmc: error: UsageError:")

    def test_missing_config(self, capsys, tmp_path):
        code, _, err = _run(capsys, ["simulate", "--config", str(tmp_path / "none.ini")])
        assert code == 2 and "cannot read config" in err


class TestSweep:
    def test_weak_csv(self, capsys):
        code, out, _ = _run(capsys, ["sweep", "--sweep", "weak", "--nodes", "1,2", "--node-size", "4",
                                      "--model", "pause", "--mu", "1", "--q", "1,2,4", "--samples", "64,16,4"])
        rows = read_sweep_csv(out)
        assert code == 0 and [r["p"] for r in rows] == [5, 9] and [r["C"] for r in rows] == [1, 2]
        assert all(r["A"] > 0.5 for r in rows)

    def test_empty_nodes(self, capsys):
        code, _, err = _run(capsys, ["sweep", "--nodes", ""])
        assert code == 2 and "node list is empty" in err


class TestOracle:
    def test_tight_example(self, capsys, tmp_path):
        path = tmp_path / "inst.json"
        path.write_text(json.dumps({"p": 2, "q": [1, 2], "tasks": [[1, 1], [0, 1], [0, 1], [0, 1], [0, 2]]}))
        code, out, _ = _run(capsys, ["oracle", str(path)])
        res = json.loads(out)
        assert code == 0 and res["ratio"] < 2 and res["greedy"] >= res["opt"]

    def test_too_large(self, capsys, tmp_path):
        path = tmp_path / "inst.json"
        path.write_text(json.dumps({"p": 2, "q": [1], "tasks": [[0, 1]] * 11}))
        code, _, err = _run(capsys, ["oracle", str(path)])
        assert code == 2 and "InstanceTooLarge" in err

    def test_bad_json(self, capsys, tmp_path):
        path = tmp_path / "inst.json"
        path.write_text("{")
        assert _run(capsys, ["oracle", str(path)])[0] == 2


class TestConfig:
    def test_split_dotted(self):
        rest, pairs = split_dotted(["simulate", "--model.mu", "2", "--estimator.eps=1e-3", "--p", "4"])
        assert rest == ["simulate", "--p", "4"]
        assert pairs == [("model.mu", "2"), ("estimator.eps", "1e-3")]

    def test_layering(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[partition]\np = 16\n[run]\nseed = 5\n")
        cp = cfgmod.load_config(str(ini), [("run.seed", "9")], base=[("partition.p", "2"), ("run.mode", "run")])
        assert cp["partition"]["p"] == "16" and cp["run"]["seed"] == "9"
        assert cfgmod.run_mode(cp) == "execute"

    def test_model_params(self):
        cp = cfgmod.load_config(None, [("model.name", "pause"), ("model.mu", "0.5,0.5,0.5"), ("model.sigma", "0")])
        m = cfgmod.build_model(cp, 3)
        assert m.spec.mu_per_level == (0.5, 0.5, 0.5)

    def test_errors(self):
        with pytest.raises(ConfigError):
            cfgmod.load_config(None, [("nosection", "x")])
        cp = cfgmod.load_config(None, [("partition.p", "four")])
        with pytest.raises(ConfigError):
            cfgmod.build_run_config(cp)
