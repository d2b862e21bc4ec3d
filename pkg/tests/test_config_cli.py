import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exrisk.cli import main
from exrisk.config import ConfigError, dumps, load, loads

ROOT = Path(__file__).resolve().parents[1]

SMALL = """
[scenario]
preset = default

[dictionary]
kind = histogram
size = 8

[plan]
n = 512
M = 20
R = 8
seed = 3
s_points = 40
margin_samples = 200
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestConfig:
    def test_defaults_filled(self):
        cfg = loads(SMALL)
        assert cfg.get("plan.t") == (1.0, 2.0, 3.0)
        assert cfg.get("bounds.c0") == 1.0
        assert cfg.get("scenario.A2") == 2.0

    def test_round_trip(self):
        cfg = loads(SMALL)
        assert loads(dumps(cfg)) == cfg
        assert dumps(loads(dumps(cfg))) == dumps(cfg)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-3, 10, allow_nan=False), st.lists(st.floats(0, 20), min_size=1, max_size=4),
           st.integers(0, 2**64 - 1))
    def test_round_trip_property(self, c0, ts, seed):
        cfg = loads(SMALL).with_value("bounds.c0", c0).with_value("plan.t", tuple(ts)).with_value("plan.seed", seed)
        assert loads(dumps(cfg)) == cfg

    def test_json_equivalent(self):
        cfg = loads(SMALL)
        assert loads(json.dumps(cfg.to_dict()), "json") == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="plan.trials: unknown key"):
            loads(SMALL + "trials = 3\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="extras"):
            loads(SMALL + "[extras]\nx = 1\n")

    def test_missing_key_path(self):
        with pytest.raises(ConfigError, match="dictionary.size: missing"):
            loads(SMALL.replace("size = 8\n", ""))

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="plan.n: invalid"):
            loads(SMALL.replace("n = 512", "n = many"))

    def test_plan_error_path(self):
        with pytest.raises(ConfigError, match="plan.M"):
            loads(SMALL.replace("M = 20", "M = 0"))

    def test_scenario_expressions(self):
        text = SMALL.replace("preset = default", "regression = 0.3*x\nnoise_level = 0.1")
        sc = loads(text).scenario()
        assert sc.regression == "0.3*x" and sc.A1 == 1.0

    def test_scenario_violation_reported(self):
        with pytest.raises(ConfigError, match="scenario"):
            loads(SMALL.replace("preset = default", "regression = 0.95\nnoise_level = 0.1")).plan()

    def test_shipped_configs_parse(self):
        for path in (ROOT / "configs").glob("*.ini"):
            load(path).plan()


class TestCli:
    def test_noiseless_concentration(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL.replace("preset = default", "preset = noiseless-centered"))
        assert main(["concentration", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        doc = json.loads((tmp_path / "o" / "report.json").read_text())
        assert all(r["count"] == 0 for r in doc["tails"])
        assert doc["config"]["scenario"]["preset"] == "noiseless-centered"
        assert doc["version"] and doc["schema_version"] == 1
        for name in ("curves.csv", "tails.csv", "trials.csv"):
            assert (tmp_path / "o" / name).exists()

    def test_invalid_M_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL.replace("M = 20", "M = 0"))
        assert main(["concentration", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "plan.M" in capsys.readouterr().err

    def test_unreadable_exit_2(self, tmp_path, capsys):
        assert main(["describe", "--config", str(tmp_path / "missing.ini")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_failing_check_exit_1(self, tmp_path):
        # the literal empirical second-order inequality fails on noisy data
        cfg = write(tmp_path, SMALL)
        assert main(["second-order", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        outs = []
        for i, threads in enumerate(("1", "1", "3")):
            out = tmp_path / f"run{i}"
            main(["concentration", "--config", str(cfg), "--out", str(out), "--threads", threads])
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0] == outs[1] == outs[2]

    def test_seed_override_embedded(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        main(["representation", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "99"])
        doc = json.loads((tmp_path / "o" / "report.json").read_text())
        assert doc["config"]["plan"]["seed"] == 99

    def test_json_config(self, tmp_path):
        cfg = write(tmp_path, json.dumps(loads(SMALL).to_dict()), "c.json")
        assert main(["margin", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0

    def test_no_temp_files_left(self, tmp_path):
        cfg = write(tmp_path, SMALL)
        main(["curves", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert not [p for p in (tmp_path / "o").iterdir() if p.name.startswith(".")]


class TestDescribe:
    def test_default(self, capsys):
        assert main(["describe", "--config", str(ROOT / "configs" / "default.ini")]) == 0
        out = capsys.readouterr().out
        assert "K = 6" in out and "C = 6" in out and "A1 = 1" in out and "A2 = 2" in out
        assert "s_box = 0.25" in out

    def test_regime_failure_marked(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL.replace("n = 512", "n = 1000000").replace("size = 8", "size = 100"))
        assert main(["describe", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "[FAIL] (ln n)^2 <= D" in out
