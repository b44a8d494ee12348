import json
import subprocess
import sys

import pytest

from telehaptic.cli import main
from telehaptic.scenario import ScenarioSpec, default_scenario, from_dict, load_scenario

SPEC = default_scenario()


class TestScenario:
    def test_default_loads_from_packaged_toml(self):
        assert SPEC.target_volume_ml == 2.0
        assert SPEC.bulb_capacity_ml == 1.5
        assert SPEC.scale_factor == 2
        assert SPEC.tactile_hz == 120 and SPEC.state_hz == 50 and SPEC.control_hz == 125

    def test_round_trips_through_dict(self):
        assert from_dict(SPEC.to_dict()) == SPEC

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[task]\nseed = 9\n[control]\nscale_factor = 4\n")
        spec = load_scenario(path)
        assert spec.seed == 9 and spec.scale_factor == 4
        assert spec.beaker_ml == SPEC.beaker_ml  # untouched defaults remain

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "s.toml"
        path.write_text("[task]\ntarget_volumee_ml = 2.0\n")
        with pytest.raises(ValueError, match="unknown scenario key"):
            load_scenario(path)

    def test_validation(self):
        with pytest.raises(ValueError):
            ScenarioSpec(target_volume_ml=0.0)
        with pytest.raises(ValueError):
            ScenarioSpec(scale_factor=7)
        with pytest.raises(ValueError):
            ScenarioSpec(beaker_ml=-1.0)

    def test_spec_hash_stable_and_sensitive(self):
        assert SPEC.spec_hash() == default_scenario().spec_hash()
        assert SPEC.replace(seed=1).spec_hash() != SPEC.spec_hash()


class TestCli:
    def test_run_writes_deterministic_log(self, tmp_path, capsys):
        log1 = tmp_path / "a.jsonl"
        log2 = tmp_path / "b.jsonl"
        assert main(["run", "--condition", "vfe", "--seed", "7",
                     "--log", str(log1)]) == 0
        assert main(["run", "--condition", "vfe", "--seed", "7",
                     "--log", str(log2)]) == 0
        assert log1.read_bytes() == log2.read_bytes()
        out = capsys.readouterr().out
        assert "relative error" in out

    def test_replay_validates_log(self, tmp_path, capsys):
        log = tmp_path / "t.jsonl"
        assert main(["run", "--condition", "vf", "--seed", "3", "--log", str(log)]) == 0
        assert main(["replay", "--log", str(log)]) == 0
        assert "replay OK" in capsys.readouterr().out

    def test_replay_across_processes(self, tmp_path):
        """Fresh interpreter run + replay: determinism across binaries."""
        log = tmp_path / "t.jsonl"
        run = subprocess.run(
            [sys.executable, "-m", "telehaptic.cli", "run", "--condition", "vfe",
             "--seed", "5", "--log", str(log)],
            capture_output=True, text=True)
        assert run.returncode == 0, run.stderr
        rep = subprocess.run(
            [sys.executable, "-m", "telehaptic.cli", "replay", "--log", str(log)],
            capture_output=True, text=True)
        assert rep.returncode == 0, rep.stderr
        assert "replay OK" in rep.stdout

    def test_bench_csv_schema(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--trials", "2", "--seeds", "0",
                     "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "condition,trials,mean_error,sd_error,mean_time_s,sd_time_s"
        assert len(lines) == 5  # header + four condition rows
        assert [ln.split(",")[0] for ln in lines[1:]] == ["v", "vf", "ve", "vfe"]

    def test_scale_flag_applies(self, tmp_path, capsys):
        log = tmp_path / "t.jsonl"
        assert main(["--scale", "3", "run", "--condition", "vfe", "--seed", "1",
                     "--log", str(log)]) == 0
        header = json.loads(log.read_text().splitlines()[0])
        assert header["spec"]["scale_factor"] == 3

    def test_bad_flags_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--condition", "bogus"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            main(["--scale", "9", "run"])
        assert exc.value.code == 2

    def test_scenario_file_flag(self, tmp_path, capsys):
        scenario = tmp_path / "fast.toml"
        scenario.write_text("[task]\ntimeout_s = 5.0\n")
        log = tmp_path / "t.jsonl"
        # times out: exit code 1 and INCOMPLETE in output
        assert main(["run", "--scenario", str(scenario), "--condition", "v",
                     "--seed", "0", "--log", str(log)]) == 1
        assert "INCOMPLETE" in capsys.readouterr().out


def test_port_resolution_env_override(monkeypatch):
    from telehaptic.cli import resolve_slave_port
    assert resolve_slave_port(None, {}) == 7420
    assert resolve_slave_port(None, {"TELEHAPTIC_PORT": "7999"}) == 7999
    assert resolve_slave_port(8001, {"TELEHAPTIC_PORT": "7999"}) == 8001
