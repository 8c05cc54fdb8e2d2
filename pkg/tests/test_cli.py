import json

import pytest

from arrestflow import cli, geometry


def test_simulate_scenario(tmp_path, capsys):
    code = cli.main(["simulate", "circle-csf", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "Completed" in out
    assert (tmp_path / "timeseries.csv").exists()


def test_simulate_invalid_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"interfaces": []}')
    assert cli.main(["simulate", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "m >= 1" in capsys.readouterr().err


def test_simulate_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{\n,")
    assert cli.main(["simulate", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_diagnose(tmp_path, capsys):
    geometry.write_curve_csv(tmp_path / "s.csv", geometry.ellipse(2, 1, M=128))
    assert cli.main(["diagnose", str(tmp_path / "s.csv")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["embedded"]
    assert cli.main(["diagnose", str(tmp_path / "s.csv"), "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text()) == rep


def test_diagnose_missing_file(tmp_path):
    assert cli.main(["diagnose", str(tmp_path / "nope.csv")]) == 2


def test_validate_kernel(tmp_path, capsys):
    (tmp_path / "k.json").write_text('{"type": "gaussian", "alpha": 1.0, "beta": 1.0}')
    assert cli.main(["validate-kernel", str(tmp_path / "k.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("family: gaussian")
    assert "routes (self):" in out


def test_convergence(capsys):
    assert cli.main(["convergence", "circle-csf", "--levels", "3"]) == 0
    assert "(floor)" in capsys.readouterr().out


def test_scenario(capsys):
    assert cli.main(["scenario", "slot-growth-repelled"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["kernels"][0][0]["type"] == "gaussian"


def test_unknown_scenario(capsys):
    assert cli.main(["scenario", "figure9"]) == 2


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["explode"])
    assert info.value.code == 2


class TestThreads:
    def test_unset(self):
        env = {}
        assert cli.configure_threads(environ=env) is None
        assert env == {}

    @pytest.mark.parametrize("raw, count", [("0", 1), ("1", 1), ("4", 4)])
    def test_values(self, raw, count):
        env = {"ARRESTFLOW_THREADS": raw}
        assert cli.configure_threads(environ=env) == count
        assert all(env[v] == str(count) for v in cli.THREAD_VARS)

    def test_serial_overrides(self):
        env = {"ARRESTFLOW_THREADS": "8"}
        assert cli.configure_threads(serial=True, environ=env) == 1

    @pytest.mark.parametrize("raw", ["x", "-2"])
    def test_invalid(self, raw):
        with pytest.raises(SystemExit):
            cli.configure_threads(environ={"ARRESTFLOW_THREADS": raw})
