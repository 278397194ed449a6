import json
import os

import numpy as np
import pytest

from export_results import config_hash, read_csv_with_provenance
from run_pipeline import DEFAULTS, EXIT_CONFIG, EXIT_OK, VERSION, ConfigError, main, normalize_config


def _write_config(tmp_path, config, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def _read_summary(out_dir):
    with open(os.path.join(out_dir, "summary.json"), "r", encoding="utf-8") as f:
        return json.load(f)


FLAT_SWEEP = {"task": "scatter-sweep", "geometry": {"fixture": "flat"}, "params": {"lambda_count": 3}}


# --- 명령줄 ---
def test_show_defaults(capsys):
    assert main(["--show-defaults"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["alpha"] == DEFAULTS["alpha"]
    assert main(["scatter", "--show-defaults"]) == EXIT_OK


def test_missing_command_and_config():
    assert main([]) == EXIT_CONFIG
    assert main(["scatter"]) == EXIT_CONFIG


def test_malformed_config_names_field(tmp_path, caplog):
    config = _write_config(tmp_path, {"task": "scatter-sweep", "geometry": {"fixture": "flat"}, "alpha": "five"})
    assert main(["scatter", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_CONFIG
    assert "config field 'alpha'" in caplog.text


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["scatter", "--config", str(path)]) == EXIT_CONFIG


# --- 산란 스윕 ---
def test_flat_sweep_writes_identity_amplitudes(tmp_path):
    out_dir = str(tmp_path / "out")
    assert main(["scatter", "--config", _write_config(tmp_path, FLAT_SWEEP), "--out", out_dir]) == EXIT_OK
    df, meta = read_csv_with_provenance(os.path.join(out_dir, "scatter_sweep.csv"))
    assert len(df) == 3
    np.testing.assert_array_equal(df["re_T"], 1.0)
    np.testing.assert_array_equal(df["im_T"], 0.0)
    np.testing.assert_array_equal(df["absR2"], 0.0)
    summary = _read_summary(out_dir)
    assert summary["status"] == "ok"
    assert meta == {"config_hash": summary["config_hash"], "version": VERSION}


def test_sweep_output_is_deterministic(tmp_path):
    config = _write_config(tmp_path, FLAT_SWEEP)
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["scatter", "--config", config, "--out", first]) == EXIT_OK
    assert main(["scatter", "--config", config, "--out", second, "--jobs", "2"]) == EXIT_OK
    with open(os.path.join(first, "scatter_sweep.csv"), "rb") as f1, open(os.path.join(second, "scatter_sweep.csv"), "rb") as f2:
        assert f1.read() == f2.read()


def test_out_dir_from_environment(tmp_path, monkeypatch):
    env_dir = tmp_path / "env_out"
    monkeypatch.setenv("LEAKY_OUT_DIR", str(env_dir))
    assert main(["scatter", "--config", _write_config(tmp_path, FLAT_SWEEP)]) == EXIT_OK
    assert (env_dir / "scatter_sweep.csv").exists()


def test_geometry_from_relative_file(tmp_path):
    (tmp_path / "geom.json").write_text(json.dumps({"removed_intervals": [[-0.5, 0.5]]}), encoding="utf-8")
    raw = {"task": "spectrum", "geometry": "geom.json", "_base_dir": str(tmp_path)}
    cfg = normalize_config(raw, "spectrum")
    assert cfg["geometry"] == {"removed_intervals": [[-0.5, 0.5]]}
    assert cfg["params"]["scan_max"] == pytest.approx(-1.01 * 6.25)


# --- 실패 경로 ---
def test_unknown_fixture_exits_with_config_error(tmp_path):
    out_dir = str(tmp_path / "out")
    config = _write_config(tmp_path, {"task": "scatter-sweep", "geometry": {"fixture": "nope"}})
    assert main(["scatter", "--config", config, "--out", out_dir]) == EXIT_CONFIG
    summary = _read_summary(out_dir)
    assert summary["status"] == "failed"
    assert "unknown geometry fixture" in summary["error"]


def test_field_grid_mismatch_exits_with_config_error(tmp_path):
    out_dir = str(tmp_path / "out")
    config = _write_config(tmp_path, {"task": "field", "geometry": {"fixture": "flat"}, "params": {"x1_min": 1e6}})
    assert main(["field", "--config", config, "--out", out_dir]) == EXIT_CONFIG
    summary = _read_summary(out_dir)
    assert summary["status"] == "failed"
    assert "x1_min < x1_max" in summary["error"]


def test_ineligible_conjecture_geometry(tmp_path):
    config = _write_config(tmp_path, {"task": "conjecture", "geometry": {"fixture": "semicircle"}})
    assert main(["conjecture", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_flat_spectrum_is_empty(tmp_path):
    out_dir = str(tmp_path / "out")
    config = _write_config(tmp_path, {"task": "spectrum", "geometry": {"fixture": "flat"}})
    assert main(["spectrum", "--config", config, "--out", out_dir]) == EXIT_OK
    result = _read_summary(out_dir)["result"]
    assert result["bound_states"] == []
    assert result["threshold"] == -6.25


@pytest.mark.parametrize("raw, task, field", [
    ({"task": "field"}, "scatter-sweep", "task"),
    ({"params": {"foo": 1}}, "scatter-sweep", "params.foo"),
    ({"params": {"direction": "up"}}, "field", "params.direction"),
    ({"params": {"lambda_min": -7.0}}, "scatter-sweep", "params.lambda_min"),
    ({"params": {"scan_max": -6.0}}, "spectrum", "params.scan_max"),
    ({"params": {"alphas": [5.0, 1.0]}}, "conjecture", "params.alphas[1]"),
    ({"mesh": {"nodes_per_panel": 1}}, "scatter-sweep", "mesh.nodes_per_panel"),
    ({"tolerances": {"probe_factor": -1}}, "field", "tolerances.probe_factor"),
    ({"params": {"x1_min": 5.0, "x1_max": -5.0}}, "field", "params.x1_min"),
    ({"params": {"n_x1": 1}}, "field", "params.n_x1"),
    ({"params": {"x2_values": [0.0, "up"]}}, "field", "params.x2_values[1]"),
    ({"colour": "red"}, "scatter-sweep", "colour"),
    ({}, "field", "geometry"),
])
def test_normalize_config_rejections(raw, task, field):
    with pytest.raises(ConfigError) as info:
        normalize_config(raw, task)
    assert info.value.field == field


# --- 설정 해시 ---
def test_config_hash_is_order_independent():
    a = {"alpha": 5.0, "mesh": {"nodes_per_panel": 16, "panel_length": 0.25}}
    b = {"mesh": {"panel_length": 0.25, "nodes_per_panel": 16}, "alpha": 5.0}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "alpha": 5.5})
    assert len(config_hash(a)) == 64


def test_read_missing_csv(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_csv_with_provenance(str(tmp_path / "missing.csv"))
