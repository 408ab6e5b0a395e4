import json
import subprocess
import sys

import numpy as np
import pytest

from mvscale.cli import main
from mvscale.dataio import read_json_report


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "ds"
    code = main(["synth", "gen", "--out", str(root), "--scenes", "2",
                 "--image-size", "32", "--seed", "17", "--traj-steps", "4"])
    assert code == 0
    return root


def test_no_command_prints_help_and_fails():
    assert main([]) == 2


def test_module_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "mvscale.cli"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr.lower() or "usage" in proc.stdout.lower()


def test_missing_required_option_is_config_error(capsys):
    assert main(["synth", "gen", "--scenes", "2"]) == 2
    assert "--out" in capsys.readouterr().err


def test_config_file_merging_and_flag_precedence(tmp_path, dataset):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"scenes": 2, "seed": 9, "image_size": 32,
                               "traj_steps": 3}))
    out = tmp_path / "ds"
    assert main(["synth", "gen", "--config", str(cfg), "--out", str(out),
                 "--seed", "5"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["scenes"] == 2  # from the config file
    assert manifest["config"]["seed"] == 5  # flag wins over the file


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"scenas": 2}))
    assert main(["synth", "gen", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 2
    assert "scenas" in capsys.readouterr().err


def test_invalid_config_json_rejected(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{nope")
    assert main(["synth", "gen", "--config", str(cfg),
                 "--out", str(tmp_path / "x")]) == 2
    assert main(["synth", "gen", "--config", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "x")]) == 3


def test_missing_dataset_is_data_error(tmp_path, capsys):
    assert main(["sfc", "--data", str(tmp_path / "nowhere"),
                 "--out", str(tmp_path / "o")]) == 3
    assert "data error" in capsys.readouterr().err


def test_sfc_command_writes_reports(dataset, tmp_path):
    out = tmp_path / "sfc"
    code = main(["sfc", "--data", str(dataset), "--out", str(out),
                 "--sigma", "0.3", "--samples-per-view", "3",
                 "--images-per-eval", "2", "--magnitudes", "0.05,0.1"])
    assert code == 0
    report = read_json_report(out / "sfc_report.json")
    assert report["schema_version"] == "1"
    assert report["command"] == "sfc"
    assert report["mean_sfc"] > 0
    assert set(report["by_magnitude"]) == {"0.05", "0.1"}
    assert (out / "sfc_summary.csv").exists()
    assert (out / "sfc_detail.csv").exists()
    assert list((out / "mad").glob("*.png"))


def test_ss_tsed_command_writes_reports(dataset, tmp_path):
    out = tmp_path / "tsed"
    code = main(["ss-tsed", "--data", str(dataset), "--out", str(out),
                 "--sigma", "0.0", "--pairs-per-image", "3",
                 "--images-per-eval", "2", "--matches-per-pair", "30"])
    assert code == 0
    report = read_json_report(out / "ss_tsed_report.json")
    assert report["pair_count"] + report["skip_count"] == 6
    # zero scale noise: every evaluated pair is consistent
    assert all(v == 100.0 for v in report["pct_overall"])
    assert (out / "ss_tsed.csv").exists()


def test_scale_learn_command_reports_scales(dataset, tmp_path):
    out = tmp_path / "learn"
    code = main(["scale-learn", "--data", str(dataset), "--out", str(out),
                 "--epochs", "30", "--max-pixels", "48",
                 "--delta-stride", "10"])
    assert code == 0
    doc = read_json_report(out / "scales.json")
    assert set(doc["scales"]) == {"scene-0000", "scene-0001"}
    for entry in doc["scales"].values():
        assert entry["scale"] > 0 and "beta" in entry
    assert doc["summary"]["scenes"] == 2
    assert doc["summary"]["skipped_scenes"] == []
    assert "max_abs_log_error_vs_planted" in doc["summary"]
    assert (out / "history.csv").exists()
    assert (out / "delta_scales.csv").exists()


def test_scale_learn_trims_to_reference_scenes(dataset, tmp_path):
    ref = tmp_path / "ref.json"
    ref.write_text(json.dumps({"scales": {"scene-0001": 1.2}}))
    out = tmp_path / "learn-ref"
    code = main(["scale-learn", "--data", str(dataset), "--out", str(out),
                 "--epochs", "5", "--max-pixels", "32",
                 "--reference", str(ref)])
    assert code == 0
    doc = read_json_report(out / "scales.json")
    assert set(doc["scales"]) == {"scene-0001"}
    assert doc["summary"]["skipped_scenes"] == ["scene-0000"]


def test_scale_learn_degenerate_compare_is_numeric_error(dataset, tmp_path, capsys):
    ref = tmp_path / "flat.json"
    ref.write_text(json.dumps({"scales": {"scene-0000": 1.0, "scene-0001": 1.0}}))
    code = main(["scale-learn", "--data", str(dataset),
                 "--out", str(tmp_path / "learn-flat"),
                 "--epochs", "3", "--max-pixels", "32",
                 "--compare", str(ref)])
    assert code == 4
    assert "numeric failure" in capsys.readouterr().err


def test_calibrate_command_end_to_end(tmp_path):
    pairs = tmp_path / "pairs"
    pairs.mkdir()
    rng = np.random.default_rng(2)
    for i, noise in enumerate((0.01, 0.01, 0.5)):
        sparse = rng.uniform(1.0, 5.0, 40)
        mono = 2.0 * sparse * np.exp(rng.normal(0, noise, 40))
        rows = "\n".join(f"v{j},{s:.6f},{m:.6f}" for j, (s, m)
                         in enumerate(zip(sparse, mono)))
        (pairs / f"scene-{i}.csv").write_text(rows + "\n")
    out = tmp_path / "calib"
    code = main(["calibrate", "--pairs", str(pairs), "--out", str(out),
                 "--unreliable-fraction", "0.3"])
    assert code == 0
    doc = read_json_report(out / "calibration.json")
    flags = {s["scene_id"]: s["reliable"] for s in doc["scenes"]}
    assert flags == {"scene-0": True, "scene-1": True, "scene-2": False}
    assert doc["scale_map"]["scene-2"] == 1.0  # fallback-one pins it
    assert doc["scale_map"]["scene-0"] == pytest.approx(2.0, rel=0.05)
    assert doc["retained"] == ["scene-0", "scene-1", "scene-2"]

    out2 = tmp_path / "calib-trim"
    assert main(["calibrate", "--pairs", str(pairs), "--out", str(out2),
                 "--unreliable-fraction", "0.3", "--policy", "trim"]) == 0
    doc2 = read_json_report(out2 / "calibration.json")
    assert doc2["retained"] == ["scene-0", "scene-1"]
    assert "scene-2" not in doc2["scale_map"]


def test_calibrate_empty_dir_is_data_error(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    assert main(["calibrate", "--pairs", str(empty),
                 "--out", str(tmp_path / "o")]) == 3


def test_edge_heatmap_from_dataset(dataset, tmp_path):
    out = tmp_path / "heat"
    code = main(["edge-heatmap", "--data", str(dataset), "--out", str(out),
                 "--samples-per-view", "2", "--sigma", "0.2"])
    assert code == 0
    report = read_json_report(out / "edge_heatmap_report.json")
    assert sorted(report["outputs"]) == ["scene-0000.png", "scene-0001.png"]
    assert (out / "scene-0000.png").exists()


def test_edge_heatmap_needs_a_source(tmp_path):
    assert main(["edge-heatmap", "--out", str(tmp_path / "o")]) == 2


def test_reports_identical_across_reruns_and_threads(dataset, tmp_path):
    outs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "3")):
        out = tmp_path / name
        assert main(["sfc", "--data", str(dataset), "--out", str(out),
                     "--samples-per-view", "3", "--images-per-eval", "2",
                     "--magnitudes", "0.05,0.1", "--heatmaps", "false",
                     "--threads", threads]) == 0
        outs.append((out / "sfc_report.json").read_bytes())
    assert outs[0] == outs[1] == outs[2]
