import json

import numpy as np
import pytest

import osfuse.main
from osfuse.data.pnm import read_image, write_image
from osfuse.fusion.filters import apply_filter
from osfuse.main import run_command

TINY = ["--set", "image_size=32", "--set", "n_train=16", "--set", "n_test=8", "--set", "epochs=1",
        "--set", "batch_size=8", "--set", "embed_dim=4", "--set", "head_dim=4", "--set", "state_dim=2",
        "--set", "area_k=2"]


def json_out(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def image_pair(tmp_path):
    rng = np.random.default_rng(3)
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    write_image(a, rng.random((16, 16)))
    write_image(b, rng.random((16, 16)))
    return a, b


def test_no_command_is_a_usage_error(capsys):
    assert run_command([]) == 1
    assert run_command(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err


def test_scan_prints_cells(capsys):
    assert run_command(["scan", "--kind", "zigzag", "--rows", "2", "--cols", "3"]) == 0
    assert capsys.readouterr().out.split() == ["(0,0)", "(0,1)", "(0,2)", "(1,2)", "(1,1)", "(1,0)"]


def test_scan_rejects_bad_grid(capsys):
    assert run_command(["scan", "--kind", "zigzag", "--rows", "0", "--cols", "3"]) == 1


def test_eval_reports_ap(tmp_path, capsys):
    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    (gt_dir / "00000.txt").write_text("0 0.1 0.1 0.3 0.1 0.3 0.3 0.1 0.3\n")
    det = tmp_path / "det.txt"
    det.write_text("00000 0 0.9 0.2 0.2 0.2 0.2 0\n")
    assert run_command(["eval", "--gt", str(gt_dir), "--det", str(det), "--out-dir", str(tmp_path / "r")]) == 0
    result = json_out(capsys)
    assert result["AP50"] == pytest.approx(100.0)
    assert result["n_images"] == 1
    assert (tmp_path / "r" / "evaluation.json").exists()


def test_eval_missing_detection_file(tmp_path, capsys):
    (tmp_path / "gt").mkdir()
    assert run_command(["eval", "--gt", str(tmp_path / "gt"), "--det", str(tmp_path / "none.txt")]) == 1


def test_stats_json(tmp_path, capsys):
    (tmp_path / "00000.txt").write_text("0 0.1 0.1 0.3 0.1 0.3 0.3 0.1 0.3\n1 0.5 0.5 0.7 0.5 0.7 0.6 0.5 0.6\n")
    assert run_command(["stats", "--labels", str(tmp_path), "--image-size", "100", "--json"]) == 0
    assert json_out(capsys)["n_instances"] == 2


def test_metrics_on_a_pair(image_pair, capsys):
    a, b = image_pair
    assert run_command(["metrics", str(a), str(b)]) == 0
    result = json_out(capsys)
    assert set(result) == {"mse", "ssim", "mi"}
    assert result["mse"] > 0


def test_metrics_needs_inputs(capsys):
    assert run_command(["metrics"]) == 1


def test_gen_then_metrics_and_fuse(tmp_path, capsys):
    out = tmp_path / "data"
    assert run_command(["gen", "--out", str(out), "--count", "3"] + TINY) == 0
    assert json_out(capsys)["count"] == 3
    assert len(list((out / "optical").glob("*.pgm"))) == 3

    assert run_command(["metrics", "--dir", str(out)]) == 0
    assert json_out(capsys)["count"] == 3

    fused = tmp_path / "fused.pgm"
    args = ["fuse", str(out / "optical" / "00000.pgm"), str(out / "sar" / "00000.pgm"), "--out", str(fused)]
    assert run_command(args + TINY) == 0
    result = json_out(capsys)
    assert set(result["levels"]) == {"3"}
    assert result["parameters"]["total"] > 0
    assert read_image(fused).shape == (4, 4)


def test_fuse_rejects_mismatched_pair(tmp_path, capsys):
    write_image(tmp_path / "a.pgm", np.zeros((32, 32)))
    write_image(tmp_path / "b.pgm", np.zeros((16, 16)))
    assert run_command(["fuse", str(tmp_path / "a.pgm"), str(tmp_path / "b.pgm")]) == 1


def test_filter_with_alpha(image_pair, tmp_path, capsys):
    a, _ = image_pair
    out = tmp_path / "aug.pgm"
    assert run_command(["filter", str(a), "--kind", "hog", "--alpha", "0.5", "--out", str(out)]) == 0
    result = json_out(capsys)
    assert result["kind"] == "hog" and result["alpha"] == 0.5
    assert read_image(out).shape == (16, 16)


def test_filter_positional_output(image_pair, tmp_path, capsys):
    a, _ = image_pair
    out = tmp_path / "aug.pgm"
    assert run_command(["filter", "--kind", "grad", "--alpha", "1", str(a), str(out)]) == 0
    assert json_out(capsys)["out"] == str(out)
    expected = np.clip(read_image(a) + apply_filter("grad", read_image(a))[:, :, 0], 0.0, 1.0)
    np.testing.assert_allclose(read_image(out), expected, atol=0.5 / 255 + 1e-12)


def test_missing_image_is_an_input_error(tmp_path, capsys):
    assert run_command(["filter", str(tmp_path / "none.pgm")]) == 1


def test_bad_override(capsys):
    assert run_command(["scan", "--rows", "2", "--cols", "2", "--set", "epochs"]) == 1
    assert run_command(["scan", "--rows", "2", "--cols", "2", "--set", "scan_kind=spiral"]) == 1


def test_internal_error_exit_code(monkeypatch, capsys):
    def boom(args, cfg):
        raise RuntimeError("boom")

    monkeypatch.setattr(osfuse.main, "cmd_scan", boom)
    assert run_command(["scan", "--rows", "2", "--cols", "2"]) == 2


def test_toytrain_tiny(tmp_path, capsys):
    assert run_command(["toytrain", "--out-dir", str(tmp_path)] + TINY) == 0
    result = json_out(capsys)
    assert set(result["results"]) == {"optical", "sar", "fused"}
    assert result["margin"] == pytest.approx(
        result["results"]["fused"]["accuracy"] - result["best_single"])
    assert (tmp_path / "experiment.json").exists()
    assert (tmp_path / "experiment_accuracy.svg").exists()


@pytest.mark.parametrize("choice, axis, n_rows", [("sequence", "sequence", 2), ("alpha", "alpha", 5)])
def test_toytrain_ablation_choice(choice, axis, n_rows, tmp_path, capsys):
    assert run_command(["toytrain", "--ablation", choice, "--out-dir", str(tmp_path)] + TINY) == 0
    result = json_out(capsys)
    assert len(result["rows"]) == n_rows
    assert {row["axis"] for row in result["rows"]} == {axis}
    assert (tmp_path / f"ablation_{choice}.json").exists()


def test_toytrain_rejects_unknown_ablation(capsys):
    assert run_command(["toytrain", "--ablation", "everything"] + TINY) == 1
