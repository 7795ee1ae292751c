import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from jrdkit.cli import main
from jrdkit.codec import decode
from jrdkit.core import ImagePlane
from jrdkit.imgio import read_image, write_image
from jrdkit.predictor import JrdPredictor, ModelConfig, load_checkpoint

DATA = Path(__file__).parent / "data"


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args):
    return runner.invoke(main, args, catch_exceptions=False)


# ---------------------------------------------------------------- annotate

def test_annotate_reproduces_golden(runner, tmp_path):
    out = tmp_path / "ann.json"
    result = invoke(runner, ["annotate", "--responses", str(DATA / "responses"), "--out", str(out)])
    assert result.exit_code == 0
    assert out.read_text() == (DATA / "golden_annotations.json").read_text()

    manifest = json.loads((tmp_path / "ann.json.manifest.json").read_text())
    assert manifest["command"] == "annotate"
    assert manifest["outputs"][0]["path"] == str(out)
    import hashlib

    assert manifest["outputs"][0]["sha256"] == hashlib.sha256(out.read_bytes()).hexdigest()


def test_manifest_has_no_timestamps(runner, tmp_path):
    out = tmp_path / "ann.json"
    args = ["annotate", "--responses", str(DATA / "responses"), "--out", str(out)]
    invoke(runner, args)
    first = (tmp_path / "ann.json.manifest.json").read_text()
    invoke(runner, args)
    assert (tmp_path / "ann.json.manifest.json").read_text() == first


# ---------------------------------------------------------------- config handling

def test_print_config_shows_resolved_values(runner, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"threshold": 0.85, "window": 2}))
    result = invoke(runner, [
        "annotate",
        "--responses", str(DATA / "responses"),
        "--out", str(tmp_path / "x.json"),
        "--config", str(cfg_file),
        "--window", "5",
        "--print-config",
    ])
    assert result.exit_code == 0
    resolved = json.loads(result.output)
    assert resolved["threshold"] == 0.85  # file overrides the default
    assert resolved["window"] == 5        # command line beats the file
    assert resolved["min_kpd_area"] == 1024.0
    assert not (tmp_path / "x.json").exists()


def test_unknown_config_key_fails(runner, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"thresold": 0.8}))
    result = runner.invoke(main, [
        "annotate",
        "--responses", str(DATA / "responses"),
        "--out", str(tmp_path / "x.json"),
        "--config", str(cfg_file),
    ])
    assert result.exit_code == 1
    assert "unknown keys" in result.output


# ---------------------------------------------------------------- exit codes

def test_usage_errors_exit_two(runner, tmp_path):
    assert runner.invoke(main, ["no-such-command"]).exit_code == 2
    assert runner.invoke(main, ["encode", "--out", str(tmp_path / "x.jrq")]).exit_code == 2
    missing = runner.invoke(main, ["encode", "--image", "/no/such/file.png", "--out", str(tmp_path / "x.jrq")])
    assert missing.exit_code == 2


def test_domain_errors_exit_one(runner, tmp_path):
    garbage = tmp_path / "bad.jrq"
    garbage.write_bytes(b"\x00" * 32)
    result = runner.invoke(main, ["decode", "--stream", str(garbage), "--out", str(tmp_path / "r.png")])
    assert result.exit_code == 1
    assert result.output.startswith("error:")


def test_field_named_in_validation_error(runner, tmp_path):
    img = tmp_path / "img.png"
    write_image(img, ImagePlane(np.zeros((32, 32, 3), dtype=np.uint8)))
    result = runner.invoke(main, [
        "qf-search", "--image", str(img), "--box", "1,2,3", "--target-psnr", "35",
    ])
    assert result.exit_code == 1
    assert "box" in result.output


# ---------------------------------------------------------------- codec commands

def test_encode_decode_roundtrip(runner, tmp_path):
    stream_path = tmp_path / "img.jrq"
    result = invoke(runner, [
        "encode", "--image", str(DATA / "test_image.png"), "--out", str(stream_path), "--qf", "40",
    ])
    assert result.exit_code == 0
    assert result.output.startswith("bpp=")

    recon_path = tmp_path / "recon.png"
    map_path = tmp_path / "map.json"
    result = invoke(runner, [
        "decode", "--stream", str(stream_path), "--out", str(recon_path),
        "--dump-qfmap", str(map_path),
    ])
    assert result.exit_code == 0
    lib = decode(stream_path.read_bytes())
    assert np.array_equal(read_image(recon_path).pixels, lib.pixels)
    grid = np.asarray(json.loads(map_path.read_text())["qf"])
    assert (grid == 40).all()
    assert grid.shape == (16, 16)


def test_encode_with_qfmap_file(runner, tmp_path):
    grid = np.full((16, 16), 35, dtype=int)
    grid[:4, :4] = 80
    map_path = tmp_path / "map.json"
    map_path.write_text(json.dumps({"qf": grid.tolist()}))
    stream_path = tmp_path / "img.jrq"
    result = invoke(runner, [
        "encode", "--image", str(DATA / "test_image.png"),
        "--out", str(stream_path), "--qfmap", str(map_path),
    ])
    assert result.exit_code == 0
    dumped = tmp_path / "dump.json"
    invoke(runner, ["decode", "--stream", str(stream_path), "--out", str(tmp_path / "r.png"),
                    "--dump-qfmap", str(dumped)])
    assert json.loads(dumped.read_text())["qf"] == grid.tolist()


def test_qf_search_output(runner):
    result = invoke(runner, [
        "qf-search", "--image", str(DATA / "test_image.png"),
        "--box", "64,64,64,64", "--target-psnr", "36.0",
    ])
    assert result.exit_code == 0
    payload = json.loads(result.output)
    assert set(payload) == {"qf", "probes", "exhaustive"}
    assert payload["qf"] in (42, 44, 46, 48, 50)


# ---------------------------------------------------------------- model commands

def test_train_epochs_zero_writes_seeded_init(runner, tmp_path):
    ckpt = tmp_path / "model.ckpt"
    result = invoke(runner, [
        "train", "--out", str(ckpt), "--epochs", "0", "--toy-samples", "2",
        "--input-size", "16", "--embed-dim", "8", "--attr-dim", "8", "--trunk-depth", "1",
    ])
    assert result.exit_code == 0
    assert "seeded initialization" in result.output
    loaded = load_checkpoint(ckpt)
    fresh = JrdPredictor(ModelConfig(input_size=16, embed_dim=8, attr_dim=8,
                                     trunk_depth=1, branch_depth=1, seed=0))
    assert loaded.config == fresh.config
    for name, arr in fresh.params.items():
        assert np.array_equal(loaded.params[name], arr)


def test_predict_from_checkpoint(runner, tmp_path):
    ckpt = tmp_path / "model.ckpt"
    invoke(runner, [
        "train", "--out", str(ckpt), "--epochs", "0", "--toy-samples", "2",
        "--input-size", "16", "--embed-dim", "8", "--attr-dim", "8", "--trunk-depth", "1",
    ])
    img = tmp_path / "crop.png"
    rng = np.random.default_rng(2)
    write_image(img, ImagePlane(rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)))

    result = invoke(runner, [
        "predict", "--model", str(ckpt), "--image", str(img), "--attrs", "0.1,0.5,0.5",
    ])
    assert result.exit_code == 0
    levels = json.loads(result.output)
    assert set(levels) == {"od", "is", "kpd"}
    assert all(0 <= v <= 63 for v in levels.values())

    # --box derives the triplet from the image frame instead.
    boxed = invoke(runner, [
        "predict", "--model", str(ckpt), "--image", str(img), "--box", "4,4,8,8",
    ])
    assert boxed.exit_code == 0

    neither = runner.invoke(main, ["predict", "--model", str(ckpt), "--image", str(img)])
    assert neither.exit_code == 1
    assert "attrs" in neither.output


def test_grad_check_command(runner):
    result = invoke(runner, ["grad-check", "--seed", "0"])
    assert result.exit_code == 0
    assert result.output.startswith("max_relative_error=")

    failing = CliRunner().invoke(main, ["grad-check", "--seed", "0", "--tol", "1e-12"])
    assert failing.exit_code == 1


# ---------------------------------------------------------------- evaluation commands

def test_bd_metric_identical_curves(runner, tmp_path):
    from jrdkit.evaluation import RateAccuracyCurve, curve_to_csv

    curve = RateAccuracyCurve(points=((0.5, 0.4), (1.0, 0.55), (2.0, 0.7), (4.0, 0.8)))
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text(curve_to_csv(curve))
    b.write_text(curve_to_csv(curve))
    result = invoke(runner, ["bd-metric", "--reference", str(a), "--test", str(b)])
    assert result.exit_code == 0
    assert result.output.strip() == "0.00"
    rate = invoke(runner, ["bd-metric", "--reference", str(a), "--test", str(b), "--rate"])
    assert rate.output.strip() == "0.00"


def test_report_renders_svg(runner, tmp_path):
    from jrdkit.evaluation import RateAccuracyCurve, curve_to_csv

    curve = RateAccuracyCurve(points=((0.5, 0.4), (1.0, 0.55), (2.0, 0.7), (4.0, 0.8)), label="u")
    csv = tmp_path / "c.csv"
    csv.write_text(curve_to_csv(curve))
    svg = tmp_path / "plot.svg"
    result = invoke(runner, ["report", "--curve", str(csv), "--svg-out", str(svg), "--title", "t"])
    assert result.exit_code == 0
    assert svg.read_text().startswith("<svg")
    assert (tmp_path / "plot.svg.manifest.json").exists()
