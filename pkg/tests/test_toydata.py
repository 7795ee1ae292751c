import numpy as np
from click.testing import CliRunner

from jrdkit.annotation import build_annotations, parse_response_file
from jrdkit.cli import main
from jrdkit.core import TASKS
from jrdkit.toydata import (
    load_toy_dataset,
    make_natural_image,
    make_response_tree,
    make_toy_dataset,
    save_toy_dataset,
)


def test_natural_image_deterministic():
    a = make_natural_image(3, 48, 32)
    b = make_natural_image(3, 48, 32)
    assert a.pixels.shape == (32, 48, 3)
    assert np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, make_natural_image(4, 48, 32).pixels)


def test_toy_dataset_samples_are_consistent():
    samples = make_toy_dataset(8, seed=2, size=32, steps=4)
    assert len(samples) == 8
    for s in samples:
        assert s.image.pixels.shape == (32, 32, 3)
        assert set(s.jrd) == set(TASKS)
        assert all(0 <= v <= 63 for v in s.jrd.values())
        assert 0.0 < s.attrs.s <= 1.0
    # The level is a function of the scale class, so equal classes match.
    assert samples[0].jrd == samples[4].jrd


def test_toy_dataset_roundtrip(tmp_path):
    samples = make_toy_dataset(4, seed=1, size=16, steps=4)
    save_toy_dataset(samples, tmp_path / "ds")
    back = load_toy_dataset(tmp_path / "ds")
    assert len(back) == len(samples)
    for orig, loaded in zip(samples, back):
        assert np.array_equal(orig.image.pixels, loaded.image.pixels)
        assert loaded.jrd == orig.jrd
        assert loaded.attrs.s == orig.attrs.s


def test_cli_train_reads_saved_dataset(tmp_path):
    samples = make_toy_dataset(2, seed=1, size=16, steps=2)
    save_toy_dataset(samples, tmp_path / "ds")
    runner = CliRunner()
    result = runner.invoke(main, [
        "train", "--dataset", str(tmp_path / "ds"), "--out", str(tmp_path / "m.ckpt"),
        "--epochs", "1", "--input-size", "16", "--embed-dim", "8", "--attr-dim", "8",
        "--trunk-depth", "1",
    ], catch_exceptions=False)
    assert result.exit_code == 0
    assert (tmp_path / "m.ckpt").exists()


def test_response_tree_is_complete_and_annotatable(tmp_path):
    tree = tmp_path / "responses"
    make_response_tree(tree, num_images=1, objects_per_image=2, seed=3, width=64, height=48,
                       with_small_object=False)
    files = sorted(tree.iterdir())
    # 3 tasks x (64 levels + 1 original)
    assert len(files) == 3 * 65
    rf = parse_response_file(files[0])
    assert rf.image_id == "im0000"
    anns = build_annotations(tree)
    # the generator adds one distractor object on top of those requested
    assert len(anns) == 3
    assert all(a.jrd for a in anns)
