import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jrdkit.core import ImagePlane, Mask
from jrdkit.imgio import (
    read_image,
    read_mask,
    rle_decode,
    rle_encode,
    write_image,
    write_mask,
)


def _random_plane(seed, h=16, w=24, c=3):
    rng = np.random.default_rng(seed)
    return ImagePlane(pixels=rng.integers(0, 256, (h, w, c)).astype(np.uint8))


@pytest.mark.parametrize("suffix,channels", [(".png", 3), (".png", 1), (".ppm", 3), (".pgm", 1)])
def test_image_roundtrip(tmp_path, suffix, channels):
    img = _random_plane(1, c=channels)
    path = tmp_path / f"img{suffix}"
    write_image(path, img)
    back = read_image(path)
    assert np.array_equal(back.pixels, img.pixels)


def test_gray_png_regains_channel_axis(tmp_path):
    img = _random_plane(2, c=1)
    path = tmp_path / "g.png"
    write_image(path, img)
    back = read_image(path)
    assert back.pixels.shape == img.pixels.shape == (16, 24, 1)


def test_pnm_comment_handling(tmp_path):
    body = bytes([7] * 64)
    data = b"P5\n# a comment line\n8 8\n255\n" + body
    path = tmp_path / "c.pgm"
    path.write_bytes(data)
    img = read_image(path)
    assert img.pixels.shape == (8, 8, 1)
    assert int(img.pixels[0, 0, 0]) == 7


def test_mask_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    m = Mask(bits=rng.random((12, 9)) > 0.5)
    path = tmp_path / "m.png"
    write_mask(path, m)
    assert np.array_equal(read_mask(path).bits, m.bits)


def rle_oracle(bits):
    # Scalar run-length scan in column-major order, zeros first.
    flat = bits.flatten(order="F")
    counts = []
    current, run = False, 0
    for v in flat:
        if bool(v) == current:
            run += 1
        else:
            counts.append(run)
            current = bool(v)
            run = 1
    counts.append(run)
    return counts


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12))
def test_rle_matches_scalar_oracle(seed, h, w):
    rng = np.random.default_rng(seed)
    bits = rng.random((h, w)) > 0.5
    enc = rle_encode(Mask(bits=bits))
    assert enc["size"] == [h, w]
    assert enc["counts"] == rle_oracle(bits)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 16), st.integers(1, 16))
def test_rle_roundtrip(seed, h, w):
    rng = np.random.default_rng(seed)
    bits = rng.random((h, w)) > rng.random()
    back = rle_decode(rle_encode(Mask(bits=bits)))
    assert np.array_equal(back.bits, bits)


def test_rle_all_set_starts_with_zero_count():
    bits = np.ones((3, 3), dtype=np.bool_)
    enc = rle_encode(Mask(bits=bits))
    assert enc["counts"][0] == 0


def test_rle_decode_validates_total():
    with pytest.raises(ValueError):
        rle_decode({"size": [4, 4], "counts": [3, 2]})
