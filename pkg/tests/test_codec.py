import io
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from jrdkit.codec import (
    DecodeError,
    QfMap,
    decode,
    encode,
    encode_uniform,
    measure_rate,
    qf_to_tables,
    rasterize_qfmap,
    read_qfmap,
)
from jrdkit.core import BoundingBox, ImagePlane
from jrdkit.imgio import read_image
from jrdkit.metrics import psnr_arrays

DATA = Path(__file__).parent / "data"

# Reference luma quantization table at qf 50 (the unscaled baseline).
BASE_LUMA = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
])


def fixture_image():
    return read_image(DATA / "test_image.png")


# ---------------------------------------------------------------- tables

def test_qf50_is_reference_table():
    t = qf_to_tables(50)
    assert np.array_equal(t.luma, BASE_LUMA)


def test_qf100_is_all_ones():
    t = qf_to_tables(100)
    assert (t.luma == 1).all()
    assert (t.chroma == 1).all()


def test_qf_scaling_formula():
    # Scalar re-derivation of the standard scaling rule.
    for qf in (1, 10, 25, 50, 75, 95, 100):
        scale = 5000 // qf if qf < 50 else 200 - 2 * qf
        t = qf_to_tables(qf)
        for i in range(8):
            for j in range(8):
                want = (int(BASE_LUMA[i, j]) * scale + 50) // 100
                assert t.luma[i, j] == min(max(want, 1), 255)


def test_qf_tables_monotone():
    prev = qf_to_tables(1)
    for qf in range(2, 101):
        cur = qf_to_tables(qf)
        assert (cur.luma <= prev.luma).all()
        assert (cur.chroma <= prev.chroma).all()
        prev = cur


def test_qf_out_of_range():
    with pytest.raises(ValueError):
        qf_to_tables(0)
    with pytest.raises(ValueError):
        qf_to_tables(101)


# ---------------------------------------------------------------- qf maps

def test_uniform_map_grid():
    m = QfMap.uniform(40, image_w=100, image_h=33)
    assert m.qf.shape == (3, 7)
    assert m.file_qf == 40


def test_qfmap_validation():
    with pytest.raises(ValueError):
        QfMap(qf=np.array([[0, 50]]))
    with pytest.raises(ValueError):
        QfMap(qf=np.array([50, 60]))


def test_rasterize_regions():
    box = BoundingBox(x=16.0, y=16.0, w=16.0, h=16.0)
    m = rasterize_qfmap([(box, 90)], background_qf=30, image_w=64, image_h=64)
    assert m.qf.shape == (4, 4)
    assert m.qf[1, 1] == 90
    assert m.qf.sum() == 90 + 30 * 15

    # A box straddling cell borders covers every touched cell.
    box = BoundingBox(x=15.0, y=15.0, w=2.0, h=2.0)
    m = rasterize_qfmap([(box, 90)], 30, 64, 64)
    assert (m.qf[:2, :2] == 90).all()

    # Overlap keeps the larger qf.
    a = BoundingBox(x=0.0, y=0.0, w=32.0, h=32.0)
    b = BoundingBox(x=0.0, y=0.0, w=16.0, h=16.0)
    m = rasterize_qfmap([(a, 40), (b, 80)], 30, 64, 64)
    assert m.qf[0, 0] == 80
    assert m.qf[1, 1] == 40


# ---------------------------------------------------------------- rate/quality

FROZEN = {
    30: (34.9282, 0.4602),
    50: (36.4006, 0.6713),
    75: (38.3481, 1.0721),
    90: (41.3233, 1.8561),
}


@pytest.mark.parametrize("qf", sorted(FROZEN))
def test_frozen_rate_quality(qf):
    img = fixture_image()
    stream = encode_uniform(img, qf)
    recon = decode(stream)
    want_psnr, want_bpp = FROZEN[qf]
    assert psnr_arrays(img.pixels, recon.pixels) == pytest.approx(want_psnr, abs=1e-3)
    bpp = 8.0 * len(stream.data) / (img.width * img.height)
    assert bpp == pytest.approx(want_bpp, abs=1e-3)
    assert measure_rate(stream) == pytest.approx(bpp)


def test_bpp_increases_with_qf():
    img = fixture_image()
    rates = [measure_rate(encode_uniform(img, qf)) for qf in (10, 30, 50, 75, 90)]
    assert all(a < b for a, b in zip(rates, rates[1:]))


def test_encode_deterministic():
    img = fixture_image()
    assert encode_uniform(img, 55).data == encode_uniform(img, 55).data


# ---------------------------------------------------------------- conformance

def test_stream_is_standard_jpeg():
    img = fixture_image()
    stream = encode_uniform(img, 60)
    assert stream.data[:2] == b"\xff\xd8"
    assert stream.data[-2:] == b"\xff\xd9"
    pil = Image.open(io.BytesIO(stream.data))
    assert pil.size == (img.width, img.height)
    assert pil.mode == "RGB"
    theirs = np.asarray(pil.convert("RGB"))
    ours = decode(stream).pixels
    # Decoders may round the IDCT differently; reconstructions stay close.
    assert np.abs(theirs.astype(np.int16) - ours.astype(np.int16)).mean() < 2.0
    assert psnr_arrays(img.pixels, theirs) == pytest.approx(
        psnr_arrays(img.pixels, ours), abs=0.5
    )


def test_gray_stream_is_standard_jpeg():
    rng = np.random.default_rng(5)
    base = rng.integers(0, 256, (48, 64, 1)).astype(np.uint8)
    img = ImagePlane(pixels=base)
    stream = encode_uniform(img, 70)
    pil = Image.open(io.BytesIO(stream.data))
    assert pil.mode == "L"
    recon = decode(stream)
    assert recon.pixels.shape == base.shape
    theirs = np.asarray(pil)[..., None]
    assert np.abs(theirs.astype(np.int16) - recon.pixels.astype(np.int16)).mean() < 2.0


# ---------------------------------------------------------------- extension segment

def strip_app11(data: bytes) -> bytes:
    # Remove our application segment so only standard markers remain.
    out = bytearray()
    i = 0
    while i < len(data):
        if data[i] == 0xFF and i + 1 < len(data) and data[i + 1] == 0xEB:
            seg_len = int.from_bytes(data[i + 2 : i + 4], "big")
            i += 2 + seg_len
            continue
        out.append(data[i])
        i += 1
    return bytes(out)


def test_qfmap_roundtrips_through_stream():
    img = fixture_image()
    grid = QfMap.uniform(35, img.width, img.height).qf.copy()
    grid[0, 0] = 88
    stream = encode(img, QfMap(qf=grid))
    back = read_qfmap(stream.data)
    assert back is not None
    assert np.array_equal(back.qf, grid)


def test_plain_jpeg_has_no_qfmap(tmp_path):
    img = fixture_image()
    buf = io.BytesIO()
    Image.fromarray(img.pixels).save(buf, format="JPEG", quality=60)
    assert read_qfmap(buf.getvalue()) is None


def test_stripping_extension_keeps_pixels():
    img = fixture_image()
    grid = QfMap.uniform(40, img.width, img.height).qf.copy()
    grid[1:3, 1:3] = 85
    stream = encode(img, QfMap(qf=grid))
    stripped = strip_app11(stream.data)
    assert len(stripped) < len(stream.data)
    assert read_qfmap(stripped) is None
    a = decode(stream.data)
    b = decode(stripped)
    assert np.array_equal(a.pixels, b.pixels)


# ---------------------------------------------------------------- adaptive coding

def test_adaptive_rate_between_uniform_extremes():
    img = fixture_image()
    grid = QfMap.uniform(30, img.width, img.height).qf.copy()
    grid[: grid.shape[0] // 2] = 90
    lo = measure_rate(encode_uniform(img, 30))
    hi = measure_rate(encode_uniform(img, 90))
    mid = measure_rate(encode(img, QfMap(qf=grid)))
    assert lo < mid < hi


def test_adaptive_map_localizes_error():
    img = fixture_image()
    box = BoundingBox(x=96.0, y=96.0, w=64.0, h=64.0)
    qfmap = rasterize_qfmap([(box, 95)], background_qf=30, image_w=img.width, image_h=img.height)
    recon = decode(encode(img, qfmap))
    err = (recon.pixels.astype(np.float64) - img.pixels.astype(np.float64)) ** 2
    inside = err[96:160, 96:160].mean()
    outside = np.concatenate([err[:96].ravel(), err[160:].ravel()])
    assert inside < outside.mean()


def test_qfmap_shape_must_cover_image():
    img = fixture_image()
    with pytest.raises(ValueError):
        encode(img, QfMap(qf=np.full((2, 2), 50, dtype=np.int64)))


# ---------------------------------------------------------------- malformed input

def test_truncated_stream_raises():
    img = fixture_image()
    data = encode_uniform(img, 50).data
    with pytest.raises(DecodeError) as err:
        decode(data[: len(data) // 2])
    assert err.value.offset >= 0
    assert "offset" in str(err.value)


def test_garbage_raises():
    with pytest.raises(DecodeError):
        decode(b"\x00" * 64)
    with pytest.raises(DecodeError):
        decode(b"\xff\xd8" + b"\x12\x34" * 40)
