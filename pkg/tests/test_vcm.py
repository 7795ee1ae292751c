import math
from pathlib import Path

import numpy as np
import pytest

from jrdkit.codec import decode, read_qfmap
from jrdkit.core import BoundingBox, ImagePlane
from jrdkit.imgio import read_image, write_image
from jrdkit.metrics import psnr_arrays
from jrdkit.vcm import (
    KPD_CANDIDATES,
    OD_IS_CANDIDATES,
    QfCandidates,
    VcmJob,
    VcmObject,
    crop_box,
    jrd_to_reference,
    qp_to_qf,
    roundtrip_region,
    search_qf,
    search_qf_detailed,
    vcm_encode,
)

DATA = Path(__file__).parent / "data"


def fixture_image():
    return read_image(DATA / "test_image.png")


# ---------------------------------------------------------------- config types

def test_candidate_validation():
    QfCandidates(values=(42, 44, 46))
    with pytest.raises(ValueError):
        QfCandidates(values=())
    with pytest.raises(ValueError):
        QfCandidates(values=(10, 10, 20))
    with pytest.raises(ValueError):
        QfCandidates(values=(0, 50))
    with pytest.raises(ValueError):
        QfCandidates(values=(50, 101))


def test_vcm_object_needs_exactly_one_goal():
    box = BoundingBox(x=0.0, y=0.0, w=10.0, h=10.0)
    VcmObject(box=box, jrd_qp=30)
    VcmObject(box=box, target_psnr=35.0)
    with pytest.raises(ValueError):
        VcmObject(box=box)
    with pytest.raises(ValueError):
        VcmObject(box=box, jrd_qp=30, target_psnr=35.0)
    with pytest.raises(ValueError):
        VcmObject(box=box, jrd_qp=64)


# ---------------------------------------------------------------- geometry

def test_crop_box_bounds():
    img = fixture_image()
    crop = crop_box(img, BoundingBox(x=10.2, y=20.8, w=30.0, h=15.0))
    # floor on the origin, ceil on the far edge
    assert crop.shape == (16, 31, 3)
    assert np.array_equal(crop, img.pixels[20:36, 10:41])

    clamped = crop_box(img, BoundingBox(x=-5.0, y=-5.0, w=20.0, h=20.0))
    assert clamped.shape == (15, 15, 3)

    with pytest.raises(ValueError):
        crop_box(img, BoundingBox(x=500.0, y=0.0, w=10.0, h=10.0))


def test_roundtrip_region_keeps_shape():
    img = fixture_image()
    for box in (
        BoundingBox(x=32.0, y=32.0, w=40.0, h=24.0),
        BoundingBox(x=10.0, y=10.0, w=3.0, h=5.0),  # below one block
    ):
        crop = crop_box(img, box)
        recon = roundtrip_region(img, box, 60)
        assert recon.shape == crop.shape
        assert psnr_arrays(crop, recon) > 20.0


# ---------------------------------------------------------------- search

def exhaustive_qf(image, box, target, candidates):
    diffs = [
        abs(psnr_arrays(crop_box(image, box), roundtrip_region(image, box, qf)) - target)
        for qf in candidates.values
    ]
    return candidates.values[int(np.argmin(diffs))]


def test_search_matches_exhaustive_scan():
    img = fixture_image()
    rng = np.random.default_rng(11)
    ladders = (QfCandidates(OD_IS_CANDIDATES), QfCandidates(KPD_CANDIDATES))
    bound = math.ceil(math.log2(len(OD_IS_CANDIDATES))) + 2
    for trial in range(10):
        x = float(rng.integers(0, 150))
        y = float(rng.integers(0, 150))
        box = BoundingBox(x=x, y=y, w=float(rng.integers(24, 80)), h=float(rng.integers(24, 80)))
        cands = ladders[trial % 2]
        lo = psnr_arrays(crop_box(img, box), roundtrip_region(img, box, cands.values[0]))
        hi = psnr_arrays(crop_box(img, box), roundtrip_region(img, box, cands.values[-1]))
        target = float(rng.uniform(lo - 1.0, hi + 1.0))
        result = search_qf_detailed(img, box, target, cands)
        assert result.qf == exhaustive_qf(img, box, target, cands)
        if not result.exhaustive:
            assert result.probes <= bound


def test_search_extreme_targets():
    img = fixture_image()
    box = BoundingBox(x=64.0, y=64.0, w=48.0, h=48.0)
    cands = QfCandidates(OD_IS_CANDIDATES)
    assert search_qf(img, box, 1.0, cands) == cands.values[0]
    assert search_qf(img, box, 99.0, cands) == cands.values[-1]


def test_single_candidate_probes_once():
    img = fixture_image()
    box = BoundingBox(x=0.0, y=0.0, w=32.0, h=32.0)
    result = search_qf_detailed(img, box, 35.0, QfCandidates(values=(44,)))
    assert result.qf == 44
    assert result.probes == 1


# ---------------------------------------------------------------- level mapping

def test_qp_table_shape():
    values = [qp_to_qf(q) for q in range(64)]
    assert values[0] == 100
    assert all(1 <= v <= 100 for v in values)
    assert all(a >= b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        qp_to_qf(-1)
    with pytest.raises(ValueError):
        qp_to_qf(64)


def test_jrd_to_reference_internal_matches_roundtrip():
    img = fixture_image()
    box = BoundingBox(x=40.0, y=40.0, w=50.0, h=36.0)
    ref = jrd_to_reference(img, box, jrd_qp=30)
    assert np.array_equal(ref, roundtrip_region(img, box, qp_to_qf(30)))


def test_jrd_to_reference_external_files(tmp_path):
    img = fixture_image()
    box = BoundingBox(x=16.0, y=24.0, w=40.0, h=32.0)

    # A full-size reference file: the box is cropped out of it.
    full = tmp_path / "full.png"
    rng = np.random.default_rng(3)
    noisy = np.clip(img.pixels.astype(np.int16) + rng.integers(-4, 5, img.pixels.shape), 0, 255)
    write_image(full, ImagePlane(noisy.astype(np.uint8)))
    ref = jrd_to_reference(img, box, jrd_qp=10, reference=full)
    assert np.array_equal(ref, crop_box(read_image(full), box))

    # A crop-shaped reference file is used verbatim.
    crop_file = tmp_path / "crop.png"
    crop = crop_box(img, box)
    write_image(crop_file, ImagePlane(np.ascontiguousarray(crop)))
    ref = jrd_to_reference(img, box, jrd_qp=10, reference=crop_file)
    assert np.array_equal(ref, crop)

    # Anything else is rejected.
    odd = tmp_path / "odd.png"
    write_image(odd, ImagePlane(np.zeros((10, 10, 3), dtype=np.uint8)))
    with pytest.raises(ValueError):
        jrd_to_reference(img, box, jrd_qp=10, reference=odd)


# ---------------------------------------------------------------- whole pipeline

def test_vcm_encode_applies_delta():
    img = fixture_image()
    box = BoundingBox(x=80.0, y=80.0, w=64.0, h=64.0)
    job = VcmJob(image=img, objects=(VcmObject(box=box, target_psnr=36.0),), delta_qf=2)
    result = vcm_encode(job, QfCandidates(OD_IS_CANDIDATES))
    assert result.applied_qf == (result.chosen_qf[0] + 2,)
    qfmap = read_qfmap(result.stream.data)
    assert qfmap.qf.max() == result.applied_qf[0]
    assert result.bpp == pytest.approx(8.0 * len(result.stream.data) / (img.width * img.height))


def test_vcm_encode_no_objects_uses_background():
    img = fixture_image()
    job = VcmJob(image=img, objects=(), background_qf=25)
    result = vcm_encode(job, QfCandidates(OD_IS_CANDIDATES))
    qfmap = read_qfmap(result.stream.data)
    assert (qfmap.qf == 25).all()
    assert decode(result.stream.data).pixels.shape == img.pixels.shape


def test_vcm_recovers_ladder_level():
    # When the level's own quality factor sits on the ladder, the search must
    # hand it back exactly: the internal reference and the probes share one
    # reconstruction path.
    img = fixture_image()
    box = BoundingBox(x=96.0, y=64.0, w=56.0, h=56.0)
    cands = QfCandidates(OD_IS_CANDIDATES)
    level = next(q for q in range(64) if qp_to_qf(q) in cands.values)
    job = VcmJob(image=img, objects=(VcmObject(box=box, jrd_qp=level),))
    result = vcm_encode(job, cands)
    assert result.chosen_qf == (qp_to_qf(level),)
