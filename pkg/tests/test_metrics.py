import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jrdkit.core import BoundingBox, ImagePlane, KeypointSet, Mask, NUM_KEYPOINTS
from jrdkit.metrics import (
    DEFAULT_OKS_K,
    PSNR_CAP,
    UndefinedSimilarityError,
    box_iou,
    fidelity,
    mask_iou,
    oks,
    psnr,
    psnr_arrays,
    ssim,
    ssim_arrays,
    task_similarity,
)

boxes = st.builds(
    BoundingBox,
    x=st.floats(-50.0, 150.0),
    y=st.floats(-50.0, 150.0),
    w=st.floats(0.5, 120.0),
    h=st.floats(0.5, 120.0),
)


def iou_oracle(a: BoundingBox, b: BoundingBox) -> float:
    # Textbook form, written independently from the implementation.
    left = max(a.x, b.x)
    top = max(a.y, b.y)
    right = min(a.x + a.w, b.x + b.w)
    bottom = min(a.y + a.h, b.y + b.h)
    if right <= left or bottom <= top:
        return 0.0
    inter = (right - left) * (bottom - top)
    return inter / (a.w * a.h + b.w * b.h - inter)


@given(boxes, boxes)
def test_box_iou_matches_oracle(a, b):
    assert box_iou(a, b) == pytest.approx(iou_oracle(a, b), abs=1e-12)


@given(boxes, boxes)
def test_box_iou_symmetric_bounded(a, b):
    v = box_iou(a, b)
    assert 0.0 <= v <= 1.0 + 1e-12
    assert v == pytest.approx(box_iou(b, a))


@given(boxes)
def test_box_iou_self_is_one(a):
    assert box_iou(a, a) == pytest.approx(1.0)


def test_box_iou_half_overlap():
    a = BoundingBox(0.0, 0.0, 10.0, 10.0)
    b = BoundingBox(5.0, 0.0, 10.0, 10.0)
    # intersection 50, union 150
    assert box_iou(a, b) == pytest.approx(1.0 / 3.0)


def test_mask_iou_cases():
    a = Mask(bits=np.zeros((6, 6), dtype=np.bool_))
    b = Mask(bits=np.zeros((6, 6), dtype=np.bool_))
    assert mask_iou(a, b) == 1.0

    c = np.zeros((6, 6), dtype=np.bool_)
    c[:3] = True
    d = np.zeros((6, 6), dtype=np.bool_)
    d[1:4] = True
    # intersect rows 1..2 (12 px), union rows 0..3 (24 px)
    assert mask_iou(Mask(bits=c), Mask(bits=d)) == pytest.approx(0.5)

    with pytest.raises(ValueError):
        mask_iou(a, Mask(bits=np.zeros((5, 6), dtype=np.bool_)))


@given(st.data())
def test_mask_iou_matches_pixel_count_oracle(data):
    bits_a = data.draw(st.lists(st.booleans(), min_size=36, max_size=36))
    bits_b = data.draw(st.lists(st.booleans(), min_size=36, max_size=36))
    a = np.array(bits_a, dtype=np.bool_).reshape(6, 6)
    b = np.array(bits_b, dtype=np.bool_).reshape(6, 6)
    inter = sum(1 for p, q in zip(bits_a, bits_b) if p and q)
    union = sum(1 for p, q in zip(bits_a, bits_b) if p or q)
    want = 1.0 if union == 0 else inter / union
    assert mask_iou(Mask(bits=a), Mask(bits=b)) == pytest.approx(want)


def _kps(xy, vis=None, area=100.0):
    xy = np.asarray(xy, dtype=np.float64)
    if vis is None:
        vis = np.full(xy.shape[0], 2, dtype=int)
    return KeypointSet(xy=xy, visibility=np.asarray(vis), area=area)


def oks_oracle(ref, cand, ks):
    total, n = 0.0, 0
    for i in range(ref.xy.shape[0]):
        if ref.visibility[i] <= 0:
            continue
        dx = ref.xy[i, 0] - cand.xy[i, 0]
        dy = ref.xy[i, 1] - cand.xy[i, 1]
        total += math.exp(-(dx * dx + dy * dy) / (2.0 * ref.area * ks[i] ** 2))
        n += 1
    return total / n


def test_oks_identity_is_one():
    pts = np.arange(NUM_KEYPOINTS * 2, dtype=np.float64).reshape(-1, 2)
    r = _kps(pts)
    assert oks(r, r) == pytest.approx(1.0)


def test_oks_single_point_exp_minus_one():
    # One visible point displaced so d^2 = 2 * area * k^2 gives exp(-1).
    area = 100.0
    k = DEFAULT_OKS_K[0]
    d = math.sqrt(2.0 * area * k * k)
    ref = _kps(np.zeros((NUM_KEYPOINTS, 2)), vis=[2] + [0] * (NUM_KEYPOINTS - 1), area=area)
    moved = np.zeros((NUM_KEYPOINTS, 2))
    moved[0, 0] = d
    cand = _kps(moved, area=area)
    assert oks(ref, cand) == pytest.approx(math.exp(-1.0), abs=1e-6)
    assert oks(ref, cand) == pytest.approx(0.3679, abs=1e-4)


@settings(max_examples=50)
@given(st.data())
def test_oks_matches_scalar_oracle(data):
    rng_seed = data.draw(st.integers(0, 10_000))
    rng = np.random.default_rng(rng_seed)
    ref_xy = rng.uniform(0, 50, (NUM_KEYPOINTS, 2))
    cand_xy = ref_xy + rng.normal(0, 3, (NUM_KEYPOINTS, 2))
    vis = rng.integers(0, 3, NUM_KEYPOINTS)
    if not (vis > 0).any():
        vis[0] = 2
    area = float(rng.uniform(50, 500))
    ref = _kps(ref_xy, vis=vis, area=area)
    cand = _kps(cand_xy, area=area)
    assert oks(ref, cand) == pytest.approx(oks_oracle(ref, cand, DEFAULT_OKS_K), abs=1e-12)


def test_oks_ignores_candidate_visibility_uses_reference():
    ref = _kps(np.zeros((NUM_KEYPOINTS, 2)), vis=[0] * NUM_KEYPOINTS)
    cand = _kps(np.zeros((NUM_KEYPOINTS, 2)))
    with pytest.raises(UndefinedSimilarityError):
        oks(ref, cand)


def test_oks_rejects_mismatched_counts():
    ref = _kps(np.zeros((NUM_KEYPOINTS, 2)))
    cand = KeypointSet(
        xy=np.zeros((5, 2)), visibility=np.ones(5, dtype=int), area=10.0
    )
    with pytest.raises(ValueError):
        oks(ref, cand)


def test_psnr_known_values():
    a = np.zeros((16, 16, 1), dtype=np.uint8)
    b = a.copy()
    b[0, 0, 0] = 16  # MSE = 256/256 = 1.0
    assert psnr_arrays(a, b) == pytest.approx(20.0 * math.log10(255.0), abs=1e-9)
    assert psnr_arrays(a, b) == pytest.approx(48.1308, abs=1e-3)
    assert psnr_arrays(a, a) == PSNR_CAP


def test_psnr_accepts_planes_and_arrays():
    img = ImagePlane(pixels=np.full((8, 8, 3), 100, dtype=np.uint8))
    assert psnr(img, img) == PSNR_CAP
    assert psnr(img.pixels, img.pixels) == PSNR_CAP


@given(st.integers(0, 2**32 - 1))
def test_psnr_symmetric(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)
    b = rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)
    assert psnr_arrays(a, b) == psnr_arrays(b, a)


def ssim_window_oracle(a, b, k=8):
    # Direct per-window loop with population moments.
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    vals = []
    for i in range(a.shape[0] - k + 1):
        for j in range(a.shape[1] - k + 1):
            wa = a[i : i + k, j : j + k]
            wb = b[i : i + k, j : j + k]
            mu_a, mu_b = wa.mean(), wb.mean()
            va, vb = wa.var(), wb.var()
            cov = ((wa - mu_a) * (wb - mu_b)).mean()
            vals.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
            )
    return float(np.mean(vals))


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_ssim_matches_window_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (12, 14)).astype(np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-20, 21, a.shape), 0, 255).astype(np.uint8)
    assert ssim_arrays(a, b) == pytest.approx(ssim_window_oracle(a, b), abs=1e-9)


def test_ssim_identity_and_bounds():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
    assert ssim_arrays(a, a) == pytest.approx(1.0)
    b = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
    assert ssim_arrays(a, b) <= 1.0


def test_ssim_multichannel_averages():
    rng = np.random.default_rng(4)
    a = rng.integers(0, 256, (10, 10, 3)).astype(np.uint8)
    b = rng.integers(0, 256, (10, 10, 3)).astype(np.uint8)
    per_channel = [ssim_arrays(a[:, :, c], b[:, :, c]) for c in range(3)]
    assert ssim_arrays(a, b) == pytest.approx(float(np.mean(per_channel)))


def test_ssim_rejects_small_input():
    a = np.zeros((4, 4), dtype=np.uint8)
    with pytest.raises(ValueError):
        ssim_arrays(a, a)


def test_fidelity_bundles_both():
    img = ImagePlane(pixels=np.full((8, 8, 1), 40, dtype=np.uint8))
    rep = fidelity(img, img)
    assert rep.psnr == PSNR_CAP
    assert rep.ssim == pytest.approx(1.0)


def test_task_similarity_dispatch():
    a = BoundingBox(0.0, 0.0, 10.0, 10.0)
    b = BoundingBox(5.0, 0.0, 10.0, 10.0)
    assert task_similarity("od", a, b) == pytest.approx(box_iou(a, b))

    m = Mask(bits=np.ones((4, 4), dtype=np.bool_))
    assert task_similarity("is", m, m) == 1.0

    k = _kps(np.zeros((NUM_KEYPOINTS, 2)))
    assert task_similarity("kpd", k, k) == pytest.approx(1.0)

    with pytest.raises(ValueError):
        task_similarity("nope", a, b)
