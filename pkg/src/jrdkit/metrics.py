"""Task similarity and pixel fidelity measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoundingBox, ImagePlane, KeypointSet, Mask

SimilarityScore = float

# Per-keypoint falloff constants for the 17-point person skeleton, twice the
# conventional per-joint sigma.
DEFAULT_OKS_K = (
    0.052, 0.05, 0.05, 0.07, 0.07, 0.158, 0.158, 0.144, 0.144,
    0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178,
)

# PSNR reported for byte-identical inputs; also an upper cap so that the
# measure stays finite and ordered near zero error.
PSNR_CAP = 99.0

_SSIM_WINDOW = 8
_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2


class UndefinedSimilarityError(ValueError):
    """Raised when a similarity has no defined value for the given inputs."""


@dataclass(frozen=True)
class FidelityReport:
    psnr: float
    ssim: float


def box_iou(a: BoundingBox, b: BoundingBox) -> SimilarityScore:
    """Intersection over union of two boxes."""
    ax0, ay0, ax1, ay1 = a.as_xyxy()
    bx0, by0, bx1, by1 = b.as_xyxy()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def mask_iou(a: Mask, b: Mask) -> SimilarityScore:
    """Intersection over union of two masks; two empty masks count as equal."""
    if a.bits.shape != b.bits.shape:
        raise ValueError(f"mask grids differ: {a.bits.shape} vs {b.bits.shape}")
    inter = np.logical_and(a.bits, b.bits).sum()
    union = np.logical_or(a.bits, b.bits).sum()
    if union == 0:
        return 1.0
    return float(inter) / float(union)


def oks(
    reference: KeypointSet,
    candidate: KeypointSet,
    per_kp_constants: tuple[float, ...] = DEFAULT_OKS_K,
) -> SimilarityScore:
    """Object keypoint similarity of a candidate against a reference skeleton.

    Averages exp(-d_i^2 / (2 * area * k_i^2)) over the reference points with
    visibility > 0, using the reference's area as the object scale.
    """
    n = reference.xy.shape[0]
    if candidate.xy.shape[0] != n:
        raise ValueError(f"keypoint counts differ: {n} vs {candidate.xy.shape[0]}")
    if len(per_kp_constants) != n:
        raise ValueError(f"need {n} falloff constants, got {len(per_kp_constants)}")
    use = reference.visibility > 0
    if not use.any():
        raise UndefinedSimilarityError("reference has no visible keypoints")
    d2 = np.sum((reference.xy[use] - candidate.xy[use]) ** 2, axis=1)
    k = np.asarray(per_kp_constants, dtype=np.float64)[use]
    e = d2 / (2.0 * reference.area * k ** 2)
    return float(np.mean(np.exp(-e)))


def psnr_arrays(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB between two uint8 arrays of identical shape, capped."""
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP
    value = 20.0 * np.log10(255.0) - 10.0 * np.log10(mse)
    return min(float(value), PSNR_CAP)


def _pixels(x: ImagePlane | np.ndarray) -> np.ndarray:
    return x.pixels if isinstance(x, ImagePlane) else np.asarray(x)


def psnr(a: ImagePlane | np.ndarray, b: ImagePlane | np.ndarray) -> float:
    return psnr_arrays(_pixels(a), _pixels(b))


def _window_moments(x: np.ndarray, k: int) -> np.ndarray:
    """Mean of every k x k window (valid positions) via an integral image."""
    s = np.cumsum(np.cumsum(x, axis=0), axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    total = s[k:, k:] - s[k:, :-k] - s[:-k, k:] + s[:-k, :-k]
    return total / (k * k)


def _ssim_channel(a: np.ndarray, b: np.ndarray) -> float:
    k = _SSIM_WINDOW
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    mu_a = _window_moments(a, k)
    mu_b = _window_moments(b, k)
    # Window moments are population statistics over the k*k samples.
    var_a = _window_moments(a * a, k) - mu_a * mu_a
    var_b = _window_moments(b * b, k) - mu_b * mu_b
    cov = _window_moments(a * b, k) - mu_a * mu_b
    num = (2 * mu_a * mu_b + _SSIM_C1) * (2 * cov + _SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    return float(np.mean(num / den))


def ssim_arrays(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over sliding 8x8 uniform windows."""
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.shape[0] < _SSIM_WINDOW or a.shape[1] < _SSIM_WINDOW:
        raise ValueError("image smaller than the similarity window")
    scores = [_ssim_channel(a[:, :, c], b[:, :, c]) for c in range(a.shape[2])]
    return float(np.mean(scores))


def ssim(a: ImagePlane | np.ndarray, b: ImagePlane | np.ndarray) -> float:
    return ssim_arrays(_pixels(a), _pixels(b))


def fidelity(a: ImagePlane | np.ndarray, b: ImagePlane | np.ndarray) -> FidelityReport:
    return FidelityReport(psnr=psnr(a, b), ssim=ssim(a, b))


TaskOutput = BoundingBox | Mask | KeypointSet


def task_similarity(task: str, reference: TaskOutput, candidate: TaskOutput) -> SimilarityScore:
    """Dispatch to the task's similarity measure."""
    if task == "od":
        return box_iou(reference, candidate)
    if task == "is":
        return mask_iou(reference, candidate)
    if task == "kpd":
        return oks(reference, candidate)
    raise ValueError(f"unknown task: {task!r}")
