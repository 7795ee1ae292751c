"""Recognition-aware encoding: map per-object JRD levels to JPEG quality.

Each object's JRD names the coarsest survivable quality on the 0..63 level
scale.  A reference reconstruction at that level sets a PSNR target over the
object's box, a search picks the JPEG quality factor whose box reconstruction
comes closest, and the per-object factors are rasterized into a block map for
the adaptive encoder.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .codec import Bitstream, QfMap, decode, encode, encode_uniform, measure_rate, rasterize_qfmap
from .core import BoundingBox, ImagePlane
from .imgio import read_image
from .metrics import psnr_arrays

log = logging.getLogger(__name__)

# Candidate quality ladders; keypoints tolerate less coding loss, so that
# ladder sits higher.
OD_IS_CANDIDATES = (42, 44, 46, 48, 50)
KPD_CANDIDATES = (46, 48, 50, 52, 54)

DEFAULT_BACKGROUND_QF = 30

_QP_TO_QF_RESOURCE = "qp_to_qf_v1.json"
_QP_TO_QF_SCHEMA = 1


@dataclass(frozen=True)
class QfCandidates:
    """Strictly increasing quality factors to search over."""

    values: tuple[int, ...]

    def __post_init__(self):
        v = self.values
        if not v:
            raise ValueError("empty candidate set")
        if any(not 1 <= q <= 100 for q in v):
            raise ValueError(f"candidates out of range: {v}")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"candidates must be strictly increasing: {v}")


@dataclass(frozen=True)
class VcmObject:
    """One object to protect: its box and either a JRD level or a PSNR target."""

    box: BoundingBox
    jrd_qp: int | None = None
    target_psnr: float | None = None

    def __post_init__(self):
        if (self.jrd_qp is None) == (self.target_psnr is None):
            raise ValueError("exactly one of jrd_qp / target_psnr must be set")
        if self.jrd_qp is not None and not 0 <= self.jrd_qp <= 63:
            raise ValueError(f"jrd_qp out of range: {self.jrd_qp}")


@dataclass(frozen=True)
class VcmJob:
    image: ImagePlane
    objects: tuple[VcmObject, ...]
    delta_qf: int = 0
    background_qf: int = DEFAULT_BACKGROUND_QF


@dataclass(frozen=True)
class SearchResult:
    qf: int
    probes: int
    exhaustive: bool


def crop_box(image: ImagePlane, box: BoundingBox) -> np.ndarray:
    """Integer pixel crop of a box, clamped to the image."""
    x0 = max(0, int(np.floor(box.x)))
    y0 = max(0, int(np.floor(box.y)))
    x1 = min(image.width, int(np.ceil(box.x + box.w)))
    y1 = min(image.height, int(np.ceil(box.y + box.h)))
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"box {box} lies outside the image")
    return image.pixels[y0:y1, x0:x1]


def region_target_psnr(original: ImagePlane, reference: ImagePlane, box: BoundingBox) -> float:
    """PSNR between two full images restricted to one box."""
    if (reference.height, reference.width) != (original.height, original.width):
        raise ValueError("original and reference dimensions differ")
    return psnr_arrays(crop_box(original, box), crop_box(reference, box))


def roundtrip_region(image: ImagePlane, box: BoundingBox, qf: int) -> np.ndarray:
    """Encode the box crop uniformly at qf and return its reconstruction.

    Crops smaller than one block are grown by edge replication before coding
    and cut back afterwards, so the result always matches the crop shape.
    """
    crop = crop_box(image, box)
    h, w = crop.shape[:2]
    padded = crop
    if h < 8 or w < 8:
        padded = np.pad(crop, ((0, max(0, 8 - h)), (0, max(0, 8 - w)), (0, 0)), mode="edge")
    recon = decode(encode_uniform(ImagePlane(padded), qf))
    return recon.pixels[:h, :w]


def _region_psnr_at(image: ImagePlane, box: BoundingBox, qf: int) -> float:
    return psnr_arrays(crop_box(image, box), roundtrip_region(image, box, qf))


def search_qf_detailed(
    original: ImagePlane,
    box: BoundingBox,
    target_psnr: float,
    candidates: QfCandidates,
) -> SearchResult:
    """Find the candidate whose box reconstruction PSNR is closest to target.

    Box PSNR grows with the quality factor on natural content, so a binary
    search brackets the target and the two straddling candidates decide the
    winner; ties go to the smaller factor.  One sentinel probe then checks
    the candidate just past the winner: small crops occasionally invert the
    quality order between adjacent factors by a few thousandths of a dB,
    which the bracket alone cannot see.  Under true monotonicity the
    sentinel can never look closer, so the probe count stays within
    ceil(log2 n) + 2; any sign of inversion drops the search to a full scan,
    keeping the closest-match guarantee.
    """
    values = candidates.values
    cache: dict[int, float] = {}

    def probe(i: int) -> float:
        if i not in cache:
            cache[i] = _region_psnr_at(original, box, values[i])
        return cache[i]

    if len(values) == 1:
        probe(0)
        return SearchResult(qf=values[0], probes=1, exhaustive=False)

    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if probe(mid) >= target_psnr:
            hi = mid
        else:
            lo = mid + 1
    best = lo
    if lo > 0:
        d_lo = abs(probe(lo) - target_psnr)
        d_prev = abs(probe(lo - 1) - target_psnr)
        if d_prev <= d_lo:
            best = lo - 1

    inverted = False
    sentinel = best + 1 if best == lo else best - 1
    if 0 <= sentinel < len(values):
        inverted = abs(probe(sentinel) - target_psnr) < abs(probe(best) - target_psnr)

    probed = sorted(cache)
    mono = all(cache[a] <= cache[b] for a, b in zip(probed, probed[1:]))
    exhaustive = inverted or not mono
    if exhaustive:
        log.debug("non-monotone region psnr, scanning all %d candidates", len(values))
        for i in range(len(values)):
            probe(i)
        diffs = [abs(cache[i] - target_psnr) for i in range(len(values))]
        best = int(np.argmin(diffs))  # argmin takes the first, ties to smaller qf
    return SearchResult(qf=values[best], probes=len(cache), exhaustive=exhaustive)


def search_qf(
    original: ImagePlane,
    box: BoundingBox,
    target_psnr: float,
    candidates: QfCandidates,
) -> int:
    return search_qf_detailed(original, box, target_psnr, candidates).qf


def _load_qp_table() -> list[int]:
    payload = json.loads(
        resources.files("jrdkit").joinpath("data").joinpath(_QP_TO_QF_RESOURCE).read_text()
    )
    if payload.get("schema_version") != _QP_TO_QF_SCHEMA:
        raise ValueError(f"unsupported qp table schema: {payload.get('schema_version')}")
    table = payload["qf_by_qp"]
    if len(table) != 64:
        raise ValueError(f"qp table must have 64 entries, got {len(table)}")
    return [int(v) for v in table]


_qp_table: list[int] | None = None


def qp_to_qf(qp: int) -> int:
    """Quality factor standing in for a reconstruction at level qp."""
    if not 0 <= qp <= 63:
        raise ValueError(f"qp out of range: {qp}")
    global _qp_table
    if _qp_table is None:
        _qp_table = _load_qp_table()
    return _qp_table[qp]


def jrd_to_reference(
    image: ImagePlane,
    box: BoundingBox,
    jrd_qp: int,
    reference: str | Path | None = None,
) -> np.ndarray:
    """Reconstruction of the box at the object's JRD level.

    With `reference` set, the reconstruction is loaded from disk: either a
    full-size decoded image (the box is cropped out) or a file holding the
    box crop itself.  Otherwise the level is mapped through the calibrated
    level-to-quality table and the crop is coded internally.
    """
    if reference is not None:
        ref = read_image(reference)
        if (ref.height, ref.width) == (image.height, image.width):
            return crop_box(ref, box)
        crop = crop_box(image, box)
        if ref.pixels.shape == crop.shape:
            return ref.pixels
        raise ValueError(
            f"reference dims {ref.pixels.shape} match neither image nor box crop {crop.shape}"
        )
    return roundtrip_region(image, box, qp_to_qf(jrd_qp))


@dataclass(frozen=True)
class VcmResult:
    stream: Bitstream
    bpp: float
    chosen_qf: tuple[int, ...]
    applied_qf: tuple[int, ...]


def vcm_encode(
    job: VcmJob,
    candidates: QfCandidates,
    reference_dir: str | Path | None = None,
    reference_suffix: str = ".png",
) -> VcmResult:
    """Encode one image with per-object quality chosen from JRD levels.

    Per object: obtain the reference reconstruction, turn it into a box PSNR
    target, search the candidate ladder, then add the safety offset before
    rasterizing.  With no objects the whole frame is coded at background
    quality.  `reference_dir` switches the reference source to external files
    named obj{index}{suffix}.
    """
    chosen = []
    applied = []
    regions = []
    for idx, obj in enumerate(job.objects):
        if obj.target_psnr is not None:
            target = obj.target_psnr
        else:
            ref_file = None
            if reference_dir is not None:
                ref_file = Path(reference_dir) / f"obj{idx}{reference_suffix}"
            ref = jrd_to_reference(job.image, obj.box, obj.jrd_qp, ref_file)
            target = psnr_arrays(crop_box(job.image, obj.box), ref)
        qf = search_qf(job.image, obj.box, target, candidates)
        final = int(np.clip(qf + job.delta_qf, 1, 100))
        chosen.append(qf)
        applied.append(final)
        regions.append((obj.box, final))
    qfmap = rasterize_qfmap(regions, job.background_qf, job.image.width, job.image.height)
    stream = encode(job.image, qfmap)
    return VcmResult(
        stream=stream,
        bpp=measure_rate(stream),
        chosen_qf=tuple(chosen),
        applied_qf=tuple(applied),
    )
