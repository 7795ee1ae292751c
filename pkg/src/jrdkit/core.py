"""Shared domain types for the JRD pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TASKS = ("od", "is", "kpd")
NUM_QUALITY_LEVELS = 64
NUM_KEYPOINTS = 17

# Side length of the square frame that object boxes are rescaled into when
# computing the attribute triplet.
ATTR_FRAME = 224


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"degenerate box: w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_xyxy(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.x + self.w, self.y + self.h)


@dataclass(frozen=True)
class Mask:
    """Binary instance mask over a full image grid."""

    bits: np.ndarray  # (h, w) bool

    def __post_init__(self):
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise ValueError("mask must be a 2-d bool array")

    @property
    def area(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class KeypointSet:
    """Ordered skeleton keypoints with per-point visibility and object area."""

    xy: np.ndarray  # (K, 2) float
    visibility: np.ndarray  # (K,) int, 0 = not labeled
    area: float

    def __post_init__(self):
        if self.xy.ndim != 2 or self.xy.shape[1] != 2:
            raise ValueError("keypoints must be a (K, 2) array")
        if self.visibility.shape != (self.xy.shape[0],):
            raise ValueError("visibility must align with keypoints")
        if self.area <= 0:
            raise ValueError(f"non-positive area: {self.area}")


@dataclass(frozen=True)
class ImagePlane:
    """8-bit interleaved image, pixels shaped (height, width, channels)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.dtype != np.uint8:
            raise ValueError("pixels must be a (h, w, c) uint8 array")
        if p.shape[2] not in (1, 3):
            raise ValueError(f"unsupported channel count: {p.shape[2]}")
        if p.shape[0] < 8 or p.shape[1] < 8:
            raise ValueError(f"image too small: {p.shape[1]}x{p.shape[0]}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class TaskResponse:
    """One detection from a task model on one image.

    `output` holds the task-specific result: a BoundingBox for "od", a Mask
    for "is", a KeypointSet for "kpd".  `box` is the detector's box for the
    same object and is present for every task; it anchors cross-task object
    linking and the attribute triplet.
    """

    task: str
    class_id: int
    confidence: float
    output: BoundingBox | Mask | KeypointSet
    box: BoundingBox

    _VARIANTS = {"od": BoundingBox, "is": Mask, "kpd": KeypointSet}

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task: {self.task!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")
        want = self._VARIANTS[self.task]
        if not isinstance(self.output, want):
            raise ValueError(
                f"task {self.task!r} needs {want.__name__} output, "
                f"got {type(self.output).__name__}"
            )


@dataclass(frozen=True)
class AttributeTriplet:
    """Scale and normalized center location of an object box."""

    s: float
    x0: float
    y0: float

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"non-positive scale: {self.s}")
        if not (0.0 <= self.x0 <= 1.0 and 0.0 <= self.y0 <= 1.0):
            raise ValueError(f"center out of range: ({self.x0}, {self.y0})")

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.x0, self.y0], dtype=np.float64)


@dataclass
class JrdAnnotation:
    """Per-object annotation: geometry, attributes, and per-task JRD levels."""

    image_id: str
    object_id: int
    box: BoundingBox
    attrs: AttributeTriplet
    jrd: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for task, level in self.jrd.items():
            if task not in TASKS:
                raise ValueError(f"unknown task key: {task!r}")
            if not 0 <= level < NUM_QUALITY_LEVELS:
                raise ValueError(f"jrd out of range for {task}: {level}")


def attribute_triplet(box: BoundingBox, image_w: int, image_h: int) -> AttributeTriplet:
    """Compute (s, x0, y0) for a box after anisotropic rescale to a square frame.

    The image is notionally resized to ATTR_FRAME x ATTR_FRAME; s is the
    rescaled box area over the frame area, (x0, y0) the rescaled box center
    divided by the frame side.  All three reduce to ratios of the original
    geometry, so the triplet is invariant to jointly scaling box and image.
    """
    if image_w <= 0 or image_h <= 0:
        raise ValueError(f"bad image dims: {image_w}x{image_h}")
    sx = ATTR_FRAME / image_w
    sy = ATTR_FRAME / image_h
    s = (box.w * sx) * (box.h * sy) / (ATTR_FRAME * ATTR_FRAME)
    cx, cy = box.center
    x0 = cx * sx / ATTR_FRAME
    y0 = cy * sy / ATTR_FRAME
    if not (0.0 <= x0 <= 1.0 and 0.0 <= y0 <= 1.0):
        raise ValueError(f"box center outside image: ({cx}, {cy})")
    return AttributeTriplet(s=s, x0=x0, y0=y0)
