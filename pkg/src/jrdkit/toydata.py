"""Deterministic synthetic data: images, toy training sets, response trees.

Everything here is seeded and reproducible byte-for-byte, so fixtures built
from these generators can be checked in and regenerated at will.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import (
    NUM_KEYPOINTS,
    NUM_QUALITY_LEVELS,
    TASKS,
    AttributeTriplet,
    BoundingBox,
    ImagePlane,
    Mask,
    attribute_triplet,
)
from .imgio import read_image, rle_encode, write_image
from .predictor import ToySample


def make_natural_image(seed: int, width: int = 128, height: int = 128, noise: float = 2.0) -> ImagePlane:
    """Smooth multi-scale gradient image with mild texture, RGB."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    channels = []
    for _ in range(3):
        img = np.full((height, width), 128.0)
        for _ in range(4):
            fx = rng.uniform(0.01, 0.12)
            fy = rng.uniform(0.01, 0.12)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(15, 45)
            img += amp * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
        channels.append(img)
    img = np.stack(channels, axis=2)
    # a few soft blobs for local structure
    for _ in range(5):
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        r = rng.uniform(8, width / 4)
        amp = rng.uniform(-50, 50)
        blob = amp * np.exp(-(((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * r * r)))
        img += blob[:, :, None] * rng.uniform(0.4, 1.0, size=3)
    img += rng.normal(0, noise, img.shape)
    return ImagePlane(np.clip(img, 0, 255).astype(np.uint8))


def make_textured_image(seed: int, width: int = 64, height: int = 64) -> ImagePlane:
    """Busy random-texture image; useful when coding error must never vanish."""
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, size=(height // 4, width // 4, 3), dtype=np.uint8)
    img = np.repeat(np.repeat(base, 4, axis=0), 4, axis=1).astype(np.float64)
    img += rng.normal(0, 12, img.shape)
    return ImagePlane(np.clip(img, 0, 255).astype(np.uint8))


# -- toy training set ---------------------------------------------------------


def _toy_jrd(scale_step: int, steps: int) -> dict[str, int]:
    base = 8 + round(48 * (scale_step + 1) / steps)
    return {
        "od": int(np.clip(base + 2, 0, 63)),
        "is": int(np.clip(base, 0, 63)),
        "kpd": int(np.clip(base - 2, 0, 63)),
    }


def make_toy_dataset(n: int, seed: int, size: int = 64, steps: int = 8) -> list[ToySample]:
    """Colored geometric patterns whose JRD is a pure function of pattern scale.

    Each sample shows one filled rectangle on a two-tone gradient background;
    the rectangle's relative size picks one of `steps` scale classes, and the
    per-task levels derive deterministically from that class.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        step = i % steps
        frac = 0.25 + 0.65 * (step + 1) / steps
        side = max(8, int(round(size * frac * 0.9)))
        x = int(rng.integers(0, size - side + 1))
        y = int(rng.integers(0, size - side + 1))
        c0 = rng.uniform(30, 225, size=3)
        c1 = rng.uniform(30, 225, size=3)
        fg = rng.uniform(0, 255, size=3)
        t = np.linspace(0, 1, size)[:, None, None]
        img = c0 * (1 - t) + c1 * t
        img = np.broadcast_to(img, (size, size, 3)).copy()
        img[y : y + side, x : x + side] = fg
        plane = ImagePlane(np.clip(img, 0, 255).astype(np.uint8))
        box = BoundingBox(x=float(x), y=float(y), w=float(side), h=float(side))
        samples.append(
            ToySample(
                image=plane,
                attrs=attribute_triplet(box, size, size),
                jrd=_toy_jrd(step, steps),
            )
        )
    return samples


def save_toy_dataset(samples: list[ToySample], out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        name = f"s{i:04d}.png"
        write_image(out_dir / name, s.image)
        entries.append(
            {
                "image": name,
                "attrs": {"s": s.attrs.s, "x0": s.attrs.x0, "y0": s.attrs.y0},
                "jrd": s.jrd,
            }
        )
    payload = {"schema_version": 1, "samples": entries}
    (out_dir / "samples.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_toy_dataset(path: str | Path) -> list[ToySample]:
    path = Path(path)
    payload = json.loads((path / "samples.json").read_text())
    if payload.get("schema_version") != 1:
        raise ValueError(f"unsupported dataset schema: {payload.get('schema_version')}")
    out = []
    for e in payload["samples"]:
        out.append(
            ToySample(
                image=read_image(path / e["image"]),
                attrs=AttributeTriplet(**e["attrs"]),
                jrd={k: int(v) for k, v in e["jrd"].items()},
            )
        )
    return out


# -- synthetic response trees -------------------------------------------------


def _grid_keypoints(box: BoundingBox) -> np.ndarray:
    """17 points laid out on a fixed grid inside the box."""
    us = np.linspace(0.15, 0.85, 5)
    pts = [(u, v) for v in (0.2, 0.5, 0.8) for u in us][:NUM_KEYPOINTS]
    pts += [(0.5, 0.35), (0.5, 0.65)][: NUM_KEYPOINTS - len(pts)]
    arr = np.array(pts, dtype=np.float64)
    arr[:, 0] = box.x + arr[:, 0] * box.w
    arr[:, 1] = box.y + arr[:, 1] * box.h
    return arr


def _detection_payload(task, class_id, conf, box, width, height, kp_xy=None, visible=None):
    det = {
        "class_id": int(class_id),
        "confidence": round(float(conf), 4),
        "box": [round(float(v), 2) for v in (box.x, box.y, box.w, box.h)],
    }
    if task == "is":
        bits = np.zeros((height, width), dtype=np.bool_)
        x0, y0 = int(round(box.x)), int(round(box.y))
        x1, y1 = int(round(box.x + box.w)), int(round(box.y + box.h))
        bits[max(0, y0) : max(0, y1), max(0, x0) : max(0, x1)] = True
        det["rle"] = rle_encode(Mask(bits=bits))
    elif task == "kpd":
        vis = visible if visible is not None else np.full(NUM_KEYPOINTS, 2, dtype=int)
        det["keypoints"] = [
            [round(float(x), 2), round(float(y), 2), int(v)]
            for (x, y), v in zip(kp_xy, vis)
        ]
        det["area"] = round(box.area, 2)
    return det


class _TreeObject:
    """Scripted behavior of one object across the 64 levels of one task."""

    def __init__(self, box, class_id, width, height, flip, vanish, noise_at):
        self.box = box
        self.class_id = class_id
        self.width = width
        self.height = height
        self.flip = flip  # last level with a healthy response
        self.vanish = vanish  # after flip: True = drop out, False = low confidence
        self.noise_at = noise_at  # level with one isolated dropout, or None
        self.kp = _grid_keypoints(box)
        self.max_drift = min(2.0, box.w / 18.0, box.h / 18.0)

    def detection(self, task: str, q: int | None, flip: int | None = None):
        if q is None:  # the uncompressed response
            return _detection_payload(
                task, self.class_id, 0.98, self.box, self.width, self.height, self.kp
            )
        flip = self.flip if flip is None else flip
        if q == self.noise_at:
            return None
        if q > flip:
            if self.vanish:
                return None
            shifted = BoundingBox(self.box.x + 4, self.box.y, self.box.w, self.box.h)
            kp = self.kp + np.array([4.0, 0.0])
            return _detection_payload(
                task, self.class_id, 0.5, shifted, self.width, self.height, kp
            )
        drift = self.max_drift * q / 63.0
        conf = 0.95 - 0.18 * q / 63.0
        moved = BoundingBox(self.box.x + drift, self.box.y, self.box.w, self.box.h)
        kp = self.kp + np.array([drift, 0.0])
        return _detection_payload(task, self.class_id, conf, moved, self.width, self.height, kp)


def make_response_tree(
    out_dir: str | Path,
    num_images: int = 2,
    objects_per_image: int = 3,
    seed: int = 0,
    width: int = 96,
    height: int = 64,
    with_small_object: bool = True,
) -> None:
    """Write a full synthetic response tree: 3 tasks x (original + 64 levels).

    Object responses degrade with the level: confidence decays, geometry
    drifts, and past a scripted flip level the object either disappears or
    reappears with an unusable confidence.  One isolated dropout below the
    flip exercises run smoothing, and an optional undersized object exercises
    the keypoint-task area filter.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for im in range(num_images):
        image_id = f"im{im:04d}"
        objects = []
        for k in range(objects_per_image):
            small = with_small_object and im == 0 and k == objects_per_image - 1
            side_w = int(rng.integers(18, 40)) if not small else 12
            side_h = int(rng.integers(18, 40)) if not small else 12
            x = float(rng.integers(1, max(2, width - side_w - 4)))
            y = float(rng.integers(1, max(2, height - side_h - 4)))
            flip = int(rng.integers(12, 52))
            vanish = bool(rng.random() < 0.6)
            noise_at = int(rng.integers(4, max(5, flip - 4))) if rng.random() < 0.4 else None
            objects.append(
                _TreeObject(
                    BoundingBox(x, y, float(side_w), float(side_h)),
                    class_id=1,
                    width=width,
                    height=height,
                    flip=flip,
                    vanish=vanish,
                    noise_at=noise_at,
                )
            )
        # one far-away distractor detection shared by every level
        distractor = _TreeObject(
            BoundingBox(float(width - 14), float(height - 12), 10.0, 8.0),
            class_id=2,
            width=width,
            height=height,
            flip=63,
            vanish=False,
            noise_at=None,
        )
        for task in TASKS:
            # per-task flip offsets keep the tasks distinguishable
            offset = {"od": 2, "is": 0, "kpd": -2}[task]
            for q in ["orig"] + list(range(NUM_QUALITY_LEVELS)):
                level = None if q == "orig" else q
                detections = []
                for obj in objects:
                    det = obj.detection(task, level, flip=int(np.clip(obj.flip + offset, 1, 62)))
                    if det is not None:
                        detections.append(det)
                ddet = distractor.detection(task, level)
                if ddet is not None:
                    detections.append(ddet)
                payload = {
                    "schema_version": 1,
                    "image_id": image_id,
                    "qp": q,
                    "task": task,
                    "width": width,
                    "height": height,
                    "detections": detections,
                }
                name = f"{image_id}__{task}__{q if q == 'orig' else f'{q:02d}'}.json"
                (out_dir / name).write_text(json.dumps(payload, sort_keys=True) + "\n")
