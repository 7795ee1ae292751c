"""Generate the checked-in test fixtures under tests/data/.

Three artifacts:

* test_image.png - a deterministic 256x256 color image with photographic
  statistics: correlated channels (so chroma subsampling costs little),
  smooth gradients, edges, and mild texture.  Codec regression tests
  freeze PSNR values measured on this exact image.
* responses/ - a synthetic detector response tree (2 images, 3 tasks,
  65 quality levels each) produced by the scripted toy detector.
* golden_annotations.json - the JRD annotations for that tree, computed
  here by a deliberately naive re-implementation of the labeling rules
  (independent of the library's vectorized path) and serialized with the
  library writer.  The CLI test requires byte equality against this file.

Run from the repository root:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from jrdkit.annotation import parse_response_file
from jrdkit.annotation import annotations_to_json
from jrdkit.codec import decode, encode_uniform
from jrdkit.core import ImagePlane, JrdAnnotation, TASKS, attribute_triplet
from jrdkit.imgio import write_image
from jrdkit.metrics import box_iou, psnr_arrays, task_similarity
from jrdkit.toydata import make_response_tree

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def make_test_image(size: int = 256) -> ImagePlane:
    """Photograph-like test card: gradients, disks, bars, mild grain."""
    rng = np.random.default_rng(2024)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64) / size
    luma = 96.0 + 70.0 * np.sin(2.2 * np.pi * x + 1.0) * np.cos(1.7 * np.pi * y)
    for cx, cy, r, amp in ((0.3, 0.35, 0.18, 55.0), (0.72, 0.6, 0.24, -45.0), (0.55, 0.2, 0.1, 35.0)):
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        luma += amp * np.exp(-d2 / (2 * r * r))
    bars = ((x * 24).astype(int) % 8 < 4) & (y > 0.78) & (y < 0.9)
    luma += np.where(bars, 28.0, 0.0)
    # Midband grain: white noise smoothed once, so energy sits in the
    # frequencies JPEG actually quantizes away at low quality.
    grain = rng.normal(0.0, 9.0, (size, size))
    grain = (grain + np.roll(grain, 1, 0) + np.roll(grain, 1, 1) + np.roll(grain, (1, 1), (0, 1))) / 4.0
    luma += grain + rng.normal(0.0, 1.2, (size, size))
    # Channel tints vary slowly so 4:2:0 chroma keeps its information.
    tint_r = 18.0 * np.sin(1.3 * np.pi * x) * np.sin(0.9 * np.pi * y)
    tint_b = 16.0 * np.cos(1.1 * np.pi * (x + y))
    rgb = np.stack([luma + tint_r, luma, luma + tint_b], axis=-1)
    return ImagePlane(pixels=np.clip(rgb, 0, 255).astype(np.uint8))


# -- naive annotation oracle ----------------------------------------------------


def _naive_jrd(labels: list[int], window: int) -> int:
    for q in range(64 - window + 1):
        if sum(labels[q : q + window]) == 0:
            return q - 1
    return 63


def naive_annotations(responses_dir: Path, threshold: float = 0.75, window: int = 3,
                      min_kpd_area: float = 1024.0) -> list[JrdAnnotation]:
    """Straight-line reading of the labeling rules, one loop at a time."""
    by_image: dict[str, dict[str, dict] ] = {}
    for path in sorted(responses_dir.rglob("*.json")):
        rf = parse_response_file(path)
        by_image.setdefault(rf.image_id, {}).setdefault(rf.task, {})[rf.qp] = rf

    out = []
    for image_id in sorted(by_image):
        tasks = by_image[image_id]
        canonical = None
        for t in TASKS:
            if t in tasks and "orig" in tasks[t]:
                canonical = t
                break
        if canonical is None:
            continue
        orig = tasks[canonical]["orig"]
        for obj_idx, det in enumerate(orig.detections):
            jrd: dict[str, int] = {}
            for t in TASKS:
                if t not in tasks or "orig" not in tasks[t]:
                    continue
                # Link by best box overlap against this task's own originals.
                candidates = tasks[t]["orig"].detections
                best, best_iou = None, 0.0
                for c in candidates:
                    v = box_iou(det.box, c.box)
                    if v > best_iou:
                        best, best_iou = c, v
                if t != canonical and (best is None or best_iou < 0.5):
                    continue
                ref = det if t == canonical else best
                if t == "kpd":
                    if ref.output.area < min_kpd_area:
                        continue
                    if not (ref.output.visibility > 0).any():
                        continue
                labels = []
                for q in range(64):
                    rf = tasks[t].get(q)
                    if rf is None:
                        raise SystemExit(f"missing level {q} for {image_id}/{t}")
                    best_sim, best_det = 0.0, None
                    for c in rf.detections:
                        v = task_similarity(t, ref.output, c.output)
                        if v > best_sim:
                            best_sim, best_det = v, c
                    if best_det is None:
                        labels.append(0)
                    else:
                        ok = (
                            best_det.class_id == ref.class_id
                            and best_det.confidence > threshold
                            and best_sim > threshold
                        )
                        labels.append(1 if ok else 0)
                level = _naive_jrd(labels, window)
                if level >= 0:
                    jrd[t] = level
            if jrd:
                out.append(
                    JrdAnnotation(
                        image_id=image_id,
                        object_id=obj_idx,
                        box=det.box,
                        attrs=attribute_triplet(det.box, orig.width, orig.height),
                        jrd=jrd,
                    )
                )
    return out


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)

    img = make_test_image()
    write_image(DATA / "test_image.png", img)
    print("test_image.png written; codec check:")
    for qf in (30, 50, 75, 90):
        recon = decode(encode_uniform(img, qf).data)
        stream = encode_uniform(img, qf)
        bpp = 8.0 * len(stream.data) / (img.width * img.height)
        print(f"  qf={qf:3d} psnr={psnr_arrays(img.pixels, recon.pixels):.4f} bpp={bpp:.4f}")

    tree_dir = DATA / "responses"
    if tree_dir.exists():
        for p in sorted(tree_dir.rglob("*.json")):
            p.unlink()
    make_response_tree(tree_dir, num_images=2, objects_per_image=3, seed=7)
    n_files = len(list(tree_dir.rglob("*.json")))
    print(f"responses/ written ({n_files} files)")

    anns = naive_annotations(tree_dir)
    golden = annotations_to_json(anns, threshold=0.75, window=3)
    (DATA / "golden_annotations.json").write_text(golden)
    print(f"golden_annotations.json written ({len(anns)} objects)")


if __name__ == "__main__":
    main()
