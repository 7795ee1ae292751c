"""Dataset construction: per-object recognition labels and JRD extraction.

Response files are harvested model outputs: for every image and task there is
one file for the uncompressed input plus one file per compression level 0..63.
An object's label at a level is 1 when the matched detection keeps the class,
clears the confidence threshold, and stays similar enough to the detection on
the uncompressed input.  The JRD is the last level before the labels go to
zero and stay there.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    NUM_QUALITY_LEVELS,
    TASKS,
    AttributeTriplet,
    BoundingBox,
    JrdAnnotation,
    KeypointSet,
    TaskResponse,
    attribute_triplet,
)
from .imgio import rle_decode
from .metrics import box_iou, task_similarity

log = logging.getLogger(__name__)

RESPONSE_SCHEMA_VERSION = 1
ANNOTATION_SCHEMA_VERSION = 1

DEFAULT_THRESHOLD = 0.75
DEFAULT_WINDOW = 3

# Objects below this pixel area are dropped from the keypoint task.
DEFAULT_MIN_KPD_AREA = 32.0 * 32.0

# Minimum box overlap for linking one task's detection to the canonical
# object list of another task.
_LINK_IOU = 0.5


class ResponseTreeError(ValueError):
    """Raised when the harvested response tree is malformed or incomplete."""


@dataclass(frozen=True)
class QualityTriple:
    """Class, confidence, and similarity of a matched detection."""

    class_id: int
    confidence: float
    similarity: float


@dataclass(frozen=True)
class LabelSequence:
    """Recognition labels over the 64 compression levels for one object/task."""

    task: str
    labels: np.ndarray  # (64,) uint8 of 0/1

    def __post_init__(self):
        if self.labels.shape != (NUM_QUALITY_LEVELS,):
            raise ValueError(f"need {NUM_QUALITY_LEVELS} labels, got {self.labels.shape}")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")


@dataclass(frozen=True)
class ResponseFile:
    image_id: str
    qp: int | str  # 0..63 or "orig"
    task: str
    width: int
    height: int
    detections: list[TaskResponse]


def match_response(
    reference: TaskResponse, candidates: list[TaskResponse]
) -> tuple[TaskResponse | None, float]:
    """Pick the candidate most similar to the reference under the task measure.

    Similarity alone decides the match; class and confidence are judged later.
    Returns (None, 0.0) when there are no candidates.
    """
    best = None
    best_sim = 0.0
    for cand in candidates:
        sim = task_similarity(reference.task, reference.output, cand.output)
        if best is None or sim > best_sim:
            best = cand
            best_sim = sim
    if best is None:
        return None, 0.0
    return best, best_sim


def make_label(match: QualityTriple, reference_class: int, threshold: float) -> int:
    """1 when class is kept and both confidence and similarity exceed threshold."""
    return int(
        match.class_id == reference_class
        and match.confidence > threshold
        and match.similarity > threshold
    )


def jrd_from_labels(labels: np.ndarray, window: int = DEFAULT_WINDOW) -> int:
    """Last level before recognition fails persistently.

    Scans for the first level q whose next `window` labels are all zero (the
    window is clipped at the top level, where any remaining zeros suffice) and
    returns q - 1.  Returns 63 when no such run exists and -1 when the object
    is unrecognized from level 0, i.e. it never recognizably survives coding.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    labels = np.asarray(labels)
    if labels.shape != (NUM_QUALITY_LEVELS,):
        raise ValueError(f"need {NUM_QUALITY_LEVELS} labels, got {labels.shape}")
    for q in range(NUM_QUALITY_LEVELS):
        if not labels[q : q + window].any():
            return q - 1
    return NUM_QUALITY_LEVELS - 1


def _parse_detection(entry: dict, task: str, width: int, height: int, where: str) -> TaskResponse:
    try:
        box = BoundingBox(*[float(v) for v in entry["box"]])
        class_id = int(entry["class_id"])
        confidence = float(entry["confidence"])
        if task == "od":
            output = box
        elif task == "is":
            output = rle_decode(entry["rle"])
            if output.bits.shape != (height, width):
                raise ValueError(
                    f"mask grid {output.bits.shape} does not match image {height}x{width}"
                )
        else:
            kp = np.asarray(entry["keypoints"], dtype=np.float64)
            if kp.ndim != 2 or kp.shape[1] != 3:
                raise ValueError(f"keypoints must be (K, 3), got {kp.shape}")
            output = KeypointSet(
                xy=kp[:, :2],
                visibility=kp[:, 2].astype(np.int64),
                area=float(entry["area"]),
            )
        return TaskResponse(
            task=task, class_id=class_id, confidence=confidence, output=output, box=box
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ResponseTreeError(f"{where}: bad detection: {exc}") from exc


def parse_response_file(path: str | Path) -> ResponseFile:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ResponseTreeError(f"{path}: not valid JSON: {exc}") from exc
    try:
        version = payload["schema_version"]
        if version != RESPONSE_SCHEMA_VERSION:
            raise ResponseTreeError(f"{path}: unsupported schema_version {version}")
        task = payload["task"]
        if task not in TASKS:
            raise ResponseTreeError(f"{path}: unknown task {task!r}")
        qp = payload["qp"]
        if qp != "orig":
            qp = int(qp)
            if not 0 <= qp < NUM_QUALITY_LEVELS:
                raise ResponseTreeError(f"{path}: qp out of range: {qp}")
        width = int(payload["width"])
        height = int(payload["height"])
        detections = [
            _parse_detection(d, task, width, height, str(path)) for d in payload["detections"]
        ]
    except KeyError as exc:
        raise ResponseTreeError(f"{path}: missing field {exc}") from exc
    return ResponseFile(
        image_id=str(payload["image_id"]),
        qp=qp,
        task=task,
        width=width,
        height=height,
        detections=detections,
    )


def _index_tree(responses_dir: Path) -> dict[str, dict[str, dict[int | str, ResponseFile]]]:
    files = sorted(responses_dir.rglob("*.json"))
    if not files:
        raise ResponseTreeError(f"no response files under {responses_dir}")
    tree: dict[str, dict[str, dict[int | str, ResponseFile]]] = {}
    for path in files:
        resp = parse_response_file(path)
        per_task = tree.setdefault(resp.image_id, {}).setdefault(resp.task, {})
        if resp.qp in per_task:
            raise ResponseTreeError(
                f"duplicate response for image {resp.image_id}, task {resp.task}, qp {resp.qp}"
            )
        per_task[resp.qp] = resp
    return tree


def _link_object(
    canonical: TaskResponse, originals: list[TaskResponse]
) -> TaskResponse | None:
    best = None
    best_iou = 0.0
    for cand in originals:
        overlap = box_iou(canonical.box, cand.box)
        if overlap > best_iou:
            best = cand
            best_iou = overlap
    if best is None or best_iou < _LINK_IOU:
        return None
    return best


def _object_labels(
    reference: TaskResponse,
    levels: dict[int | str, ResponseFile],
    image_id: str,
    threshold: float,
) -> LabelSequence:
    labels = np.zeros(NUM_QUALITY_LEVELS, dtype=np.uint8)
    for q in range(NUM_QUALITY_LEVELS):
        if q not in levels:
            raise ResponseTreeError(
                f"image {image_id}, task {reference.task}: missing response for qp {q}"
            )
        match, sim = match_response(reference, levels[q].detections)
        if match is not None:
            triple = QualityTriple(match.class_id, match.confidence, sim)
            labels[q] = make_label(triple, reference.class_id, threshold)
    return LabelSequence(task=reference.task, labels=labels)


def _annotate_image(
    image_id: str,
    per_task: dict[str, dict[int | str, ResponseFile]],
    threshold: float,
    window: int,
    min_kpd_area: float,
) -> list[JrdAnnotation]:
    canonical_task = next((t for t in TASKS if "orig" in per_task.get(t, {})), None)
    if canonical_task is None:
        raise ResponseTreeError(f"image {image_id}: no original response in any task")
    canonical = per_task[canonical_task]["orig"]
    out = []
    for obj_id, det in enumerate(canonical.detections):
        jrd: dict[str, int] = {}
        for task in TASKS:
            levels = per_task.get(task)
            if not levels:
                continue
            if "orig" not in levels:
                raise ResponseTreeError(f"image {image_id}, task {task}: missing original response")
            reference = (
                det if task == canonical_task else _link_object(det, levels["orig"].detections)
            )
            if reference is None:
                continue
            if task == "kpd":
                kp = reference.output
                if kp.area < min_kpd_area or not (kp.visibility > 0).any():
                    continue
            seq = _object_labels(reference, levels, image_id, threshold)
            level = jrd_from_labels(seq.labels, window)
            if level >= 0:
                jrd[task] = level
        out.append(
            JrdAnnotation(
                image_id=image_id,
                object_id=obj_id,
                box=det.box,
                attrs=attribute_triplet(det.box, canonical.width, canonical.height),
                jrd=jrd,
            )
        )
    return out


def build_annotations(
    responses_dir: str | Path,
    threshold: float = DEFAULT_THRESHOLD,
    window: int = DEFAULT_WINDOW,
    min_kpd_area: float = DEFAULT_MIN_KPD_AREA,
    threads: int = 1,
) -> list[JrdAnnotation]:
    """Derive per-object JRD annotations from a harvested response tree.

    Objects are the detections on the uncompressed input, taken from the
    first task that has an original response; other tasks are linked to them
    by box overlap.  Objects unrecognized in a task at every level carry no
    entry for that task.  Output order is by image id, then detection order,
    so identical trees produce identical annotation lists.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold out of range: {threshold}")
    tree = _index_tree(Path(responses_dir))
    image_ids = sorted(tree)
    log.info("annotating %d images", len(image_ids))

    def work(image_id: str) -> list[JrdAnnotation]:
        return _annotate_image(image_id, tree[image_id], threshold, window, min_kpd_area)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(work, image_ids))
    else:
        per_image = [work(i) for i in image_ids]
    return [ann for group in per_image for ann in group]


def annotations_to_json(annotations: list[JrdAnnotation], threshold: float, window: int) -> str:
    """Canonical serialization; identical inputs give identical bytes."""
    payload = {
        "schema_version": ANNOTATION_SCHEMA_VERSION,
        "threshold": threshold,
        "window": window,
        "annotations": [
            {
                "image_id": a.image_id,
                "object_id": a.object_id,
                "box": [a.box.x, a.box.y, a.box.w, a.box.h],
                "attrs": {"s": a.attrs.s, "x0": a.attrs.x0, "y0": a.attrs.y0},
                "jrd": {t: a.jrd[t] for t in TASKS if t in a.jrd},
            }
            for a in annotations
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def annotations_from_json(text: str) -> list[JrdAnnotation]:
    payload = json.loads(text)
    version = payload.get("schema_version")
    if version != ANNOTATION_SCHEMA_VERSION:
        raise ValueError(f"unsupported annotation schema_version: {version}")
    out = []
    for entry in payload["annotations"]:
        out.append(
            JrdAnnotation(
                image_id=entry["image_id"],
                object_id=int(entry["object_id"]),
                box=BoundingBox(*entry["box"]),
                attrs=AttributeTriplet(
                    s=entry["attrs"]["s"], x0=entry["attrs"]["x0"], y0=entry["attrs"]["y0"]
                ),
                jrd={t: int(v) for t, v in entry["jrd"].items()},
            )
        )
    return out


@dataclass
class DatasetStats:
    """Aggregate JRD statistics; fields are None when undefined for the input."""

    count: int
    per_task_count: dict[str, int]
    per_task_mean: dict[str, float | None]
    per_task_histogram: dict[str, list[int]]
    size_decile_means: dict[str, list[float | None]] | None
    location_grid_means: dict[str, list[list[float | None]]]
    threshold_sweep_means: dict[str, dict[str, float | None]] | None


def _task_mean(annotations: list[JrdAnnotation], task: str) -> float | None:
    values = [a.jrd[task] for a in annotations if task in a.jrd]
    return float(np.mean(values)) if values else None


def dataset_stats(
    annotations: list[JrdAnnotation],
    sweep: dict[float, list[JrdAnnotation]] | None = None,
) -> DatasetStats:
    """Summarize a JRD annotation set.

    `sweep` optionally maps label thresholds to annotation sets built from the
    same responses, for reporting how mean JRD moves with the threshold.
    Size-decile means need at least 10 objects and are None below that.
    """
    count = len(annotations)
    per_task_count = {t: sum(1 for a in annotations if t in a.jrd) for t in TASKS}
    per_task_mean = {t: _task_mean(annotations, t) for t in TASKS}

    hist = {}
    for t in TASKS:
        values = [a.jrd[t] for a in annotations if t in a.jrd]
        hist[t] = np.bincount(values, minlength=NUM_QUALITY_LEVELS).tolist() if values else [0] * NUM_QUALITY_LEVELS

    deciles = None
    if count >= 10:
        order = sorted(annotations, key=lambda a: (a.attrs.s, a.image_id, a.object_id))
        bins = np.array_split(np.arange(count), 10)
        deciles = {
            t: [_task_mean([order[i] for i in b], t) for b in bins] for t in TASKS
        }

    grid: dict[str, list[list[float | None]]] = {}
    cells: list[list[list[JrdAnnotation]]] = [[[] for _ in range(3)] for _ in range(3)]
    for a in annotations:
        cx = min(int(a.attrs.x0 * 3), 2)
        cy = min(int(a.attrs.y0 * 3), 2)
        cells[cy][cx].append(a)
    for t in TASKS:
        grid[t] = [[_task_mean(cells[r][c], t) for c in range(3)] for r in range(3)]

    sweep_means = None
    if sweep is not None:
        sweep_means = {
            f"{thr:.2f}": {t: _task_mean(anns, t) for t in TASKS}
            for thr, anns in sorted(sweep.items())
        }

    return DatasetStats(
        count=count,
        per_task_count=per_task_count,
        per_task_mean=per_task_mean,
        per_task_histogram=hist,
        size_decile_means=deciles,
        location_grid_means=grid,
        threshold_sweep_means=sweep_means,
    )


def stats_to_json(stats: DatasetStats) -> str:
    payload = {
        "schema_version": 1,
        "count": stats.count,
        "per_task_count": stats.per_task_count,
        "per_task_mean": stats.per_task_mean,
        "per_task_histogram": stats.per_task_histogram,
        "size_decile_means": stats.size_decile_means,
        "location_grid_means": stats.location_grid_means,
        "threshold_sweep_means": stats.threshold_sweep_means,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
