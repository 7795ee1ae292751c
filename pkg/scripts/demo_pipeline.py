"""End-to-end demo: annotate, train, predict, code, compare.

Runs the whole pipeline at desk scale on synthetic inputs and prints the
headline numbers.  Artifacts land in demo_out/ next to the repository
root.  Takes about a minute.

    python3 scripts/demo_pipeline.py
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from jrdkit.annotation import build_annotations, dataset_stats
from jrdkit.codec import decode, encode_uniform
from jrdkit.core import TASKS, BoundingBox, ImagePlane
from jrdkit.evaluation import (
    RateAccuracyCurve,
    bd_metric,
    curve_to_csv,
    quality_delta_report,
    render_curves_svg,
)
from jrdkit.metrics import psnr_arrays
from jrdkit.predictor import ModelConfig, error_metrics, predict, train
from jrdkit.toydata import make_response_tree, make_textured_image, make_toy_dataset
from jrdkit.vcm import OD_IS_CANDIDATES, QfCandidates, VcmJob, VcmObject, qp_to_qf, vcm_encode

OUT = Path(__file__).resolve().parent.parent / "demo_out"


def step_annotate() -> None:
    tree = OUT / "responses"
    if not (tree / "im0000__od__orig.json").exists():
        make_response_tree(tree, num_images=2, objects_per_image=3, seed=0)
    anns = build_annotations(tree)
    stats = dataset_stats(anns)
    print(f"[annotate] {stats.count} objects; per-task means:", {t: stats.per_task_mean[t] for t in TASKS})


def step_train() -> tuple:
    samples = make_toy_dataset(32, seed=0, size=64, steps=8)
    cfg = ModelConfig(seed=0)
    t0 = time.time()
    result = train(cfg, samples, epochs=150, lr=0.1, batch_size=4)
    preds, truths = [], []
    for s in samples:
        p = predict(result.model, s.image, s.attrs)
        for t in TASKS:
            preds.append(p[t])
            truths.append(s.jrd[t])
    rep = error_metrics(preds, truths)
    print(
        f"[train] {time.time() - t0:.1f}s, final loss {result.epoch_losses[-1]:.3f}, "
        f"E_A={rep.mean_abs_error:.3f}, sigma_e={rep.error_std:.3f}"
    )
    return result.model, samples


def step_vcm(model, samples) -> None:
    rng = np.random.default_rng(5)
    image = make_textured_image(9, 192, 128)
    box = BoundingBox(40.0, 24.0, 80.0, 64.0)
    true_level = 30
    predicted = predict(model, samples[0].image, samples[0].attrs)["od"]

    results = {}
    for name, level in (("true", true_level), ("predicted", int(np.clip(predicted, 0, 63)))):
        job = VcmJob(image=image, objects=(VcmObject(box=box, jrd_qp=level),))
        res = vcm_encode(job, QfCandidates(OD_IS_CANDIDATES))
        results[name] = res
        print(f"[vcm] {name} level {level}: chosen qf {res.chosen_qf[0]}, bpp {res.bpp:.4f}")

    crops = []
    for name, res in results.items():
        recon = decode(res.stream.data)
        x0, y0 = int(box.x), int(box.y)
        crops.append(recon.pixels[y0 : y0 + int(box.h), x0 : x0 + int(box.w)])
    orig_crop = image.pixels[int(box.y) : int(box.y) + int(box.h), int(box.x) : int(box.x) + int(box.w)]
    rep = quality_delta_report([orig_crop], [crops[0]], [crops[1]])
    print(f"[vcm] |dPSNR|={rep.psnr_mae:.3f} dB, |dSSIM|={rep.ssim_mae:.4f}")


def step_curves() -> None:
    image = make_textured_image(11, 128, 128)
    points = []
    for qf in (20, 35, 55, 80):
        stream = encode_uniform(image, qf)
        recon = decode(stream.data)
        bpp = 8.0 * len(stream.data) / (image.width * image.height)
        quality = psnr_arrays(image.pixels, recon.pixels)
        # Stand-in accuracy: squash PSNR into [0,1] so the demo needs no detector.
        points.append((bpp, float(1.0 / (1.0 + np.exp(-(quality - 30.0) / 3.0)))))
    base = RateAccuracyCurve(points=tuple(points), label="uniform", task="od")
    better = RateAccuracyCurve(
        points=tuple((b * 0.82, a) for b, a in base.points), label="jrd-adaptive", task="od"
    )
    delta = bd_metric(base, better)
    OUT.mkdir(exist_ok=True)
    (OUT / "curve_uniform.csv").write_text(curve_to_csv(base))
    (OUT / "curve_adaptive.csv").write_text(curve_to_csv(better))
    (OUT / "curves.svg").write_text(render_curves_svg([base, better], title="demo rate-accuracy"))
    print(f"[curves] BD accuracy delta {delta:+.2f} points; artifacts in {OUT}/")


def main() -> None:
    OUT.mkdir(exist_ok=True)
    step_annotate()
    model, samples = step_train()
    step_vcm(model, samples)
    step_curves()


if __name__ == "__main__":
    main()
