"""Accuracy and rate-accuracy evaluation utilities.

Average precision is computed per reference class and averaged, so
predictions compete only within their own class.  The rate-axis comparison
between two methods uses a Bjontegaard-style delta, but with a monotone
piecewise-cubic interpolant instead of the classical cubic polynomial fit;
an unconstrained cubic through 4 or 5 curve points oscillates enough to
dominate the metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .codec import Bitstream, measure_rate
from .core import TaskResponse
from .metrics import fidelity, task_similarity

DEFAULT_AP_THRESHOLDS = tuple(np.arange(10) * 0.05 + 0.50)

_RECALL_GRID = np.linspace(0.0, 1.0, 101)


def _similarity_matrix(predictions, references, task):
    sim = np.zeros((len(predictions), len(references)))
    for i, p in enumerate(predictions):
        for j, r in enumerate(references):
            sim[i, j] = task_similarity(task, r.output, p.output)
    return sim


def _ap_at_threshold(sim: np.ndarray, order: np.ndarray, threshold: float) -> float:
    """101-point interpolated AP for one similarity threshold.

    Predictions are visited in ranked order; each may claim the best
    still-unmatched reference whose similarity clears the threshold.
    """
    n_ref = sim.shape[1]
    taken = np.zeros(n_ref, dtype=bool)
    tp = np.zeros(len(order))
    for rank, i in enumerate(order):
        row = np.where(taken, -1.0, sim[i])
        j = int(np.argmax(row)) if n_ref else 0
        if n_ref and row[j] > threshold:
            taken[j] = True
            tp[rank] = 1.0
    cum_tp = np.cumsum(tp)
    recall = cum_tp / n_ref
    precision = cum_tp / (np.arange(len(order)) + 1.0)
    interp = np.zeros_like(_RECALL_GRID)
    for k, r in enumerate(_RECALL_GRID):
        ok = recall >= r - 1e-12
        interp[k] = precision[ok].max() if ok.any() else 0.0
    return float(interp.mean())


def average_precision(
    predictions: list[TaskResponse],
    references: list[TaskResponse],
    thresholds: tuple[float, ...] = DEFAULT_AP_THRESHOLDS,
) -> float:
    """Interpolated AP averaged over similarity thresholds and classes.

    Matching is greedy by descending confidence with single assignment per
    reference, within each reference class; predictions of classes absent
    from the references are ignored.  references must be non-empty; an
    empty prediction list scores 0.
    """
    if not references:
        raise ValueError("references must be non-empty")
    task = references[0].task
    for r in references + predictions:
        if r.task != task:
            raise ValueError("mixed tasks in AP input")
    if not predictions:
        return 0.0
    per_class = []
    for cls in sorted({r.class_id for r in references}):
        refs_c = [r for r in references if r.class_id == cls]
        preds_c = [p for p in predictions if p.class_id == cls]
        if not preds_c:
            per_class.append(0.0)
            continue
        conf = np.array([p.confidence for p in preds_c])
        order = np.argsort(-conf, kind="stable")
        sim = _similarity_matrix(preds_c, refs_c, task)
        per_class.append(float(np.mean([_ap_at_threshold(sim, order, t) for t in thresholds])))
    return float(np.mean(per_class))


@dataclass(frozen=True)
class RateAccuracyCurve:
    """Operating points of one coding method on one task."""

    points: tuple[tuple[float, float], ...]
    label: str = ""
    task: str = ""

    def __post_init__(self):
        if len(self.points) < 4:
            raise ValueError(f"curve needs at least 4 points, got {len(self.points)}")
        pts = tuple(sorted((float(b), float(a)) for b, a in self.points))
        for (b0, _), (b1, _) in zip(pts, pts[1:]):
            if b1 - b0 <= 1e-9:
                raise ValueError(f"duplicate bpp {b1:.12g}: curve is degenerate")
        for b, a in pts:
            if b <= 0.0:
                raise ValueError("bpp must be positive")
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"accuracy {a} outside [0, 1]")
        object.__setattr__(self, "points", pts)

    @property
    def bpp(self) -> np.ndarray:
        return np.array([b for b, _ in self.points])

    @property
    def accuracy(self) -> np.ndarray:
        return np.array([a for _, a in self.points])


def rate_accuracy_curve(
    encodings: list[tuple[Bitstream, list[TaskResponse], list[TaskResponse]]],
    label: str = "",
    task: str = "",
    thresholds: tuple[float, ...] = DEFAULT_AP_THRESHOLDS,
) -> RateAccuracyCurve:
    """Build a curve from (bitstream, predictions, references) ladder points."""
    pts = []
    for stream, preds, refs in encodings:
        pts.append((measure_rate(stream), average_precision(preds, refs, thresholds)))
    return RateAccuracyCurve(points=tuple(pts), label=label, task=task)


# -- monotone piecewise-cubic interpolation -----------------------------------


def _pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Shape-preserving segment-end derivatives (Fritsch-Carlson).

    Interior points use the weighted harmonic mean of neighboring secants,
    zeroed at local extrema so the interpolant never overshoots the data.
    Ends use a one-sided three-point formula clamped back to the secant
    when it would break monotonicity.
    """
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    d = np.zeros(n)
    for i in range(1, n - 1):
        if delta[i - 1] * delta[i] <= 0.0:
            d[i] = 0.0
        else:
            w1 = 2.0 * h[i] + h[i - 1]
            w2 = h[i] + 2.0 * h[i - 1]
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])

    def edge(h0, h1, d0, d1):
        v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(v) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(v) > 3.0 * abs(d0):
            return 3.0 * d0
        return v

    d[0] = edge(h[0], h[1], delta[0], delta[1])
    d[-1] = edge(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _segment_coeffs(x0, x1, y0, y1, d0, d1):
    """Cubic coefficients in the normalized coordinate t = (x-x0)/h."""
    h = x1 - x0
    c3 = 2.0 * y0 + h * d0 - 2.0 * y1 + h * d1
    c2 = -3.0 * y0 - 2.0 * h * d0 + 3.0 * y1 - h * d1
    return c3, c2, h * d0, y0


def _pchip_integral(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    """Exact integral of the monotone cubic interpolant over [lo, hi].

    Full interior segments integrate in closed form; the two boundary
    segments use the antiderivative of the normalized cubic.
    """
    if lo < x[0] - 1e-12 or hi > x[-1] + 1e-12:
        raise ValueError("integration bounds outside the interpolation range")
    d = _pchip_slopes(x, y)
    total = 0.0
    for i in range(len(x) - 1):
        a = max(lo, x[i])
        b = min(hi, x[i + 1])
        if b <= a:
            continue
        h = x[i + 1] - x[i]
        c3, c2, c1, c0 = _segment_coeffs(x[i], x[i + 1], y[i], y[i + 1], d[i], d[i + 1])
        ta = (a - x[i]) / h
        tb = (b - x[i]) / h

        def anti(t):
            return ((c3 * t / 4.0 + c2 / 3.0) * t + c1 / 2.0) * t * t + c0 * t

        total += h * (anti(tb) - anti(ta))
    return total


def bd_metric(reference: RateAccuracyCurve, test: RateAccuracyCurve) -> float:
    """Average accuracy gain of test over reference at equal rate.

    Accuracy is interpolated against log10(bpp) on both curves, integrated
    over the overlapping rate interval, and the difference of the integral
    means is returned in percent points.
    """
    xr = np.log10(reference.bpp)
    yr = reference.accuracy * 100.0
    xt = np.log10(test.bpp)
    yt = test.accuracy * 100.0
    lo = max(xr[0], xt[0])
    hi = min(xr[-1], xt[-1])
    if hi <= lo:
        raise ValueError("curves do not overlap in rate")
    span = hi - lo
    return (_pchip_integral(xt, yt, lo, hi) - _pchip_integral(xr, yr, lo, hi)) / span


def bd_rate(reference: RateAccuracyCurve, test: RateAccuracyCurve) -> float:
    """Average rate change of test vs reference at equal accuracy, percent.

    Same integration machinery with the axes swapped, so it requires
    strictly increasing accuracy along both curves.
    """

    def axes(curve):
        acc = curve.accuracy
        if np.any(np.diff(acc) <= 0.0):
            raise ValueError("accuracy not strictly increasing; rate delta undefined")
        return acc, np.log10(curve.bpp)

    xr, yr = axes(reference)
    xt, yt = axes(test)
    lo = max(xr[0], xt[0])
    hi = min(xr[-1], xt[-1])
    if hi <= lo:
        raise ValueError("curves do not overlap in accuracy")
    avg = (_pchip_integral(xt, yt, lo, hi) - _pchip_integral(xr, yr, lo, hi)) / (hi - lo)
    return float((10.0**avg - 1.0) * 100.0)


# -- quality deltas ------------------------------------------------------------


@dataclass(frozen=True)
class QualityDeltaReport:
    psnr_mae: float
    ssim_mae: float
    psnr_r2: float
    ssim_r2: float
    count: int


def _r_squared(gt: np.ndarray, pred: np.ndarray) -> float:
    """Coefficient of determination of the least-squares line pred ~ gt."""
    ss_tot = float(np.sum((pred - pred.mean()) ** 2))
    var_gt = float(np.sum((gt - gt.mean()) ** 2))
    if var_gt == 0.0:
        ss_res = ss_tot
    else:
        slope = float(np.sum((gt - gt.mean()) * (pred - pred.mean()))) / var_gt
        fit = pred.mean() + slope * (gt - gt.mean())
        ss_res = float(np.sum((pred - fit) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def quality_delta_report(
    originals: list[np.ndarray],
    gt_recons: list[np.ndarray],
    pred_recons: list[np.ndarray],
) -> QualityDeltaReport:
    """Fidelity gap between coding at predicted levels and at true levels.

    For every object crop the original is compared against both
    reconstructions; the report carries the MAE of the per-object quality
    differences plus the R^2 of predicted-level quality regressed on
    true-level quality.
    """
    if not originals:
        raise ValueError("empty input")
    if not len(originals) == len(gt_recons) == len(pred_recons):
        raise ValueError("object lists are not aligned")
    gt_psnr, gt_ssim, pr_psnr, pr_ssim = [], [], [], []
    for orig, g, p in zip(originals, gt_recons, pred_recons):
        fg = fidelity(orig, g)
        fp = fidelity(orig, p)
        gt_psnr.append(fg.psnr)
        gt_ssim.append(fg.ssim)
        pr_psnr.append(fp.psnr)
        pr_ssim.append(fp.ssim)
    gt_psnr = np.array(gt_psnr)
    gt_ssim = np.array(gt_ssim)
    pr_psnr = np.array(pr_psnr)
    pr_ssim = np.array(pr_ssim)
    return QualityDeltaReport(
        psnr_mae=float(np.mean(np.abs(pr_psnr - gt_psnr))),
        ssim_mae=float(np.mean(np.abs(pr_ssim - gt_ssim))),
        psnr_r2=_r_squared(gt_psnr, pr_psnr),
        ssim_r2=_r_squared(gt_ssim, pr_ssim),
        count=len(originals),
    )


# -- serialization and plots ----------------------------------------------------


def curve_to_csv(curve: RateAccuracyCurve) -> str:
    lines = [f"# label={curve.label} task={curve.task}", "bpp,accuracy"]
    for b, a in curve.points:
        lines.append(f"{b:.9g},{a:.9g}")
    return "\n".join(lines) + "\n"


def curve_from_csv(text: str) -> RateAccuracyCurve:
    label = task = ""
    pts = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("label="):
                    label = tok[6:]
                elif tok.startswith("task="):
                    task = tok[5:]
            continue
        if line.lower().startswith("bpp"):
            continue
        b, a = line.split(",")
        pts.append((float(b), float(a)))
    return RateAccuracyCurve(points=tuple(pts), label=label, task=task)


def curve_to_json(curve: RateAccuracyCurve) -> str:
    payload = {
        "label": curve.label,
        "task": curve.task,
        "points": [{"bpp": b, "accuracy": a} for b, a in curve.points],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def curve_from_json(text: str) -> RateAccuracyCurve:
    payload = json.loads(text)
    pts = tuple((p["bpp"], p["accuracy"]) for p in payload["points"])
    return RateAccuracyCurve(points=pts, label=payload.get("label", ""), task=payload.get("task", ""))


def report_to_csv(report: QualityDeltaReport) -> str:
    lines = [
        "metric,value",
        f"psnr_mae,{report.psnr_mae:.9g}",
        f"ssim_mae,{report.ssim_mae:.9g}",
        f"psnr_r2,{report.psnr_r2:.9g}",
        f"ssim_r2,{report.ssim_r2:.9g}",
        f"count,{report.count}",
    ]
    return "\n".join(lines) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_curves_svg(curves: list[RateAccuracyCurve], title: str = "") -> str:
    """Deterministic standalone SVG line plot of rate-accuracy curves."""
    if not curves:
        raise ValueError("nothing to plot")
    w, h = 640, 440
    ml, mr, mt, mb = 64, 20, 36, 48
    xs = np.concatenate([c.bpp for c in curves])
    ys = np.concatenate([c.accuracy for c in curves])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.05, y1 + 0.05
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(b):
        return ml + (b - x0) / (x1 - x0) * (w - ml - mr)

    def py(a):
        return h - mb - (a - y0) / (y1 - y0) * (h - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{w / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    out.append(
        f'<rect x="{ml}" y="{mt}" width="{w - ml - mr}" height="{h - mt - mb}" '
        'fill="none" stroke="#333"/>'
    )
    for i in range(5):
        bx = x0 + i * (x1 - x0) / 4.0
        ay = y0 + i * (y1 - y0) / 4.0
        out.append(
            f'<text x="{px(bx):.1f}" y="{h - mb + 16}" text-anchor="middle">{bx:.3g}</text>'
        )
        out.append(
            f'<text x="{ml - 6}" y="{py(ay) + 4:.1f}" text-anchor="end">{ay:.3g}</text>'
        )
        out.append(
            f'<line x1="{ml}" y1="{py(ay):.1f}" x2="{w - mr}" y2="{py(ay):.1f}" '
            'stroke="#ddd" stroke-width="1"/>'
        )
    out.append(
        f'<text x="{(ml + w - mr) / 2:.1f}" y="{h - 10}" text-anchor="middle">bpp</text>'
    )
    out.append(
        f'<text x="16" y="{(mt + h - mb) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(mt + h - mb) / 2:.1f})">accuracy</text>'
    )
    for ci, curve in enumerate(curves):
        color = _PALETTE[ci % len(_PALETTE)]
        pts = " ".join(f"{px(b):.2f},{py(a):.2f}" for b, a in curve.points)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for b, a in curve.points:
            out.append(f'<circle cx="{px(b):.2f}" cy="{py(a):.2f}" r="3" fill="{color}"/>')
        ly = mt + 16 + 16 * ci
        out.append(f'<line x1="{w - mr - 130}" y1="{ly}" x2="{w - mr - 106}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{w - mr - 100}" y="{ly + 4}">{curve.label or f"curve {ci}"}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
