"""Command-line pipeline surface.

Configuration resolves in three layers: built-in defaults, then a JSON
config file passed with --config, then explicit command-line flags.  Every
command that writes files also writes a manifest next to its primary
output recording the inputs, the resolved configuration and its hash, the
tool version, and the output digests.  Manifests carry no timestamps so
that identical runs produce identical bytes.

The log level comes only from the JRDKIT_LOG_LEVEL environment variable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .annotation import (
    DEFAULT_MIN_KPD_AREA,
    DEFAULT_THRESHOLD,
    DEFAULT_WINDOW,
    ResponseTreeError,
    annotations_from_json,
    annotations_to_json,
    build_annotations,
    dataset_stats,
    parse_response_file,
    stats_to_json,
)
from .codec import Bitstream, DecodeError, QfMap, decode, encode, measure_rate, read_qfmap
from .core import BoundingBox, AttributeTriplet, attribute_triplet
from .evaluation import (
    RateAccuracyCurve,
    average_precision,
    bd_metric,
    bd_rate,
    curve_from_csv,
    curve_to_csv,
    curve_to_json,
    quality_delta_report,
    render_curves_svg,
    report_to_csv,
)
from .imgio import read_image, write_image
from .metrics import UndefinedSimilarityError
from .predictor import (
    JrdPredictor,
    ModelConfig,
    NumericError,
    grad_check,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .toydata import make_toy_dataset, load_toy_dataset
from .vcm import (
    DEFAULT_BACKGROUND_QF,
    KPD_CANDIDATES,
    OD_IS_CANDIDATES,
    QfCandidates,
    VcmJob,
    VcmObject,
    search_qf_detailed,
    vcm_encode,
)

log = logging.getLogger("jrdkit")

_ERRORS = (ValueError, OSError, KeyError, ResponseTreeError, DecodeError, NumericError, UndefinedSimilarityError)


def _fail(exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


def _resolve_config(ctx: click.Context, config_file: str | None) -> dict:
    """Merge defaults, config-file values, and explicit flags.

    A key from the file only applies when the matching flag was left at
    its default; anything typed on the command line wins.
    """
    file_cfg = {}
    if config_file:
        file_cfg = json.loads(Path(config_file).read_text())
        if not isinstance(file_cfg, dict):
            raise ValueError("config: config file must hold a JSON object")
    resolved = {}
    for name, value in ctx.params.items():
        if name in ("config", "print_config"):
            continue
        src = ctx.get_parameter_source(name)
        if src == click.core.ParameterSource.COMMANDLINE:
            resolved[name] = value
        elif name in file_cfg:
            resolved[name] = file_cfg[name]
        else:
            resolved[name] = value
    unknown = set(file_cfg) - set(resolved)
    if unknown:
        raise ValueError(f"config: unknown keys {sorted(unknown)}")
    return resolved


def _config_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2, default=str) + "\n"


def _maybe_print_config(cfg: dict, want: bool) -> bool:
    if want:
        click.echo(_config_json(cfg), nl=False)
    return want


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(primary_out: Path, command: str, cfg: dict, inputs: list, outputs: list) -> None:
    cfg_text = _config_json(cfg)
    manifest = {
        "command": command,
        "config": json.loads(cfg_text),
        "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "inputs": [str(p) for p in inputs],
        "outputs": [{"path": str(p), "sha256": _sha256(Path(p))} for p in outputs],
        "tool_version": __version__,
    }
    path = Path(str(primary_out) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _parse_box(text: str) -> BoundingBox:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"box: expected x,y,w,h got {text!r}")
    return BoundingBox(*parts)


@click.group()
@click.version_option(__version__, prog_name="jrdkit")
def main():
    """Just-recognizable-difference tooling: annotate, code, predict, evaluate."""
    level = os.environ.get("JRDKIT_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--responses", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--threshold", default=DEFAULT_THRESHOLD, show_default=True)
@click.option("--window", default=DEFAULT_WINDOW, show_default=True)
@click.option("--min-kpd-area", default=DEFAULT_MIN_KPD_AREA, show_default=True)
@click.option("--threads", default=max(1, os.cpu_count() or 1), show_default=False, help="Worker threads; defaults to the core count.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def annotate(ctx, responses, out, threshold, window, min_kpd_area, threads, config, print_config):
    """Derive JRD annotations from a quality-sweep response tree."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        anns = build_annotations(
            cfg["responses"],
            threshold=cfg["threshold"],
            window=cfg["window"],
            min_kpd_area=cfg["min_kpd_area"],
            threads=cfg["threads"],
        )
        out_path = Path(cfg["out"])
        out_path.write_text(annotations_to_json(anns, cfg["threshold"], cfg["window"]))
        _write_manifest(out_path, "annotate", cfg, [cfg["responses"]], [out_path])
        log.info("wrote %d annotations to %s", len(anns), out_path)
        click.echo(f"{len(anns)} objects annotated")
    except _ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--annotations", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--responses", type=click.Path(exists=True, file_okay=False), help="Response tree for threshold sweeps.")
@click.option("--sweep", default="", help="Comma-separated label thresholds to re-annotate at.")
@click.option("--window", default=DEFAULT_WINDOW, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def stats(ctx, annotations, out, responses, sweep, window, config, print_config):
    """Summarize a JRD annotation set (counts, means, histograms)."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        anns = annotations_from_json(Path(cfg["annotations"]).read_text())
        sweep_sets = None
        if cfg["sweep"]:
            if not cfg["responses"]:
                raise ValueError("sweep: requires --responses to re-annotate")
            sweep_sets = {}
            for tok in str(cfg["sweep"]).split(","):
                t = float(tok)
                sweep_sets[t] = build_annotations(cfg["responses"], threshold=t, window=cfg["window"])
        st = dataset_stats(anns, sweep_sets)
        out_path = Path(cfg["out"])
        out_path.write_text(stats_to_json(st))
        inputs = [cfg["annotations"]] + ([cfg["responses"]] if cfg["responses"] else [])
        _write_manifest(out_path, "stats", cfg, inputs, [out_path])
        click.echo(f"{st.count} objects summarized")
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="encode")
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--qf", default=50, show_default=True, help="Uniform quality factor.")
@click.option("--qfmap", "qfmap_file", type=click.Path(exists=True, dir_okay=False), help="JSON per-macroblock qf grid; overrides --qf.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def encode_cmd(ctx, image, out, qf, qfmap_file, config, print_config):
    """Encode an image, optionally with a spatially adaptive quality map."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        plane = read_image(cfg["image"])
        if cfg["qfmap_file"]:
            grid = json.loads(Path(cfg["qfmap_file"]).read_text())
            qmap = QfMap(qf=np.asarray(grid["qf"], dtype=np.int64))
        else:
            qmap = QfMap.uniform(int(cfg["qf"]), plane.width, plane.height)
        stream = encode(plane, qmap)
        out_path = Path(cfg["out"])
        out_path.write_bytes(stream.data)
        inputs = [cfg["image"]] + ([cfg["qfmap_file"]] if cfg["qfmap_file"] else [])
        _write_manifest(out_path, "encode", cfg, inputs, [out_path])
        click.echo(f"bpp={measure_rate(stream):.6f}")
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="decode")
@click.option("--stream", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--dump-qfmap", "dump_qfmap", type=click.Path(dir_okay=False), help="Also write the embedded quality map as JSON.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def decode_cmd(ctx, stream, out, dump_qfmap, config, print_config):
    """Decode a bitstream back to an image."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        data = Path(cfg["stream"]).read_bytes()
        plane = decode(data)
        out_path = Path(cfg["out"])
        write_image(out_path, plane)
        outputs = [out_path]
        if cfg["dump_qfmap"]:
            qmap = read_qfmap(data)
            if qmap is None:
                raise ValueError("stream: no quality-map segment present")
            qpath = Path(cfg["dump_qfmap"])
            qpath.write_text(json.dumps({"qf": qmap.qf.tolist()}, sort_keys=True) + "\n")
            outputs.append(qpath)
        _write_manifest(out_path, "decode", cfg, [cfg["stream"]], outputs)
        click.echo(f"decoded {plane.width}x{plane.height}x{plane.channels}")
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="qf-search")
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--box", required=True, help="Object box as x,y,w,h.")
@click.option("--target-psnr", required=True, type=float)
@click.option("--task", default="od", show_default=True, type=click.Choice(["od", "is", "kpd"]))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the result as JSON.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def qf_search(ctx, image, box, target_psnr, task, out, config, print_config):
    """Search the task's quality ladder for the first qf meeting a box PSNR."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        plane = read_image(cfg["image"])
        bbox = _parse_box(cfg["box"])
        values = KPD_CANDIDATES if cfg["task"] == "kpd" else OD_IS_CANDIDATES
        result = search_qf_detailed(plane, bbox, float(cfg["target_psnr"]), QfCandidates(values))
        payload = {"qf": result.qf, "probes": result.probes, "exhaustive": result.exhaustive}
        click.echo(json.dumps(payload, sort_keys=True))
        if cfg["out"]:
            out_path = Path(cfg["out"])
            out_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
            _write_manifest(out_path, "qf-search", cfg, [cfg["image"]], [out_path])
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="vcm-encode")
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--objects", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON list of {box, jrd_qp | target_psnr}.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--task", default="od", show_default=True, type=click.Choice(["od", "is", "kpd"]))
@click.option("--delta-qf", default=0, show_default=True)
@click.option("--background-qf", default=DEFAULT_BACKGROUND_QF, show_default=True)
@click.option("--reference-dir", type=click.Path(exists=True, file_okay=False), help="External reference crops obj{i}.png.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def vcm_encode_cmd(ctx, image, objects, out, task, delta_qf, background_qf, reference_dir, config, print_config):
    """Encode with per-object quality chosen from JRD levels or PSNR targets."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        plane = read_image(cfg["image"])
        entries = json.loads(Path(cfg["objects"]).read_text())
        objs = []
        for e in entries:
            objs.append(
                VcmObject(
                    box=BoundingBox(*[float(v) for v in e["box"]]),
                    jrd_qp=e.get("jrd_qp"),
                    target_psnr=e.get("target_psnr"),
                )
            )
        job = VcmJob(
            image=plane,
            objects=tuple(objs),
            delta_qf=int(cfg["delta_qf"]),
            background_qf=int(cfg["background_qf"]),
        )
        values = KPD_CANDIDATES if cfg["task"] == "kpd" else OD_IS_CANDIDATES
        result = vcm_encode(job, QfCandidates(values), reference_dir=cfg["reference_dir"])
        out_path = Path(cfg["out"])
        out_path.write_bytes(result.stream.data)
        inputs = [cfg["image"], cfg["objects"]] + ([cfg["reference_dir"]] if cfg["reference_dir"] else [])
        _write_manifest(out_path, "vcm-encode", cfg, inputs, [out_path])
        click.echo(
            json.dumps(
                {"bpp": result.bpp, "chosen_qf": list(result.chosen_qf), "applied_qf": list(result.applied_qf)},
                sort_keys=True,
            )
        )
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="train")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), help="Directory with samples.json; omit to use the built-in toy generator.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--epochs", default=150, show_default=True)
@click.option("--lr", default=0.1, show_default=True)
@click.option("--batch-size", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--toy-samples", default=32, show_default=True, help="Generator size when no dataset is given.")
@click.option("--input-size", default=64, show_default=True)
@click.option("--embed-dim", default=32, show_default=True)
@click.option("--attr-dim", default=32, show_default=True)
@click.option("--trunk-depth", default=2, show_default=True)
@click.option("--branch-depth", default=1, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def train_cmd(ctx, dataset, out, epochs, lr, batch_size, seed, toy_samples, input_size, embed_dim, attr_dim, trunk_depth, branch_depth, config, print_config):
    """Train the JRD predictor and write a checkpoint."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        if cfg["dataset"]:
            samples = load_toy_dataset(cfg["dataset"])
        else:
            samples = make_toy_dataset(int(cfg["toy_samples"]), seed=int(cfg["seed"]), size=int(cfg["input_size"]))
        mc = ModelConfig(
            input_size=int(cfg["input_size"]),
            embed_dim=int(cfg["embed_dim"]),
            attr_dim=int(cfg["attr_dim"]),
            trunk_depth=int(cfg["trunk_depth"]),
            branch_depth=int(cfg["branch_depth"]),
            seed=int(cfg["seed"]),
        )
        result = train(
            mc,
            samples,
            epochs=int(cfg["epochs"]),
            lr=float(cfg["lr"]),
            batch_size=int(cfg["batch_size"]),
            shuffle_seed=int(cfg["seed"]),
        )
        out_path = Path(cfg["out"])
        save_checkpoint(result.model, out_path)
        inputs = [cfg["dataset"]] if cfg["dataset"] else []
        _write_manifest(out_path, "train", cfg, inputs, [out_path])
        if result.epoch_losses:
            click.echo(f"epochs={cfg['epochs']} final_loss={result.epoch_losses[-1]:.6f}")
        else:
            click.echo("epochs=0 checkpoint holds the seeded initialization")
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="predict")
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--attrs", help="Attribute triplet as s,x0,y0.")
@click.option("--box", help="Object box x,y,w,h; attributes derive from it.")
@click.option("--mode", default="argmax", show_default=True, type=click.Choice(["argmax", "expectation"]))
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def predict_cmd(ctx, model, image, attrs, box, mode, out, config, print_config):
    """Predict per-task JRD levels for one object crop."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        net = load_checkpoint(cfg["model"])
        plane = read_image(cfg["image"])
        if cfg["attrs"]:
            s, x0, y0 = (float(v) for v in str(cfg["attrs"]).split(","))
            triplet = AttributeTriplet(s=s, x0=x0, y0=y0)
        elif cfg["box"]:
            triplet = attribute_triplet(_parse_box(cfg["box"]), plane.width, plane.height)
        else:
            raise ValueError("attrs: provide --attrs or --box")
        levels = predict(net, plane, triplet, mode=cfg["mode"])
        text = json.dumps(levels, sort_keys=True)
        click.echo(text)
        if cfg["out"]:
            out_path = Path(cfg["out"])
            out_path.write_text(text + "\n")
            _write_manifest(out_path, "predict", cfg, [cfg["model"], cfg["image"]], [out_path])
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="grad-check")
@click.option("--seed", default=0, show_default=True)
@click.option("--tol", default=1e-4, show_default=True)
@click.option("--input-size", default=16, show_default=True)
@click.option("--embed-dim", default=8, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def grad_check_cmd(ctx, seed, tol, input_size, embed_dim, config, print_config):
    """Verify analytic gradients against finite differences on a toy config."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        mc = ModelConfig(
            input_size=int(cfg["input_size"]),
            embed_dim=int(cfg["embed_dim"]),
            attr_dim=int(cfg["embed_dim"]),
            trunk_depth=1,
            branch_depth=1,
            seed=int(cfg["seed"]),
        )
        sample = make_toy_dataset(1, seed=int(cfg["seed"]), size=int(cfg["input_size"]))[0]
        worst = grad_check(JrdPredictor(mc), sample)
        click.echo(f"max_relative_error={worst:.6e}")
        if worst > float(cfg["tol"]):
            raise ValueError(f"tol: gradient error {worst:.3e} exceeds {cfg['tol']}")
    except _ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--points", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON ladder: [{stream|bpp, predictions, references}].")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Curve CSV path.")
@click.option("--label", default="", show_default=True)
@click.option("--task", default="od", show_default=True, type=click.Choice(["od", "is", "kpd"]))
@click.option("--json-out", type=click.Path(dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def evaluate(ctx, points, out, label, task, json_out, config, print_config):
    """Score a rate ladder into a rate-accuracy curve."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        spec = json.loads(Path(cfg["points"]).read_text())
        if not isinstance(spec, list):
            raise ValueError("points: expected a JSON list")
        pts = []
        inputs = [cfg["points"]]
        for entry in spec:
            preds = parse_response_file(entry["predictions"]).detections
            refs = parse_response_file(entry["references"]).detections
            inputs += [entry["predictions"], entry["references"]]
            if "bpp" in entry:
                bpp = float(entry["bpp"])
            else:
                data = Path(entry["stream"]).read_bytes()
                plane = decode(data)
                bpp = measure_rate(
                    Bitstream(data=data, width=plane.width, height=plane.height, channels=plane.channels)
                )
                inputs.append(entry["stream"])
            pts.append((bpp, average_precision(preds, refs)))
        curve = RateAccuracyCurve(points=tuple(pts), label=cfg["label"], task=cfg["task"])
        out_path = Path(cfg["out"])
        out_path.write_text(curve_to_csv(curve))
        outputs = [out_path]
        if cfg["json_out"]:
            jpath = Path(cfg["json_out"])
            jpath.write_text(curve_to_json(curve))
            outputs.append(jpath)
        _write_manifest(out_path, "evaluate", cfg, inputs, outputs)
        click.echo(f"{len(pts)} points written")
    except _ERRORS as exc:
        _fail(exc)


@main.command(name="bd-metric")
@click.option("--reference", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--rate", is_flag=True, help="Report the rate delta at equal accuracy instead.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def bd_metric_cmd(ctx, reference, test, rate, config, print_config):
    """Average accuracy gain (percent points) of test over reference."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        ref = curve_from_csv(Path(cfg["reference"]).read_text())
        tst = curve_from_csv(Path(cfg["test"]).read_text())
        value = bd_rate(ref, tst) if cfg["rate"] else bd_metric(ref, tst)
        click.echo(f"{value:.2f}")
    except _ERRORS as exc:
        _fail(exc)


@main.command()
@click.option("--curve", "curves", multiple=True, type=click.Path(exists=True, dir_okay=False), help="Curve CSV; repeatable.")
@click.option("--svg-out", type=click.Path(dir_okay=False))
@click.option("--title", default="", show_default=True)
@click.option("--quality-orig", type=click.Path(exists=True, file_okay=False), help="Original crops directory.")
@click.option("--quality-gt", type=click.Path(exists=True, file_okay=False), help="Reconstructions at true levels.")
@click.option("--quality-pred", type=click.Path(exists=True, file_okay=False), help="Reconstructions at predicted levels.")
@click.option("--csv-out", type=click.Path(dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--print-config", is_flag=True)
@click.pass_context
def report(ctx, curves, svg_out, title, quality_orig, quality_gt, quality_pred, csv_out, config, print_config):
    """Render curve plots and quality-delta tables."""
    try:
        cfg = _resolve_config(ctx, config)
        if _maybe_print_config(cfg, print_config):
            return
        wrote = []
        inputs = []
        primary = None
        if cfg["curves"]:
            if not cfg["svg_out"]:
                raise ValueError("svg_out: required when curves are given")
            parsed = [curve_from_csv(Path(p).read_text()) for p in cfg["curves"]]
            inputs += list(cfg["curves"])
            primary = Path(cfg["svg_out"])
            primary.write_text(render_curves_svg(parsed, title=cfg["title"]))
            wrote.append(primary)
        if cfg["quality_orig"] or cfg["quality_gt"] or cfg["quality_pred"]:
            if not (cfg["quality_orig"] and cfg["quality_gt"] and cfg["quality_pred"]):
                raise ValueError("quality_orig: quality mode needs all three directories")
            if not cfg["csv_out"]:
                raise ValueError("csv_out: required for the quality report")
            names = sorted(p.name for p in Path(cfg["quality_orig"]).iterdir() if p.suffix == ".png")
            if not names:
                raise ValueError("quality_orig: no .png crops found")
            orig = [read_image(Path(cfg["quality_orig"]) / n).pixels for n in names]
            gt = [read_image(Path(cfg["quality_gt"]) / n).pixels for n in names]
            pred = [read_image(Path(cfg["quality_pred"]) / n).pixels for n in names]
            rep = quality_delta_report(orig, gt, pred)
            cpath = Path(cfg["csv_out"])
            cpath.write_text(report_to_csv(rep))
            inputs += [cfg["quality_orig"], cfg["quality_gt"], cfg["quality_pred"]]
            wrote.append(cpath)
            if primary is None:
                primary = cpath
        if not wrote:
            raise ValueError("curve: nothing to do; pass --curve or the quality directories")
        _write_manifest(primary, "report", cfg, inputs, wrote)
        click.echo(f"wrote {', '.join(str(w) for w in wrote)}")
    except _ERRORS as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
