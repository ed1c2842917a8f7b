"""Command-line driver for the full experiment suite.

Subcommands: synth, encode, train, eval, gradcheck, ablation, mismatch,
upper, tamper, map, heatmap. Every command writes a run manifest next to
its primary output (or to --manifest-out); re-running the manifest's
recorded argv reproduces all outputs byte-identically.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .encoder import EncoderConfig, encode
from .heatmap import HeatField, box_heatmap, overlay_normalize, write_pgm
from .manifest import RunManifest, Timer
from .metrics import DetectionSet, ap_sweep, confusion, macro_metrics
from .pipeline import (
    Checkpoint,
    load_checkpoint,
    predict_scene,
    predict_scenes,
    save_checkpoint,
    train_on_scenes,
)
from .rnn.model import ModelConfig
from .rnn.training import TrainConfig, grad_check_all
from .scenes import load_scenes, save_scenes, split_dataset, with_boxes
from .synth import (
    NoiseModel,
    default_templates,
    generate,
    load_templates,
    perturb,
    tamper,
)
from .taxonomy import BUILDING_CATEGORIES, LANDUSE_CATEGORIES

ENCODER_NAMES = {"cooc": "cooccurrence", "layout": "layout"}
CELL_NAMES = {"rnn": "simple", "gru": "gru", "lstm": "lstm"}
ARCH_NAMES = {"uni": "uni_last_concat", "bi": "bi_all_concat"}

# map colors per land-use category
MAP_COLORS = {
    "commercial": "red",
    "residential": "blue",
    "public": "yellow",
    "industrial": "purple",
}

# full-dataset reference results, non-normative (desk-scale runs will differ)
ABLATION_REFERENCE = (
    "# reference (full-dataset, non-normative): cooc+rnn+uni M-F1 81.00, "
    "layout+rnn+uni 81.34, layout+rnn+bi 81.37"
)
UPPER_REFERENCE = (
    "# reference (full-dataset, non-normative): layout + perfect detector "
    "M-F1 93.82"
)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _load_labeled(path: str) -> list:
    result = load_scenes(path)
    if result.errors:
        print(f"warning: rejected {len(result.errors)} records from {path}",
              file=sys.stderr)
    return result.records


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=seed,
    )


def _split3(records, seed: int):
    split = split_dataset(records, seed=seed)
    return split.train, split.val, split.test


def _eval_records(params, records, model_config, encoder_kind, encoder_config):
    preds, _ = predict_scenes(params, records, model_config, encoder_kind,
                              encoder_config)
    labels = np.array([r.landuse for r in records])
    cm = confusion(preds.tolist(), labels.tolist())
    return macro_metrics(cm), cm


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> RunManifest:
    templates = load_templates(args.template) if args.template else default_templates()
    records = generate(templates, args.per_category, seed=args.seed)
    save_scenes(records, args.out)
    return RunManifest(command="synth", argv=[], seed=args.seed,
                       inputs=[args.template] if args.template else [],
                       outputs=[args.out])


def cmd_encode(args) -> RunManifest:
    records = _load_labeled(args.infile)
    config = EncoderConfig(sequence_length=args.l, include_threshold=args.threshold)
    kind = ENCODER_NAMES[args.encoder]
    with open(args.out, "w", encoding="utf-8") as fh:
        for r in records:
            metadata = encode(list(r.boxes), kind, config)
            fh.write(json.dumps({
                "scene_id": r.scene_id,
                "landuse": None if r.landuse is None else LANDUSE_CATEGORIES[r.landuse],
                "sequence": metadata.sequence.tolist(),
            }) + "\n")
    return RunManifest(command="encode", argv=[], seed=None,
                       inputs=[args.infile], outputs=[args.out])


def cmd_train(args) -> RunManifest:
    train_records = _load_labeled(args.infile)
    val_records = _load_labeled(args.val) if args.val else []
    model_config = ModelConfig(
        cell=CELL_NAMES[args.cell],
        architecture=ARCH_NAMES[args.arch],
        sequence_length=args.l,
    )
    encoder_config = EncoderConfig(sequence_length=args.l)
    kind = ENCODER_NAMES[args.encoder]
    result = train_on_scenes(train_records, val_records, model_config,
                             _train_config(args, args.seed), kind, encoder_config)
    save_checkpoint(
        Checkpoint(
            model_config=model_config,
            encoder_kind=kind,
            encoder_config=encoder_config,
            params=result.params,
            seed=args.seed,
            history=result.history,
            best_epoch=result.best_epoch,
        ),
        args.out,
    )
    last = result.history[-1]
    print(f"trained {args.encoder}+{args.cell}+{args.arch}: best epoch "
          f"{result.best_epoch}, val M-F1 {result.history[result.best_epoch].val_macro_f1:.4f} "
          f"(final train loss {last.train_loss:.4f})")
    inputs = [args.infile] + ([args.val] if args.val else [])
    return RunManifest(command="train", argv=[], seed=args.seed,
                       inputs=inputs, outputs=[args.out])


def cmd_eval(args) -> RunManifest:
    outputs = [args.out]
    if args.model:
        ckpt = load_checkpoint(args.model)
        records = _load_labeled(args.infile)
        (mp, mr, mf1), cm = _eval_records(
            ckpt.params, records, ckpt.model_config, ckpt.encoder_kind,
            ckpt.encoder_config)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerow(["macro_precision", _fmt(mp)])
            writer.writerow(["macro_recall", _fmt(mr)])
            writer.writerow(["macro_f1", _fmt(mf1)])
            writer.writerow(["num_scenes", len(records)])
        confusion_out = args.confusion_out or args.out.replace(".csv", "") + "_confusion.csv"
        with open(confusion_out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + list(LANDUSE_CATEGORIES))
            for i, name in enumerate(LANDUSE_CATEGORIES):
                writer.writerow([name] + cm[i].tolist())
        outputs.append(confusion_out)
        inputs = [args.model, args.infile]
    elif args.det and args.gt:
        det_records = {r.scene_id: r for r in _load_labeled(args.det)}
        gt_records = {r.scene_id: r for r in _load_labeled(args.gt)}
        det_set = DetectionSet()
        for sid, gt in gt_records.items():
            det = det_records.get(sid)
            det_set.add_scene(sid, list(det.boxes) if det else [], list(gt.boxes))
        sweep = ap_sweep(det_set)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            header = ["category"] + [f"ap@{t:g}" for t in sweep.thresholds]
            header.append("ap@.50:.05:.95")
            writer.writerow(header)
            cats = sorted({c for t in sweep.thresholds for c in sweep.per_category[t]})
            for c in cats:
                row = [BUILDING_CATEGORIES[c]]
                strict = []
                for t in sweep.thresholds:
                    ap = sweep.per_category[t].get(c)
                    row.append("" if ap is None else _fmt(ap))
                    if t >= 0.5 and ap is not None:
                        strict.append(ap)
                row.append(_fmt(float(np.mean(strict))) if strict else "")
                writer.writerow(row)
            mean_row = ["mean"] + [_fmt(sweep.mean_ap[t]) for t in sweep.thresholds]
            mean_row.append(_fmt(sweep.mean_50_95))
            writer.writerow(mean_row)
        inputs = [args.det, args.gt]
    else:
        raise SystemExit("eval needs either --model and --in, or --det and --gt")
    return RunManifest(command="eval", argv=[], seed=None,
                       inputs=inputs, outputs=outputs)


def cmd_gradcheck(args) -> RunManifest:
    results = grad_check_all(seed=args.seed, epsilon=args.epsilon,
                             sequence_length=args.l, hidden_size=args.hidden)
    worst = max(results.values())
    outputs = []
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({f"{cell}/{arch}": err for (cell, arch), err in results.items()},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs.append(args.out)
    for (cell, arch), err in sorted(results.items()):
        print(f"{cell:7s} {arch:16s} max relative error {err:.3e}")
    print(f"worst: {worst:.3e}")
    return RunManifest(command="gradcheck", argv=[], seed=args.seed,
                       outputs=outputs)


def cmd_ablation(args) -> RunManifest:
    train_records = _load_labeled(args.train)
    val_records = _load_labeled(args.val) if args.val else []
    test_records = _load_labeled(args.test)
    rows = []
    for encoder in ("cooc", "layout"):
        for cell in ("rnn", "gru", "lstm"):
            for arch in ("uni", "bi"):
                model_config = ModelConfig(
                    cell=CELL_NAMES[cell], architecture=ARCH_NAMES[arch],
                    sequence_length=args.l)
                try:
                    result = train_on_scenes(
                        train_records, val_records, model_config,
                        _train_config(args, args.seed),
                        ENCODER_NAMES[encoder])
                    (mp, mr, mf1), _ = _eval_records(
                        result.params, test_records, model_config,
                        ENCODER_NAMES[encoder],
                        EncoderConfig(sequence_length=args.l))
                    rows.append([encoder, cell, arch, _fmt(mp), _fmt(mr),
                                 _fmt(mf1), "ok"])
                    print(f"{encoder}+{cell}+{arch}: M-F1 {mf1:.4f}")
                except Exception as exc:  # failed cells are marked, not dropped
                    rows.append([encoder, cell, arch, "", "", "",
                                 f"failed: {exc}"])
                    print(f"{encoder}+{cell}+{arch}: FAILED ({exc})",
                          file=sys.stderr)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(ABLATION_REFERENCE + "\n")
        writer = csv.writer(fh)
        writer.writerow(["encoder", "cell", "arch", "macro_precision",
                         "macro_recall", "macro_f1", "status"])
        writer.writerows(rows)
    inputs = [args.train, args.test] + ([args.val] if args.val else [])
    return RunManifest(command="ablation", argv=[], seed=args.seed,
                       inputs=inputs, outputs=[args.out])


def _noise_from_args(args) -> NoiseModel:
    return NoiseModel(
        mislabel_rate=args.mislabel_rate,
        drop_rate=args.drop_rate,
        jitter_scale=args.jitter,
    )


def cmd_mismatch(args) -> RunManifest:
    records = _load_labeled(args.infile)
    noise = _noise_from_args(args)
    model_config = ModelConfig(
        cell=CELL_NAMES[args.cell], architecture=ARCH_NAMES[args.arch],
        sequence_length=args.l)
    kind = ENCODER_NAMES[args.encoder]
    rows = []
    for rep in range(args.repeats):
        seed = args.seed + rep
        train_r, val_r, test_r = _split3(records, seed)
        train_p = perturb(train_r, noise, seed=seed + 1000)
        val_p = perturb(val_r, noise, seed=seed + 2000)
        test_p = perturb(test_r, noise, seed=seed + 3000)
        models = {}
        for name, (tr, vl) in (("gt", (train_r, val_r)),
                               ("perturbed", (train_p, val_p))):
            result = train_on_scenes(tr, vl, model_config,
                                     _train_config(args, seed), kind)
            models[name] = result.params
        for train_src in ("gt", "perturbed"):
            for test_src, test_set in (("gt", test_r), ("perturbed", test_p)):
                (mp, mr, mf1), _ = _eval_records(
                    models[train_src], test_set, model_config, kind,
                    EncoderConfig(sequence_length=args.l))
                rows.append([seed, train_src, test_src, _fmt(mp), _fmt(mr),
                             _fmt(mf1)])
                print(f"seed {seed}: train={train_src} test={test_src} "
                      f"M-F1 {mf1:.4f}")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "train_on", "test_on", "macro_precision",
                         "macro_recall", "macro_f1"])
        writer.writerows(rows)
    return RunManifest(command="mismatch", argv=[], seed=args.seed,
                       inputs=[args.infile], outputs=[args.out])


def cmd_upper(args) -> RunManifest:
    records = _load_labeled(args.infile)
    noise = _noise_from_args(args)
    model_config = ModelConfig(
        cell=CELL_NAMES[args.cell], architecture=ARCH_NAMES[args.arch],
        sequence_length=args.l)
    kind = ENCODER_NAMES[args.encoder]
    train_r, val_r, test_r = _split3(records, args.seed)
    result = train_on_scenes(train_r, val_r, model_config,
                             _train_config(args, args.seed), kind)
    (up_p, up_r, up_f1), _ = _eval_records(
        result.params, test_r, model_config, kind,
        EncoderConfig(sequence_length=args.l))
    train_p = perturb(train_r, noise, seed=args.seed + 1000)
    val_p = perturb(val_r, noise, seed=args.seed + 2000)
    test_p = perturb(test_r, noise, seed=args.seed + 3000)
    noisy = train_on_scenes(train_p, val_p, model_config,
                            _train_config(args, args.seed), kind)
    (np_p, np_r, np_f1), _ = _eval_records(
        noisy.params, test_p, model_config, kind,
        EncoderConfig(sequence_length=args.l))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(UPPER_REFERENCE + "\n")
        writer = csv.writer(fh)
        writer.writerow(["row", "macro_precision", "macro_recall", "macro_f1"])
        writer.writerow(["upper", _fmt(up_p), _fmt(up_r), _fmt(up_f1)])
        writer.writerow(["noisy", _fmt(np_p), _fmt(np_r), _fmt(np_f1)])
        writer.writerow(["delta", _fmt(up_p - np_p), _fmt(up_r - np_r),
                         _fmt(up_f1 - np_f1)])
    print(f"upper M-F1 {up_f1:.4f}, noisy M-F1 {np_f1:.4f}")
    return RunManifest(command="upper", argv=[], seed=args.seed,
                       inputs=[args.infile], outputs=[args.out])


def cmd_tamper(args) -> RunManifest:
    ckpt = load_checkpoint(args.model)
    records = _load_labeled(args.infile)
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            k = args.k
            if k > len(record.boxes):
                print(f"warning: k={k} exceeds {len(record.boxes)} boxes in "
                      f"{record.scene_id}; clamping", file=sys.stderr)
                k = len(record.boxes)
            steps = []
            prev_probs = None
            flip_step = None
            max_jump = 0.0
            for j, boxes in enumerate(tamper(list(record.boxes), k)):
                pred = predict_scene(ckpt.params, with_boxes(record, boxes),
                                     ckpt.model_config, ckpt.encoder_kind,
                                     ckpt.encoder_config)
                steps.append({
                    "step": j,
                    "probs": [round(float(p), 10) for p in pred.probs],
                    "label": LANDUSE_CATEGORIES[pred.label],
                })
                if prev_probs is not None:
                    max_jump = max(max_jump,
                                   float(np.abs(pred.probs - prev_probs).max()))
                if (flip_step is None and record.landuse is not None
                        and pred.label != record.landuse):
                    flip_step = j
                prev_probs = pred.probs
            fh.write(json.dumps({
                "scene_id": record.scene_id,
                "true_landuse": None if record.landuse is None
                else LANDUSE_CATEGORIES[record.landuse],
                "steps": steps,
                "flip_step": flip_step,
                "max_single_step_jump": round(max_jump, 10),
            }) + "\n")
    return RunManifest(command="tamper", argv=[], seed=None,
                       inputs=[args.model, args.infile], outputs=[args.out])


def cmd_map(args) -> RunManifest:
    ckpt = load_checkpoint(args.model)
    records = _load_labeled(args.infile)
    features = []
    skipped = 0
    for record in records:
        if record.lat is None or record.lon is None:
            skipped += 1
            continue
        pred = predict_scene(ckpt.params, record, ckpt.model_config,
                             ckpt.encoder_kind, ckpt.encoder_config)
        name = LANDUSE_CATEGORIES[pred.label]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [record.lon, record.lat]},
            "properties": {
                "scene_id": record.scene_id,
                "landuse": name,
                "probs": {LANDUSE_CATEGORIES[i]: round(float(p), 10)
                          for i, p in enumerate(pred.probs)},
                "color": MAP_COLORS[name],
            },
        })
    doc = {"type": "FeatureCollection", "features": features}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    if skipped:
        print(f"skipped {skipped} scenes without geo-tags", file=sys.stderr)
    print(f"wrote {len(features)} features to {args.out}")
    return RunManifest(command="map", argv=[], seed=None,
                       inputs=[args.model, args.infile], outputs=[args.out])


def cmd_heatmap(args) -> RunManifest:
    records = _load_labeled(args.infile)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.manifest_out is None:
        args.manifest_out = os.path.join(args.out_dir, "run.manifest.json")
    outputs = []
    for record in records:
        fields = [
            box_heatmap(b.x * record.width, b.y * record.height,
                        b.w * record.width, b.h * record.height,
                        record.width, record.height)
            for b in record.boxes
        ]
        if fields:
            field = overlay_normalize(fields)
        else:
            field = HeatField(record.width, record.height,
                              np.zeros((record.height, record.width)))
        path = os.path.join(args.out_dir, f"{record.scene_id}.pgm")
        write_pgm(field, path)
        outputs.append(path)
    print(f"wrote {len(outputs)} heatmaps to {args.out_dir}")
    return RunManifest(command="heatmap", argv=[], seed=None,
                       inputs=[args.infile], outputs=outputs)


# ---------------------------------------------------------------- parser


def _add_train_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--encoder", choices=("cooc", "layout"), default="layout")
    p.add_argument("--cell", choices=("rnn", "gru", "lstm"), default="rnn")
    p.add_argument("--arch", choices=("uni", "bi"), default="uni")
    p.add_argument("--l", type=int, default=25, help="sequence length")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=32)


def _add_noise_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mislabel-rate", type=float, default=0.15)
    p.add_argument("--drop-rate", type=float, default=0.1)
    p.add_argument("--jitter", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenecoder",
        description="Land-use scene classification from building boxes.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--manifest-out", default=None)
        return p

    p = add("synth", cmd_synth, help="generate a synthetic scene dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-category", type=int, default=500)
    p.add_argument("--template", default=None,
                   help="JSON template file (defaults to built-in templates)")

    p = add("encode", cmd_encode, help="encode scenes into metadata JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoder", choices=("cooc", "layout"), default="layout")
    p.add_argument("--l", type=int, default=25)
    p.add_argument("--threshold", type=float, default=0.0)

    p = add("train", cmd_train, help="train a classifier")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--out", required=True)
    _add_train_opts(p)

    p = add("eval", cmd_eval, help="evaluate classification or detection")
    p.add_argument("--model", default=None)
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--det", default=None, help="detections JSONL")
    p.add_argument("--gt", default=None, help="ground-truth JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--confusion-out", default=None)

    p = add("gradcheck", cmd_gradcheck,
            help="verify gradients against finite differences")
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--l", type=int, default=5)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--out", default=None)

    p = add("ablation", cmd_ablation,
            help="train the full encoder/cell/architecture grid")
    p.add_argument("--train", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True)
    _add_train_opts(p)

    p = add("mismatch", cmd_mismatch,
            help="train/test source mismatch experiment")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--repeats", type=int, default=1)
    _add_train_opts(p)
    _add_noise_opts(p)

    p = add("upper", cmd_upper, help="perfect-detector upper bound")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_train_opts(p)
    _add_noise_opts(p)

    p = add("tamper", cmd_tamper, help="sequential relabeling probe")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)

    p = add("map", cmd_map, help="emit a GeoJSON land-use map")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = add("heatmap", cmd_heatmap, help="write per-scene Gaussian heatmaps")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    with Timer() as timer:
        manifest = args.fn(args)
    manifest.argv = argv
    manifest.wall_clock_s = timer.elapsed
    manifest_path = args.manifest_out
    if manifest_path is None and manifest.outputs:
        manifest_path = manifest.outputs[0] + ".manifest.json"
    if manifest_path:
        manifest.write(manifest_path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
