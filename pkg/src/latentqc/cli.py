"""``latentqc`` command-line entry point.

Subcommands: synth, train, calibrate, score, qc, eval. Exit codes: 0 success,
2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import modelfile
from .codec import CodecConfig
from .errors import ConfigError, DataError, QCError
from .evaluation import auroc, pool
from .imageio import read_mask, read_rgb, write_mask, write_rgb
from .postprocess import PostprocessConfig, binarize, calibrate_bounds, expand_mask
from .schedule import build_schedule, scaled_linear_betas
from .scorer import InferenceConfig, read_heatmap, score_image, write_heatmap
from .synth import SynthConfig, generate_split, sample_seed, split_kinds
from .training import Corpus, TrainConfig, train

log = logging.getLogger("latentqc")


def _build(kind, fn):
    try:
        return fn()
    except (TypeError, ValueError) as exc:
        if isinstance(exc, QCError):
            raise
        raise ConfigError(f"invalid {kind} configuration: {exc}") from exc


def schedule_from(cfg):
    s = cfg["schedule"]

    def make():
        b0, b1 = s["beta_start"], s["beta_end"]
        if b0 is None or b1 is None:
            d0, d1 = scaled_linear_betas(s["T"])
            b0 = d0 if b0 is None else b0
            b1 = d1 if b1 is None else b1
        return build_schedule(s["T"], b0, b1)

    return _build("schedule", make)


def codec_from(cfg) -> CodecConfig:
    return _build("codec", lambda: CodecConfig(**cfg["codec"]))


def train_config_from(cfg) -> TrainConfig:
    return _build("train", lambda: TrainConfig(**cfg["train"]))


def inference_from(cfg, model) -> InferenceConfig:
    i = cfg["inference"]
    t_star = i["t_star"] if i["t_star"] is not None else model.default_t_star
    draws = i["draws"] if i["draws"] is not None else model.draws
    icfg = _build("inference", lambda: InferenceConfig(t_star, draws, i["seed"]))
    _build("inference", lambda: icfg.resolve_t_star(model.schedule.T))
    return icfg


def postprocess_from(cfg) -> PostprocessConfig:
    return _build("postprocess", lambda: PostprocessConfig(**cfg["postprocess"]))


def synth_from(cfg) -> SynthConfig:
    s = dict(cfg["synth"])
    s["area"] = tuple(s["area"])
    return _build("synth", lambda: SynthConfig(**s))


# ---------------------------------------------------------------- commands


def cmd_synth(cfg, out_dir) -> None:
    scfg = synth_from(cfg)
    out = Path(out_dir)
    dirs = {"train": out / "train" / "clean", "artifact": out / "artifact",
            "test": out / "test" / "images"}
    gt_dir = out / "test" / "gt"
    try:
        for d in (*dirs.values(), gt_dir):
            d.mkdir(parents=True, exist_ok=True)
        rows = []
        for split, target in dirs.items():
            kinds = split_kinds(scfg, split)
            for i, sample in enumerate(generate_split(scfg, split)):
                name = f"{i:06d}.png"
                write_rgb(target / name, sample.image)
                rows.append({"split": split, "file": str((target / name).relative_to(out)),
                             "type": kinds[i], "seed": sample_seed(scfg, split, i)})
                if split == "test":
                    write_mask(gt_dir / name, sample.union_mask)
                    for kind, m in sample.type_masks.items():
                        write_mask(gt_dir / f"{i:06d}.{kind}.png", m)
        with open(out / "manifest.jsonl", "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        config_mod.dump(cfg, out / "config.json")
    except OSError as exc:
        raise DataError(f"cannot write corpus to {out}: {exc}") from exc
    log.info("wrote %d samples to %s", len(rows), out)


def cmd_train(cfg, clean_dir, artifact_dir, out_model, log_path=None) -> modelfile.Model:
    tcfg = train_config_from(cfg)
    if tcfg.mode == "basic" and artifact_dir is not None:
        raise ConfigError("basic mode trains on clean patches only; "
                          "drop --artifact or pass --enhanced")
    if tcfg.mode == "enhanced" and artifact_dir is None:
        raise ConfigError("enhanced mode requires --artifact")
    schedule, codec = schedule_from(cfg), codec_from(cfg)
    clean = Corpus.from_dir("clean", clean_dir)
    artifact = Corpus.from_dir("artifact", artifact_dir) if artifact_dir else None
    log_path = Path(log_path or f"{out_model}.log.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        def emit(rec):
            fh.write(json.dumps(rec.as_dict()) + "\n")

        result = train(clean, artifact, tcfg, codec, schedule, on_step=emit)
    i = cfg["inference"]
    model = modelfile.Model(schedule, codec, result.params, result.adaptor,
                            i["t_star"], i["draws"] if i["draws"] is not None else 4)
    _build("inference", lambda: inference_from(cfg, model))
    modelfile.save(model, out_model)
    config_mod.dump(cfg, f"{out_model}.config.json")
    return model


def _score_one(cfg, model, image):
    icfg = inference_from(cfg, model)
    i = cfg["inference"]
    heatmap, grid = score_image(image, model, icfg, i["patch"], i["stride"], i["jobs"])
    return heatmap, grid, icfg


def cmd_calibrate(cfg, model_path, clean_dir, out_path) -> tuple[float, float]:
    model = modelfile.load(model_path)
    corpus = Corpus.from_dir("clean", clean_dir)
    c = cfg["calibrate"]
    n = min(len(corpus), int(c["count"]))
    if n == 0:
        raise DataError(f"no clean images in {clean_dir}")
    maps = [_score_one(cfg, model, corpus[k])[0] for k in range(n)]
    v_min, v_max = calibrate_bounds(maps, cfg["postprocess"]["sigma"],
                                    c["lo_quantile"], c["hi_factor"])
    fragment = {"postprocess": {"v_min": v_min, "v_max": v_max}}
    Path(out_path).write_text(json.dumps(fragment, indent=2) + "\n", encoding="utf-8")
    return v_min, v_max


def cmd_score(cfg, model_path, image_path, out_heatmap) -> np.ndarray:
    model = modelfile.load(model_path)
    heatmap, _, _ = _score_one(cfg, model, read_rgb(image_path))
    write_heatmap(out_heatmap, heatmap)
    return heatmap


def cmd_qc(cfg, model_path, image_path, out_mask, out_heatmap, out_report):
    model = modelfile.load(model_path)
    pcfg = postprocess_from(cfg)
    image = read_rgb(image_path)
    heatmap, grid, icfg = _score_one(cfg, model, image)
    mask = binarize(heatmap, pcfg)
    pixels = expand_mask(mask.cells, image.shape[:2])
    write_heatmap(out_heatmap, heatmap)
    write_mask(out_mask, pixels)
    report = [
        ("image", str(image_path)), ("rows", image.shape[0]), ("cols", image.shape[1]),
        ("patches", len(grid.aligned)), ("mode", model.mode),
        ("t_star", icfg.resolve_t_star(model.schedule.T)), ("draws", icfg.draws),
        ("v_min", pcfg.v_min), ("v_max", pcfg.v_max),
        ("threshold_used", mask.threshold_used),
        ("mask_fraction", float(mask.cells.mean())),
    ]
    Path(out_report).write_text("".join(f"{k}={v}\n" for k, v in report), encoding="utf-8")
    config_mod.dump(cfg, f"{out_report}.config.json")
    return mask, heatmap


def cmd_eval(cfg, pred_dir, gt_dir, out_report):
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        raise DataError("prediction and ground-truth directories must exist")

    def unions(d):
        return {p.name: p for p in d.glob("*.png") if p.name.count(".") == 1}

    preds, gts = unions(pred_dir), unions(gt_dir)
    if set(preds) != set(gts):
        missing = sorted(set(preds) ^ set(gts))
        raise DataError(f"unpaired mask files: {missing[:10]}")
    samples, scores, labels = [], [], []
    for name in sorted(gts):
        stem = name[:-4]
        pred, gt = read_mask(preds[name]), read_mask(gts[name])
        if pred.shape != gt.shape:
            raise DataError(f"{name}: prediction {pred.shape} vs ground truth {gt.shape}")
        types = {p.name.split(".")[1]: read_mask(p) for p in gt_dir.glob(f"{stem}.*.png")}
        samples.append((pred, gt, types))
        hm_path = pred_dir / f"{stem}.dqch"
        if hm_path.exists():
            hm = read_heatmap(hm_path)
            full = np.kron(hm, np.ones((8, 8)))[:gt.shape[0], :gt.shape[1]]
            if full.shape == gt.shape:
                scores.append(full.ravel())
                labels.append(gt.ravel())
    report = pool(samples)
    if scores:
        s, g = np.concatenate(scores), np.concatenate(labels)
        if g.any() and not g.all():
            report.auroc = auroc(s, g)
    report.config = {"pred_dir": str(pred_dir), "gt_dir": str(gt_dir)}
    Path(out_report).write_text(report.to_text(), encoding="utf-8")
    config_mod.dump(cfg, f"{out_report}.config.json")
    return report


# ---------------------------------------------------------------- parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", action="append", default=[],
                   help="JSON config file (repeatable; later files win)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--vmin", type=float)
    p.add_argument("--vmax", type=float)
    p.add_argument("--tstar", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic train/test corpus")
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("train", help="train a basic or enhanced model")
    p.add_argument("--clean", required=True)
    p.add_argument("--artifact")
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--enhanced", action="store_true")
    _common(p)

    p = sub.add_parser("calibrate", help="derive v_min/v_max from clean images")
    p.add_argument("--model", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("score", help="write the stitched heatmap of one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    _common(p)

    p = sub.add_parser("qc", help="heatmap, binary mask and report for one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--heatmap", required=True)
    p.add_argument("--report", required=True)
    _common(p)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    _common(p)
    return parser


def resolve_args(args) -> dict:
    flags = {k: getattr(args, k) for k in config_mod.FLAG_KEYS}
    cfg = config_mod.resolve(args.config, args.set, flags)
    if getattr(args, "enhanced", False):
        cfg["train"]["mode"] = "enhanced"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_args(args)
        if args.command == "synth":
            cmd_synth(cfg, args.out)
        elif args.command == "train":
            cmd_train(cfg, args.clean, args.artifact, args.out, args.log)
        elif args.command == "calibrate":
            v_min, v_max = cmd_calibrate(cfg, args.model, args.clean, args.out)
            print(f"v_min={v_min!r} v_max={v_max!r}")
        elif args.command == "score":
            cmd_score(cfg, args.model, args.image, args.out)
        elif args.command == "qc":
            mask, _ = cmd_qc(cfg, args.model, args.image, args.mask, args.heatmap, args.report)
            print(f"threshold_used={mask.threshold_used!r} "
                  f"mask_fraction={float(mask.cells.mean())!r}")
        elif args.command == "eval":
            report = cmd_eval(cfg, args.pred, args.gt, args.out)
            print(f"sensitivity={report.sensitivity:.4f} precision={report.precision:.4f} "
                  f"f1={report.f1:.4f}")
    except QCError as exc:
        print(f"latentqc {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
