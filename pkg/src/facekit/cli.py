"""Command-line interface: corpus generation, detector and recognizer
training, detection, recognition, and gallery evaluation.

Exit codes: 0 success, 1 operational error (bad files, failed runs),
2 usage error. Config files are `key = value` lines with `#` comments;
unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import bpnn, reporting
from .boosting import Cascade, CascadeConfig, Sample, train_cascade
from .corpus import SyntheticCorpusSpec, generate_corpus
from .detector import ScanConfig, detect
from .haar import WindowSpec, enumerate_features, feature_matrix
from .images import GrayImage, Rect, rgb_to_gray
from .model_io import load_model, save_model
from .netpbm import read_image, write_pgm
from .recognizer import (
    DescriptorConfig,
    RecognizerModel,
    load_gallery,
    recognize,
    train_recognizer,
)


class CliError(Exception):
    """Operational failure surfaced to the user with exit code 1."""


def parse_config_file(path) -> dict[str, str]:
    """`key = value` per line; blank lines and `#` comments ignored."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise CliError(f"cannot read config {path}: {e}") from None
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise CliError(f"{path}:{lineno}: expected `key = value`")
        key, value = (part.strip() for part in text.split("=", 1))
        if not key or not value:
            raise CliError(f"{path}:{lineno}: empty key or value")
        if key in values:
            raise CliError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


class _Config:
    """Typed, schema-checked view over a parsed config file."""

    def __init__(self, path: str | None):
        self.values = parse_config_file(path) if path else {}
        self.path = path

    def _take(self, key: str, conv, default):
        if key not in self.values:
            return default
        raw = self.values.pop(key)
        try:
            return conv(raw)
        except ValueError:
            raise CliError(f"config key {key!r}: bad value {raw!r}") from None

    def take_int(self, key: str, default: int) -> int:
        return self._take(key, int, default)

    def take_float(self, key: str, default: float) -> float:
        return self._take(key, float, default)

    def take_str(self, key: str, default: str) -> str:
        return self._take(key, str, default)

    def take_ratios(self, key: str, default):
        def conv(raw: str):
            parts = [float(p) for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError(raw)
            return tuple(parts)

        return self._take(key, conv, default)

    def finish(self) -> None:
        if self.values:
            unknown = ", ".join(sorted(self.values))
            raise CliError(f"unknown config keys in {self.path}: {unknown}")


def _load_gray(path) -> GrayImage:
    img = read_image(path)
    if not isinstance(img, GrayImage):
        img = rgb_to_gray(img)
    return img


def _load_window_dir(directory, expected=None) -> list[GrayImage]:
    try:
        names = sorted(n for n in os.listdir(directory) if n.endswith(".pgm"))
    except OSError as e:
        raise CliError(str(e)) from None
    if not names:
        raise CliError(f"no .pgm files in {directory}")
    images = []
    for name in names:
        img = _load_gray(os.path.join(directory, name))
        if img.width != img.height:
            raise CliError(f"{name}: training windows must be square")
        if expected is not None and img.width != expected:
            raise CliError(f"{name}: expected {expected}x{expected}, got {img.width}")
        expected = img.width
        images.append(img)
    return images


def _scan_config(cfg: _Config) -> ScanConfig:
    return ScanConfig(
        scale_start=cfg.take_float("scale_start", 1.0),
        scale_factor=cfg.take_float("scale_factor", 1.25),
        stride_fraction=cfg.take_float("stride_fraction", 1.0 / 12.0),
        nms_iou=cfg.take_float("nms_iou", 0.3),
    )


def _load_cascade(path) -> Cascade:
    model = load_model(path)
    if not isinstance(model, Cascade):
        raise CliError(f"{path} is not a detector cascade model")
    return model


def _load_recognizer(path) -> RecognizerModel:
    model = load_model(path)
    if not isinstance(model, RecognizerModel):
        raise CliError(f"{path} is not a recognizer model")
    return model


def _cmd_gen_corpus(args) -> int:
    spec = SyntheticCorpusSpec(
        seed=args.seed,
        n_pos=args.n_pos,
        n_neg=args.n_neg,
        image_size=args.size,
        noise=args.noise,
    )
    positives, negatives = generate_corpus(spec)
    pos_dir = os.path.join(args.out, "pos")
    neg_dir = os.path.join(args.out, "neg")
    os.makedirs(pos_dir, exist_ok=True)
    os.makedirs(neg_dir, exist_ok=True)
    for i, img in enumerate(positives):
        write_pgm(img, os.path.join(pos_dir, f"pos_{i:05d}.pgm"))
    for i, img in enumerate(negatives):
        write_pgm(img, os.path.join(neg_dir, f"neg_{i:05d}.pgm"))
    print(f"wrote {len(positives)} positives, {len(negatives)} negatives under {args.out}")
    return 0


def _cmd_train_detector(args) -> int:
    cfg = _Config(args.config)
    base_size = cfg.take_int("base_size", 0)
    cascade_cfg = CascadeConfig(
        per_stage_tpr=cfg.take_float("per_stage_tpr", 0.99),
        per_stage_fpr=cfg.take_float("per_stage_fpr", 0.5),
        overall_fpr_target=cfg.take_float("overall_fpr_target", 1e-3),
        max_stages=cfg.take_int("max_stages", 10),
        max_weaks_per_stage=cfg.take_int("max_weaks_per_stage", 50),
        neg_per_stage=cfg.take_int("neg_per_stage", 500),
        seed=cfg.take_int("seed", 0),
    )
    cfg.finish()
    positives = _load_window_dir(args.pos, base_size or None)
    base = positives[0].width
    negatives = _load_window_dir(args.neg, base)
    window = WindowSpec(base)
    features = enumerate_features(window)
    x_pos = feature_matrix(features, positives, window)
    x_neg = feature_matrix(features, negatives, window)
    pos_samples = [Sample(row, 1) for row in x_pos]
    cascade = train_cascade(pos_samples, iter(x_neg), features, window, cascade_cfg)
    save_model(cascade, args.out)
    rates = cascade.training_meta.stage_rates
    print(f"trained cascade: {len(cascade.stages)} stages over {len(features)} features")
    for i, (stage, r) in enumerate(zip(cascade.stages, rates), start=1):
        print(f"stage {i}: {len(stage.weaks)} weaks tpr {r.tpr:.6g} fpr {r.fpr:.6g}")
    return 0


def _cmd_detect(args) -> int:
    cascade = _load_cascade(args.model)
    cfg = _Config(args.config)
    scan = _scan_config(cfg)
    cfg.finish()
    img = _load_gray(args.image)
    detections = detect(cascade, img, scan)
    for d in detections:
        print(d.line())
    if args.plot:
        reporting.plot_detections(img, detections, args.plot)
    return 0


def _recognizer_configs(cfg: _Config, n_identities: int):
    dcfg = DescriptorConfig(
        crop_size=cfg.take_int("crop_size", 32),
        grid=(cfg.take_int("grid_rows", 4), cfg.take_int("grid_cols", 4)),
        bins_per_cell=cfg.take_int("bins_per_cell", 16),
        mode=cfg.take_str("mode", "grayscale"),
    )
    n_out = cfg.take_int("n_out", 8)
    netcfg = bpnn.NetworkConfig(
        n_in=dcfg.length,
        n_hidden=cfg.take_int("n_hidden", 16),
        n_out=n_out,
        learning_rate=cfg.take_float("learning_rate", 0.5),
        max_epochs=cfg.take_int("max_epochs", 1000),
        val_fail_limit=cfg.take_int("val_fail_limit", 6),
        goal_mse=cfg.take_float("goal_mse", 1e-3),
        seed=cfg.take_int("seed", 0),
    )
    ratios = cfg.take_ratios("ratios", (1.0, 0.0, 0.0))
    accept_threshold = cfg.take_float("accept_threshold", 0.75)
    return dcfg, netcfg, ratios, accept_threshold


def _cmd_train_recognizer(args) -> int:
    cfg = _Config(args.config)
    detector_cascade = _load_cascade(args.detector) if args.detector else None
    gallery = load_gallery(args.gallery, detector_cascade)
    labels = {label for _, _, label in gallery}
    dcfg, netcfg, ratios, accept_threshold = _recognizer_configs(cfg, len(labels))
    cfg.finish()
    model = train_recognizer(
        gallery,
        dcfg,
        netcfg,
        restarts=args.restarts,
        ratios=ratios,
        accept_threshold=accept_threshold,
    )
    save_model(model, args.out)
    report = model.restart_reports[model.selected_restart]
    if args.report:
        reporting.write_train_report_csv(report, args.report)
    if args.plot:
        reporting.plot_train_curve(report, args.plot)
    final_train = report.mse_curve[-1][0]
    print(
        f"trained {len(gallery)} samples, {len(labels)} identities; "
        f"restart {model.selected_restart} of {args.restarts} selected "
        f"({report.stop_reason} after {report.epochs_run} epochs, "
        f"train mse {final_train:.6g})"
    )
    return 0


def _parse_rect(text: str) -> Rect:
    parts = text.split(",")
    if len(parts) != 4:
        raise CliError(f"--rect wants x,y,w,h, got {text!r}")
    try:
        x, y, w, h = (int(p) for p in parts)
        return Rect(x, y, w, h)
    except ValueError as e:
        raise CliError(f"bad rect {text!r}: {e}") from None


def _cmd_recognize(args) -> int:
    model = _load_recognizer(args.model)
    img = _load_gray(args.image)
    if args.rect:
        rect = _parse_rect(args.rect)
    else:
        cascade = _load_cascade(args.detector)
        found = detect(cascade, img)
        if not found:
            raise CliError("detector found no face")
        rect = found[0].rect
    result = recognize(model, img, rect)
    if result.is_unknown:
        print("unknown")
    else:
        print(f"{result.label} {result.confidence:.6g}")
    return 0


def _cmd_eval(args) -> int:
    model = _load_recognizer(args.model)
    detector_cascade = _load_cascade(args.detector) if args.detector else None
    gallery = load_gallery(args.gallery, detector_cascade)
    if not gallery:
        raise CliError("gallery is empty")
    confusion: dict[tuple[str, str], int] = {}
    correct = 0
    for img, rect, label in gallery:
        result = recognize(model, img, rect)
        predicted = result.label if result.label is not None else "unknown"
        if predicted == label:
            correct += 1
        confusion[(label, predicted)] = confusion.get((label, predicted), 0) + 1
    print(f"accuracy {correct}/{len(gallery)}")
    for (true_label, predicted), count in sorted(confusion.items()):
        print(f"confusion {true_label} {predicted} {count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facekit",
        description="Face detection (boosted Haar cascade) and recognition "
        "(backprop network) toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="write a seeded synthetic training corpus")
    p.add_argument("--out", required=True, help="output directory (pos/ and neg/ created)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-pos", type=int, default=200)
    p.add_argument("--n-neg", type=int, default=500)
    p.add_argument("--size", type=int, default=16, help="window edge in pixels")
    p.add_argument("--noise", type=int, default=20, help="additive noise amplitude")
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("train-detector", help="train a cascade on window images")
    p.add_argument("--pos", required=True, help="directory of positive .pgm windows")
    p.add_argument("--neg", required=True, help="directory of negative .pgm windows")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--config", help="cascade training config file")
    p.set_defaults(func=_cmd_train_detector)

    p = sub.add_parser("detect", help="run a cascade over an image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--format", choices=["text"], default="text")
    p.add_argument("--config", help="scan config file")
    p.add_argument("--plot", help="also render detections to this image file")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("train-recognizer", help="train a recognizer from a gallery manifest")
    p.add_argument("--gallery", required=True, help="manifest: `path x y w h label` lines")
    p.add_argument("--out", required=True)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--report", help="write the selected restart's mse curve CSV here")
    p.add_argument("--plot", help="also render the mse curve to this image file")
    p.add_argument("--config", help="descriptor/network config file")
    p.add_argument("--detector", help="cascade model for `auto` manifest rects")
    p.set_defaults(func=_cmd_train_recognizer)

    p = sub.add_parser("recognize", help="identify the face in an image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--rect", help="face rect as x,y,w,h")
    group.add_argument("--detector", help="cascade model to find the face")
    p.set_defaults(func=_cmd_recognize)

    p = sub.add_parser("eval", help="score a recognizer over a labeled gallery")
    p.add_argument("--model", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--detector", help="cascade model for `auto` manifest rects")
    p.set_defaults(func=_cmd_eval)

    return parser


def cli_run(argv) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_run(sys.argv[1:]))


if __name__ == "__main__":
    main()
