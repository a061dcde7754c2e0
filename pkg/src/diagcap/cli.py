"""``diagcap`` command line: preprocess, train, caption, evaluate, stats.

Set ``DIAGCAP_LOG_LEVEL`` (e.g. ``DEBUG``) to change log verbosity.
Per-item failures are reported on stderr as one JSON object per line and
make the command exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("diagcap")


def _report(command: str, item, message: str, level: str = "error") -> None:
    rec = {"level": level, "command": command, "item": None if item is None else str(item), "message": message}
    print(json.dumps(rec), file=sys.stderr)


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_preprocess(args) -> int:
    from .imageio import list_images, read_image, write_image
    from .imageproc import preprocess

    src, dst = Path(args.input), Path(args.output)
    if not src.is_dir():
        _report("preprocess", src, "input directory does not exist")
        return 1
    dst.mkdir(parents=True, exist_ok=True)
    files = list_images(src)
    if not files:
        _report("preprocess", src, "no PGM/PNG images found", level="warning")
    failed = 0
    for path in files:
        try:
            img = preprocess(read_image(path), args.denoise, args.enhance)
            write_image(dst / path.name, img)
        except (OSError, ValueError) as exc:
            failed += 1
            _report("preprocess", path, str(exc))
    log.info("preprocessed %d of %d images", len(files) - failed, len(files))
    return 1 if failed else 0


def _apply_overrides(cfg, args) -> None:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.model_kind is not None:
        cfg.model_kind = args.model_kind
    if args.no_object_features:
        cfg.use_object_features = False
    if args.preprocessing is not None:
        cfg.use_preprocessing = args.preprocessing
    if args.output_dir is not None:
        cfg.paths.output_dir = Path(args.output_dir)
    for key in ("max_epochs", "learning_rate", "batch_size", "patience"):
        value = getattr(args, key)
        if value is not None:
            cfg.train[key] = value


def cmd_train(args) -> int:
    from .config import ConfigError, load_config
    from .pipeline import run_training
    from .seq2seq import TrainingError

    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        summary = run_training(cfg)
    except ConfigError as exc:
        _report("train", args.config, f"invalid config: {exc}")
        return 2
    except (OSError, ValueError, TrainingError) as exc:
        _report("train", args.config, str(exc))
        return 1
    _write_json(summary, Path(cfg.paths.output_dir) / "summary.json")
    _write_json(summary, None)
    return 0


def cmd_caption(args) -> int:
    from .fusion import load_regions
    from .pipeline import FeatureSettings, caption_directory
    from .seq2seq import CheckpointError, load_checkpoint

    try:
        model, vocab, meta = load_checkpoint(args.checkpoint, expect_kind=args.model_kind)
    except (OSError, CheckpointError) as exc:
        _report("caption", args.checkpoint, str(exc))
        return 2
    settings = FeatureSettings.from_dict(meta["features"])
    if args.no_object_features:
        settings = FeatureSettings(settings.fusion, False, settings.denoise_sigma, settings.enhance)
    regions = None
    if settings.use_object_features and args.regions:
        regions = load_regions(args.regions)
    failed = 0
    rows = []
    for image_id, caption, error in caption_directory(model, vocab, settings, args.images, regions):
        if error is not None:
            failed += 1
            _report("caption", image_id, error)
        else:
            rows.append((image_id, caption))
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="", encoding="utf-8")
    try:
        w = csv.writer(out)
        w.writerow(["ID", "caption"])
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 1 if failed else 0


def cmd_evaluate(args) -> int:
    from .corpus import DEFAULT_GROUPS
    from .metrics import evaluate_files

    try:
        report = evaluate_files(args.pred, args.gold, groups=DEFAULT_GROUPS if args.by_length else None)
    except (OSError, ValueError) as exc:
        _report("evaluate", args.pred, str(exc))
        return 1
    if args.per_sample:
        report.write_csv(args.per_sample)
    out = report.to_dict()
    if not args.by_length:
        out.pop("groups")
    _write_json(out, args.output)
    return 0


def cmd_stats(args) -> int:
    from .corpus import corpus_report, length_stats, load_corpus, load_stopwords, write_histogram_csv

    try:
        corpus = load_corpus(args.corpus)
        stopwords = load_stopwords(args.stopwords)
        report = corpus_report(corpus, stopwords, args.top_k)
        if args.histogram:
            write_histogram_csv(args.histogram, length_stats(corpus))
    except (OSError, ValueError) as exc:
        _report("stats", args.corpus, str(exc))
        return 1
    _write_json(report, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diagcap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="denoise and/or enhance a directory of images")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--denoise", type=float, metavar="SIGMA")
    p.add_argument("--enhance", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a captioning model from a JSON run config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--model-kind", choices=["encoder-decoder", "qformer"])
    p.add_argument("--no-object-features", action="store_true")
    p.add_argument("--preprocessing", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--output-dir")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("caption", help="caption every image in a directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--regions")
    p.add_argument("--no-object-features", action="store_true")
    p.add_argument("--model-kind", choices=["encoder-decoder", "qformer"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("evaluate", help="score predictions against gold captions")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--by-length", action="store_true")
    p.add_argument("--output")
    p.add_argument("--per-sample")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="caption corpus statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--stopwords")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--output")
    p.add_argument("--histogram")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("DIAGCAP_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
