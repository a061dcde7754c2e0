"""Glue between files on disk and the models: datasets, training runs, captioning."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .corpus import CaptionSample, load_corpus
from .fusion import FeatureExtractor, FusionConfig, ImageRegions, load_regions
from .imageio import IMAGE_SUFFIXES, read_image
from .imageproc import preprocess
from .qformer import QFormerCaptioner, QFormerConfig
from .seq2seq import (
    EncoderDecoder,
    ModelConfig,
    TrainConfig,
    Vocabulary,
    greedy_decode,
    save_checkpoint,
    train,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureSettings:
    """Everything needed to turn an image file into model input."""

    fusion: FusionConfig
    use_object_features: bool
    denoise_sigma: float | None
    enhance: bool

    def to_dict(self) -> dict:
        return {
            "fusion": self.fusion.to_dict(),
            "use_object_features": self.use_object_features,
            "denoise_sigma": self.denoise_sigma,
            "enhance": self.enhance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSettings":
        return cls(
            FusionConfig(**d["fusion"]), d["use_object_features"], d["denoise_sigma"], d["enhance"]
        )


def find_image(directory, image_id: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        p = Path(directory) / f"{image_id}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"no image for id {image_id!r} in {directory}")


class Featurizer:
    def __init__(self, settings: FeatureSettings, regions: dict[str, ImageRegions] | None = None):
        self.settings = settings
        self.extractor = FeatureExtractor(settings.fusion)
        self.regions = regions or {}

    def __call__(self, img, image_id: str) -> np.ndarray:
        s = self.settings
        img = preprocess(img, s.denoise_sigma, s.enhance)
        regions = self.regions.get(image_id) if s.use_object_features else None
        return self.extractor(img, regions)


def feature_settings(cfg: RunConfig) -> FeatureSettings:
    fusion = dict(cfg.fusion)
    fusion["d_model"] = cfg.model.get("d_model", ModelConfig.d_model)
    fusion.setdefault("seed", cfg.seed)
    pre = cfg.preprocessing if cfg.use_preprocessing else {}
    try:
        fcfg = FusionConfig(**fusion)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"fusion: {exc}") from exc
    return FeatureSettings(fcfg, cfg.use_object_features, pre.get("denoise_sigma"), bool(pre.get("enhance")))


def build_dataset(corpus: list[CaptionSample], images_dir, featurize: Featurizer, vocab: Vocabulary):
    return [
        (featurize(read_image(find_image(images_dir, s.id)), s.id), vocab.encode(s.caption))
        for s in corpus
    ]


def build_model(cfg: RunConfig, vocab: Vocabulary, max_len: int, rng):
    model_fields = dict(cfg.model)
    if model_fields.get("max_len") is None:
        model_fields["max_len"] = max(max_len, 2)
    model_fields["vocab_size"] = len(vocab)
    try:
        mcfg = ModelConfig(**model_fields)
        if cfg.model_kind == "qformer":
            q = dict(cfg.qformer)
            q.setdefault("d_q", mcfg.d_model)
            q.setdefault("d_img", mcfg.d_model)
            q.setdefault("n_heads", mcfg.n_heads)
            return QFormerCaptioner.create(mcfg, QFormerConfig(**q), rng)
        return EncoderDecoder.create(mcfg, rng)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model/qformer: {exc}") from exc


def train_config(cfg: RunConfig, seed: int) -> TrainConfig:
    try:
        return TrainConfig(**{**cfg.train, "seed": seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc


def reconstruction_rate(model, data) -> float:
    if not data:
        return float("nan")
    hits = sum(greedy_decode(model, model.encode(src)) == list(toks) for src, toks in data)
    return hits / len(data)


def run_training(cfg: RunConfig) -> dict:
    """Train per ``cfg`` and write checkpoint, loss history and summary to the output dir."""
    cfg.validate()
    init_seed, train_seed = np.random.SeedSequence(cfg.seed).generate_state(2)
    settings = feature_settings(cfg)
    regions = load_regions(cfg.paths.regions) if cfg.paths.regions and cfg.use_object_features else None
    featurize = Featurizer(settings, regions)
    corpus = load_corpus(cfg.paths.corpus)
    if not corpus:
        raise ConfigError(f"paths.corpus: {cfg.paths.corpus} holds no captions")
    vocab = Vocabulary.build(s.caption for s in corpus)
    data = build_dataset(corpus, cfg.paths.images, featurize, vocab)
    valid = None
    if cfg.paths.valid_corpus is not None:
        valid = build_dataset(load_corpus(cfg.paths.valid_corpus), cfg.paths.images, featurize, vocab)
    model = build_model(cfg, vocab, max(len(t) - 1 for _, t in data), np.random.default_rng(init_seed))
    tcfg = train_config(cfg, int(train_seed))
    result = train(model, data, tcfg, valid)

    out = Path(cfg.paths.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metadata = {"features": settings.to_dict(), "seed": cfg.seed, "train": tcfg.to_dict()}
    save_checkpoint(out / "model.ckpt", model, vocab, metadata)
    with (out / "loss_history.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "valid_loss"])
        for rec in result.history:
            w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.valid_loss)])
    summary = {
        "model_kind": model.kind,
        "n_train": len(data),
        "n_params": int(sum(v.size for v in model.params.values())),
        "epochs_run": len(result.history) - 1,
        "best_epoch": result.best_epoch,
        "stopped_early": result.stopped_early,
        "best_valid_loss": min(r.valid_loss for r in result.history),
        "train_reconstruction": reconstruction_rate(model, data),
        "seed": cfg.seed,
    }
    return summary


def caption_directory(model, vocab, settings: FeatureSettings, images_dir, regions=None):
    """Yield ``(id, caption or None, error or None)`` for every image in ``images_dir``."""
    from .imageio import list_images

    featurize = Featurizer(settings, regions)
    for path in list_images(images_dir):
        try:
            src = featurize(read_image(path), path.stem)
            yield path.stem, vocab.decode(greedy_decode(model, model.encode(src))), None
        except (OSError, ValueError) as exc:
            yield path.stem, None, str(exc)
