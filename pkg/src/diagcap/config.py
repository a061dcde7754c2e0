"""JSON run configuration for the command line.

Example::

    {
      "seed": 0,
      "model_kind": "encoder-decoder",
      "use_object_features": true,
      "use_preprocessing": false,
      "preprocessing": {"denoise_sigma": 1.0, "enhance": true},
      "paths": {"corpus": "train.jsonl", "images": "images", "regions": "regions.jsonl",
                "valid_corpus": null, "output_dir": "run"},
      "model": {"d_model": 32, "n_heads": 2, "n_enc_layers": 2, "n_dec_layers": 2,
                "d_ff": 64, "max_len": null, "dropout_rate": 0.2},
      "train": {"learning_rate": 3e-5, "batch_size": 32, "patience": 3, "max_epochs": 50},
      "fusion": {"d_region": 16, "patch_size": 8},
      "qformer": {"n_queries": 8, "n_layers": 1, "d_ff": 64}
    }

Relative paths are resolved against the directory holding the file.
``fusion.d_model`` always follows ``model.d_model``; seeds for the frozen
feature extractor, parameter initialisation and training all derive from
the top-level ``seed``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

MODEL_KINDS = ("encoder-decoder", "qformer")


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    corpus: Path | None = None
    images: Path | None = None
    regions: Path | None = None
    valid_corpus: Path | None = None
    output_dir: Path = Path("run")


@dataclass
class RunConfig:
    seed: int = 0
    model_kind: str = "encoder-decoder"
    use_object_features: bool = True
    use_preprocessing: bool = False
    preprocessing: dict = field(default_factory=lambda: {"denoise_sigma": 1.0, "enhance": True})
    paths: Paths = field(default_factory=Paths)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    fusion: dict = field(default_factory=dict)
    qformer: dict = field(default_factory=dict)

    def validate(self, need_inputs: bool = True) -> None:
        errors = []
        if self.model_kind not in MODEL_KINDS:
            errors.append(f"model_kind: must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if not isinstance(self.seed, int):
            errors.append("seed: must be an integer")
        sigma = self.preprocessing.get("denoise_sigma")
        if sigma is not None and not (isinstance(sigma, (int, float)) and sigma > 0):
            errors.append("preprocessing.denoise_sigma: must be a positive number or null")
        if need_inputs:
            for name in ("corpus", "images"):
                p = getattr(self.paths, name)
                if p is None:
                    errors.append(f"paths.{name}: required")
                elif not p.exists():
                    errors.append(f"paths.{name}: {p} does not exist")
            for name in ("regions", "valid_corpus"):
                p = getattr(self.paths, name)
                if p is not None and not p.exists():
                    errors.append(f"paths.{name}: {p} does not exist")
        if errors:
            raise ConfigError("; ".join(errors))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["paths"] = {
            f.name: (None if getattr(self.paths, f.name) is None else str(getattr(self.paths, f.name)))
            for f in fields(Paths)
        }
        return out


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown field(s) {unknown}")


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    _check_keys("config", raw, [f.name for f in fields(RunConfig)])
    raw_paths = raw.pop("paths", {}) or {}
    _check_keys("paths", raw_paths, [f.name for f in fields(Paths)])
    base = path.parent
    paths = Paths(**{k: (None if v is None else base / v) for k, v in raw_paths.items()})
    for section in ("model", "train", "fusion", "qformer", "preprocessing"):
        if section in raw and not isinstance(raw[section], dict):
            raise ConfigError(f"{section}: must be an object")
    return RunConfig(paths=paths, **raw)
