"""Synthetic image/caption fixtures shared by the model, CLI and acceptance tests."""

import json

import numpy as np

from diagcap.fusion import BBox, FeatureExtractor, FusionConfig, ImageRegions, RegionFeature, dump_regions
from diagcap.imageio import write_image
from diagcap.seq2seq import ModelConfig, Vocabulary

WORDS = "lung mass chest ct scan left right showing opacity lesion nodule pelvis".split()


def captions(n, seed=0):
    rng = np.random.default_rng(seed)
    return [" ".join(rng.choice(WORDS, rng.integers(3, 7))) for _ in range(n)]


def images(n, seed=0, side=16):
    rng = np.random.default_rng([seed, 7])
    # 8-bit levels so that a PGM round trip is lossless.
    return [np.rint(rng.random((side + 8 * (i % 3), side)) * 255) / 255 for i in range(n)]


def regions(n, d_region=8, seed=0, side=16):
    rng = np.random.default_rng([seed, 9])
    out = []
    for i in range(n):
        k = int(rng.integers(1, 4))
        regs = []
        for _ in range(k):
            x0, y0 = rng.integers(0, side // 2, size=2)
            regs.append(RegionFeature(rng.standard_normal(d_region), BBox(float(x0), float(y0), float(x0 + 4), float(y0 + 4))))
        out.append(ImageRegions(f"img{i:02d}", side, side, regs))
    return out


def fused_dataset(n, seed=0, d_model=32, with_regions=True):
    caps = captions(n, seed)
    vocab = Vocabulary.build(caps)
    fx = FeatureExtractor(FusionConfig(d_region=8, d_model=d_model, patch_size=8, seed=seed))
    regs = regions(n, seed=seed) if with_regions else [None] * n
    data = [(fx(img, r), vocab.encode(c)) for img, r, c in zip(images(n, seed), regs, caps)]
    return data, vocab, fx


def toy_model_config(vocab, **kw):
    base = dict(d_model=32, n_heads=2, n_enc_layers=2, n_dec_layers=2, d_ff=64,
                vocab_size=len(vocab), max_len=10, dropout_rate=0.2)
    base.update(kw)
    return ModelConfig(**base)


def write_run_dir(root, n=16, seed=0, model_kind="encoder-decoder", **train_overrides):
    """Write images, corpus, regions and a run config; return the config path."""
    img_dir = root / "images"
    img_dir.mkdir(parents=True, exist_ok=True)
    caps = captions(n, seed)
    with (root / "train.jsonl").open("w") as fh:
        for i, (img, cap) in enumerate(zip(images(n, seed), caps)):
            write_image(img_dir / f"img{i:02d}.pgm", img)
            fh.write(json.dumps({"id": f"img{i:02d}", "caption": cap}) + "\n")
    dump_regions(root / "regions.jsonl", regions(n, seed=seed))
    train = {"learning_rate": 3e-3, "batch_size": 4, "patience": 20, "max_epochs": 300}
    train.update(train_overrides)
    cfg = {
        "seed": seed,
        "model_kind": model_kind,
        "use_object_features": True,
        "use_preprocessing": False,
        "paths": {"corpus": "train.jsonl", "images": "images", "regions": "regions.jsonl",
                  "output_dir": "run"},
        "model": {"d_model": 32, "n_heads": 2, "n_enc_layers": 2, "n_dec_layers": 2,
                  "d_ff": 64, "dropout_rate": 0.2},
        "train": train,
        "fusion": {"d_region": 8, "patch_size": 8},
        "qformer": {"n_queries": 8, "n_layers": 1, "d_ff": 64},
    }
    path = root / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path
