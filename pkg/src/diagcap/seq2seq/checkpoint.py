"""Versioned checkpoint container.

Layout::

    b"DIAGCAP\\0"                 8-byte magic
    uint64 little-endian         length of the JSON header in bytes
    JSON header (UTF-8)          format_version, model_kind, configs, vocab,
                                 parameter table [{"name", "shape"}], metadata
    float64 little-endian blocks one per parameter, in header table order
                                 (parameter names sorted lexicographically)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import EncoderDecoder, ModelConfig
from .vocab import Vocabulary

MAGIC = b"DIAGCAP\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model, vocab: Vocabulary, metadata: dict | None = None) -> None:
    names = sorted(model.params)
    header = {
        "format_version": FORMAT_VERSION,
        "model_kind": model.kind,
        "model_config": model.cfg.to_dict(),
        "vocab": vocab.itos,
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
        "metadata": metadata or {},
    }
    if hasattr(model, "qcfg"):
        header["qformer_config"] = model.qcfg.to_dict()
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes())


def read_header(path) -> tuple[dict, int]:
    with Path(path).open("rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a diagcap checkpoint")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size).decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    return header, len(MAGIC) + 8 + size


def load_checkpoint(path, expect_kind: str | None = None):
    """Return ``(model, vocab, metadata)``."""
    from ..qformer import QFormerCaptioner, QFormerConfig

    header, offset = read_header(path)
    kind = header["model_kind"]
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointError(f"{path}: checkpoint holds a {kind!r} model, expected {expect_kind!r}")
    data = Path(path).read_bytes()[offset:]
    params, pos = {}, 0
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64))
        if pos + 8 * n > len(data):
            raise CheckpointError(f"{path}: truncated parameter block {entry['name']}")
        params[entry["name"]] = np.frombuffer(data, "<f8", n, pos).astype(np.float64).reshape(shape)
        pos += 8 * n
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    cfg = ModelConfig(**header["model_config"])
    if kind == EncoderDecoder.kind:
        model = EncoderDecoder(cfg, params)
    elif kind == QFormerCaptioner.kind:
        model = QFormerCaptioner(cfg, QFormerConfig(**header["qformer_config"]), params)
    else:
        raise CheckpointError(f"{path}: unknown model kind {kind!r}")
    return model, Vocabulary.from_list(header["vocab"]), header["metadata"]
