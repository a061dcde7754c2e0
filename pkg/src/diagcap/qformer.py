"""Query-transformer bottleneck feeding the caption decoder.

A bank of learnable query embeddings runs through blocks of query
self-attention, cross-attention into frozen image features, and an FFN
(each ``LN(x + sublayer)``).  Whatever the number of image-feature rows,
the output always has one row per query and serves as decoder memory.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .seq2seq import layers as L
from .seq2seq.decode import greedy_decode
from .seq2seq.model import EncoderDecoder, ModelConfig, init_decoder
from .tensor import ShapeError


@dataclass(frozen=True)
class QFormerConfig:
    n_queries: int = 8
    d_q: int = 32
    d_img: int = 32
    n_heads: int = 2
    n_layers: int = 1
    d_ff: int = 64
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.n_queries < 1:
            raise ValueError("n_queries must be >= 1")
        if self.d_q % self.n_heads:
            raise ValueError(f"d_q={self.d_q} must be divisible by n_heads={self.n_heads}")

    def to_dict(self) -> dict:
        return asdict(self)


# Query count and width used with the large frozen encoder in the original system.
FULL_SCALE_QFORMER = QFormerConfig(n_queries=64, d_q=768, d_img=1024, n_heads=12, d_ff=3072)


def init_qformer(p, rng, qcfg: QFormerConfig):
    p["qf.query"] = rng.standard_normal((qcfg.n_queries, qcfg.d_q))
    for i in range(qcfg.n_layers):
        L.init_attention(p, rng, f"qf.{i}.self", qcfg.d_q)
        L.init_attention(p, rng, f"qf.{i}.cross", qcfg.d_q, d_kv=qcfg.d_img)
        L.init_ffn(p, rng, f"qf.{i}.ffn", qcfg.d_q, qcfg.d_ff)
        for k in (1, 2, 3):
            L.init_layer_norm(p, f"qf.{i}.ln{k}", qcfg.d_q)


def qformer_forward(p, image_features, qcfg: QFormerConfig, rate=0.0, rng=None, probe=None):
    """Return ``(queries_out, backward)``; ``queries_out`` is ``(n_queries, d_q)``.

    Image features are treated as constants: the backward only fills
    parameter gradients (including ``qf.query``).
    """
    feats = np.asarray(image_features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != qcfg.d_img or feats.shape[0] < 1:
        raise ShapeError(f"image features must be (n>=1, {qcfg.d_img}), got {feats.shape}")
    x = p["qf.query"]
    backs = []
    for i in range(qcfg.n_layers):
        pre = f"qf.{i}"
        a, back_a = L.attention(p, pre + ".self", x, x, qcfg.n_heads, probe=probe)
        x, b1 = L.add_norm(p, pre + ".ln1", x, a, back_a, rate, rng, qcfg.ln_eps)
        c, back_c = L.attention(p, pre + ".cross", x, feats, qcfg.n_heads, probe=probe)
        x, b2 = L.add_norm(p, pre + ".ln2", x, c, back_c, rate, rng, qcfg.ln_eps)
        f, back_f = L.ffn(p, pre + ".ffn", x)
        x, b3 = L.add_norm(p, pre + ".ln3", x, f, back_f, rate, rng, qcfg.ln_eps)
        backs.append((b1, b2, b3))

    def backward(dy, g):
        for b1, b2, b3 in reversed(backs):
            dres, dsub = b3(dy, g)
            dy = dres + dsub
            dres, (dq, _) = b2(dy, g)
            dy = dres + dq
            dres, (dq, dkv) = b1(dy, g)
            dy = dres + dq + dkv
        g["qf.query"] += dy

    return x, backward


class QFormerCaptioner(EncoderDecoder):
    """Q-Former output used as cross-attention memory for the caption decoder."""

    kind = "qformer"

    def __init__(self, cfg: ModelConfig, qcfg: QFormerConfig, params):
        if cfg.d_model != qcfg.d_q:
            raise ShapeError(
                f"decoder width {cfg.d_model} != query width {qcfg.d_q}; no bridge projection"
            )
        super().__init__(cfg, params)
        self.qcfg = qcfg

    @classmethod
    def create(cls, cfg: ModelConfig, qcfg: QFormerConfig, rng) -> "QFormerCaptioner":
        if cfg.d_model != qcfg.d_q:
            raise ShapeError(f"decoder width {cfg.d_model} != query width {qcfg.d_q}")
        p: dict[str, np.ndarray] = {}
        init_qformer(p, rng, qcfg)
        init_decoder(p, rng, cfg)
        return cls(cfg, qcfg, p)

    def memory(self, p, source, rng=None, probe=None):
        return qformer_forward(p, source, self.qcfg, self.cfg.dropout_rate, rng, probe)


def caption_with_qformer(model: QFormerCaptioner, image_features, max_len=None) -> list[int]:
    return greedy_decode(model, model.encode(image_features), max_len)
