"""Transformer encoder-decoder captioner over fused image features."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..tensor import ShapeError, log_softmax, sinusoidal_positions
from . import layers as L

PAD_ID = 0


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 32
    n_heads: int = 2
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    d_ff: int = 64
    vocab_size: int = 32
    max_len: int = 24
    dropout_rate: float = 0.2
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} must be divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.max_len < 2:
            raise ValueError("max_len must be at least 2")
        if self.vocab_size < 5:
            raise ValueError("vocab_size must cover the reserved tokens plus one")
        if min(self.n_enc_layers, self.n_dec_layers) < 0 or self.d_ff < 1:
            raise ValueError("layer counts must be >= 0 and d_ff >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def init_decoder(p, rng, cfg: ModelConfig):
    d = cfg.d_model
    p["dec.embed"] = rng.standard_normal((cfg.vocab_size, d))
    for i in range(cfg.n_dec_layers):
        L.init_attention(p, rng, f"dec.{i}.self", d)
        L.init_attention(p, rng, f"dec.{i}.cross", d)
        L.init_ffn(p, rng, f"dec.{i}.ffn", d, cfg.d_ff)
        for k in (1, 2, 3):
            L.init_layer_norm(p, f"dec.{i}.ln{k}", d)
    p["dec.out.w"] = rng.standard_normal((d, cfg.vocab_size)) / np.sqrt(d)
    p["dec.out.b"] = np.zeros(cfg.vocab_size)


def init_encoder(p, rng, cfg: ModelConfig):
    d = cfg.d_model
    for i in range(cfg.n_enc_layers):
        L.init_attention(p, rng, f"enc.{i}.attn", d)
        L.init_ffn(p, rng, f"enc.{i}.ffn", d, cfg.d_ff)
        L.init_layer_norm(p, f"enc.{i}.ln1", d)
        L.init_layer_norm(p, f"enc.{i}.ln2", d)


def encode(p, x, cfg: ModelConfig, rng=None, probe=None):
    """Stack of ``LN(x + SelfAttn(x))`` / ``LN(x + FFN(x))`` layers.

    Dropout is active only when ``rng`` is given (training mode).
    Returns ``(memory, backward)``; ``backward(dmem, grads)`` returns d_input.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.d_model:
        raise ShapeError(f"encoder input must be (n, {cfg.d_model}), got {x.shape}")
    backs = []
    for i in range(cfg.n_enc_layers):
        a, back_a = L.attention(p, f"enc.{i}.attn", x, x, cfg.n_heads, probe=probe)
        x, back1 = L.add_norm(p, f"enc.{i}.ln1", x, a, back_a, cfg.dropout_rate, rng, cfg.ln_eps)
        f, back_f = L.ffn(p, f"enc.{i}.ffn", x)
        x, back2 = L.add_norm(p, f"enc.{i}.ln2", x, f, back_f, cfg.dropout_rate, rng, cfg.ln_eps)
        backs.append((back1, back2))

    def backward(dy, g):
        for back1, back2 in reversed(backs):
            dx, dsub = back2(dy, g)
            dy = dx + dsub
            dx, (dq, dkv) = back1(dy, g)
            dy = dx + dq + dkv
        return dy

    return x, backward


def decode_logits(p, memory, prefix, cfg: ModelConfig, rng=None, probe=None):
    """Logits ``(len(prefix), vocab_size)`` for next-token prediction.

    Token embeddings plus sinusoidal positions pass through causal
    self-attention, cross-attention over ``memory`` and an FFN, each wrapped
    as ``LN(x + sublayer)``.  Returns ``(logits, backward)``; the backward
    returns d_memory.
    """
    ids = np.asarray(prefix, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("prefix must be a non-empty 1-D id sequence")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError(f"token id out of range [0, {cfg.vocab_size})")
    if ids.size > cfg.max_len:
        raise ValueError(f"prefix length {ids.size} exceeds max_len {cfg.max_len}")
    memory = np.asarray(memory, dtype=np.float64)
    if memory.ndim != 2 or memory.shape[1] != cfg.d_model:
        raise ShapeError(f"memory must be (m, {cfg.d_model}), got {memory.shape}")
    n = ids.size
    E = p["dec.embed"]
    x = E[ids] + sinusoidal_positions(n, cfg.d_model)
    mask = L.causal_mask(n)
    backs = []
    for i in range(cfg.n_dec_layers):
        pre = f"dec.{i}"
        a, back_a = L.attention(p, pre + ".self", x, x, cfg.n_heads, mask=mask, probe=probe)
        x, b1 = L.add_norm(p, pre + ".ln1", x, a, back_a, cfg.dropout_rate, rng, cfg.ln_eps)
        c, back_c = L.attention(p, pre + ".cross", x, memory, cfg.n_heads, probe=probe)
        x, b2 = L.add_norm(p, pre + ".ln2", x, c, back_c, cfg.dropout_rate, rng, cfg.ln_eps)
        f, back_f = L.ffn(p, pre + ".ffn", x)
        x, b3 = L.add_norm(p, pre + ".ln3", x, f, back_f, cfg.dropout_rate, rng, cfg.ln_eps)
        backs.append((b1, b2, b3))
    logits, back_out = L.linear(p, "dec.out", x)

    def backward(dlogits, g):
        dmem = np.zeros_like(memory)
        dx = back_out(dlogits, g)
        for b1, b2, b3 in reversed(backs):
            dres, dsub = b3(dx, g)
            dx = dres + dsub
            dres, (dq, dm) = b2(dx, g)
            dx = dres + dq
            dmem += dm
            dres, (dq, dkv) = b1(dx, g)
            dx = dres + dq + dkv
        np.add.at(g["dec.embed"], ids, dx)
        return dmem

    return logits, backward


def token_nll(logits, targets):
    """Summed negative log-likelihood over non-PAD targets.

    Returns ``(loss_sum, count, dlogits)`` with ``dlogits`` the gradient of
    ``loss_sum``.
    """
    targets = np.asarray(targets, dtype=np.int64)
    keep = targets != PAD_ID
    logp = log_softmax(logits)
    rows = np.arange(targets.size)
    loss = -float(np.sum(logp[rows, targets] * keep))
    dlogits = np.exp(logp)
    dlogits[rows, targets] -= 1.0
    dlogits *= keep[:, None]
    return loss, int(keep.sum()), dlogits


class EncoderDecoder:
    """Fused image features -> encoder memory -> autoregressive decoder."""

    kind = "encoder-decoder"

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def create(cls, cfg: ModelConfig, rng: np.random.Generator) -> "EncoderDecoder":
        p: dict[str, np.ndarray] = {}
        init_encoder(p, rng, cfg)
        init_decoder(p, rng, cfg)
        return cls(cfg, p)

    @property
    def decoder_cfg(self) -> ModelConfig:
        return self.cfg

    def memory(self, p, source, rng=None, probe=None):
        return encode(p, source, self.cfg, rng=rng, probe=probe)

    def encode(self, source):
        return self.memory(self.params, source)[0]

    def decode_logits(self, memory, prefix, probe=None):
        return decode_logits(self.params, memory, prefix, self.decoder_cfg, probe=probe)[0]

    def sequence_loss(self, p, source, tokens, rng=None, need_grad=True, grads=None, scale=1.0):
        """Teacher-forced NLL of ``tokens[1:]`` given ``tokens[:-1]``.

        Returns ``(loss_sum, count)``; if ``need_grad`` the gradient of
        ``scale * loss_sum`` is accumulated into ``grads``.
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        mem, back_mem = self.memory(p, source, rng=rng)
        logits, back_dec = decode_logits(p, mem, tokens[:-1], self.decoder_cfg, rng=rng)
        loss, count, dlogits = token_nll(logits, tokens[1:])
        if need_grad:
            back_mem(back_dec(dlogits * scale, grads), grads)
        return loss, count
