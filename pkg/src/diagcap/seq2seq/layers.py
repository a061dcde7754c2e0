"""Differentiable building blocks with hand-written backward passes.

Every forward function takes the flat parameter dict ``p`` and a name
prefix, and returns ``(output, backward)``.  ``backward(dout, grads)``
accumulates parameter gradients into ``grads`` (same keys as ``p``) and
returns the gradient with respect to the layer input(s).
"""

from __future__ import annotations

import numpy as np

from ..tensor import ShapeError, softmax


def linear(p, name, x, bias=True):
    W = p[name + ".w"]
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(f"{name}: input width {x.shape[-1]} != {W.shape[0]}")
    y = x @ W
    if bias:
        y = y + p[name + ".b"]

    def backward(dy, g):
        g[name + ".w"] += x.T @ dy
        if bias:
            g[name + ".b"] += dy.sum(axis=0)
        return dy @ W.T

    return y, backward


def layer_norm(p, name, x, eps=1e-5):
    gamma, beta = p[name + ".g"], p[name + ".b"]
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc**2).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    y = gamma * xhat + beta

    def backward(dy, g):
        g[name + ".g"] += (dy * xhat).sum(axis=0)
        g[name + ".b"] += dy.sum(axis=0)
        dxhat = dy * gamma
        n = x.shape[-1]
        return (inv / n) * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )

    return y, backward


def causal_mask(n):
    """Additive mask: ``-inf`` above the diagonal, zero elsewhere."""
    mask = np.zeros((n, n))
    mask[np.triu_indices(n, k=1)] = -np.inf
    return mask


def attention(p, name, xq, xkv, n_heads, mask=None, probe=None):
    """Multi-head scaled dot-product attention without projection biases.

    Queries come from ``xq``; keys and values from ``xkv``.  ``mask`` is an
    additive ``(rows(xq), rows(xkv))`` array.  When ``probe`` is a list the
    attention weights ``(heads, rows(xq), rows(xkv))`` are appended to it.
    The backward returns ``(d_xq, d_xkv)``.
    """
    Wq, Wk, Wv, Wo = (p[f"{name}.{k}"] for k in ("wq", "wk", "wv", "wo"))
    d = Wq.shape[1]
    if d % n_heads:
        raise ShapeError(f"{name}: width {d} not divisible by {n_heads} heads")
    if xq.shape[1] != Wq.shape[0] or xkv.shape[1] != Wk.shape[0]:
        raise ShapeError(
            f"{name}: inputs {xq.shape}/{xkv.shape} do not match projections "
            f"{Wq.shape}/{Wk.shape}"
        )
    n, m, dk = xq.shape[0], xkv.shape[0], d // n_heads
    if mask is not None and mask.shape != (n, m):
        raise ShapeError(f"{name}: mask {mask.shape} does not match ({n}, {m})")
    scale = 1.0 / np.sqrt(dk)

    def split(t):
        return t.reshape(t.shape[0], n_heads, dk).transpose(1, 0, 2)

    Q, K, V = split(xq @ Wq), split(xkv @ Wk), split(xkv @ Wv)
    S = (Q @ K.transpose(0, 2, 1)) * scale
    if mask is not None:
        S = S + mask
    A = softmax(S, axis=-1)
    if probe is not None:
        probe.append((name, A))
    O = (A @ V).transpose(1, 0, 2).reshape(n, d)
    y = O @ Wo

    def backward(dy, g):
        g[name + ".wo"] += O.T @ dy
        dO = split(dy @ Wo.T)
        dA = dO @ V.transpose(0, 2, 1)
        dV = A.transpose(0, 2, 1) @ dO
        dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True)) * scale
        dQ = (dS @ K).transpose(1, 0, 2).reshape(n, d)
        dK = (dS.transpose(0, 2, 1) @ Q).transpose(1, 0, 2).reshape(m, d)
        dV = dV.transpose(1, 0, 2).reshape(m, d)
        g[name + ".wq"] += xq.T @ dQ
        g[name + ".wk"] += xkv.T @ dK
        g[name + ".wv"] += xkv.T @ dV
        return dQ @ Wq.T, dK @ Wk.T + dV @ Wv.T

    return y, backward


def ffn(p, name, x):
    """``ReLU(x W1 + b1) W2 + b2``, row-wise."""
    h, back1 = linear(p, name + ".1", x)
    active = h > 0
    y, back2 = linear(p, name + ".2", h * active)

    def backward(dy, g):
        return back1(back2(dy, g) * active, g)

    return y, backward


def dropout(x, rate, rng):
    """Inverted dropout; identity when ``rng`` is None or ``rate`` is zero."""
    if rng is None or rate <= 0.0:
        return x, lambda dy: dy
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, lambda dy: dy * keep


def add_norm(p, ln_name, x, sub, sub_back, rate, rng, eps=1e-5):
    """Post-norm residual ``LN(x + dropout(sub))``.

    Returns ``(y, backward)`` where ``backward(dy, g)`` returns
    ``(d_x, d_sub)`` so the caller can push ``d_sub`` through ``sub_back``.
    """
    dropped, back_drop = dropout(sub, rate, rng)
    y, back_ln = layer_norm(p, ln_name, x + dropped, eps)

    def backward(dy, g):
        dz = back_ln(dy, g)
        return dz, sub_back(back_drop(dz), g)

    return y, backward


def init_attention(p, rng, name, d_model, d_kv=None):
    d_kv = d_model if d_kv is None else d_kv
    p[name + ".wq"] = rng.standard_normal((d_model, d_model)) / np.sqrt(d_model)
    p[name + ".wk"] = rng.standard_normal((d_kv, d_model)) / np.sqrt(d_kv)
    p[name + ".wv"] = rng.standard_normal((d_kv, d_model)) / np.sqrt(d_kv)
    p[name + ".wo"] = rng.standard_normal((d_model, d_model)) / np.sqrt(d_model)


def init_ffn(p, rng, name, d_model, d_ff):
    p[name + ".1.w"] = rng.standard_normal((d_model, d_ff)) * np.sqrt(2.0 / d_model)
    p[name + ".1.b"] = np.zeros(d_ff)
    p[name + ".2.w"] = rng.standard_normal((d_ff, d_model)) / np.sqrt(d_ff)
    p[name + ".2.b"] = np.zeros(d_model)


def init_layer_norm(p, name, d):
    p[name + ".g"] = np.ones(d)
    p[name + ".b"] = np.zeros(d)
