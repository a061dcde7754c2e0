"""Dense float64 kernels shared by the model code.

Matrices and vectors are plain ``numpy`` arrays of dtype float64; the
helpers here add the shape checks and numerical conventions the rest of
the package relies on.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax(v, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``.

    Entries equal to ``-inf`` (masked positions) receive exactly zero
    weight, provided at least one entry along the axis is finite.
    """
    x = np.asarray(v, dtype=np.float64)
    if x.size == 0 or x.shape[axis] == 0:
        raise ShapeError("softmax of an empty vector is undefined")
    e = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Normalise over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    x = np.asarray(x, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ShapeError("layer_norm needs a non-empty last axis")
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(
            f"gamma {gamma.shape} / beta {beta.shape} do not match input width {x.shape[-1]}"
        )
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return gamma * (x - mu) / np.sqrt(var + eps) + beta


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between ``u`` and ``v``; 0.0 if either has zero norm.

    Written as ``u.v / sqrt(|u|^2 |v|^2)`` so that ``cos(u, u)`` is exactly
    1.0 and ``cos(u, v) == cos(v, u)`` bit for bit.
    """
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise ShapeError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not u.any() or not v.any():
        return 0.0
    nu = float(np.dot(u, u))
    nv = float(np.dot(v, v))
    prod = nu * nv
    if not (np.finfo(np.float64).tiny <= prod < np.inf):
        # norms under/overflow: rescale both and retry
        return cosine_similarity(u / np.max(np.abs(u)), v / np.max(np.abs(v)))
    c = float(np.dot(u, v)) / np.sqrt(prod)
    return min(1.0, max(-1.0, c))


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    """Fixed sine/cosine position table of shape ``(n, d)``."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
