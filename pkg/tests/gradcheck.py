"""Central finite differences against the hand-written backward pass."""

import numpy as np

from diagcap.seq2seq import batch_loss


def max_relative_error(model, batch, eps=1e-5, floor=1e-8):
    """Return ``{param name: max relative error over its entries}``."""
    params = model.params
    _, grads = batch_loss(model, params, batch)
    worst = {}
    for name, value in params.items():
        err = 0.0
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            up = batch_loss(model, params, batch, need_grad=False)[0]
            value[idx] = orig - eps
            down = batch_loss(model, params, batch, need_grad=False)[0]
            value[idx] = orig
            fd = (up - down) / (2 * eps)
            err = max(err, abs(grads[name][idx] - fd) / max(abs(fd), floor))
        worst[name] = err
    return worst
