from __future__ import annotations

import numpy as np

from .vocab import Vocabulary

_BANNED = [Vocabulary.pad_id, Vocabulary.bos_id]


def greedy_decode(model, memory, max_len=None) -> list[int]:
    """Argmax decoding from BOS until EOS or ``max_len`` generated ids.

    The returned list starts with BOS, so its length is at most
    ``max_len + 1``.  Ties go to the lowest id; PAD and BOS are never emitted.
    """
    cfg = model.decoder_cfg
    max_len = cfg.max_len if max_len is None else min(max_len, cfg.max_len)
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids = [Vocabulary.bos_id]
    while len(ids) <= max_len:
        row = model.decode_logits(memory, ids)[-1].copy()
        row[_BANNED] = -np.inf
        nxt = int(np.argmax(row))
        ids.append(nxt)
        if nxt == Vocabulary.eos_id:
            break
    return ids
