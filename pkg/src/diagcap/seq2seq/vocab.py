from __future__ import annotations

from collections import Counter
from collections.abc import Iterable

from ..text import tokenize

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)


class Vocabulary:
    """Token/id mapping with reserved ids 0-3 for PAD, BOS, EOS and UNK."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for t in tokens:
            if t not in self.stoi:
                self.stoi[t] = len(self.itos)
                self.itos.append(t)

    pad_id, bos_id, eos_id, unk_id = 0, 1, 2, 3

    @classmethod
    def build(cls, captions: Iterable[str], min_count: int = 1) -> "Vocabulary":
        counts = Counter(t for c in captions for t in tokenize(c))
        kept = sorted(t for t, n in counts.items() if n >= min_count and t not in RESERVED)
        return cls(kept)

    @classmethod
    def from_list(cls, itos: list[str]) -> "Vocabulary":
        if tuple(itos[: len(RESERVED)]) != RESERVED:
            raise ValueError("vocabulary list must start with the reserved tokens")
        return cls(itos[len(RESERVED) :])

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, text: str, add_special: bool = True) -> list[int]:
        ids = [self.stoi.get(t, self.unk_id) for t in tokenize(text)]
        return [self.bos_id, *ids, self.eos_id] if add_special else ids

    def decode(self, ids: Iterable[int]) -> str:
        out = []
        for i in ids:
            if i == self.eos_id:
                break
            if i in (self.pad_id, self.bos_id):
                continue
            out.append(self.itos[i])
        return " ".join(out)
