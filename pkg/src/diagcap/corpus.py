"""Caption corpus statistics: lengths, length groups, frequent words and captions."""

from __future__ import annotations

import bisect
import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .text import words


@dataclass(frozen=True)
class CaptionSample:
    id: str
    caption: str


@dataclass(frozen=True)
class LengthGroups:
    """Upper bounds (inclusive) of every group but the last, which is open-ended."""

    bounds: tuple[int, ...] = (20, 25, 30)
    labels: tuple[str, ...] = ("Short", "Medium", "Long", "VeryLong")

    def __post_init__(self):
        if len(self.labels) != len(self.bounds) + 1:
            raise ValueError("need exactly one more label than bounds")
        if any(b >= c for b, c in zip(self.bounds, self.bounds[1:])) or self.bounds[0] < 1:
            raise ValueError(f"bounds must be positive and strictly increasing: {self.bounds}")

    def classify(self, n: int) -> str:
        if n < 1:
            raise ValueError(f"caption length must be >= 1, got {n}")
        return self.labels[bisect.bisect_left(self.bounds, n)]


DEFAULT_GROUPS = LengthGroups()


def classify_length(n: int, groups: LengthGroups = DEFAULT_GROUPS) -> str:
    return groups.classify(n)


def caption_length(caption: str) -> int:
    return len(words(caption))


@dataclass
class LengthStats:
    min: int
    max: int
    mean: float
    histogram: dict[int, int] = field(default_factory=dict)


def _require(corpus):
    if not corpus:
        raise ValueError("corpus is empty")


def length_stats(corpus: list[CaptionSample]) -> LengthStats:
    _require(corpus)
    lengths = [caption_length(s.caption) for s in corpus]
    hist = Counter(lengths)
    return LengthStats(
        min=min(lengths),
        max=max(lengths),
        mean=sum(lengths) / len(lengths),
        histogram=dict(sorted(hist.items())),
    )


def group_counts(corpus, groups: LengthGroups = DEFAULT_GROUPS) -> dict[str, int]:
    counts = dict.fromkeys(groups.labels, 0)
    for s in corpus:
        counts[groups.classify(max(caption_length(s.caption), 1))] += 1
    return counts


def load_stopwords(path=None) -> frozenset[str]:
    if path is None:
        text = resources.files("diagcap.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(
        line.strip().lower() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def top_words(corpus, stopwords=frozenset(), k: int = 10) -> list[tuple[str, int]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(w for s in corpus for w in words(s.caption) if w not in stopwords)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def top_captions(corpus, k: int = 5) -> list[tuple[str, int]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = Counter(s.caption.strip() for s in corpus)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def uniqueness(corpus) -> tuple[int, int, float]:
    """``(distinct captions, total, percent distinct)``."""
    _require(corpus)
    unique = len({s.caption.strip() for s in corpus})
    return unique, len(corpus), 100.0 * unique / len(corpus)


def load_corpus(path) -> list[CaptionSample]:
    """Read ``{"id", "caption"}`` JSONL, or a CSV with ``ID,caption`` columns."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [(r["ID"], r["caption"]) for r in csv.DictReader(fh)]
    else:
        rows = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    rows.append((str(rec["id"]), rec["caption"]))
    seen: set[str] = set()
    out = []
    for id_, cap in rows:
        if id_ in seen:
            raise ValueError(f"{path}: duplicate id {id_!r}")
        seen.add(id_)
        out.append(CaptionSample(id_, cap))
    return out


def corpus_report(corpus, stopwords, k: int = 10, groups: LengthGroups = DEFAULT_GROUPS) -> dict:
    ls = length_stats(corpus)
    unique, total, pct = uniqueness(corpus)
    return {
        "n_captions": total,
        "length": {"min": ls.min, "max": ls.max, "mean": ls.mean},
        "length_groups": group_counts(corpus, groups),
        "uniqueness": {"unique": unique, "total": total, "percent": pct},
        "top_words": [[w, n] for w, n in top_words(corpus, stopwords, k)],
        "top_captions": [[c, n] for c, n in top_captions(corpus, k)],
    }


def write_histogram_csv(path, stats: LengthStats) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["length", "count"])
        for length, count in stats.histogram.items():
            w.writerow([length, count])
