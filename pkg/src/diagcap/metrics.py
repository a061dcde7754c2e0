"""Caption metrics: BERTScore (greedy cosine matching), BLEU-1, ROUGE-1 F1, CIDEr.

All metrics share :func:`diagcap.text.tokenize`.  BERTScore takes any
object with an ``embed(tokens) -> (n, dim) array`` method; the bundled
:class:`HashingEmbedder` is a deterministic stand-in for a contextual
encoder.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Protocol

import numpy as np

from .corpus import DEFAULT_GROUPS, LengthGroups, caption_length
from .tensor import cosine_similarity
from .text import tokenize

METRICS = ("bertscore", "rouge1", "bleu1", "cider")
# Competition metrics that need pretrained models or external resources.
UNSUPPORTED_METRICS = (
    "bleurt",
    "meteor",
    "clipscore",
    "refclipscore",
    "clinicalbleurt",
    "medbertscore",
)


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, tokens: list[str]) -> np.ndarray: ...


class HashingEmbedder:
    """Character-trigram hashing embeddings with a +/-1 token context window.

    Each token is hashed (BLAKE2b, so results do not depend on the Python
    hash seed) into a signed bag of boundary-marked character trigrams.
    Neighbouring tokens are mixed in with weight ``context`` before the
    final L2 normalisation.
    """

    def __init__(self, dim: int = 256, context: float = 0.25):
        self.dim = dim
        self.context = context
        self._cache: dict[str, np.ndarray] = {}

    def _token(self, tok: str) -> np.ndarray:
        vec = self._cache.get(tok)
        if vec is None:
            vec = np.zeros(self.dim)
            marked = f"#{tok}#"
            for i in range(len(marked) - 2):
                h = hashlib.blake2b(marked[i : i + 3].encode("utf-8"), digest_size=8).digest()
                idx = int.from_bytes(h[:4], "little") % self.dim
                vec[idx] += 1.0 if h[4] & 1 else -1.0
            vec /= np.linalg.norm(vec) or 1.0
            self._cache[tok] = vec
        return vec

    def embed(self, tokens: list[str]) -> np.ndarray:
        base = np.array([self._token(t) for t in tokens]).reshape(len(tokens), self.dim)
        ctx = base.copy()
        ctx[1:] += self.context * base[:-1]
        ctx[:-1] += self.context * base[1:]
        norms = np.linalg.norm(ctx, axis=1, keepdims=True)
        return ctx / np.where(norms == 0.0, 1.0, norms)


class BertScore(NamedTuple):
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def greedy_match(cand_vecs: np.ndarray, ref_vecs: np.ndarray) -> tuple[float, float]:
    """(precision, recall) from best-cosine matching in each direction."""
    sims = np.array(
        [[cosine_similarity(r, c) for c in cand_vecs] for r in ref_vecs]
    ).reshape(len(ref_vecs), len(cand_vecs))
    recall = float(np.mean(sims.max(axis=1)))
    precision = float(np.mean(sims.max(axis=0)))
    return precision, recall


def bertscore(candidate: str, reference: str, provider: EmbeddingProvider | None = None) -> BertScore:
    provider = provider or DEFAULT_EMBEDDER
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return BertScore(0.0, 0.0, 0.0, True)
    p, r = greedy_match(provider.embed(cand), provider.embed(ref))
    f = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
    return BertScore(p, r, f)


def bleu1(candidate: str, reference: str) -> float:
    """Clipped unigram precision times the brevity penalty (single reference)."""
    cand, ref = tokenize(candidate), tokenize(reference)
    if not ref:
        raise ValueError("reference must contain at least one token")
    if not cand:
        return 0.0
    ref_counts = Counter(ref)
    clipped = sum(min(n, ref_counts[t]) for t, n in Counter(cand).items())
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return bp * clipped / len(cand)


def rouge1_f(candidate: str, reference: str) -> float:
    cand, ref = Counter(tokenize(candidate)), Counter(tokenize(reference))
    overlap = sum((cand & ref).values())
    if overlap == 0:
        return 0.0
    p = overlap / sum(cand.values())
    r = overlap / sum(ref.values())
    return 2.0 * p * r / (p + r)


def ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _tfidf(counts: Counter, idf: dict, n_docs: float) -> dict:
    return {g: c * idf.get(g, math.log(n_docs)) for g, c in counts.items()}


def _cos(a: dict, b: dict) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return sum(v * b.get(g, 0.0) for g, v in a.items()) / (na * nb)


def cider(candidates: list[str], references: list, n_max: int = 4) -> list[float]:
    """Per-sample CIDEr: 10 x mean over n of the TF-IDF n-gram cosine.

    ``references[i]`` is a string or a list of strings.  Document frequency
    counts, for each n-gram, the samples whose reference set contains it;
    IDF is ``log(N / df)`` with ``N`` the number of samples.
    """
    if len(candidates) != len(references) or not candidates:
        raise ValueError(
            f"need equal, non-empty lists (got {len(candidates)} candidates, "
            f"{len(references)} references)"
        )
    refs = [[r] if isinstance(r, str) else list(r) for r in references]
    n_docs = float(len(refs))
    ref_tok = [[tokenize(r) for r in rs] for rs in refs]
    cand_tok = [tokenize(c) for c in candidates]
    scores = np.zeros(len(candidates))
    for n in range(1, n_max + 1):
        df: Counter = Counter()
        for rs in ref_tok:
            df.update({g for toks in rs for g in ngrams(toks, n)})
        idf = {g: math.log(n_docs / d) for g, d in df.items()}
        for i, (ct, rs) in enumerate(zip(cand_tok, ref_tok)):
            cv = _tfidf(ngrams(ct, n), idf, n_docs)
            scores[i] += np.mean([_cos(cv, _tfidf(ngrams(rt, n), idf, n_docs)) for rt in rs])
    return list(10.0 * scores / n_max)


DEFAULT_EMBEDDER = HashingEmbedder()


@dataclass
class ScoreReport:
    per_sample: list[dict]
    means: dict[str, float]
    groups: dict[str, dict] | None = None
    unsupported: tuple[str, ...] = UNSUPPORTED_METRICS
    n_samples: int = field(init=False)

    def __post_init__(self):
        self.n_samples = len(self.per_sample)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "means": self.means,
            "groups": self.groups,
            "unsupported": {m: None for m in self.unsupported},
            "per_sample": self.per_sample,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n", encoding="utf-8")

    def write_csv(self, path) -> None:
        cols = ["id", "length", "group", *METRICS]
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            w.writerows(self.per_sample)


def read_captions_csv(path) -> dict[str, str]:
    """Read an ``ID,caption`` CSV into an ordered dict, rejecting duplicate ids."""
    out: dict[str, str] = {}
    dupes = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"ID", "caption"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header ID,caption, got {reader.fieldnames}")
        for row in reader:
            if row["ID"] in out:
                dupes.append(row["ID"])
            out[row["ID"]] = row["caption"] or ""
    if dupes:
        raise ValueError(f"{path}: duplicate ids {sorted(set(dupes))}")
    return out


def _mean(values) -> float | None:
    values = list(values)
    return sum(values) / len(values) if values else None


def score_pairs(
    ids: list[str],
    candidates: list[str],
    references: list[str],
    provider: EmbeddingProvider | None = None,
    groups: LengthGroups | None = DEFAULT_GROUPS,
) -> ScoreReport:
    cider_scores = cider(candidates, references) if ids else []
    rows = []
    for i, (id_, cand, ref) in enumerate(zip(ids, candidates, references)):
        n = caption_length(ref)
        rows.append(
            {
                "id": id_,
                "length": n,
                "group": (groups or DEFAULT_GROUPS).classify(max(n, 1)),
                "bertscore": bertscore(cand, ref, provider).f1,
                "rouge1": rouge1_f(cand, ref),
                "bleu1": bleu1(cand, ref) if tokenize(ref) else 0.0,
                "cider": cider_scores[i],
            }
        )
    means = {m: _mean(r[m] for r in rows) for m in METRICS}
    by_group = None
    if groups is not None:
        by_group = {}
        for label in groups.labels:
            members = [r for r in rows if r["group"] == label]
            by_group[label] = {
                "count": len(members),
                "means": {m: _mean(r[m] for r in members) for m in METRICS},
            }
    return ScoreReport(rows, means, by_group)


def evaluate_files(pred_path, gold_path, provider=None, groups: LengthGroups | None = DEFAULT_GROUPS):
    """Score a prediction CSV against a gold CSV (both ``ID,caption``)."""
    pred = read_captions_csv(pred_path)
    gold = read_captions_csv(gold_path)
    missing = [i for i in pred if i not in gold]
    if missing:
        raise ValueError(f"prediction ids missing from gold: {missing}")
    ids = list(pred)
    return score_pairs(ids, [pred[i] for i in ids], [gold[i] for i in ids], provider, groups)
