"""Tokenisation shared by the metrics, corpus statistics and vocabulary."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, split punctuation into its own tokens, split on whitespace.

    >>> tokenize("CT scan, showing a mass.")
    ['ct', 'scan', ',', 'showing', 'a', 'mass', '.']
    """
    return _TOKEN_RE.findall(text.lower())


def is_word(token: str) -> bool:
    return any(ch.isalnum() for ch in token)


def words(text: str) -> list[str]:
    """Tokens that carry at least one letter or digit (punctuation dropped)."""
    return [t for t in tokenize(text) if is_word(t)]
