"""Shared tokenizer used by every lexical component.

All baselines, retrieval scorers, and language analyses tokenize the same
way so their scores stay comparable: lowercase, split on any run of
non-alphanumeric characters, drop empties.
"""

from __future__ import annotations

import re

_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _SPLIT.split(text.lower()) if t]


def bigrams(text: str) -> list[str]:
    """Adjacent-token bigrams within one utterance, joined with '_'.

    Bigrams never cross utterance boundaries; call per utterance.
    """
    toks = tokenize(text)
    return [f"{a}_{b}" for a, b in zip(toks, toks[1:])]
