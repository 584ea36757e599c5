"""Independent segmentation baselines: top-k boundary words and TextTiling.

Both produce a Labeling over the full transcript with every ref unset
(retrieval is a separate stage).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import Corpus
from .model import REF_NONE, Labeling, RefLabel, Transcript, labeling_to_spans
from .tokens import tokenize


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryWordModel:
    """Top-k tokens of segment-opening lines in an annotated train set."""

    words: tuple[str, ...]
    k: int


def fit_boundary_words(train: Corpus, k: int) -> BoundaryWordModel:
    """Collect tokens from the first line of every ground-truth segment,
    rank by frequency over those boundary lines (ties lexicographic),
    keep the top k."""
    if k < 1:
        raise SegmentationError("k must be >= 1")
    annotated = train.annotated()
    if not annotated.entries:
        raise SegmentationError("train corpus has no annotations")
    counts: Counter[str] = Counter()
    for entry in annotated.entries:
        for span in labeling_to_spans(entry.gold):  # type: ignore[arg-type]
            counts.update(tokenize(entry.transcript.lines[span.start_line].utterance))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return BoundaryWordModel(words=tuple(w for w, _ in ranked[:k]), k=k)


def segment_boundary_words(model: BoundaryWordModel, transcript: Transcript) -> Labeling:
    """Start a new segment at every line containing any model word.

    Line 0 always opens segment 0.
    """
    vocab = set(model.words)
    per_line: list[tuple[int, RefLabel]] = []
    seg = -1
    for line in transcript.lines:
        if seg < 0 or vocab & set(tokenize(line.utterance)):
            seg += 1
        per_line.append((seg, REF_NONE))
    return Labeling(tuple(per_line))


@dataclass(frozen=True)
class TextTilingParams:
    pseudo_sentence_size: int = 20  # tokens per pseudo-sentence
    block_size: int = 10  # pseudo-sentences per comparison block
    smoothing_width: int = 2

    def __post_init__(self) -> None:
        if min(self.pseudo_sentence_size, self.block_size, self.smoothing_width) < 1:
            raise SegmentationError("TextTiling parameters must be positive")


def segment_texttiling(params: TextTilingParams, transcript: Transcript) -> Labeling:
    """Depth-score lexical-cohesion segmentation.

    Token stream -> fixed-size pseudo-sentences -> adjacent-block cosine
    similarity over term counts -> mean-smoothed gap scores -> depth score
    per gap -> boundaries where depth exceeds mean - stddev/2, mapped back
    to the line holding the last token before the gap. Degenerate inputs
    (shorter than two blocks) collapse to a single segment.
    """
    n = len(transcript)
    if n == 0:
        return Labeling(())
    # token -> owning line, over the whole utterance stream
    stream: list[str] = []
    token_line: list[int] = []
    for line in transcript.lines:
        for tok in tokenize(line.utterance):
            stream.append(tok)
            token_line.append(line.index)

    w = params.pseudo_sentence_size
    single = Labeling(tuple((0, REF_NONE) for _ in range(n)))
    if len(stream) < 2 * params.block_size * w:
        return single

    n_ps = len(stream) // w  # trailing partial pseudo-sentence dropped
    pseudo = [Counter(stream[i * w : (i + 1) * w]) for i in range(n_ps)]
    if n_ps < 2:
        return single

    gap_scores: list[float] = []
    for gap in range(1, n_ps):
        lo = max(0, gap - params.block_size)
        hi = min(n_ps, gap + params.block_size)
        left: Counter[str] = Counter()
        right: Counter[str] = Counter()
        for c in pseudo[lo:gap]:
            left.update(c)
        for c in pseudo[gap:hi]:
            right.update(c)
        gap_scores.append(_cosine(left, right))

    smoothed = _smooth(gap_scores, params.smoothing_width)
    depths = [_depth(smoothed, i) for i in range(len(smoothed))]
    mean = sum(depths) / len(depths)
    std = math.sqrt(sum((d - mean) ** 2 for d in depths) / len(depths))
    cutoff = mean - std / 2

    boundary_lines: set[int] = set()
    for i, depth in enumerate(depths):
        if depth > cutoff and depth > 0:
            gap = i + 1  # gap between pseudo-sentences gap-1 and gap
            last_tok = gap * w - 1
            line = token_line[last_tok]
            if line + 1 < n:
                boundary_lines.add(line + 1)

    per_line: list[tuple[int, RefLabel]] = []
    seg = 0
    for i in range(n):
        if i in boundary_lines and i > 0:
            seg += 1
        per_line.append((seg, REF_NONE))
    return Labeling(tuple(per_line))


def _cosine(a: Counter[str], b: Counter[str]) -> float:
    dot = sum(cnt * b[tok] for tok, cnt in a.items())
    na = math.sqrt(sum(c * c for c in a.values()))
    nb = math.sqrt(sum(c * c for c in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


def _smooth(values: list[float], width: int) -> list[float]:
    out = []
    for i in range(len(values)):
        lo = max(0, i - width)
        hi = min(len(values), i + width + 1)
        out.append(sum(values[lo:hi]) / (hi - lo))
    return out


def _depth(scores: list[float], i: int) -> float:
    """Rise to the nearest peak on each side of valley i."""
    left = scores[i]
    for j in range(i, -1, -1):
        if scores[j] >= left:
            left = scores[j]
        else:
            break
    right = scores[i]
    for j in range(i, len(scores)):
        if scores[j] >= right:
            right = scores[j]
        else:
            break
    return (left - scores[i]) + (right - scores[i])
