"""Downstream analyses: log-odds lexical contrasts, boundary-placement
agreement, and talk-time distributions."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from scipy.stats import chi2

from .corpus import Corpus
from .model import Labeling, labeling_to_spans
from .tokens import bigrams


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class BigramCounts:
    label: str
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @staticmethod
    def from_utterances(label: str, utterances: list[str]) -> "BigramCounts":
        counts: Counter[str] = Counter()
        for utt in utterances:
            counts.update(bigrams(utt))
        return BigramCounts(label=label, counts=counts)

    def __add__(self, other: "BigramCounts") -> "BigramCounts":
        return BigramCounts(f"{self.label}+{other.label}", self.counts + other.counts)


def log_odds(
    counts_a: BigramCounts,
    counts_b: BigramCounts,
    prior: BigramCounts,
    alpha0: float,
) -> list[tuple[str, float]]:
    """Z-scored log-odds-ratio with an informative Dirichlet prior.

    Prior counts are rescaled so they sum to alpha0. Returns every bigram
    in the union vocabulary ranked descending by z (positive z favors
    corpus a).
    """
    if counts_a.total == 0 or counts_b.total == 0:
        raise AnalysisError("both corpora must be non-empty")
    if alpha0 <= 0:
        raise AnalysisError("alpha0 must be positive")
    n_prior = prior.total
    if n_prior == 0:
        raise AnalysisError("prior corpus must be non-empty")
    vocab = set(counts_a.counts) | set(counts_b.counts)
    uncovered = vocab - set(prior.counts)
    if uncovered:
        raise AnalysisError(f"prior does not cover {len(uncovered)} bigrams, e.g. {next(iter(uncovered))!r}")
    n_a, n_b = counts_a.total, counts_b.total
    scale = alpha0 / n_prior
    results: list[tuple[str, float]] = []
    for w in vocab:
        alpha = prior.counts[w] * scale
        y_a = counts_a.counts.get(w, 0)
        y_b = counts_b.counts.get(w, 0)
        delta = math.log((y_a + alpha) / (n_a + alpha0 - y_a - alpha)) - math.log(
            (y_b + alpha) / (n_b + alpha0 - y_b - alpha)
        )
        variance = 1.0 / (y_a + alpha) + 1.0 / (y_b + alpha)
        results.append((w, delta / math.sqrt(variance)))
    results.sort(key=lambda kv: (-kv[1], kv[0]))
    return results


def cochran_q(boundary_matrix: list[list[bool]]) -> tuple[float, float]:
    """Cochran's Q over an annotators x positions binary matrix.

    Returns (Q, p) with p from chi-square on m-1 degrees of freedom. A
    degenerate matrix (zero denominator, i.e. complete agreement at every
    position) reports Q = 0, p = 1.
    """
    m = len(boundary_matrix)
    if m < 2:
        raise AnalysisError("need at least 2 annotators")
    n_pos = len(boundary_matrix[0])
    if n_pos < 2 or any(len(row) != n_pos for row in boundary_matrix):
        raise AnalysisError("need >= 2 positions and equal-length rows")
    # annotators are the treatments (df = m-1), positions the blocks;
    # with m = 2 this reduces to McNemar's (b-c)^2 / (b+c)
    annotator_totals = [sum(int(v) for v in row) for row in boundary_matrix]
    position_totals = [sum(int(row[j]) for row in boundary_matrix) for j in range(n_pos)]
    total = sum(annotator_totals)
    denom = m * total - sum(p * p for p in position_totals)
    if denom == 0:
        return 0.0, 1.0
    q = (m - 1) * (m * sum(a * a for a in annotator_totals) - total * total) / denom
    p = float(chi2.sf(q, m - 1))
    return q, p


def boundary_vector(labeling: Labeling) -> list[bool]:
    """Per-position boundary indicator (positions 1..N-1) for agreement tests."""
    from .model import boundaries

    b = boundaries(labeling)
    return [i in b for i in range(1, len(labeling))]


@dataclass(frozen=True)
class TalkTimeTable:
    """Seconds of talk per (problem, transcript) plus per-problem summaries."""

    per_cell: dict[tuple[str, str], float]  # (problem_id, transcript_id) -> seconds
    summary: dict[str, dict[str, float]]  # problem_id -> {mean, q1, median, q3}


def _quartiles(values: list[float]) -> tuple[float, float, float]:
    ordered = sorted(values)

    def at(p: float) -> float:
        # linear interpolation between closest ranks
        idx = p * (len(ordered) - 1)
        lo = int(idx)
        hi = min(lo + 1, len(ordered) - 1)
        frac = idx - lo
        return ordered[lo] * (1 - frac) + ordered[hi] * frac

    return at(0.25), at(0.5), at(0.75)


def talk_time(corpus: Corpus) -> TalkTimeTable:
    """Sum line durations per (worksheet problem, transcript).

    Problems never discussed are absent from the table.
    """
    per_cell: dict[tuple[str, str], float] = {}
    for entry in corpus.annotated().entries:
        for i, (_seg, ref) in enumerate(entry.gold.per_line):  # type: ignore[union-attr]
            if ref.kind != "problem":
                continue
            key = (ref.problem_id, entry.transcript.id)  # type: ignore[arg-type]
            per_cell[key] = per_cell.get(key, 0.0) + entry.transcript.lines[i].duration_ms / 1000
    by_problem: dict[str, list[float]] = {}
    for (pid, _tid), secs in per_cell.items():
        by_problem.setdefault(pid, []).append(secs)
    summary = {}
    for pid, values in by_problem.items():
        q1, median, q3 = _quartiles(values)
        summary[pid] = {
            "mean": sum(values) / len(values),
            "q1": q1,
            "median": median,
            "q3": q3,
        }
    return TalkTimeTable(per_cell=per_cell, summary=summary)


def quartile_language_compare(
    corpus: Corpus, problem_id: str, alpha0_scale: float = 0.01
) -> list[tuple[str, float]]:
    """Log-odds of long-duration vs short-duration segments of one problem.

    Segments labeled with the problem are split at the duration quartiles
    (top quartile vs bottom quartile); the prior is the bigram language of
    the whole corpus; alpha0 is the prior total scaled by alpha0_scale.
    Positive z marks bigrams distinctive of long segments.
    """
    segments: list[tuple[float, list[str]]] = []  # (duration_s, utterances)
    all_utterances: list[str] = []
    for entry in corpus.annotated().entries:
        all_utterances.extend(l.utterance for l in entry.transcript.lines)
        for span in labeling_to_spans(entry.gold):  # type: ignore[arg-type]
            if span.ref is None or span.ref.kind != "problem" or span.ref.problem_id != problem_id:
                continue
            lines = entry.transcript.lines[span.start_line : span.end_line + 1]
            duration = sum(l.duration_ms for l in lines) / 1000
            segments.append((duration, [l.utterance for l in lines]))
    if len(segments) < 4:
        raise AnalysisError(
            f"problem {problem_id}: {len(segments)} segments, need at least 4"
        )
    durations = [d for d, _ in segments]
    q1, _, q3 = _quartiles(durations)
    long_utts = [u for d, utts in segments if d >= q3 for u in utts]
    short_utts = [u for d, utts in segments if d <= q1 for u in utts]
    counts_long = BigramCounts.from_utterances("long", long_utts)
    counts_short = BigramCounts.from_utterances("short", short_utts)
    prior = BigramCounts.from_utterances("corpus", all_utterances)
    return log_odds(counts_long, counts_short, prior, alpha0=alpha0_scale * prior.total)
