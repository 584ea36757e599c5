"""Core data model: transcripts, worksheets, per-line labelings, and spans.

Everything here is immutable after construction so evaluation workers can
share instances freely.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)


class ModelError(ValueError):
    """Raised when a domain object violates its invariants."""


@dataclass(frozen=True, slots=True)
class Line:
    index: int  # 0-based position in the transcript
    speaker: str  # e.g. "[TUTOR]", "[STUDENT]"
    utterance: str
    start_ms: int
    end_ms: int

    def __post_init__(self) -> None:
        if self.end_ms < self.start_ms:
            raise ModelError(
                f"line {self.index}: end_ms {self.end_ms} < start_ms {self.start_ms}"
            )

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True, slots=True)
class Transcript:
    id: str
    lines: tuple[Line, ...]

    def __post_init__(self) -> None:
        for pos, line in enumerate(self.lines):
            if line.index != pos:
                raise ModelError(
                    f"transcript {self.id}: line at position {pos} has index {line.index}"
                )
        for prev, cur in zip(self.lines, self.lines[1:]):
            if cur.start_ms < prev.start_ms:
                raise ModelError(
                    f"transcript {self.id}: start_ms decreases at line {cur.index}"
                )

    def __len__(self) -> int:
        return len(self.lines)

    @property
    def duration_ms(self) -> int:
        if not self.lines:
            return 0
        return self.lines[-1].end_ms - self.lines[0].start_ms


@dataclass(frozen=True, slots=True)
class Problem:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ModelError(f"problem {self.id}: empty text")


@dataclass(frozen=True, slots=True)
class Worksheet:
    id: str
    problems: tuple[Problem, ...]

    def __post_init__(self) -> None:
        if not self.problems:
            raise ModelError(f"worksheet {self.id}: no problems")
        seen: set[str] = set()
        for p in self.problems:
            if p.id in seen:
                raise ModelError(f"worksheet {self.id}: duplicate problem id {p.id}")
            seen.add(p.id)

    def problem_ids(self) -> list[str]:
        return [p.id for p in self.problems]

    def get(self, problem_id: str) -> Problem:
        for p in self.problems:
            if p.id == problem_id:
                return p
        raise KeyError(problem_id)


@dataclass(frozen=True, slots=True)
class RefLabel:
    """What a segment is about: a worksheet problem, an off-worksheet
    problem ("-1" in serialized form), or nothing ("null": informal talk
    or a warm-up outside the worksheet)."""

    kind: str  # "problem" | "not_in_corpus" | "none"
    problem_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("problem", "not_in_corpus", "none"):
            raise ModelError(f"bad RefLabel kind {self.kind!r}")
        if (self.kind == "problem") != (self.problem_id is not None):
            raise ModelError("problem_id must be set exactly for kind='problem'")

    @staticmethod
    def problem(problem_id: str) -> "RefLabel":
        return RefLabel("problem", str(problem_id))

    def serialize(self) -> str:
        if self.kind == "problem":
            return self.problem_id  # type: ignore[return-value]
        return "-1" if self.kind == "not_in_corpus" else "null"

    @staticmethod
    def deserialize(raw: str) -> "RefLabel":
        if raw == "null":
            return REF_NONE
        if raw == "-1":
            return REF_NOT_IN_CORPUS
        return RefLabel.problem(raw)


REF_NONE = RefLabel("none")
REF_NOT_IN_CORPUS = RefLabel("not_in_corpus")


@dataclass(frozen=True, slots=True)
class Labeling:
    """Per-line (segment id, ref) assignment over a whole transcript.

    Segment ids are arbitrary integers; only the run structure matters.
    Lines sharing a segment id must share a ref, and a segment id may not
    recur after a different id intervenes.
    """

    per_line: tuple[tuple[int, RefLabel], ...]

    def __post_init__(self) -> None:
        seen_done: set[int] = set()
        prev_seg: int | None = None
        seg_ref: dict[int, RefLabel] = {}
        for i, (seg, ref) in enumerate(self.per_line):
            if seg != prev_seg:
                if seg in seen_done:
                    raise ModelError(f"segment id {seg} recurs non-contiguously at line {i}")
                if prev_seg is not None:
                    seen_done.add(prev_seg)
                prev_seg = seg
            if seg in seg_ref:
                if seg_ref[seg] != ref:
                    raise ModelError(f"segment {seg} has conflicting refs at line {i}")
            else:
                seg_ref[seg] = ref

    def __len__(self) -> int:
        return len(self.per_line)

    @property
    def segment_ids(self) -> list[int]:
        return [seg for seg, _ in self.per_line]

    @property
    def refs(self) -> list[RefLabel]:
        return [ref for _, ref in self.per_line]

    def num_segments(self) -> int:
        if not self.per_line:
            return 0
        return len(boundaries(self)) + 1


class GapPolicy(enum.Enum):
    """How lines not covered by any span are labeled."""

    OWN_SEGMENT = "own_segment"  # each maximal gap becomes its own segment, ref none
    EXTEND_PREVIOUS = "extend_previous"  # gap joins the preceding segment (or own if first)


@dataclass(frozen=True, slots=True)
class SegmentSpan:
    """Inclusive line range, optionally carrying a ref.

    The span form of segmenter and LLM outputs before normalization to a
    per-line Labeling.
    """

    start_line: int
    end_line: int
    ref: RefLabel | None = None

    def __post_init__(self) -> None:
        if self.start_line > self.end_line:
            raise ModelError(f"span start {self.start_line} > end {self.end_line}")


def spans_to_labeling(
    spans: list[SegmentSpan],
    n_lines: int,
    gap_policy: GapPolicy = GapPolicy.OWN_SEGMENT,
) -> Labeling:
    """Normalize possibly gappy/overlapping spans into a total Labeling.

    Spans are sorted by start; overlaps resolve first-span-wins; spans
    reaching outside [0, n_lines) are clamped with a logged warning. Each
    uncovered maximal gap is labeled per gap_policy. An empty span list
    yields a single all-covering segment with no ref.
    """
    if n_lines <= 0:
        return Labeling(())
    owner: list[int | None] = [None] * n_lines
    refs: list[RefLabel | None] = []
    clean: list[SegmentSpan] = []
    for span in spans:
        if span.end_line < 0 or span.start_line >= n_lines:
            logger.warning("span (%d, %d) outside [0, %d); dropped",
                           span.start_line, span.end_line, n_lines)
            continue
        start = max(span.start_line, 0)
        end = min(span.end_line, n_lines - 1)
        if (start, end) != (span.start_line, span.end_line):
            logger.warning("span (%d, %d) clamped to (%d, %d)",
                           span.start_line, span.end_line, start, end)
        clean.append(SegmentSpan(start, end, span.ref))
    clean.sort(key=lambda s: (s.start_line, s.end_line))
    for idx, span in enumerate(clean):
        refs.append(span.ref if span.ref is not None else REF_NONE)
        for i in range(span.start_line, span.end_line + 1):
            if owner[i] is None:
                owner[i] = idx

    per_line: list[tuple[int, RefLabel]] = []
    next_seg = 0
    prev_key: object = object()  # sentinel unequal to anything
    for i in range(n_lines):
        if owner[i] is None:
            if gap_policy is GapPolicy.EXTEND_PREVIOUS and per_line:
                per_line.append(per_line[-1])
                continue
            key: object = ("gap", _gap_start(owner, i))
            ref = REF_NONE
        else:
            key = ("span", owner[i])
            ref = refs[owner[i]]  # type: ignore[index]
        if key != prev_key:
            seg = next_seg
            next_seg += 1
            prev_key = key
        else:
            seg = per_line[-1][0]
        per_line.append((seg, ref))
    return Labeling(tuple(per_line))


def _gap_start(owner: list[int | None], i: int) -> int:
    while i > 0 and owner[i - 1] is None:
        i -= 1
    return i


def labeling_to_spans(labeling: Labeling) -> list[SegmentSpan]:
    """Maximal runs of equal segment id, in transcript order."""
    spans: list[SegmentSpan] = []
    start = 0
    pl = labeling.per_line
    for i in range(1, len(pl) + 1):
        if i == len(pl) or pl[i][0] != pl[start][0]:
            spans.append(SegmentSpan(start, i - 1, pl[start][1]))
            start = i
    return spans


def boundaries(labeling: Labeling) -> set[int]:
    """Positions i (1 <= i <= N-1) with a segment change between lines i-1 and i."""
    segs = labeling.segment_ids
    return {i for i in range(1, len(segs)) if segs[i] != segs[i - 1]}
