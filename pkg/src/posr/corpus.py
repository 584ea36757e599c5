"""Corpus loading, writing, synthetic generation, and summary statistics.

On-disk formats (all UTF-8):

* transcript: JSONL, one record per line with fields
  ``{index, speaker, utterance, start_ms, end_ms}``
* worksheet: one JSON document ``{id, problems: [{id, text}]}``
* annotation: JSONL ``{line_index, segment_id, ref}`` with ref one of a
  problem id string, ``"-1"``, or ``"null"``
* manifest: one JSON document listing the files of one split (see
  ``CorpusManifest``); paths are relative to the manifest's directory.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .model import (
    Labeling,
    Line,
    ModelError,
    Problem,
    RefLabel,
    Transcript,
    Worksheet,
)

logger = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Raised on malformed corpus files."""


@dataclass(frozen=True)
class CorpusManifest:
    transcripts: tuple[str, ...]  # file paths
    worksheets: dict[str, str]  # transcript id -> worksheet path
    annotations: dict[str, str] | None  # transcript id -> annotation path
    split: str = "test"  # "train" | "test"
    root: Path = Path(".")  # directory paths are resolved against


@dataclass(frozen=True)
class CorpusEntry:
    transcript: Transcript
    worksheet: Worksheet
    gold: Labeling | None


@dataclass(frozen=True)
class Corpus:
    """A fully loaded split: one entry per transcript."""

    entries: tuple[CorpusEntry, ...]
    split: str = "test"

    def __len__(self) -> int:
        return len(self.entries)

    def annotated(self) -> "Corpus":
        return Corpus(tuple(e for e in self.entries if e.gold is not None), self.split)


# ---------------------------------------------------------------------------
# loading / saving


def load_transcript(path: str | Path) -> Transcript:
    path = Path(path)
    lines: list[Line] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            lines.append(
                Line(
                    index=int(rec["index"]),
                    speaker=str(rec["speaker"]),
                    utterance=str(rec["utterance"]),
                    start_ms=int(rec["start_ms"]),
                    end_ms=int(rec["end_ms"]),
                )
            )
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: missing field {exc.args[0]}") from exc
        except ModelError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    try:
        return Transcript(id=path.stem, lines=tuple(lines))
    except ModelError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def save_transcript(transcript: Transcript, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in transcript.lines:
            fh.write(
                json.dumps(
                    {
                        "index": line.index,
                        "speaker": line.speaker,
                        "utterance": line.utterance,
                        "start_ms": line.start_ms,
                        "end_ms": line.end_ms,
                    }
                )
                + "\n"
            )


def load_worksheet(path: str | Path) -> Worksheet:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON: {exc}") from exc
    try:
        problems = tuple(
            Problem(id=str(p["id"]), text=str(p["text"])) for p in doc["problems"]
        )
        return Worksheet(id=str(doc["id"]), problems=problems)
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"{path}: malformed worksheet: {exc}") from exc
    except ModelError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def save_worksheet(worksheet: Worksheet, path: str | Path) -> None:
    doc = {
        "id": worksheet.id,
        "problems": [{"id": p.id, "text": p.text} for p in worksheet.problems],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_annotation(path: str | Path, n_lines: int) -> Labeling:
    path = Path(path)
    records: dict[int, tuple[int, RefLabel]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
            records[int(rec["line_index"])] = (
                int(rec["segment_id"]),
                RefLabel.deserialize(str(rec["ref"])),
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    if sorted(records) != list(range(n_lines)):
        raise CorpusError(f"{path}: annotation does not cover lines 0..{n_lines - 1}")
    try:
        return Labeling(tuple(records[i] for i in range(n_lines)))
    except ModelError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def save_annotation(labeling: Labeling, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, (seg, ref) in enumerate(labeling.per_line):
            fh.write(
                json.dumps({"line_index": i, "segment_id": seg, "ref": ref.serialize()})
                + "\n"
            )


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    annotations = doc.get("annotations")
    manifest = CorpusManifest(
        transcripts=tuple(doc["transcripts"]),
        worksheets=dict(doc["worksheets"]),
        annotations=dict(annotations) if annotations is not None else None,
        split=doc.get("split", "test"),
        root=path.parent,
    )
    ids = {Path(p).stem for p in manifest.transcripts}
    if manifest.annotations:
        missing = set(manifest.annotations) - ids
        if missing:
            raise CorpusError(f"{path}: annotations reference unknown transcripts {sorted(missing)}")
    return manifest


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    doc = {
        "split": manifest.split,
        "transcripts": list(manifest.transcripts),
        "worksheets": manifest.worksheets,
    }
    if manifest.annotations is not None:
        doc["annotations"] = manifest.annotations
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_corpus(manifest: CorpusManifest) -> Corpus:
    entries: list[CorpusEntry] = []
    worksheet_cache: dict[str, Worksheet] = {}
    for tpath in manifest.transcripts:
        transcript = load_transcript(manifest.root / tpath)
        wpath = manifest.worksheets.get(transcript.id)
        if wpath is None:
            raise CorpusError(f"no worksheet mapped for transcript {transcript.id}")
        if wpath not in worksheet_cache:
            worksheet_cache[wpath] = load_worksheet(manifest.root / wpath)
        gold = None
        if manifest.annotations and transcript.id in manifest.annotations:
            gold = load_annotation(
                manifest.root / manifest.annotations[transcript.id], len(transcript)
            )
        entries.append(CorpusEntry(transcript, worksheet_cache[wpath], gold))
    return Corpus(tuple(entries), manifest.split)


# ---------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for the deterministic synthetic corpus generator.

    ``vocab_overlap`` is the fraction of each segment's tokens drawn from a
    vocabulary shared across problems; at 0 every problem-linked segment
    uses only its own problem's vocabulary, so lexical retrieval over
    ground-truth segments is exact by construction. ``informal_prob`` is
    the chance a segment is informal talk (no ref) drawing from a separate
    chatter vocabulary.
    """

    n_transcripts: int = 4
    lines_per_segment: tuple[int, int] = (4, 10)
    segments_per_transcript: tuple[int, int] = (3, 8)
    n_problems: int = 8
    vocab_overlap: float = 0.0
    informal_prob: float = 0.0
    seed: int = 0
    tokens_per_line: tuple[int, int] = (5, 12)
    vocab_words_per_problem: int = 12

    def __post_init__(self) -> None:
        for lo, hi in (self.lines_per_segment, self.segments_per_transcript,
                       self.tokens_per_line):
            if lo < 1 or hi < lo:
                raise CorpusError(f"empty or non-positive range ({lo}, {hi})")
        if not 0.0 <= self.vocab_overlap <= 1.0:
            raise CorpusError("vocab_overlap must be in [0, 1]")
        if self.n_transcripts < 1 or self.n_problems < 1:
            raise CorpusError("n_transcripts and n_problems must be positive")


def _word(prefix: str, i: int) -> str:
    return f"{prefix}{i:03d}"


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Deterministic synthetic corpus with known ground truth.

    Per-line durations are log-normal, clipped to [500 ms, 60 s], so time
    metrics genuinely diverge from line metrics.
    """
    rng = random.Random(spec.seed)
    problems = tuple(
        Problem(
            id=f"P{p + 1}",
            text=" ".join(_word(f"prob{p}w", i) for i in range(spec.vocab_words_per_problem)),
        )
        for p in range(spec.n_problems)
    )
    worksheet = Worksheet(id="synthetic-ws", problems=problems)
    shared_vocab = [_word("common", i) for i in range(40)]
    chatter_vocab = [_word("chat", i) for i in range(40)]

    entries: list[CorpusEntry] = []
    for t in range(spec.n_transcripts):
        n_segments = rng.randint(*spec.segments_per_transcript)
        lines: list[Line] = []
        per_line: list[tuple[int, RefLabel]] = []
        clock = 0
        problem_order = list(range(spec.n_problems))
        rng.shuffle(problem_order)
        for s in range(n_segments):
            if rng.random() < spec.informal_prob or not problem_order:
                ref = RefLabel("none")
                base_vocab = chatter_vocab
            else:
                p = problem_order.pop()
                ref = RefLabel.problem(problems[p].id)
                base_vocab = problems[p].text.split()
            n_lines = rng.randint(*spec.lines_per_segment)
            for _ in range(n_lines):
                n_tokens = rng.randint(*spec.tokens_per_line)
                toks = [
                    rng.choice(shared_vocab)
                    if rng.random() < spec.vocab_overlap
                    else rng.choice(base_vocab)
                    for _ in range(n_tokens)
                ]
                duration = int(min(max(rng.lognormvariate(8.0, 0.8), 500), 60_000))
                speaker = "[TUTOR]" if rng.random() < 0.6 else "[STUDENT]"
                lines.append(
                    Line(
                        index=len(lines),
                        speaker=speaker,
                        utterance=" ".join(toks),
                        start_ms=clock,
                        end_ms=clock + duration,
                    )
                )
                per_line.append((s, ref))
                clock += duration
        transcript = Transcript(id=f"synthetic-{spec.seed}-{t:03d}", lines=tuple(lines))
        entries.append(CorpusEntry(transcript, worksheet, Labeling(tuple(per_line))))
    return Corpus(tuple(entries), split="train")


def write_corpus(corpus: Corpus, out_dir: str | Path) -> Path:
    """Write a loaded corpus to disk; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    transcripts: list[str] = []
    worksheets: dict[str, str] = {}
    annotations: dict[str, str] = {}
    written_ws: set[str] = set()
    for entry in corpus.entries:
        tpath = f"{entry.transcript.id}.jsonl"
        save_transcript(entry.transcript, out / tpath)
        transcripts.append(tpath)
        wpath = f"{entry.worksheet.id}.json"
        if entry.worksheet.id not in written_ws:
            save_worksheet(entry.worksheet, out / wpath)
            written_ws.add(entry.worksheet.id)
        worksheets[entry.transcript.id] = wpath
        if entry.gold is not None:
            apath = f"{entry.transcript.id}.labels.jsonl"
            save_annotation(entry.gold, out / apath)
            annotations[entry.transcript.id] = apath
    manifest = CorpusManifest(
        transcripts=tuple(transcripts),
        worksheets=worksheets,
        annotations=annotations or None,
        split=corpus.split,
        root=out,
    )
    manifest_path = out / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path


# ---------------------------------------------------------------------------
# statistics


def corpus_stats(corpus: Corpus) -> dict[str, float | int | str]:
    """Summary table: totals and per-transcript means.

    Segment/problem rows are omitted (with a notice key) when no
    annotations are present.
    """
    n = len(corpus)
    if n == 0:
        raise CorpusError("empty corpus")
    stats: dict[str, float | int | str] = {"total_transcripts": n}
    speakers_per = [len({l.speaker for l in e.transcript.lines}) for e in corpus.entries]
    all_speakers = {
        (e.transcript.id, s)
        for e in corpus.entries
        for s in {l.speaker for l in e.transcript.lines}
    }
    stats["total_speakers"] = len(all_speakers)
    stats["mean_speakers_per_transcript"] = sum(speakers_per) / n
    stats["mean_lines_per_transcript"] = sum(len(e.transcript) for e in corpus.entries) / n
    stats["mean_duration_mins"] = (
        sum(e.transcript.duration_ms for e in corpus.entries) / n / 60_000
    )
    annotated = [e for e in corpus.entries if e.gold is not None]
    if annotated and len(annotated) == n:
        seg_counts = [e.gold.num_segments() for e in annotated]  # type: ignore[union-attr]
        stats["total_segments"] = sum(seg_counts)
        stats["mean_segments_per_transcript"] = sum(seg_counts) / n
        prob_counts = [
            len({r.problem_id for r in e.gold.refs if r.kind == "problem"})  # type: ignore[union-attr]
            for e in annotated
        ]
        stats["mean_problems_per_transcript"] = sum(prob_counts) / n
    else:
        stats["notice"] = "segment/problem rows omitted: annotations missing"
    stats["total_worksheets"] = len({e.worksheet.id for e in corpus.entries})
    stats["total_problems"] = sum(
        len(ws.problems)
        for ws in {e.worksheet.id: e.worksheet for e in corpus.entries}.values()
    )
    return stats
