"""Shared builders and independent brute-force oracles for the test suite.

The oracles enumerate every window explicitly from raw per-line segment
ids and timestamps; they never call the library's metric code.
"""

from __future__ import annotations

import random

import pytest

from posr.model import Labeling, Line, REF_NONE, RefLabel, Transcript


def make_transcript(durations_ms, tid="t0", words_per_line=4, seed=0):
    rng = random.Random(seed)
    lines = []
    clock = 0
    for i, d in enumerate(durations_ms):
        utt = " ".join(f"w{rng.randrange(50)}" for _ in range(words_per_line))
        lines.append(
            Line(index=i, speaker="[TUTOR]" if i % 2 == 0 else "[STUDENT]",
                 utterance=utt, start_ms=clock, end_ms=clock + d)
        )
        clock += d
    return Transcript(id=tid, lines=tuple(lines))


REF_POOL = [REF_NONE, RefLabel("not_in_corpus"),
            RefLabel.problem("P1"), RefLabel.problem("P2"), RefLabel.problem("P3")]


def random_labeling(n, rng, max_seg_len=8, ref_pool=REF_POOL):
    """Random contiguous segmentation with a random ref per segment."""
    per_line = []
    seg = 0
    i = 0
    while i < n:
        length = rng.randint(1, max_seg_len)
        ref = rng.choice(ref_pool)
        for _ in range(min(length, n - i)):
            per_line.append((seg, ref))
        i += length
        seg += 1
    return Labeling(tuple(per_line))


def seg_ids(labeling):
    return [seg for seg, _ in labeling.per_line]


def oracle_line_metric(pred_ids, ref_ids, k, presence_only):
    """Direct enumeration of every window over raw segment-id lists."""
    n = len(ref_ids)
    assert len(pred_ids) == n and 1 <= k < n
    errors = 0
    for j in range(n - k):
        cp = sum(1 for i in range(j + 1, j + k + 1) if pred_ids[i] != pred_ids[i - 1])
        cr = sum(1 for i in range(j + 1, j + k + 1) if ref_ids[i] != ref_ids[i - 1])
        mismatch = (cp > 0) != (cr > 0) if presence_only else cp != cr
        errors += mismatch
    return errors / (n - k)


def oracle_time_metric(pred_ids, ref_ids, starts, ends, delta_ms, k, presence_only):
    """Direct enumeration: boundary time is the onset of the line after the
    boundary; a window at j spans the open interval (starts[j], ends[j]+delta)."""
    n = len(ref_ids)
    errors = 0
    for j in range(n - k):
        lo, hi = starts[j], ends[j] + delta_ms
        cp = sum(
            1 for i in range(1, n)
            if pred_ids[i] != pred_ids[i - 1] and lo < starts[i] < hi
        )
        cr = sum(
            1 for i in range(1, n)
            if ref_ids[i] != ref_ids[i - 1] and lo < starts[i] < hi
        )
        mismatch = (cp > 0) != (cr > 0) if presence_only else cp != cr
        errors += mismatch
    return errors / (n - k)


def oracle_srs(pred, ref, weights):
    total = sum(weights)
    hit = sum(
        w for w, (p, r) in zip(weights, zip(pred.refs, ref.refs)) if p == r
    )
    return hit / total


@pytest.fixture
def rng():
    return random.Random(12345)
