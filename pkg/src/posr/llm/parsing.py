"""Total parsers for model responses.

Every parser either returns a value or raises ParseFailure carrying the
raw text; callers decide the fallback (single no-ref segment, flagged).
"""

from __future__ import annotations

import json
import logging
import re

from ..model import (
    REF_NONE,
    REF_NOT_IN_CORPUS,
    RefLabel,
    SegmentSpan,
    Worksheet,
)

logger = logging.getLogger(__name__)

_FENCE = re.compile(r"```[a-zA-Z]*\n?|```")


class ParseFailure(Exception):
    """A response that could not be interpreted; carries the raw text."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


def _strip_fences(text: str) -> str:
    return _FENCE.sub("", text)


def _extract_json_array(text: str) -> list:
    """First balanced top-level [...] that parses as JSON, prose tolerated."""
    text = _strip_fences(text)
    for start in range(len(text)):
        if text[start] != "[":
            continue
        depth = 0
        in_str = False
        escape = False
        for end in range(start, len(text)):
            ch = text[end]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
                continue
            if ch == '"':
                in_str = True
            elif ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
                if depth == 0:
                    candidate = text[start : end + 1]
                    try:
                        value = json.loads(candidate)
                    except json.JSONDecodeError:
                        break  # try the next opening bracket
                    if isinstance(value, list):
                        return value
                    break
        # fall through to the next '['
    raise ParseFailure("no parseable JSON array found", text)


def _clamp_span(start: int, end: int, n_lines: int) -> tuple[int, int] | None:
    if end < 0 or start >= n_lines:
        logger.warning("span (%d, %d) outside transcript of %d lines", start, end, n_lines)
        return None
    clamped = (max(0, start), min(end, n_lines - 1))
    if clamped != (start, end):
        logger.warning("span (%d, %d) clamped to %s", start, end, clamped)
    if clamped[0] > clamped[1]:
        return None
    return clamped


def parse_segmentation(text: str, n_lines: int) -> list[SegmentSpan]:
    """Parse the list-of-[first, last] output of the segmentation prompt."""
    value = _extract_json_array(text)
    spans: list[SegmentSpan] = []
    for item in value:
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in item)
        ):
            raise ParseFailure(f"expected [first, last] pair, got {item!r}", text)
        clamped = _clamp_span(item[0], item[1], n_lines)
        if clamped is not None:
            spans.append(SegmentSpan(clamped[0], clamped[1]))
    if not spans:
        raise ParseFailure("no usable spans in response", text)
    return spans


def parse_retrieval(text: str, worksheet: Worksheet) -> RefLabel:
    """Parse the single-token retrieval answer: "null", -1, or a problem id."""
    stripped = _strip_fences(text).strip().strip('"').strip()
    if stripped.lower() == "null":
        return REF_NONE
    if stripped == "-1":
        return REF_NOT_IN_CORPUS
    ids = set(worksheet.problem_ids())
    for token in re.findall(r"[\w.-]+", stripped):
        if token in ids:
            return RefLabel.problem(token)
    raise ParseFailure(f"no worksheet problem id in {stripped!r}", text)


def _to_ref(problem_id, worksheet: Worksheet) -> RefLabel:
    if problem_id is None:
        return REF_NONE
    pid = str(problem_id)
    if pid == "-1":
        return REF_NOT_IN_CORPUS
    if pid in set(worksheet.problem_ids()):
        return RefLabel.problem(pid)
    logger.warning("problem_id %r not in worksheet; treating as off-worksheet", problem_id)
    return REF_NOT_IN_CORPUS


def parse_joint(text: str, n_lines: int, worksheet: Worksheet) -> list[SegmentSpan]:
    """Parse the list of {start_line_idx, end_line_idx, problem_id} objects."""
    value = _extract_json_array(text)
    spans: list[SegmentSpan] = []
    for item in value:
        if not isinstance(item, dict):
            raise ParseFailure(f"expected JSON object, got {item!r}", text)
        try:
            start = int(item["start_line_idx"])
            end = int(item["end_line_idx"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseFailure(f"bad segment object {item!r}", text) from exc
        clamped = _clamp_span(start, end, n_lines)
        if clamped is None:
            continue
        ref = _to_ref(item.get("problem_id"), worksheet)
        spans.append(SegmentSpan(clamped[0], clamped[1], ref))
    if not spans:
        raise ParseFailure("no usable spans in response", text)
    return spans
