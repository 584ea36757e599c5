"""End-to-end LLM prediction for one transcript.

Three modes mirror the prompt kinds: joint (one request yielding spans
with refs), segmentation-only (one request, refs left unset), and the
independent pipeline (one segmentation request followed by one retrieval
request per predicted segment).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..metrics import TokenUsage
from ..model import (
    REF_NONE,
    GapPolicy,
    Labeling,
    SegmentSpan,
    Transcript,
    Worksheet,
    spans_to_labeling,
)
from .client import ChatClient, ChatRequest, ChatResponse
from .parsing import ParseFailure, parse_joint, parse_retrieval, parse_segmentation
from .prompts import PromptKind, build_prompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LLMRunResult:
    labeling: Labeling
    usage: TokenUsage
    parse_failed: bool = False


def _fallback(n_lines: int) -> Labeling:
    return Labeling(tuple((0, REF_NONE) for _ in range(n_lines)))


def _call(client: ChatClient, model: str, system: str, user: str,
          max_tokens: int, temperature: float) -> tuple[ChatResponse, TokenUsage]:
    response = client.complete(
        ChatRequest(model=model, system=system, user=user,
                    max_tokens=max_tokens, temperature=temperature)
    )
    usage = TokenUsage(response.input_tokens, response.output_tokens, 1)
    return response, usage


def run_posr_llm(
    client: ChatClient,
    model: str,
    transcript: Transcript,
    worksheet: Worksheet,
    kind: PromptKind,
    max_tokens: int = 4096,
    temperature: float = 0.0,
    gap_policy: GapPolicy = GapPolicy.OWN_SEGMENT,
) -> LLMRunResult:
    """Predict a Labeling for one transcript via the chosen prompt protocol.

    An unparseable top-level response falls back to a single no-ref
    segment and is flagged; per-segment retrieval parse failures degrade
    that segment to no ref without failing the transcript.
    """
    n = len(transcript)
    usage = TokenUsage()

    if kind is PromptKind.JOINT_POSR:
        system, user = build_prompt(kind, transcript, worksheet)
        response, u = _call(client, model, system, user, max_tokens, temperature)
        usage += u
        try:
            spans = parse_joint(response.text, n, worksheet)
        except ParseFailure as exc:
            logger.warning("%s: joint parse failure: %s", transcript.id, exc)
            return LLMRunResult(_fallback(n), usage, parse_failed=True)
        return LLMRunResult(spans_to_labeling(spans, n, gap_policy), usage)

    # both independent modes start with a segmentation request
    system, user = build_prompt(PromptKind.INDEPENDENT_SEGMENTATION, transcript)
    response, u = _call(client, model, system, user, max_tokens, temperature)
    usage += u
    try:
        spans = parse_segmentation(response.text, n)
    except ParseFailure as exc:
        logger.warning("%s: segmentation parse failure: %s", transcript.id, exc)
        return LLMRunResult(_fallback(n), usage, parse_failed=True)

    if kind is PromptKind.INDEPENDENT_SEGMENTATION:
        return LLMRunResult(spans_to_labeling(spans, n, gap_policy), usage)

    # independent retrieval: one request per predicted segment, in order
    labeled: list[SegmentSpan] = []
    for span in spans:
        system, user = build_prompt(
            PromptKind.INDEPENDENT_RETRIEVAL,
            transcript,
            worksheet,
            segment=(span.start_line, span.end_line),
        )
        response, u = _call(client, model, system, user, max_tokens, temperature)
        usage += u
        try:
            ref = parse_retrieval(response.text, worksheet)
        except ParseFailure as exc:
            logger.warning(
                "%s: retrieval parse failure on segment (%d, %d): %s",
                transcript.id, span.start_line, span.end_line, exc,
            )
            ref = REF_NONE
        labeled.append(SegmentSpan(span.start_line, span.end_line, ref))
    return LLMRunResult(spans_to_labeling(labeled, n, gap_policy), usage)
