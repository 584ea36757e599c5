"""Chat-completion clients: live HTTP, scripted, and record/replay.

The wire protocol is a JSON POST of {model, messages, temperature,
max_tokens}; the response must expose the generated text and token
counts. Both a flat {text, input_tokens, output_tokens} shape and the
common chat-completion shape (choices[0].message.content plus usage
counts) are accepted.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

logger = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """Endpoint unreachable or returned a non-success status."""


@dataclass(frozen=True)
class ChatRequest:
    model: str
    system: str
    user: str
    max_tokens: int = 4096
    temperature: float = 0.0

    def key(self) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "system": self.system,
                "user": self.user,
                "max_tokens": self.max_tokens,
                "temperature": self.temperature,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: int = 0
    output_tokens: int = 0


class ChatClient(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@dataclass
class LLMEndpointConfig:
    url: str
    api_key: str | None = None
    timeout_s: float = 120.0
    max_attempts: int = 3
    backoff_s: float = 1.0

    @staticmethod
    def from_file(path: str | Path) -> "LLMEndpointConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return LLMEndpointConfig(
            url=doc["url"],
            api_key=doc.get("api_key"),
            timeout_s=float(doc.get("timeout_s", 120.0)),
            max_attempts=int(doc.get("max_attempts", 3)),
            backoff_s=float(doc.get("backoff_s", 1.0)),
        )


class HttpChatClient:
    """Live client with retry and exponential backoff."""

    def __init__(self, config: LLMEndpointConfig, session=None):
        import requests

        self.config = config
        self._session = session or requests.Session()

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._session.post(
                    self.config.url, json=body, headers=headers,
                    timeout=self.config.timeout_s,
                )
                if resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                return _parse_response(resp.json())
            except Exception as exc:  # noqa: BLE001 - retried, re-raised below
                logger.warning("request attempt %d failed: %s", attempt + 1, exc)
                last_error = exc
        raise TransportError(f"all {self.config.max_attempts} attempts failed") from last_error


def _parse_response(doc: dict) -> ChatResponse:
    if "text" in doc:
        return ChatResponse(
            text=str(doc["text"]),
            input_tokens=int(doc.get("input_tokens", 0)),
            output_tokens=int(doc.get("output_tokens", 0)),
        )
    try:
        text = doc["choices"][0]["message"]["content"]
        usage = doc.get("usage", {})
        return ChatResponse(
            text=str(text),
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"unrecognized response shape: {doc!r}") from exc


@dataclass
class ScriptedClient:
    """Answers from a fixed list or a callable; for tests and round-trips."""

    responder: object  # callable(ChatRequest) -> ChatResponse | str
    calls: list[ChatRequest] = field(default_factory=list)

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls.append(request)
        result = self.responder(request)  # type: ignore[operator]
        if isinstance(result, str):
            # rough token accounting for cost tests with scripted clients
            return ChatResponse(
                text=result,
                input_tokens=len(request.system.split()) + len(request.user.split()),
                output_tokens=len(result.split()),
            )
        return result


class CassetteClient:
    """Record/replay keyed by request hash so LLM runs are testable offline.

    With no inner client, a cache miss is a TransportError; with one, the
    miss is forwarded and the response recorded.
    """

    def __init__(self, path: str | Path, inner: ChatClient | None = None):
        self.path = Path(path)
        self.inner = inner
        self._cache: dict[str, dict] = {}
        if self.path.exists():
            self._cache = json.loads(self.path.read_text(encoding="utf-8"))

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request.key()
        if key in self._cache:
            rec = self._cache[key]
            return ChatResponse(
                text=rec["text"],
                input_tokens=int(rec.get("input_tokens", 0)),
                output_tokens=int(rec.get("output_tokens", 0)),
            )
        if self.inner is None:
            raise TransportError(f"no cassette entry for request {key[:12]} and no live client")
        response = self.inner.complete(request)
        self._cache[key] = {
            "text": response.text,
            "input_tokens": response.input_tokens,
            "output_tokens": response.output_tokens,
        }
        self.save()
        return response

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self._cache, indent=2), encoding="utf-8")
