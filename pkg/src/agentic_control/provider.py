"""Chat-completion providers: an OpenAI-compatible HTTP client and a
deterministic scripted stand-in for offline runs."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol

import httpx

log = logging.getLogger(__name__)


class ProviderError(Exception):
    pass


class ProviderTimeout(ProviderError):
    pass


class TransportError(ProviderError):
    pass


class MalformedResponse(ProviderError):
    pass


class ScriptExhausted(ProviderError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    api_key_env: str | None = "OPENAI_API_KEY"
    temperature: float = 0.0
    top_p: float = 0.1
    max_tokens: int = 512
    timeout_s: float = 120.0
    retries: int = 3
    backoff_s: float = 0.5

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    @classmethod
    def local(cls, model: str = "llama3.2", **kw) -> "ProviderConfig":
        """Defaults for a local OpenAI-compatible server (e.g. Ollama)."""
        kw.setdefault("endpoint", "http://localhost:11434/v1")
        kw.setdefault("api_key_env", None)
        return cls(model=model, **kw)

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class CompletionRequest:
    user: str
    system: str = ""
    temperature: float | None = None
    top_p: float | None = None
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.user or not self.user.strip():
            raise ValueError("user text must be non-empty")


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    latency_s: float
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    retries: int = 0


class Provider(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def request_body(config: ProviderConfig, request: CompletionRequest) -> dict:
    messages = []
    if request.system:
        messages.append({"role": "system", "content": request.system})
    messages.append({"role": "user", "content": request.user})
    return {
        "model": config.model,
        "messages": messages,
        "temperature": config.temperature if request.temperature is None else request.temperature,
        "top_p": config.top_p if request.top_p is None else request.top_p,
        "max_tokens": config.max_tokens if request.max_tokens is None else request.max_tokens,
    }


def _parse_completion(data: Any) -> tuple[str, int | None, int | None]:
    try:
        text = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"no choices[0].message.content in {data!r:.200}") from exc
    if not isinstance(text, str):
        raise MalformedResponse(f"content is not text: {text!r:.200}")
    usage = data.get("usage") or {}
    return text, usage.get("prompt_tokens"), usage.get("completion_tokens")


class OpenAICompatibleProvider:
    """POST /chat/completions against any OpenAI-style server.

    Transport errors, timeouts, 429 and 5xx are retried with exponential
    backoff; a well-formed reply is returned as is, however odd its text.
    """

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env) if self.config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        cfg = self.config
        url = cfg.endpoint.rstrip("/") + "/chat/completions"
        body = request_body(cfg, request)
        t0 = time.perf_counter()
        last: ProviderError | None = None
        for attempt in range(cfg.retries + 1):
            if attempt:
                time.sleep(cfg.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._client.post(url, json=body, headers=self._headers(),
                                         timeout=cfg.timeout_s)
            except httpx.TimeoutException as exc:
                last = ProviderTimeout(f"timed out after {cfg.timeout_s}s: {exc}")
                log.warning("attempt %d: %s", attempt + 1, last)
                continue
            except httpx.TransportError as exc:
                last = TransportError(str(exc))
                log.warning("attempt %d: %s", attempt + 1, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                log.warning("attempt %d: %s", attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                data = resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"invalid JSON body: {resp.text[:200]}") from exc
            text, pt, ct = _parse_completion(data)
            return CompletionResponse(text, time.perf_counter() - t0, pt, ct, attempt)
        assert last is not None
        raise last


def complete(config: ProviderConfig, request: CompletionRequest) -> CompletionResponse:
    """One-shot completion with a throwaway client."""
    provider = OpenAICompatibleProvider(config)
    try:
        return provider.complete(request)
    finally:
        provider.close()


@dataclass
class ScriptRule:
    reply: str
    match: str | None = None

    def matches(self, prompt: str) -> bool:
        return self.match is None or re.search(self.match, prompt) is not None


@dataclass
class ScriptedProvider:
    """Replays scripted replies in order.

    Rules with a ``match`` regex only fire for prompts (system + user text)
    that match it, so one script can serve several agent roles.  Within the
    rules that match, the earliest unused one wins.  ``fallback`` answers
    once the script runs dry; without it the provider raises
    :class:`ScriptExhausted`.
    """

    rules: list[ScriptRule] = field(default_factory=list)
    fallback: str | None = None
    consumed: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()
        self._used = [False] * len(self.rules)

    @classmethod
    def from_replies(cls, replies: Iterable[str], fallback: str | None = None) -> "ScriptedProvider":
        return cls([ScriptRule(r) for r in replies], fallback)

    @classmethod
    def keyed(cls, mapping: dict[str, str | list[str]], fallback: str | None = None) -> "ScriptedProvider":
        rules = []
        for pattern, replies in mapping.items():
            for r in [replies] if isinstance(replies, str) else replies:
                rules.append(ScriptRule(r, pattern))
        return cls(rules, fallback)

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedProvider":
        """Read a JSON-lines script.

        Each line is ``{"reply": ..., "match": optional regex}`` or
        ``{"fallback": ...}``.
        """
        rules, fallback = [], None
        for n, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from exc
            if "fallback" in entry:
                fallback = entry["fallback"]
            else:
                rules.append(ScriptRule(entry["reply"], entry.get("match")))
        return cls(rules, fallback)

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for r in self.rules:
                entry = {"reply": r.reply}
                if r.match is not None:
                    entry["match"] = r.match
                fh.write(json.dumps(entry) + "\n")
            if self.fallback is not None:
                fh.write(json.dumps({"fallback": self.fallback}) + "\n")

    def next_scripted_response(self, prompt: str = "") -> str:
        with self._lock:
            for k, rule in enumerate(self.rules):
                if not self._used[k] and rule.matches(prompt):
                    self._used[k] = True
                    self.consumed += 1
                    return rule.reply
            if self.fallback is not None:
                return self.fallback
        raise ScriptExhausted(f"no scripted reply left for prompt {prompt[:80]!r}")

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        t0 = time.perf_counter()
        text = self.next_scripted_response(request.system + "\n" + request.user)
        return CompletionResponse(text, time.perf_counter() - t0)


class CallableProvider:
    """Adapts ``fn(request) -> str`` to the provider interface."""

    def __init__(self, fn):
        self.fn = fn

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        t0 = time.perf_counter()
        text = self.fn(request)
        return CompletionResponse(text, time.perf_counter() - t0)
