"""Chat backends: OpenAI-style HTTP endpoint plus a deterministic scripted mock."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from .errors import BackendError, ConfigError, EmptyOutputError, TransientBackendError

# scripted-mock file line that simulates one transient failure
MOCK_FAIL_LINE = "!FAIL"


@dataclass
class ChatBackendConfig:
    endpoint: str
    model: str = "default"
    timeout: float = 30.0
    max_retries: int = 3
    temperature: float = 0.0
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if not self.endpoint:
            raise ConfigError("endpoint must be non-empty")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")


class ChatBackend(Protocol):
    def complete(self, prompt: str) -> str:
        """Return one completion for the prompt; may raise BackendError."""
        ...


class HttpChatBackend:
    """Single-shot client for an OpenAI-compatible chat-completions endpoint."""

    def __init__(self, config: ChatBackendConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        try:
            resp = requests.post(url, json=body, timeout=self.config.timeout)
        except requests.RequestException as exc:
            raise TransientBackendError(f"chat request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"chat endpoint returned HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise BackendError(f"chat endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat response: {exc}") from exc


class ScriptedChatBackend:
    """Replays canned replies in order; the workhorse of every offline test.

    Entries may be strings (returned as-is), exceptions (raised), or
    callables of the prompt.  Reply consumption is atomic, so concurrent
    callers each get exactly one scripted entry.
    """

    config = None

    def __init__(self, replies: Sequence[str | Exception | Callable[[str], str]],
                 exhaustion: str = "error"):
        if exhaustion not in ("error", "repeat_last"):
            raise ConfigError(f"unknown exhaustion policy: {exhaustion!r}")
        if exhaustion == "repeat_last" and not replies:
            raise ConfigError("repeat_last policy needs at least one reply")
        self._replies = list(replies)
        self._exhaustion = exhaustion
        self._lock = threading.Lock()
        self.calls = 0
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        with self._lock:
            idx = self.calls
            self.calls += 1
            self.prompts.append(prompt)
        if idx < len(self._replies):
            entry = self._replies[idx]
        elif self._exhaustion == "repeat_last":
            entry = self._replies[-1]
        else:
            raise BackendError(
                f"mock script exhausted: {len(self._replies)} replies, call {idx + 1}"
            )
        if isinstance(entry, Exception):
            raise entry
        if callable(entry):
            return entry(prompt)
        return entry


class FunctionChatBackend:
    """Stateless backend computing the reply from the prompt; thread-safe."""

    config = None

    def __init__(self, fn: Callable[[str], str]):
        self._fn = fn
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        return self._fn(prompt)


def load_mock_script(path: str | Path) -> list[str | Exception]:
    """Mock script file: one reply per line; a '!FAIL' line scripts one
    transient failure."""
    entries: list[str | Exception] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line == MOCK_FAIL_LINE:
                entries.append(TransientBackendError("scripted failure"))
            else:
                entries.append(line)
    if not entries:
        raise ConfigError(f"{path}: mock script has no replies")
    return entries


def chat(
    prompt: str,
    backend: ChatBackend,
    *,
    max_retries: int | None = None,
    backoff_base: float | None = None,
    _sleep: Callable[[float], None] = time.sleep,
) -> str:
    """One completion with retries on transient failures.

    Retry policy comes from the backend's config when present; exponential
    backoff doubles the wait after each failed attempt.  The completion is
    returned with surrounding whitespace stripped; an empty completion is
    an error, not a retry.
    """
    cfg = getattr(backend, "config", None)
    retries = max_retries if max_retries is not None else (cfg.max_retries if cfg else 3)
    base = backoff_base if backoff_base is not None else (cfg.backoff_base if cfg else 0.5)
    last: Exception | None = None
    for attempt in range(retries + 1):
        if attempt and base > 0:
            _sleep(base * 2 ** (attempt - 1))
        try:
            reply = backend.complete(prompt)
        except TransientBackendError as exc:
            last = exc
            continue
        text = reply.strip()
        if not text:
            raise EmptyOutputError("backend returned an empty completion")
        return text
    raise BackendError(f"backend failed after {retries + 1} attempts: {last}") from last
