"""Text-generation clients: HTTP-backed and deterministic stubs."""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol

from .errors import ProviderError

__all__ = ["GenerationClient", "HttpGenerationClient", "RateLimiter",
           "StubGenerationClient"]


class RateLimiter:
    """Enforces a minimum interval between provider calls, across threads.

    The orchestrator shares one limiter between all HTTP clients so the
    configured requests-per-second budget is global, not per client.
    """

    def __init__(self, per_second: float):
        self.interval = 1.0 / per_second if per_second > 0 else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if self.interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self.interval
        if delay > 0:
            time.sleep(delay)


class GenerationClient(Protocol):
    model: str

    def complete(self, prompt: str) -> str:
        ...


@dataclass
class HttpGenerationClient:
    """OpenAI-style chat-completions client with bounded retries.

    Greedy decoding (temperature 0) is requested so that re-running a stage
    against the same provider snapshot is as reproducible as the provider
    allows.
    """

    endpoint: str
    model: str
    api_key_env: str = ""
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 120.0
    limiter: RateLimiter | None = field(default=None, repr=False)

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if not key:
                raise ProviderError(f"environment variable {self.api_key_env} not set")
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        last: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                if self.limiter:
                    self.limiter.wait()
                resp = requests.post(self.endpoint, json=payload, headers=headers,
                                     timeout=self.timeout)
                if resp.status_code == 200:
                    return resp.json()["choices"][0]["message"]["content"]
                last = ProviderError(
                    f"generation request failed ({resp.status_code}): {resp.text[:500]}")
            except (OSError, ValueError, KeyError) as exc:
                last = exc
            time.sleep(min(2.0 ** attempt * 0.2, 5.0))
        raise ProviderError(f"generation failed after {self.max_retries} attempts: {last}")


_WORDS = ("index", "loader", "agent", "vector", "chain", "prompt", "token",
          "retriever", "schema", "plugin", "adapter", "module")

_QUESTION_LINE = re.compile(r"^Question title: (.+)$", re.MULTILINE)


class StubGenerationClient:
    """Deterministic offline generator.

    If the prompt carries a "Question title:" line the stub reuses it (so
    decomposition produces retrievable text in fixtures); otherwise it emits
    pseudo-words seeded by the prompt hash. Same prompt, same output, always.
    """

    model = "stub-generator"

    def __init__(self, subquestion_count: int = 3):
        self.subquestion_count = subquestion_count

    def _pseudo_sentence(self, seed: bytes, length: int = 6) -> str:
        digest = hashlib.sha256(seed).digest()
        return " ".join(_WORDS[digest[i] % len(_WORDS)] for i in range(length))

    def complete(self, prompt: str) -> str:
        m = _QUESTION_LINE.search(prompt)
        title = m.group(1) if m else ""
        if "sub-questions" in prompt:
            lines = []
            for i in range(1, self.subquestion_count + 1):
                body = title or self._pseudo_sentence(f"{i}:{prompt}".encode())
                lines.append(f"{i}. {body}?")
            return "\n".join(lines)
        return title or self._pseudo_sentence(prompt.encode(), length=12)
