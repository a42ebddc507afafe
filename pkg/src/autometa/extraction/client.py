"""Chat-completion clients: a live OpenAI-compatible client and a replay client.

Both share an on-disk response cache of ``<sha256(model_name + prompt)>.txt``
files, so a live run doubles as a recording for later replay.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Protocol

import httpx

from autometa.exceptions import ConfigError, ReplayMiss, TransportError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ModelConfig:
    model_name: str
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    max_context_tokens: int = 8192
    temperature: float = 0.0
    max_retries: int = 3
    request_timeout: float = 120.0
    output_reserve: int = 512
    backoff_base: float = 1.0
    max_in_flight: int = 4

    def __post_init__(self):
        if self.max_context_tokens <= 0:
            raise ConfigError("max_context_tokens must be positive")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")

    @property
    def url(self) -> str:
        base = self.endpoint.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"


def prompt_hash(model_name: str, prompt: str) -> str:
    return hashlib.sha256((model_name + prompt).encode("utf-8")).hexdigest()


class ResponseCache:
    def __init__(self, directory):
        self.directory = Path(directory)
        self._lock = threading.Lock()

    def path(self, model_name: str, prompt: str) -> Path:
        return self.directory / f"{prompt_hash(model_name, prompt)}.txt"

    def get(self, model_name: str, prompt: str) -> Optional[str]:
        path = self.path(model_name, prompt)
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def put(self, model_name: str, prompt: str, response: str) -> None:
        path = self.path(model_name, prompt)
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(response)
            os.replace(tmp, path)


class CompletionClient(Protocol):
    model_name: str

    def complete(self, prompt: str) -> str: ...


class ReplayClient:
    """Serves recorded responses only; never touches the network."""

    def __init__(self, cache_dir, model_name: str):
        self.cache = ResponseCache(cache_dir)
        if not self.cache.directory.is_dir():
            raise ConfigError(f"replay cache directory {self.cache.directory} does not exist")
        self.model_name = model_name
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls += 1
        response = self.cache.get(self.model_name, prompt)
        if response is None:
            raise ReplayMiss(prompt_hash(self.model_name, prompt))
        return response


class ChatClient:
    """OpenAI-compatible chat-completions client with retries and a response cache."""

    def __init__(
        self,
        config: ModelConfig,
        cache_dir=None,
        http_client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise ConfigError(f"environment variable {config.api_key_env} is not set")
        self.config = config
        self.model_name = config.model_name
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self._http = http_client or httpx.Client(timeout=config.request_timeout)
        self._headers = {"Authorization": f"Bearer {api_key}"}
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self._count_lock = threading.Lock()
        self.network_calls = 0

    def complete(self, prompt: str) -> str:
        if self.cache is not None:
            cached = self.cache.get(self.model_name, prompt)
            if cached is not None:
                return cached
        text = self._request(prompt)
        if self.cache is not None:
            self.cache.put(self.model_name, prompt, text)
        return text

    def _request(self, prompt: str) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        attempts = self.config.max_retries + 1
        last = ""
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                with self._slots:
                    with self._count_lock:
                        self.network_calls += 1
                    response = self._http.post(
                        self.config.url,
                        json=payload,
                        headers=self._headers,
                        timeout=self.config.request_timeout,
                    )
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
                logger.warning("attempt %d/%d failed: %s", attempt + 1, attempts, last)
                continue
            if response.status_code in RETRYABLE_STATUS:
                last = f"HTTP {response.status_code}"
                logger.warning("attempt %d/%d failed: %s", attempt + 1, attempts, last)
                continue
            if response.status_code >= 400:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}", attempt + 1)
            try:
                return response.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError):
                raise TransportError("malformed chat-completions response", attempt + 1) from None
        raise TransportError(f"giving up after {attempts} attempts ({last})", attempts)
