"""Completion clients: the wire protocol, an HTTP client for any
OpenAI-compatible completions endpoint, and deterministic in-repo mocks.
"""

from __future__ import annotations

import hashlib
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import httpx

from explpipe.core.errors import InvariantError

log = logging.getLogger(__name__)

ENV_ENDPOINT_URL = "EXPLPIPE_COMPLETIONS_URL"
ENV_ENDPOINT_MODEL = "EXPLPIPE_COMPLETIONS_MODEL"
ENV_ENDPOINT_TOKEN = "EXPLPIPE_COMPLETIONS_TOKEN"


class EndpointError(Exception):
    """The completion endpoint failed after bounded retries."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt_text: str
    max_tokens: int
    temperature: float
    stop_sequences: tuple[str, ...]
    want_logprobs: bool
    seed_tag: str

    def __post_init__(self):
        if self.temperature < 0:
            raise InvariantError(self.seed_tag, "temperature must be >= 0")

    @property
    def greedy(self) -> bool:
        return self.temperature == 0.0

    def cache_key(self, namespace: str) -> str:
        prompt_hash = hashlib.sha256(self.prompt_text.encode("utf-8")).hexdigest()
        payload = "|".join(
            [
                namespace,
                prompt_hash,
                str(self.max_tokens),
                repr(self.temperature),
                repr(self.stop_sequences),
                str(self.want_logprobs),
                self.seed_tag,
            ]
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Completion:
    text: str
    token_logprobs: tuple[float, ...] = ()
    tokens: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {
            "text": self.text,
            "token_logprobs": list(self.token_logprobs),
            "tokens": list(self.tokens),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Completion":
        return cls(
            text=rec["text"],
            token_logprobs=tuple(rec.get("token_logprobs", ())),
            tokens=tuple(rec.get("tokens", ())),
        )


class CompletionClient(Protocol):
    cache_namespace: str

    def complete(self, request: CompletionRequest) -> Completion: ...


class HTTPCompletionClient:
    """OpenAI-compatible completions client with bounded exponential backoff.

    POSTs {model, prompt, max_tokens, temperature, logprobs, stop, user} to
    the configured path; retries timeouts, connection errors, 429s and 5xx
    responses, logging one warning per retry.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        model: Optional[str] = None,
        auth_token: Optional[str] = None,
        path: str = "/v1/completions",
        timeout: float = 60.0,
        max_retries: int = 4,
        backoff_base: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url or os.environ.get(ENV_ENDPOINT_URL)
        self.model = model or os.environ.get(ENV_ENDPOINT_MODEL, "")
        self.auth_token = auth_token or os.environ.get(ENV_ENDPOINT_TOKEN)
        if not self.base_url:
            raise EndpointError(
                f"no completions endpoint configured (set {ENV_ENDPOINT_URL} or pass base_url)"
            )
        self.path = path
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        headers = {}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        self._http = httpx.Client(
            base_url=self.base_url, timeout=timeout, headers=headers, transport=transport
        )

    @property
    def cache_namespace(self) -> str:
        return f"http:{self.model}"

    def complete(self, request: CompletionRequest) -> Completion:
        body = {
            "model": self.model,
            "prompt": request.prompt_text,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "logprobs": 0 if request.want_logprobs else None,
            "stop": list(request.stop_sequences) or None,
            "user": request.seed_tag,
        }
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_base * (2 ** (attempt - 1))
                log.warning(
                    "completion retry %d/%d after %s (sleeping %.2fs)",
                    attempt,
                    self.max_retries,
                    last_error,
                    delay,
                )
                time.sleep(delay)
            try:
                response = self._http.post(self.path, json=body)
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = EndpointError(f"HTTP {response.status_code}")
                    continue
                response.raise_for_status()
                return self._parse(response.json())
            except (httpx.TimeoutException, httpx.TransportError) as e:
                last_error = e
        raise EndpointError(f"completion failed after {self.max_retries} retries: {last_error}")

    @staticmethod
    def _parse(payload: dict) -> Completion:
        try:
            choice = payload["choices"][0]
            text = choice["text"]
            logprobs = choice.get("logprobs") or {}
            token_logprobs = tuple(
                lp for lp in (logprobs.get("token_logprobs") or ()) if lp is not None
            )
            tokens = tuple(logprobs.get("tokens") or ())
        except (KeyError, IndexError, TypeError) as e:
            raise EndpointError(f"malformed completion response: {e}") from e
        return Completion(text=text, token_logprobs=token_logprobs, tokens=tokens)

    def close(self) -> None:
        self._http.close()


def _mock_tokenize(text: str) -> list[str]:
    return text.split()


def _deterministic_logprob(token: str, seed_tag: str, greedy: bool) -> float:
    h = int.from_bytes(hashlib.sha256(f"{seed_tag}:{token}".encode()).digest()[:4], "big")
    base = -0.05 - (h % 1000) / 1000.0  # in [-1.05, -0.05]
    return base if greedy else base - 1.0  # samples are usually less likely


@dataclass
class MockCompletionClient:
    """Deterministic in-process stand-in for a completions endpoint.

    Either scripted (returns queued completions in order) or procedural
    (derives the completion text from the request via ``responder``). Tracks
    ``calls`` so cache tests can observe network traffic.
    """

    scripted: list[Completion] = field(default_factory=list)
    responder: Optional[Callable[[CompletionRequest], str]] = None
    fail_first: int = 0  # raise transient errors for the first N calls
    cache_namespace: str = "mock"
    calls: int = 0

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "MockCompletionClient":
        return cls(scripted=[Completion(text=t) for t in texts])

    def complete(self, request: CompletionRequest) -> Completion:
        self.calls += 1
        if self.fail_first > 0:
            self.fail_first -= 1
            raise EndpointError("transient mock failure")
        if self.scripted:
            completion = self.scripted.pop(0)
        else:
            if self.responder is None:
                raise EndpointError("mock has neither scripted completions nor a responder")
            completion = Completion(text=self.responder(request))
        if request.want_logprobs and not completion.token_logprobs:
            tokens = _mock_tokenize(completion.text)
            logprobs = tuple(
                _deterministic_logprob(t, request.seed_tag, request.greedy) for t in tokens
            )
            completion = Completion(
                text=completion.text, token_logprobs=logprobs, tokens=tuple(tokens)
            )
        return completion


class RateLimitedClient:
    """Shared rate limiter: at most one request per ``min_interval`` seconds
    across all threads using this client."""

    def __init__(self, inner: CompletionClient, min_interval: float):
        import threading

        self.inner = inner
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    @property
    def cache_namespace(self) -> str:
        return self.inner.cache_namespace

    def complete(self, request: CompletionRequest) -> Completion:
        with self._lock:
            wait = self._last + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()
        return self.inner.complete(request)


class RetryingClient:
    """Bounded-retry wrapper for in-process clients (mirrors the HTTP policy)."""

    def __init__(self, inner: CompletionClient, max_retries: int = 4, backoff_base: float = 0.0):
        self.inner = inner
        self.max_retries = max_retries
        self.backoff_base = backoff_base

    @property
    def cache_namespace(self) -> str:
        return self.inner.cache_namespace

    def complete(self, request: CompletionRequest) -> Completion:
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            if attempt and self.backoff_base:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                return self.inner.complete(request)
            except EndpointError as e:
                last_error = e
                if attempt < self.max_retries:
                    log.warning("retry %d/%d after %s", attempt + 1, self.max_retries, e)
        raise EndpointError(f"completion failed after {self.max_retries} retries: {last_error}")
