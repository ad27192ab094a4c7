"""Model-backed capability contracts plus deterministic offline mocks.

Three capabilities are abstracted: chat completion, token embeddings, and
NLI entailment. The HTTP chat client speaks the OpenAI-compatible
chat-completions JSON wire format; credentials come from environment
variables named in the provider config. Every mock is deterministic so the
whole pipeline runs offline in tests.
"""

from __future__ import annotations

import hashlib
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import httpx
import numpy as np


class ProviderError(RuntimeError):
    """Base for provider failures."""


class AuthFailure(ProviderError):
    """Credential rejected; never retried."""


class TransientProviderError(ProviderError):
    """Failures worth retrying with backoff."""


class RateLimited(TransientProviderError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class Timeout(TransientProviderError):
    pass


class ServerError(TransientProviderError):
    def __init__(self, status: int):
        super().__init__(f"provider returned HTTP {status}")
        self.status = status


class MalformedProviderResponse(ProviderError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_tokens: int = 1024
    model_name: str = ""

    def __post_init__(self):
        if not self.system_prompt or not self.user_prompt:
            raise ValueError("chat prompts must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0
    retries: int = 0


@dataclass(frozen=True)
class EmbeddingMatrix:
    tokens: tuple[str, ...]
    vectors: np.ndarray  # shape (len(tokens), dim)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise ValueError("need one vector per token")
        if self.vectors.shape[1] == 0:
            raise ValueError("embedding dimension must be positive")


@dataclass(frozen=True)
class NliJudgment:
    entailment: float
    contradiction: float
    neutral: float

    def __post_init__(self):
        probs = (self.entailment, self.contradiction, self.neutral)
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError("NLI probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-6:
            raise ValueError(f"NLI probabilities must sum to 1, got {sum(probs)}")


class ChatProvider:
    """A chat-completion capability; subclasses implement chat()."""

    model_name: str = "unknown"

    def chat(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError


class Embedder:
    """Token-level embedding capability."""

    model_name: str = "unknown"

    def embed(self, text: str) -> EmbeddingMatrix:
        raise NotImplementedError


class NliProvider:
    """Sentence-pair entailment capability.

    `max_input_chars`, when set, is the per-side input budget callers
    should truncate to.
    """

    model_name: str = "unknown"
    max_input_chars: int | None = None

    def nli(self, premise: str, hypothesis: str) -> NliJudgment:
        raise NotImplementedError


def call_with_retries(
    fn: Callable[[], ChatResponse],
    max_retries: int = 3,
    backoff_base: float = 0.5,
    backoff_cap: float = 8.0,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """Run fn, retrying transient failures with exponential backoff.

    Permanent failures (auth, malformed response) surface immediately. The
    returned response carries the number of retries that were needed.
    """
    attempt = 0
    while True:
        try:
            response = fn()
            if attempt:
                return ChatResponse(
                    text=response.text,
                    prompt_tokens=response.prompt_tokens,
                    completion_tokens=response.completion_tokens,
                    latency_ms=response.latency_ms,
                    retries=attempt,
                )
            return response
        except TransientProviderError as exc:
            if attempt >= max_retries:
                raise
            wait = min(backoff_cap, backoff_base * (2**attempt))
            if isinstance(exc, RateLimited) and exc.retry_after is not None:
                wait = min(backoff_cap, exc.retry_after)
            sleep(wait)
            attempt += 1


@dataclass
class HttpProviderConfig:
    endpoint: str
    model: str
    api_key_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_in_flight: int = 4

    def api_key(self) -> str | None:
        if self.api_key_env is None:
            return None
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthFailure(f"environment variable {self.api_key_env} is not set")
        return key


class HttpChatProvider(ChatProvider):
    """OpenAI-compatible /chat/completions client with bounded concurrency."""

    def __init__(
        self,
        config: HttpProviderConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._sleep = sleep
        self._gate = threading.Semaphore(config.max_in_flight)
        self.model_name = config.model

    def chat(self, request: ChatRequest) -> ChatResponse:
        return call_with_retries(
            lambda: self._one_call(request),
            max_retries=self._config.max_retries,
            backoff_base=self._config.backoff_base,
            sleep=self._sleep,
        )

    def _one_call(self, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": request.model_name or self._config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {}
        key = self._config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        started = time.monotonic()
        with self._gate:
            try:
                resp = self._client.post(
                    self._config.endpoint.rstrip("/") + "/chat/completions",
                    json=payload,
                    headers=headers,
                )
            except httpx.TimeoutException as exc:
                raise Timeout(str(exc)) from exc
            except httpx.HTTPError as exc:
                raise TransientProviderError(str(exc)) from exc
        latency_ms = (time.monotonic() - started) * 1000
        if resp.status_code in (401, 403):
            raise AuthFailure(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429:
            retry_after = resp.headers.get("retry-after")
            raise RateLimited("rate limited", retry_after=float(retry_after) if retry_after else None)
        if resp.status_code == 408:
            raise Timeout("provider timed out the request")
        if resp.status_code >= 500:
            raise ServerError(resp.status_code)
        if resp.status_code != 200:
            raise MalformedProviderResponse(f"unexpected HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedProviderResponse(f"cannot parse completion body: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedProviderResponse("completion content is not a string")
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0) or 0),
            completion_tokens=int(usage.get("completion_tokens", 0) or 0),
            latency_ms=latency_ms,
        )


class HttpEmbedder(Embedder):
    """OpenAI-compatible /embeddings adapter: one vector per whitespace token.

    Coarse by construction (each token embedded in isolation); local
    contextual models are out of scope here.
    """

    def __init__(self, config: HttpProviderConfig, transport: httpx.BaseTransport | None = None):
        self._config = config
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self.model_name = config.model

    def embed(self, text: str) -> EmbeddingMatrix:
        tokens = tuple(text.split())
        if not tokens:
            raise ValueError("cannot embed empty text")
        headers = {}
        key = self._config.api_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = self._client.post(
            self._config.endpoint.rstrip("/") + "/embeddings",
            json={"model": self._config.model, "input": list(tokens)},
            headers=headers,
        )
        if resp.status_code in (401, 403):
            raise AuthFailure(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code != 200:
            raise MalformedProviderResponse(f"unexpected HTTP {resp.status_code}")
        try:
            data = resp.json()["data"]
            vectors = np.array([row["embedding"] for row in data], dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedProviderResponse(f"cannot parse embeddings body: {exc}") from exc
        if vectors.shape[0] != len(tokens):
            raise MalformedProviderResponse("embedding count does not match token count")
        return EmbeddingMatrix(tokens=tokens, vectors=vectors)


class ScriptedChatProvider(ChatProvider):
    """Replays a fixed script of responses (or raises scripted exceptions)."""

    def __init__(self, script: Sequence[str | Exception], model_name: str = "scripted-chat"):
        self._script = list(script)
        self._cursor = 0
        self.model_name = model_name
        self.requests: list[ChatRequest] = []

    def chat(self, request: ChatRequest) -> ChatResponse:
        self.requests.append(request)
        if self._cursor >= len(self._script):
            raise AssertionError("scripted chat provider ran out of responses")
        item = self._script[self._cursor]
        self._cursor += 1
        if isinstance(item, Exception):
            raise item
        return ChatResponse(text=item, prompt_tokens=len(request.user_prompt.split()), completion_tokens=len(item.split()))


def _digest(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


class MockJudgeChat(ChatProvider):
    """Deterministic judge stand-in: Likert block derived from the prompt hash.

    Scores stay in 2..4 so refinement loops never stop early on a perfect
    overall score.
    """

    model_name = "mock-judge"

    def chat(self, request: ChatRequest) -> ChatResponse:
        digest = _digest(request.system_prompt + "\n" + request.user_prompt)
        scores = [2 + digest[i] % 3 for i in range(4)]
        tag = digest.hex()[:8]
        lines = [
            f"Automated critique {tag}: tighten wording and cover the remaining key claims.",
            "",
            f"Clarity: {scores[0]}",
            f"Accuracy: {scores[1]}",
            f"Coverage: {scores[2]}",
            f"Overall: {scores[3]}",
        ]
        text = "\n".join(lines)
        return ChatResponse(text=text, prompt_tokens=len(request.user_prompt.split()), completion_tokens=len(text.split()))


class MockSummarizerChat(ChatProvider):
    """Deterministic generator stand-in: echoes a mid-prompt excerpt.

    The excerpt shares vocabulary with the embedded document, so lexical
    metrics over mock output are non-degenerate; the hash suffix makes
    regenerations under a changed prompt differ byte-wise.
    """

    model_name = "mock-summarizer"

    def __init__(self, excerpt_words: int = 40):
        self._excerpt_words = excerpt_words

    def chat(self, request: ChatRequest) -> ChatResponse:
        words = request.user_prompt.split()
        mid = len(words) // 2
        excerpt = words[mid : mid + self._excerpt_words] or words[: self._excerpt_words]
        tag = _digest(request.system_prompt + "\n" + request.user_prompt).hex()[:6]
        text = " ".join(excerpt) + f" [v{tag}]"
        return ChatResponse(text=text, prompt_tokens=len(words), completion_tokens=len(excerpt) + 1)


class OneHotEmbedder(Embedder):
    """Distinct tokens map to orthogonal unit vectors, identical to identical.

    The token-to-axis assignment grows with first sight, so matrices from
    one embedder instance are mutually comparable.
    """

    model_name = "one-hot-mock"

    def __init__(self, dim: int = 512):
        self._dim = dim
        self._axes: dict[str, int] = {}

    def embed(self, text: str) -> EmbeddingMatrix:
        tokens = tuple(text.split())
        if not tokens:
            raise ValueError("cannot embed empty text")
        vectors = np.zeros((len(tokens), self._dim))
        for i, tok in enumerate(tokens):
            if tok not in self._axes:
                if len(self._axes) >= self._dim:
                    raise ValueError(f"one-hot vocabulary exceeded dim={self._dim}")
                self._axes[tok] = len(self._axes)
            vectors[i, self._axes[tok]] = 1.0
        return EmbeddingMatrix(tokens=tokens, vectors=vectors)


class ExactMatchNli(NliProvider):
    """Entailment 1 iff premise and hypothesis token-match, else neutral 1."""

    model_name = "exact-match-mock"

    def nli(self, premise: str, hypothesis: str) -> NliJudgment:
        if premise.split() == hypothesis.split():
            return NliJudgment(entailment=1.0, contradiction=0.0, neutral=0.0)
        return NliJudgment(entailment=0.0, contradiction=0.0, neutral=1.0)


class ScriptedNli(NliProvider):
    """Entailment looked up per (premise, hypothesis) pair; default neutral."""

    model_name = "scripted-nli"

    def __init__(self, table: dict[tuple[str, str], float], default_entailment: float = 0.0):
        self._table = dict(table)
        self._default = default_entailment

    def nli(self, premise: str, hypothesis: str) -> NliJudgment:
        e = self._table.get((premise, hypothesis), self._default)
        return NliJudgment(entailment=e, contradiction=0.0, neutral=1.0 - e)
