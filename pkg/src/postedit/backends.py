"""Backend contracts for the generator, programmer, and interpreter roles.

Remote implementations speak a chat-completions-style JSON schema
(``POST {endpoint}/chat/completions``) or the programmer contract
(``POST {endpoint}/predict`` with ``{"input": ...}`` returning
``{"output": ...}``; ``GET /healthz`` for liveness).  Local
implementations (NoisyGenerator, OracleProgrammer, DirectEditInterpreter,
ReplayBackend) are deterministic and fully offline.

The programmer's input wire format is frozen: the instance input and the
current output joined by the literal separator token ``<sep>`` with single
spaces around it.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import httpx

from .actions import (
    ActionScript,
    apply_actions,
    detokenize,
    oracle_actions,
    parse_script,
    serialize_script,
    tokenize,
)
from .errors import (
    BackendError,
    BudgetExceeded,
    MalformedResponse,
    PositionOutOfRange,
    ReplayMiss,
    SkippedEdit,
    TokenMismatch,
    TransportError,
)
from .prompts import RenderedPrompt

SEP_TOKEN = "<sep>"
SEP = f" {SEP_TOKEN} "


def join_for_programmer(x: str, y_i: str) -> str:
    return f"{x}{SEP}{y_i}"


def derive_seed(seed: int, key) -> int:
    """Mix a run seed with a per-item key, reproducibly across runs.

    Integer keys are XORed in directly; other keys go through SHA-256
    first (Python's builtin ``hash`` is salted per process and never used).
    """
    if isinstance(key, int) and not isinstance(key, bool):
        return seed ^ key
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return seed ^ int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = ""
    model: str = ""
    timeout: float = 30.0
    max_retries: int = 3
    retry_base_delay_ms: float = 250.0
    max_concurrent: int = 4
    credential_env: str | None = None
    max_requests: int | None = None
    temperature: float = 0.0
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0: {self.max_retries}")
        if self.max_concurrent < 1:
            raise ValueError(f"max_concurrent must be >= 1: {self.max_concurrent}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive: {self.timeout}")


@dataclass(frozen=True)
class BackendResponse:
    text: str
    latency_ms: float
    usage: Mapping | None = None


class Generator(Protocol):
    def generate(self, prompt: RenderedPrompt) -> str: ...


class Programmer(Protocol):
    def predict_actions(self, x: str, y_i: str) -> ActionScript: ...


class Interpreter(Protocol):
    def edit(self, prompt: RenderedPrompt, fallback: tuple[str, ActionScript]) -> str: ...


# --- remote clients --------------------------------------------------------


class _HttpCaller:
    """Shared POST machinery: budget cap, concurrency limit, retries.

    Each HTTP request (including retries) consumes budget.  The semaphore
    is held only while a request is in flight; backoff sleeps happen
    outside it.  Backoff is exponential with jitter:
    base * 2^attempt * uniform(0.5, 1.0) milliseconds.
    """

    def __init__(self, config: BackendConfig):
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_concurrent)
        self._lock = threading.Lock()
        self._requests_made = 0
        self._client = httpx.Client(timeout=config.timeout)

    def _headers(self) -> dict[str, str]:
        headers = {}
        if self.config.credential_env:
            credential = os.environ.get(self.config.credential_env)
            if credential:
                headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _charge(self) -> None:
        with self._lock:
            cap = self.config.max_requests
            if cap is not None and self._requests_made >= cap:
                raise BudgetExceeded(f"request cap {cap} reached")
            self._requests_made += 1

    def post_json(self, path: str, payload: dict) -> tuple[dict, float]:
        url = self.config.endpoint.rstrip("/") + path
        attempts = self.config.max_retries + 1
        failure = "no request made"
        for attempt in range(attempts):
            self._charge()
            started = time.monotonic()
            try:
                with self._semaphore:
                    response = self._client.post(url, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                failure = f"transport failure: {exc}"
            else:
                latency_ms = (time.monotonic() - started) * 1000.0
                if response.status_code == 429 or response.status_code >= 500:
                    failure = f"server returned {response.status_code}"
                elif response.status_code >= 400:
                    raise TransportError(
                        f"{url} returned {response.status_code}: {response.text[:200]}"
                    )
                else:
                    try:
                        return response.json(), latency_ms
                    except ValueError as exc:
                        raise MalformedResponse(f"{url} returned non-JSON body") from exc
            if attempt + 1 < attempts:
                delay_ms = (
                    self.config.retry_base_delay_ms
                    * (2**attempt)
                    * (0.5 + random.random() * 0.5)
                )
                time.sleep(delay_ms / 1000.0)
        raise TransportError(f"{url} failed after {attempts} attempts: {failure}")


class _ChatBackend:
    """Chat-completions client shared by remote generator and interpreter."""

    def __init__(self, config: BackendConfig):
        self._caller = _HttpCaller(config)
        self.backend_id = f"remote-chat({config.model or 'default'})"

    def complete(self, prompt: RenderedPrompt) -> BackendResponse:
        config = self._caller.config
        payload = {
            "model": config.model,
            "messages": [{"role": r, "content": c} for r, c in prompt.messages],
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        }
        body, latency_ms = self._caller.post_json("/chat/completions", payload)
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected chat schema: {exc!r}") from exc
        if not isinstance(text, str):
            raise MalformedResponse("message content is not a string")
        return BackendResponse(text=text, latency_ms=latency_ms, usage=body.get("usage"))


class RemoteGenerator(_ChatBackend):
    def generate(self, prompt: RenderedPrompt) -> str:
        return self.complete(prompt).text


class RemoteInterpreter(_ChatBackend):
    def edit(self, prompt: RenderedPrompt, fallback: tuple[str, ActionScript]) -> str:
        return self.complete(prompt).text


class RemoteProgrammer:
    def __init__(self, config: BackendConfig):
        self._caller = _HttpCaller(config)
        self.backend_id = f"remote-programmer({config.model or 'default'})"

    def predict_actions(self, x: str, y_i: str) -> ActionScript:
        payload = {"input": join_for_programmer(x, y_i)}
        body, _ = self._caller.post_json("/predict", payload)
        output = body.get("output") if isinstance(body, dict) else None
        if not isinstance(output, str):
            raise MalformedResponse('predict response lacks a string "output"')
        return parse_script(output)

    def healthy(self) -> bool:
        url = self._caller.config.endpoint.rstrip("/") + "/healthz"
        try:
            return httpx.get(url, timeout=self._caller.config.timeout).status_code == 200
        except httpx.HTTPError:
            return False


# --- deterministic local backends ------------------------------------------


class NoisyGenerator:
    """Returns each instance's paired reference corrupted at a noise rate.

    Per reference token, drawing from ``random.Random(derive_seed(seed, x))``:
    one ``random()`` drop draw; survivors one ``random()`` swap draw; a swap
    draws ``randrange(len(vocabulary))`` over the donor vocabulary (sorted
    union of all reference tokens).  Seeding per instance keeps results
    independent of call order under concurrency.
    """

    def __init__(self, references: Mapping[str, str], noise: float, seed: int = 0):
        if not 0.0 <= noise <= 1.0:
            raise ValueError(f"noise must be in [0, 1]: {noise}")
        self._references = dict(references)
        self._vocabulary = sorted(
            {t for ref in self._references.values() for t in tokenize(ref)}
        )
        self.noise = noise
        self.seed = seed
        self.backend_id = f"noisy(noise={noise},seed={seed})"

    def generate(self, prompt: RenderedPrompt) -> str:
        x = prompt.query
        if x is None or x not in self._references:
            raise BackendError(f"no reference paired with prompt query {x!r}")
        rng = random.Random(derive_seed(self.seed, x))
        out: list[str] = []
        for token in tokenize(self._references[x]):
            if rng.random() < self.noise:
                continue
            if rng.random() < self.noise and self._vocabulary:
                out.append(self._vocabulary[rng.randrange(len(self._vocabulary))])
            else:
                out.append(token)
        return detokenize(out)


class OracleProgrammer:
    """Predicts the exact script from the instance's reference."""

    backend_id = "oracle-programmer"

    def __init__(self, references: Mapping[str, str]):
        self._references = dict(references)

    def predict_actions(self, x: str, y_i: str) -> ActionScript:
        if x not in self._references:
            raise BackendError(f"no reference paired with input {x!r}")
        return oracle_actions(tokenize(y_i), tokenize(self._references[x]))


class DirectEditInterpreter:
    """Applies the script positionally instead of rewriting via a model."""

    backend_id = "direct-edit"

    def edit(self, prompt: RenderedPrompt, fallback: tuple[str, ActionScript]) -> str:
        y_i, script = fallback
        try:
            return detokenize(apply_actions(tokenize(y_i), script))
        except (PositionOutOfRange, TokenMismatch) as exc:
            raise SkippedEdit(str(exc)) from exc


# --- replay and recording ---------------------------------------------------


def prompt_fingerprint(prompt: RenderedPrompt) -> str:
    payload = json.dumps(
        [[role, content] for role, content in prompt.messages],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def text_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class ReplayBackend:
    """Serves canned responses from a JSON-lines file of
    ``{"prompt_sha256": ..., "response_text": ...}`` records.

    One instance can stand in for all three roles; generator/interpreter
    calls are keyed by the prompt fingerprint, programmer calls by the
    fingerprint of the joined ``x <sep> y`` input.
    """

    def __init__(self, path):
        self._responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                self._responses[record["prompt_sha256"]] = record["response_text"]
        self.backend_id = f"replay({os.path.basename(str(path))})"

    def _lookup(self, key: str) -> str:
        if key not in self._responses:
            raise ReplayMiss(f"no recorded response for {key}")
        return self._responses[key]

    def generate(self, prompt: RenderedPrompt) -> str:
        return self._lookup(prompt_fingerprint(prompt))

    def edit(self, prompt: RenderedPrompt, fallback: tuple[str, ActionScript]) -> str:
        return self._lookup(prompt_fingerprint(prompt))

    def predict_actions(self, x: str, y_i: str) -> ActionScript:
        return parse_script(self._lookup(text_fingerprint(join_for_programmer(x, y_i))))


class Recorder:
    """Wraps a backend trio and captures every exchange for later replay."""

    def __init__(self, generator=None, programmer=None, interpreter=None):
        self._generator = generator
        self._programmer = programmer
        self._interpreter = interpreter
        self._records: dict[str, str] = {}
        self._lock = threading.Lock()
        self.backend_id = "recorder"

    def _note(self, key: str, text: str) -> None:
        with self._lock:
            self._records[key] = text

    def generate(self, prompt: RenderedPrompt) -> str:
        text = self._generator.generate(prompt)
        self._note(prompt_fingerprint(prompt), text)
        return text

    def predict_actions(self, x: str, y_i: str) -> ActionScript:
        script = self._programmer.predict_actions(x, y_i)
        self._note(
            text_fingerprint(join_for_programmer(x, y_i)),
            serialize_script(script, with_positions=True),
        )
        return script

    def edit(self, prompt: RenderedPrompt, fallback: tuple[str, ActionScript]) -> str:
        text = self._interpreter.edit(prompt, fallback)
        self._note(prompt_fingerprint(prompt), text)
        return text

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key in sorted(self._records):
                record = {"prompt_sha256": key, "response_text": self._records[key]}
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


@dataclass(frozen=True)
class BackendTrio:
    """The three role implementations a pipeline run needs."""

    generator: Generator
    programmer: Programmer
    interpreter: Interpreter
