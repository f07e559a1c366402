"""Dispatch of rendered prompts to a model client.

The gateway owns the only shared state in the refinement stages: a bounded
in-flight semaphore and the record/replay store. Three modes cover the
lifecycle: ``live`` calls the client every time, ``record`` calls once and
persists request-hash to response pairs, ``replay`` answers purely from the
store and never touches the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence
from urllib.parse import quote

from .parsing import MalformedResponse
from .prompts import PromptRequest

logger = logging.getLogger(__name__)

MODES = ("live", "record", "replay")


class GatewayError(Exception):
    """Base class for dispatch failures."""


class TransportError(GatewayError):
    """A retryable delivery failure (connection, timeout, throttling, 5xx)."""


class TransportExhaustedError(GatewayError):
    """All retry attempts failed."""


class ModelRefusalError(GatewayError):
    """The service rejected the request for non-transport reasons; retrying
    the same bytes will not help."""


class ReplayMissError(GatewayError):
    """Replay mode had no stored response for the request."""

    def __init__(self, request_hash: str) -> None:
        super().__init__(f"no recorded response for request hash {request_hash}")
        self.request_hash = request_hash


class ModelClient(Protocol):
    """Anything that can complete a (system, user, optional image) exchange."""

    def complete(self, system: str, user: str, image: str | None = None) -> str:
        ...


@dataclass
class GatewayPolicy:
    mode: str = "replay"
    max_in_flight: int = 4
    max_retries: int = 3
    backoff_initial: float = 0.5
    backoff_multiplier: float = 2.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.backoff_initial < 0 or self.backoff_multiplier < 1:
            raise ValueError("backoff must be non-negative with multiplier >= 1")


def request_hash(req: PromptRequest) -> str:
    """Stable content hash of everything that determines a model reply."""
    payload = json.dumps(
        [req.kind, req.system, req.user, req.image or ""],
        ensure_ascii=True,
    )
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


class ReplayStore:
    """Append-only JSONL store of request-hash to response-text pairs.

    Re-recording a request appends a new line; on load the last entry wins,
    so corrections shadow stale responses without rewriting history.
    """

    def __init__(self, path: str | os.PathLike) -> None:
        self.path = os.fspath(path)
        self._lock = threading.Lock()
        self._responses: dict[str, str] = {}
        if os.path.exists(self.path):
            with open(self.path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                        self._responses[obj["hash"]] = obj["response"]
                    except (json.JSONDecodeError, KeyError, TypeError):
                        logger.warning("%s:%d: skipping unreadable store line", self.path, line_no)

    def __len__(self) -> int:
        return len(self._responses)

    def get(self, key: str) -> str | None:
        with self._lock:
            return self._responses.get(key)

    def put(self, key: str, response: str) -> None:
        line = json.dumps({"hash": key, "response": response}, ensure_ascii=False) + "\n"
        with self._lock:
            self._responses[key] = response
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)


class Gateway:
    """Mode-aware dispatcher with bounded concurrency and retries."""

    def __init__(
        self,
        client: ModelClient | None,
        policy: GatewayPolicy,
        store: ReplayStore | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if policy.mode in ("record", "replay") and store is None:
            raise ValueError(f"{policy.mode} mode requires a replay store")
        if policy.mode in ("live", "record") and client is None:
            raise ValueError(f"{policy.mode} mode requires a model client")
        self.client = client
        self.policy = policy
        self.store = store
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(policy.max_in_flight)

    def dispatch(self, req: PromptRequest, force_refresh: bool = False) -> str:
        """Resolve one request to raw response text.

        ``force_refresh`` makes record mode skip its cache and re-ask the
        client (the fresh response shadows the old one in the store); replay
        mode ignores it, since replay never performs I/O.
        """
        key = request_hash(req)
        if self.policy.mode == "replay":
            assert self.store is not None
            cached = self.store.get(key)
            if cached is None:
                raise ReplayMissError(key)
            return cached
        if self.policy.mode == "record" and not force_refresh:
            assert self.store is not None
            cached = self.store.get(key)
            if cached is not None:
                return cached
        text = self._call_with_retries(req)
        if self.policy.mode == "record":
            assert self.store is not None
            self.store.put(key, text)
        return text

    def _call_with_retries(self, req: PromptRequest) -> str:
        assert self.client is not None
        attempts = self.policy.max_retries + 1
        delay = self.policy.backoff_initial
        last: TransportError | None = None
        with self._slots:
            for attempt in range(1, attempts + 1):
                try:
                    return self.client.complete(req.system, req.user, req.image)
                except TransportError as exc:
                    last = exc
                    if attempt < attempts:
                        logger.warning(
                            "transport failure on attempt %d/%d (%s); retrying in %.2fs",
                            attempt, attempts, exc, delay,
                        )
                        self._sleep(delay)
                        delay *= self.policy.backoff_multiplier
        raise TransportExhaustedError(
            f"gave up after {attempts} attempts: {last}"
        ) from last

    def dispatch_many(self, reqs: Sequence[PromptRequest]) -> list[str | GatewayError]:
        """Dispatch a batch concurrently; results keep request order.

        Failures come back in-place as exception objects so one bad request
        cannot sink the batch.
        """
        def run(req: PromptRequest):
            try:
                return self.dispatch(req)
            except GatewayError as exc:
                return exc

        if not reqs:
            return []
        workers = min(len(reqs), max(self.policy.max_in_flight, 1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, reqs))

    def request_parsed(self, req: PromptRequest, parser: Callable[[str], object]):
        """Dispatch and parse, retrying a malformed reply once.

        The retry re-sends identical bytes. In record mode it bypasses the
        cache so the model gets a second chance; in replay mode the stored
        text is all there is, so a malformed recording fails straight away.
        """
        text = self.dispatch(req)
        try:
            return parser(text)
        except MalformedResponse:
            if self.policy.mode == "replay":
                raise
            text = self.dispatch(req, force_refresh=True)
            return parser(text)


class StubModelClient:
    """Deterministic in-process client for demos and tests.

    ``handler`` maps (system, user, image) to response text; the stub also
    counts concurrent occupancy so concurrency bounds can be observed.
    """

    def __init__(self, handler: Callable[[str, str, str | None], str]) -> None:
        self.handler = handler
        self.calls = 0
        self.max_concurrent = 0
        self._active = 0
        self._lock = threading.Lock()

    def complete(self, system: str, user: str, image: str | None = None) -> str:
        with self._lock:
            self.calls += 1
            self._active += 1
            self.max_concurrent = max(self.max_concurrent, self._active)
        try:
            return self.handler(system, user, image)
        finally:
            with self._lock:
                self._active -= 1


class HttpModelClient:
    """Chat-completions HTTP client.

    The API key is read from the environment variable named in configuration
    at call time; it is never stored in files this package writes. An image
    reference is attached as a file URL content part when present.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "KULTUR_API_KEY",
        timeout: float = 120.0,
        session=None,
        file_url_base: str = "https://commons.wikimedia.org/wiki/Special:FilePath/",
    ) -> None:
        import requests

        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.session = session or requests.Session()
        self.file_url_base = file_url_base

    def _image_url(self, title: str) -> str:
        name = title[5:] if title.startswith("File:") else title
        return self.file_url_base + quote(name.replace(" ", "_"))

    def complete(self, system: str, user: str, image: str | None = None) -> str:
        import requests

        key = os.environ.get(self.api_key_env)
        if not key:
            raise ModelRefusalError(
                f"API key environment variable {self.api_key_env} is not set"
            )
        content: object = user
        if image:
            content = [
                {"type": "text", "text": user},
                {"type": "image_url", "image_url": {"url": self._image_url(image)}},
            ]
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
        }
        try:
            resp = self.session.post(
                f"{self.endpoint}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ModelRefusalError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ModelRefusalError(f"unexpected response shape: {exc}") from exc


def scripted_responses(mapping: dict[str, str], default: str | None = None) -> Callable:
    """Handler factory for :class:`StubModelClient`: route by substring of the
    user text, first match wins."""
    items = list(mapping.items())

    def handler(system: str, user: str, image: str | None = None) -> str:
        for needle, response in items:
            if needle in user:
                return response
        if default is not None:
            return default
        raise TransportError(f"no scripted response matches user text: {user[:80]!r}")

    return handler


_FIELD_LINE = re.compile(r"^(Original Question|Original Answer|Question|Answer|Correct Answer):[ \t]*(.*)$", re.MULTILINE)


def dry_run_handler(system: str, user: str, image: str | None = None) -> str:
    """Offline stand-in for a model: answer every prompt kind with a
    deterministic, well-formed response derived from the prompt itself.

    Useful for pipeline rehearsals and demos where no endpoint is available.
    Configure a client with an endpoint starting with ``stub:`` to get it.
    """
    fields = {m.group(1): m.group(2).strip() for m in _FIELD_LINE.finditer(user)}
    question = fields.get("Original Question") or fields.get("Question") or ""
    answer = fields.get("Original Answer") or fields.get("Answer") or ""

    if "Evaluate this VQA sample" in user:
        return "MATCH: True\nISSUE: None\nEXPLANATION: No mismatch found."
    if "Evaluate this MCQ sample" in user:
        return (
            "MATCH: True\nCULTURALLY_RELEVANT: True\nISSUE: None\n"
            "EXPLANATION: No mismatch found."
        )
    if "Create a multiple-choice question" in user:
        return (
            f"Q: {question}\n"
            f"A) {answer}\n"
            f"B) {answer} (as sometimes claimed)\n"
            f"C) {answer} (in an older account)\n"
            f"D) {answer} (according to legend)\n"
            "Correct: A\n"
            "Explanation: Restates the source answer."
        )
    if "Create a true/false item" in user:
        return f"Statement: {answer}\nAnswer: True\nExplanation: Restates the source answer."
    if "reformulated question" in user:
        return f"Q: {question}\nA: {answer}"
    raise ModelRefusalError("dry-run model cannot infer the request kind")
