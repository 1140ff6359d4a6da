"""Model backends: scripted (in-memory), replay (recorded transcript) and live
(JSON-over-HTTP chat completions).

Every backend exposes ``label``, ``settings``, ``deterministic`` and
``complete(role, prompt) -> Completion``, and is safe to call from several
threads at once.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import httpx

from ..errors import BackendError

log = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = "LLMSAP_API_KEY"
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class BackendSettings:
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout: float = 120.0
    retry_budget: int = 2
    transport_retries: int = 2
    backoff: float = 1.0
    max_in_flight: int = 4


@dataclass(frozen=True)
class Completion:
    text: str
    timestamp: str


class Backend(Protocol):
    label: str
    settings: BackendSettings
    deterministic: bool

    def complete(self, role: str, prompt: str) -> Completion: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TranscriptRecord:
    round: int
    role: str
    prompt_hash: str
    response: str
    timestamp: str
    backend_label: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)


class Transcript:
    """Append-only exchange log; serializes to JSON Lines."""

    def __init__(self, records: Iterable[TranscriptRecord] = ()):
        self._records = list(records)
        self._lock = threading.Lock()

    def append(self, record: TranscriptRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> list[TranscriptRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def read_transcript(text: str) -> list[TranscriptRecord]:
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(TranscriptRecord(**json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise BackendError(f"transcript line {n}: {exc}") from None
    return out


def load_transcript(path: str | Path) -> list[TranscriptRecord]:
    return read_transcript(Path(path).read_text(encoding="utf-8"))


Responder = Callable[[str, str], str]


class ScriptedBackend:
    """Canned replies, either a fixed sequence or a ``(role, prompt) -> text`` callable.

    Timestamps count whole seconds from the epoch so runs stay reproducible.
    """

    deterministic = True

    def __init__(
        self,
        replies: Sequence[str] | Responder,
        label: str = "scripted",
        settings: BackendSettings | None = None,
    ):
        self.label = label
        self.settings = settings or BackendSettings()
        self._responder = replies if callable(replies) else None
        self._queue = deque([] if callable(replies) else replies)
        self._lock = threading.Lock()
        self.prompts: list[tuple[str, str]] = []

    def complete(self, role: str, prompt: str) -> Completion:
        with self._lock:
            n = len(self.prompts)
            self.prompts.append((role, prompt))
            if self._responder is not None:
                text = self._responder(role, prompt)
            elif self._queue:
                text = self._queue.popleft()
            else:
                raise BackendError(f"{self.label}: script exhausted after {n} replies")
        return Completion(text, (_EPOCH + timedelta(seconds=n)).isoformat())

    @property
    def call_count(self) -> int:
        return len(self.prompts)


class ReplayBackend:
    """Serves recorded responses by ``(role, prompt_hash)`` in recorded order.

    Replayed completions keep the recorded timestamp, so a replayed run writes
    a transcript identical to any other replay of the same recording.
    """

    deterministic = True

    def __init__(
        self,
        records: Iterable[TranscriptRecord],
        label: str = "replay",
        settings: BackendSettings | None = None,
    ):
        self.label = label
        self.settings = settings or BackendSettings()
        self._lock = threading.Lock()
        self._queues: dict[tuple[str, str], deque[TranscriptRecord]] = {}
        for rec in records:
            self._queues.setdefault((rec.role, rec.prompt_hash), deque()).append(rec)

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> ReplayBackend:
        return cls(load_transcript(path), **kw)

    @classmethod
    def from_run_dir(cls, run_dir: str | Path, **kw) -> ReplayBackend:
        paths = sorted(Path(run_dir).glob("*/transcript.jsonl"))
        if not paths:
            raise BackendError(f"no transcripts under {run_dir}")
        records: list[TranscriptRecord] = []
        for p in paths:
            records.extend(load_transcript(p))
        return cls(records, **kw)

    def complete(self, role: str, prompt: str) -> Completion:
        key = (role, prompt_hash(prompt))
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise BackendError(f"{self.label}: no recorded {role} reply for prompt {key[1][:12]}")
            rec = queue.popleft()
        return Completion(rec.response, rec.timestamp)


class LiveBackend:
    """Chat-completion client: POSTs ``{model, messages, temperature, max_tokens}``.

    The bearer token is read from the environment variable named by
    ``token_env`` at call time. Transient failures (transport errors, 429,
    5xx) are retried ``settings.transport_retries`` times.
    """

    deterministic = False

    def __init__(
        self,
        url: str,
        model: str,
        token_env: str = DEFAULT_TOKEN_ENV,
        settings: BackendSettings | None = None,
        label: str | None = None,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url
        self.model = model
        self.token_env = token_env
        self.settings = settings or BackendSettings()
        self.label = label or f"live:{model}"
        self._client = client or httpx.Client(timeout=self.settings.timeout)
        self._gate = threading.BoundedSemaphore(max(1, self.settings.max_in_flight))
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _body(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.settings.temperature,
            "max_tokens": self.settings.max_tokens,
        }

    def complete(self, role: str, prompt: str) -> Completion:
        last: str = ""
        for attempt in range(self.settings.transport_retries + 1):
            if attempt:
                self._sleep(self.settings.backoff * 2 ** (attempt - 1))
            try:
                with self._gate:
                    resp = self._client.post(self.url, json=self._body(prompt), headers=self._headers())
            except httpx.HTTPError as exc:
                last = f"transport error: {exc}"
                log.warning("%s %s attempt %d: %s", self.label, role, attempt + 1, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("%s %s attempt %d: %s", self.label, role, attempt + 1, last)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"{self.label}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise BackendError(f"{self.label}: malformed chat-completion response") from None
            if not isinstance(text, str):
                raise BackendError(f"{self.label}: message content is not text")
            return Completion(text, datetime.now(timezone.utc).isoformat())
        raise BackendError(f"{self.label}: giving up after {self.settings.transport_retries + 1} attempts ({last})")


def backend_from_config(cfg: dict, base_dir: Path | None = None) -> Backend:
    """Build a backend from a manifest entry.

    ``{"kind": "replay", "transcript": path}`` or ``{"kind": "replay", "run_dir": path}``;
    ``{"kind": "live", "url": ..., "model": ..., "token_env": ...}``;
    ``{"kind": "scripted", "replies": [...]}``. Optional ``settings`` and ``label``.
    """
    base_dir = base_dir or Path.cwd()
    kind = cfg.get("kind")
    known = {f for f in BackendSettings.__dataclass_fields__}
    raw_settings = cfg.get("settings", {})
    unknown = set(raw_settings) - known
    if unknown:
        raise BackendError(f"unknown backend settings {sorted(unknown)}")
    settings = BackendSettings(**raw_settings)
    label = cfg.get("label")

    def path(key: str) -> Path:
        p = Path(cfg[key])
        return p if p.is_absolute() else base_dir / p

    if kind == "replay":
        kw = {"settings": settings, "label": label or "replay"}
        if "transcript" in cfg:
            return ReplayBackend.from_file(path("transcript"), **kw)
        if "run_dir" in cfg:
            return ReplayBackend.from_run_dir(path("run_dir"), **kw)
        raise BackendError("replay backend needs 'transcript' or 'run_dir'")
    if kind == "live":
        for key in ("url", "model"):
            if key not in cfg:
                raise BackendError(f"live backend needs {key!r}")
        return LiveBackend(
            cfg["url"], cfg["model"], cfg.get("token_env", DEFAULT_TOKEN_ENV), settings, label
        )
    if kind == "scripted":
        return ScriptedBackend(list(cfg.get("replies", [])), label or "scripted", settings)
    raise BackendError(f"unknown backend kind {kind!r}")
