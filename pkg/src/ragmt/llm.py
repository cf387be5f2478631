"""Translation backends and the JSON ``{"translation": ...}`` response contract.

Backends:

``http_chat``
    POST ``{"model", "messages": [{"role": "user", "content": prompt}], "temperature"}``
    to ``endpoint``; the reply text is ``choices[0].message.content``. The API
    key, if any, is read from the environment variable named by
    ``api_key_env`` and sent as a bearer token.
``mock_echo``
    Answers with the source title unchanged.
``mock_copy_best``
    Answers with the target text of the shown example whose source is most
    chrF-similar to the title (earliest example on ties); with no examples
    it answers with the source title.
``mock_scripted``
    Looks up ``sha256(prompt text)`` in a JSONL file of
    ``{"prompt_hash": ..., "response": ...}`` records and returns the raw
    response verbatim, well-formed or not.

:func:`translate` never raises: transport and parse failures land in
:attr:`TranslationRecord.status` so batch runs keep going.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .metrics import chrf_sentence
from .prompting import RenderedPrompt

logger = logging.getLogger(__name__)

KINDS = ("http_chat", "mock_echo", "mock_copy_best", "mock_scripted")
OK, PARSE_FAILED, TRANSPORT_FAILED = "ok", "parse_failed", "transport_failed"


class TransportError(RuntimeError):
    pass


class TranslationParseError(ValueError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock_echo"
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 0.5
    parallelism: int = 1
    temperature: float = 0.0
    script: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "http_chat" and not (self.endpoint and self.model):
            raise ValueError("http_chat backend needs endpoint and model")
        if self.kind == "mock_scripted" and not self.script:
            raise ValueError("mock_scripted backend needs a script file")
        if self.max_retries < 0 or self.parallelism < 1:
            raise ValueError("max_retries must be >= 0 and parallelism >= 1")

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "BackendConfig":
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        unknown = set(obj) - set(known)
        if unknown:
            raise ValueError(f"unknown backend option(s): {', '.join(sorted(unknown))}")
        if known.get("script") and base_dir is not None:
            known["script"] = str((base_dir / known["script"]).resolve())
        return cls(**known)

    def to_json(self) -> dict:
        # key value never appears here, only the variable name
        return asdict(self)

    @property
    def is_mock(self) -> bool:
        return self.kind != "http_chat"


@dataclass(frozen=True)
class TranslationRecord:
    segment_index: int
    prompt: RenderedPrompt
    raw_response: str
    translation: str | None
    status: str
    attempts: int
    error: str | None = None


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_translation(raw: str) -> str:
    """Return the ``translation`` string of the first JSON object in ``raw``.

    Models like to wrap the object in prose, so everything before the first
    decodable ``{...}`` is skipped. The key is case-sensitive.
    """
    decoder = json.JSONDecoder()
    pos = raw.find("{")
    while pos >= 0:
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            pos = raw.find("{", pos + 1)
            continue
        if not isinstance(obj, dict):  # pragma: no cover - raw_decode at "{" yields a dict
            break
        if "translation" not in obj:
            raise TranslationParseError("JSON object has no 'translation' key")
        value = obj["translation"]
        if not isinstance(value, str):
            raise TranslationParseError(f"'translation' is {type(value).__name__}, not a string")
        return value
    raise TranslationParseError("no JSON object in response")


def _as_json(translation: str) -> str:
    return json.dumps({"translation": translation}, ensure_ascii=False)


def _mock_echo(prompt: RenderedPrompt) -> str:
    return _as_json(prompt.title)


def _mock_copy_best(prompt: RenderedPrompt) -> str:
    if not prompt.examples:
        return _as_json(prompt.title)
    best, best_score = prompt.examples[0], -1.0
    for ex in prompt.examples:
        score = chrf_sentence(ex.src_text, prompt.title)
        if score > best_score:
            best, best_score = ex, score
    return _as_json(best.tgt_text)


class _Scripted:
    def __init__(self, path):
        self.path = Path(path)
        self.responses = {}
        for n, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                self.responses[rec["prompt_hash"]] = rec["response"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{self.path}: line {n}: bad script record ({exc})") from None

    def __call__(self, prompt: RenderedPrompt) -> str:
        try:
            return self.responses[prompt_hash(prompt.text)]
        except KeyError:
            raise TransportError(f"no scripted response for prompt {prompt_hash(prompt.text)[:12]}") from None


class _HttpChat:
    def __init__(self, cfg: BackendConfig):
        self.cfg = cfg
        headers = {"Content-Type": "application/json"}
        if cfg.api_key_env:
            key = os.environ.get(cfg.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
            else:
                logger.warning("environment variable %s is not set; sending no API key", cfg.api_key_env)
        self.client = httpx.Client(timeout=cfg.timeout, headers=headers)

    def __call__(self, prompt: RenderedPrompt) -> str:
        body = {
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": self.cfg.temperature,
        }
        try:
            resp = self.client.post(self.cfg.endpoint, json=body)
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected chat response shape ({exc})") from exc

    def close(self):
        self.client.close()


Backend = Callable[[RenderedPrompt], str]


def make_backend(cfg: BackendConfig) -> Backend:
    if cfg.kind == "mock_echo":
        return _mock_echo
    if cfg.kind == "mock_copy_best":
        return _mock_copy_best
    if cfg.kind == "mock_scripted":
        return _Scripted(cfg.script)
    return _HttpChat(cfg)


def translate(prompt: RenderedPrompt, cfg: BackendConfig, backend: Backend | None = None,
              segment_index: int = 0, sleep: Callable[[float], None] = time.sleep) -> TranslationRecord:
    """Send ``prompt`` and parse the reply.

    Transport errors are retried up to ``cfg.max_retries`` times with
    exponential backoff. An unparseable reply gets one re-ask.
    """
    backend = backend or make_backend(cfg)
    attempts, transport_errors, parse_tries = 0, 0, 0
    raw = ""
    while True:
        attempts += 1
        try:
            raw = backend(prompt)
        except TransportError as exc:
            transport_errors += 1
            if transport_errors > cfg.max_retries:
                return TranslationRecord(segment_index, prompt, raw, None, TRANSPORT_FAILED, attempts, str(exc))
            if not cfg.is_mock:
                sleep(cfg.backoff * 2 ** (transport_errors - 1))
            continue
        try:
            return TranslationRecord(segment_index, prompt, raw, parse_translation(raw), OK, attempts)
        except TranslationParseError as exc:
            parse_tries += 1
            if parse_tries > 1:
                return TranslationRecord(segment_index, prompt, raw, None, PARSE_FAILED, attempts, str(exc))


def translate_batch(prompts: Sequence[RenderedPrompt], cfg: BackendConfig, backend: Backend | None = None) -> list[TranslationRecord]:
    """Translate in input order; http backends run up to ``cfg.parallelism`` requests at once."""
    backend = backend or make_backend(cfg)
    if cfg.is_mock or cfg.parallelism == 1 or len(prompts) < 2:
        return [translate(p, cfg, backend, i) for i, p in enumerate(prompts)]
    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        # map yields in submission order whatever the completion order
        return list(pool.map(lambda ip: translate(ip[1], cfg, backend, ip[0]), enumerate(prompts)))
