"""Language-model backends.

Two implementations share the ``complete(prompt, max_tokens, temperature)``
call shape: a scripted backend driven by first-match-wins rules (used by all
tests and the demo benchmark) and an HTTP backend speaking the common
chat-completion JSON contract.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Protocol

import requests

from ehc.errors import BackendError, ConfigError, ProtocolError

log = logging.getLogger(__name__)

API_KEY_ENV = "EHC_LLM_API_KEY"
MATCH_KINDS = ("hash", "substring", "regex")


class CompletionBackend(Protocol):
    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class Rule:
    """One script rule.

    ``match`` is ``"hash"`` (sha256 hex of the whole prompt), ``"substring"``
    or ``"regex"`` (``re.search`` with DOTALL). With ``expand`` set, a regex
    rule's response is a ``Match.expand`` template, so ``\\g<name>`` pulls
    captured text from the prompt into the reply.
    """

    match: str
    pattern: str
    response: str
    max_uses: Optional[int] = None
    expand: bool = False
    _regex: Optional[re.Pattern] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.match not in MATCH_KINDS:
            raise ConfigError(f"script rule match must be one of {MATCH_KINDS}, got {self.match!r}")
        if self.max_uses is not None and self.max_uses < 0:
            raise ConfigError("script rule max_uses must be non-negative")
        if self.match == "regex":
            try:
                self._regex = re.compile(self.pattern, re.DOTALL)
            except re.error as exc:
                raise ConfigError(f"bad regex {self.pattern!r}: {exc}") from exc
        elif self.expand:
            raise ConfigError("expand is only meaningful for regex rules")

    def apply(self, prompt: str) -> Optional[str]:
        """Response for ``prompt`` if the rule matches, else None."""
        if self.match == "hash":
            return self.response if prompt_hash(prompt) == self.pattern.lower() else None
        if self.match == "substring":
            return self.response if self.pattern in prompt else None
        m = self._regex.search(prompt)
        if m is None:
            return None
        return m.expand(self.response) if self.expand else self.response


@dataclass
class Script:
    rules: list[Rule] = field(default_factory=list)
    default_response: str = ""

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Script":
        try:
            rules = [Rule(**r) for r in data.get("rules", [])]
        except TypeError as exc:
            raise ConfigError(f"malformed script rule: {exc}") from exc
        return cls(rules=rules, default_response=data.get("default_response", ""))

    @classmethod
    def from_file(cls, path: str | Path) -> "Script":
        try:
            data = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read script {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"script {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def complete_scripted(script: Script, prompt: str, uses: Optional[list[int]] = None) -> str:
    """First matching, non-exhausted rule wins; otherwise the default response.

    ``uses`` holds per-rule use counts and is updated in place when given.
    """
    for i, rule in enumerate(script.rules):
        if uses is not None and rule.max_uses is not None and uses[i] >= rule.max_uses:
            continue
        reply = rule.apply(prompt)
        if reply is not None:
            if uses is not None:
                uses[i] += 1
            return reply
    return script.default_response


class ScriptedBackend:
    """Deterministic backend for tests. ``calls`` records every (prompt, reply)."""

    def __init__(self, script: Script | dict | list[Rule], default_response: str = ""):
        if isinstance(script, dict):
            script = Script.from_dict(script)
        elif isinstance(script, list):
            script = Script(rules=script, default_response=default_response)
        self.script = script
        self.calls: list[tuple[str, str]] = []
        self._uses = [0] * len(script.rules)
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        return cls(Script.from_file(path))

    def complete(self, prompt: str, max_tokens: int = 512, temperature: float = 0.0) -> str:
        with self._lock:
            reply = complete_scripted(self.script, prompt, self._uses)
            self.calls.append((prompt, reply))
        return reply


@dataclass
class EndpointConfig:
    endpoint: str
    model: str = ""
    retries: int = 2
    backoff: float = 0.5
    timeout: float = 60.0
    trace: bool = False
    api_key: Optional[str] = None

    def key(self) -> Optional[str]:
        return self.api_key if self.api_key is not None else os.environ.get(API_KEY_ENV)


def _post_json(cfg: EndpointConfig, payload: dict, session: Optional[requests.Session] = None) -> Any:
    """POST with retry on transport errors, 429 and 5xx. Returns decoded JSON."""
    headers = {"Content-Type": "application/json"}
    key = cfg.key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    post = session.post if session is not None else requests.post
    attempts = cfg.retries + 1
    last = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(cfg.backoff * 2 ** (attempt - 1))
        if cfg.trace:
            log.info("request -> %s (attempt %d): %s", cfg.endpoint, attempt + 1, json.dumps(payload))
        try:
            resp = post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last = BackendError(f"transport error talking to {cfg.endpoint}: {exc}")
            continue
        if cfg.trace:
            log.info("response <- %s %d: %s", cfg.endpoint, resp.status_code, resp.text[:2000])
        if 200 <= resp.status_code < 300:
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"response body is not JSON: {resp.text[:200]!r}") from exc
        last = BackendError(
            f"HTTP {resp.status_code} from {cfg.endpoint}: {resp.text[:200]}",
            status=resp.status_code,
            body=resp.text[:200],
        )
        if resp.status_code < 500 and resp.status_code != 429:
            break
    raise last


def complete_http(
    cfg: EndpointConfig,
    prompt: str,
    max_tokens: int = 512,
    temperature: float = 0.0,
    session: Optional[requests.Session] = None,
) -> str:
    payload = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt}],
        "max_tokens": max_tokens,
        "temperature": temperature,
    }
    data = _post_json(cfg, payload, session)
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"unexpected completion shape: {json.dumps(data)[:200]}") from exc
    if not isinstance(content, str):
        raise ProtocolError("completion content is not a string")
    return content


class HttpBackend:
    def __init__(self, cfg: EndpointConfig, max_tokens: int = 512, temperature: float = 0.0):
        if not cfg.endpoint:
            raise ConfigError("llm.endpoint must be set for the http backend")
        self.cfg = cfg
        self.max_tokens = max_tokens
        self.temperature = temperature
        self._session = requests.Session()

    def complete(self, prompt: str, max_tokens: Optional[int] = None, temperature: Optional[float] = None) -> str:
        return complete_http(
            self.cfg,
            prompt,
            self.max_tokens if max_tokens is None else max_tokens,
            self.temperature if temperature is None else temperature,
            session=self._session,
        )


class HttpEmbedder:
    """External embedder using the embeddings variant of the same HTTP contract.

    Request: ``{"model": ..., "input": text}``; response: ``{"data": [{"embedding": [...]}]}``.
    """

    def __init__(self, endpoint: str, model: str = "", dim: int = 256, **kwargs):
        self.cfg = EndpointConfig(endpoint=endpoint, model=model, **kwargs)
        self.dim = dim

    def embed(self, text: str) -> tuple[float, ...]:
        data = _post_json(self.cfg, {"model": self.cfg.model, "input": text})
        try:
            vec = tuple(float(x) for x in data["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError(f"unexpected embedding shape: {json.dumps(data)[:200]}") from exc
        if len(vec) != self.dim:
            raise ProtocolError(f"embedding has dim {len(vec)}, expected {self.dim}")
        return vec
