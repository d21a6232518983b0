"""Model clients: a fixture-backed mock and an HTTP chat-completion client."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Dict, Optional, Protocol

import httpx

from ..script import ProofScript
from .prompt import NoProofFound, Prompt, extract_proof

log = logging.getLogger(__name__)

ENV_BASE_URL = "PROOFMEND_MODEL_BASE_URL"
ENV_MODEL = "PROOFMEND_MODEL_NAME"
ENV_API_KEY = "PROOFMEND_API_KEY"


class ModelError(Exception):
    pass


class ModelTimeout(ModelError):
    pass


class RemoteError(ModelError):
    def __init__(self, status: int, body: str = "") -> None:
        super().__init__(f"model endpoint returned HTTP {status}: {body[:200]}")
        self.status = status


class FixtureMissing(ModelError):
    pass


@dataclass(frozen=True)
class ModelReply:
    raw: str
    extracted: Optional[ProofScript] = None

    @classmethod
    def from_text(cls, raw: str) -> "ModelReply":
        try:
            return cls(raw, extract_proof(raw))
        except NoProofFound:
            return cls(raw, None)


class ModelClient(Protocol):
    def complete(self, prompt: Prompt, temperature: Optional[float] = None,
                 max_tokens: int = 2048) -> ModelReply:
        ...


class MockModelClient:
    """Returns the stored reply for the prompt's theorem name."""

    def __init__(self, replies: Dict[str, str]) -> None:
        self.replies = dict(replies)
        self.calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "MockModelClient":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def complete(self, prompt: Prompt, temperature: Optional[float] = None,
                 max_tokens: int = 2048) -> ModelReply:
        with self._lock:
            self.calls += 1
        try:
            raw = self.replies[prompt.name]
        except KeyError:
            raise FixtureMissing(f"no recorded reply for theorem {prompt.name!r}") from None
        return ModelReply.from_text(raw)


class ChatCompletionClient:
    """One chat-completion round trip per call against an OpenAI-style endpoint."""

    def __init__(self, base_url: str, model: str, api_key: Optional[str] = None, *,
                 timeout: float = 120.0, retries: int = 2, backoff: float = 1.0,
                 max_in_flight: int = 4, transport: Optional[httpx.BaseTransport] = None) -> None:
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, **kwargs) -> "ChatCompletionClient":
        base_url = os.environ.get(ENV_BASE_URL)
        model = os.environ.get(ENV_MODEL)
        if not base_url or not model:
            raise ModelError(f"set {ENV_BASE_URL} and {ENV_MODEL} to use the remote model")
        return cls(base_url, model, os.environ.get(ENV_API_KEY), **kwargs)

    def complete(self, prompt: Prompt, temperature: Optional[float] = None,
                 max_tokens: int = 2048) -> ModelReply:
        body = {"model": self.model, "messages": prompt.messages(), "max_tokens": max_tokens, "n": 1}
        if temperature is not None:
            body["temperature"] = temperature
        with self._slots:
            data = self._post(body)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ModelError(f"malformed completion response: {str(data)[:200]}") from None
        return ModelReply.from_text(content or "")

    def _post(self, body: dict) -> dict:
        attempt = 0
        while True:
            try:
                resp = self._http.post(self.url, json=body)
            except httpx.TimeoutException as e:
                error: ModelError = ModelTimeout(str(e))
            except httpx.HTTPError as e:
                error = ModelError(str(e))
            else:
                if resp.status_code == 200:
                    return resp.json()
                error = RemoteError(resp.status_code, resp.text)
                if resp.status_code < 500 and resp.status_code != 429:
                    raise error
            if attempt >= self.retries:
                raise error
            delay = self.backoff * (2 ** attempt)
            log.warning("model request failed (%s); retrying in %.1fs", error, delay)
            time.sleep(delay)
            attempt += 1

    def close(self) -> None:
        self._http.close()
