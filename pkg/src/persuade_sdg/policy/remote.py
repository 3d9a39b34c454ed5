"""Chat-completions client used for backend (generation-only) policies."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .base import ChatPrompt, Generation, GenerationSettings, Policy, PolicyError

logger = logging.getLogger(__name__)

API_KEY_ENV = "SDG_API_KEY"


class RemoteError(PolicyError):
    """A failed round trip. ``category`` is one of auth, rate_limit, server,
    network, client or protocol."""

    def __init__(self, message: str, *, category: str, attempts: int = 1, status: int | None = None):
        super().__init__(message)
        self.category = category
        self.attempts = attempts
        self.status = status


class AuthError(RemoteError):
    pass


class RetryExhausted(RemoteError):
    pass


@dataclass
class RemoteEndpoint:
    base_url: str
    model: str
    api_key: str | None = None
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    audit_path: str | None = None

    def credential(self) -> str:
        key = self.api_key or os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(f"no credential: set {self.api_key_env}", category="auth", attempts=0)
        return key


_RETRYABLE = {429: "rate_limit"}


def _audit(endpoint: RemoteEndpoint, record: dict):
    if endpoint.audit_path:
        with Path(endpoint.audit_path).open("a") as fh:
            fh.write(json.dumps(record) + "\n")


def remote_generate(endpoint: RemoteEndpoint, prompt: ChatPrompt, settings: GenerationSettings,
                    client: httpx.Client | None = None) -> str:
    """One chat-completion request, retried up to ``endpoint.max_retries`` extra times
    on rate limits, 5xx responses and transport failures."""
    key = endpoint.credential()
    body = {
        "model": endpoint.model,
        "messages": prompt.to_messages(),
        "temperature": settings.temperature,
        "max_tokens": settings.max_tokens,
    }
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {key}"}
    own_client = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    attempts = 0
    last: tuple[str, int | None, str] = ("network", None, "")
    try:
        while attempts <= endpoint.max_retries:
            attempts += 1
            try:
                resp = client.post(url, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = ("network", None, str(exc))
                logger.warning("request to %s failed (%s), attempt %d", url, exc, attempts)
            else:
                _audit(endpoint, {"request": body, "status": resp.status_code, "response": resp.text})
                if resp.status_code in (401, 403):
                    raise AuthError(f"credential rejected ({resp.status_code})", category="auth",
                                    attempts=attempts, status=resp.status_code)
                if resp.status_code == 429 or resp.status_code >= 500:
                    cat = _RETRYABLE.get(resp.status_code, "server")
                    last = (cat, resp.status_code, resp.text[:200])
                    logger.warning("%s from %s, attempt %d", resp.status_code, url, attempts)
                elif resp.status_code >= 400:
                    raise RemoteError(f"request rejected ({resp.status_code}): {resp.text[:200]}",
                                      category="client", attempts=attempts, status=resp.status_code)
                else:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        raise RemoteError(f"malformed response: {exc}", category="protocol",
                                          attempts=attempts, status=resp.status_code) from exc
            if attempts <= endpoint.max_retries and endpoint.backoff > 0:
                time.sleep(endpoint.backoff * 2 ** (attempts - 1))
    finally:
        if own_client:
            client.close()
    cat, status, detail = last
    raise RetryExhausted(f"gave up after {attempts} attempts ({cat}): {detail}",
                         category=cat, attempts=attempts, status=status)


class RemoteChatPolicy(Policy):
    """Backend policy behind an HTTP chat-completions endpoint. Cannot score."""

    can_score = False
    emits_labels = True

    def __init__(self, endpoint: RemoteEndpoint, name: str | None = None,
                 client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.name = name or endpoint.model
        self.client = client

    def generate(self, prompt: ChatPrompt, settings: GenerationSettings) -> Generation:
        return Generation(remote_generate(self.endpoint, prompt, settings, self.client))
