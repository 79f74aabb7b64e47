"""Chat-completions HTTP client for sourcing candidates from a hosted model."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import requests

from .prompt import PromptTemplate

log = logging.getLogger(__name__)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    auth_token_env: str | None = None  # name of the env var holding the token
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 0.5


class GenerationSourceError(RuntimeError):
    def __init__(self, message: str, statuses: list[int | None]):
        super().__init__(f"{message} (statuses: {statuses})")
        self.statuses = statuses


class ProtocolError(RuntimeError):
    """The endpoint answered, but not in chat-completions shape."""


def _headers(cfg: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if cfg.auth_token_env:
        token = os.environ.get(cfg.auth_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def _completion_text(body: dict) -> str:
    try:
        choices = body["choices"]
        return str(choices[0]["message"]["content"])
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"response missing choices/message/content: {exc}") from exc


def _one_request(cfg: EndpointConfig, payload: dict) -> str:
    statuses: list[int | None] = []
    delay = cfg.backoff_s
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = requests.post(cfg.url, json=payload, headers=_headers(cfg), timeout=cfg.timeout_s)
            status = resp.status_code
        except requests.RequestException as exc:
            statuses.append(None)
            log.warning("request failed (%s), attempt %d", exc, attempt + 1)
        else:
            if status == 200:
                if statuses:
                    log.info("request succeeded after %d retries", len(statuses))
                return _completion_text(resp.json())
            statuses.append(status)
            if status not in _RETRYABLE_STATUS:
                raise GenerationSourceError(f"endpoint returned {status}", statuses)
            log.warning("endpoint returned %d, attempt %d", status, attempt + 1)
        if attempt < cfg.max_retries:
            time.sleep(delay)
            delay *= 2
    raise GenerationSourceError("retries exhausted", statuses)


def remote_generate(
    cfg: EndpointConfig,
    prompt: PromptTemplate | str,
    temp: float,
    n: int,
) -> list[str]:
    """Issue ``n`` sampling requests at the given temperature, in order.

    Each request retries transient failures (connection errors, 429/5xx) with
    exponential backoff up to ``cfg.max_retries``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    text = prompt.text if isinstance(prompt, PromptTemplate) else str(prompt)
    payload = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": text}],
        "temperature": float(temp),
        "n": 1,
    }
    return [_one_request(cfg, payload) for _ in range(n)]
