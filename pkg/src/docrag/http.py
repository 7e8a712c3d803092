"""JSON-over-HTTP with bounded retries."""

from __future__ import annotations

import logging
import random
import time
from typing import Any

import requests

from .errors import TransportError

log = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({408, 409, 429, 500, 502, 503, 504})


def post_json(
    url: str,
    payload: dict[str, Any],
    *,
    headers: dict[str, str] | None = None,
    timeout: float = 60.0,
    retries: int = 2,
    backoff: float = 0.5,
    session: requests.Session | None = None,
) -> dict[str, Any]:
    """POST ``payload`` and decode the JSON reply.

    Connection failures, timeouts and 408/429/5xx replies are retried up to
    ``retries`` times with exponential backoff plus jitter. Anything else,
    or exhausting the retries, raises ``TransportError``.
    """
    sender = session or requests
    attempt = 0
    while True:
        status = None
        try:
            resp = sender.post(url, json=payload, headers=headers or {}, timeout=timeout)
            status = resp.status_code
            if status < 400:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise TransportError(f"{url} returned invalid JSON", status) from exc
            message = f"{url} returned HTTP {status}"
            retryable = status in RETRYABLE_STATUS
        except (requests.ConnectionError, requests.Timeout) as exc:
            message = f"{url} unreachable: {exc}"
            retryable = True
        if not retryable or attempt >= retries:
            raise TransportError(message, status)
        delay = backoff * (2 ** attempt) * (1 + random.random())
        log.warning("retrying request url=%s attempt=%d delay=%.2fs reason=%s", url, attempt + 1, delay, message)
        time.sleep(delay)
        attempt += 1
