"""Chat-completions client with retries, bounded concurrency, and a disk cache.

One client serves both roles in the pipeline: sampling the teacher during
extraction and the student server during inference. Identical calls are
served byte-identically from a content-addressed cache, so reruns are free
and reproducible.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import httpx

from .errors import AuthError, BudgetExceeded, EndpointUnreachable

RETRY_STATUSES = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.7
    top_p: float = 0.95
    max_tokens: int = 512
    n_samples: int = 1
    stop: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")

    def cache_fields(self) -> list:
        return [self.temperature, self.top_p, self.max_tokens, self.n_samples, list(self.stop or [])]


@dataclass(frozen=True)
class EndpointSpec:
    id: str
    base_url: str
    model: str
    api_key_env: Optional[str] = None


@dataclass(frozen=True)
class GenerationBatch:
    prompt_hash: str
    texts: Tuple[str, ...]
    endpoint_id: str
    params: SamplingParams
    cached: bool
    partial: bool = False  # recorded marker when fewer texts than requested came back


class ChatClient:
    """Thread-safe client for one endpoint.

    `max_in_flight` bounds outstanding HTTP requests via a semaphore;
    transient failures retry with exponential backoff; `max_requests`
    caps the number of requests actually sent (cache hits are free).
    """

    def __init__(
        self,
        endpoint: EndpointSpec,
        cache_dir=None,
        cache_salt: str = "",
        max_in_flight: int = 4,
        max_retries: int = 3,
        backoff_base_s: float = 0.2,
        backoff_cap_s: float = 10.0,
        max_requests: Optional[int] = None,
        timeout_s: float = 120.0,
    ):
        self.endpoint = endpoint
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.cache_salt = cache_salt
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self.backoff_cap_s = backoff_cap_s
        self.max_requests = max_requests
        self.max_in_flight = max_in_flight
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._count_lock = threading.Lock()
        self.requests_sent = 0
        self._http = httpx.Client(timeout=timeout_s)

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- cache ---------------------------------------------------------------

    def cache_key(self, prompt: str, params: SamplingParams) -> str:
        payload = json.dumps(
            [self.endpoint.id, self.endpoint.model, prompt, params.cache_fields(), self.cache_salt],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _cache_path(self, key: str) -> Optional[Path]:
        return self.cache_dir / f"{key}.json" if self.cache_dir else None

    def _cache_read(self, key: str):
        path = self._cache_path(key)
        if path and path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return None

    def _cache_write(self, key: str, texts: Sequence[str]) -> None:
        path = self._cache_path(key)
        if not path:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = json.dumps({"texts": list(texts)}, ensure_ascii=False)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)  # atomic publish
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    # -- sampling ------------------------------------------------------------

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.endpoint.api_key_env:
            key = os.environ.get(self.endpoint.api_key_env)
            if not key:
                raise AuthError(
                    f"endpoint {self.endpoint.id}: environment variable "
                    f"{self.endpoint.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _spend_request(self):
        with self._count_lock:
            if self.max_requests is not None and self.requests_sent >= self.max_requests:
                raise BudgetExceeded(
                    f"endpoint {self.endpoint.id}: request budget of {self.max_requests} hit"
                )
            self.requests_sent += 1

    def sample(self, prompt: str, params: SamplingParams) -> GenerationBatch:
        key = self.cache_key(prompt, params)
        hit = self._cache_read(key)
        if hit is not None:
            return GenerationBatch(key, tuple(hit["texts"]), self.endpoint.id, params, cached=True)

        body = {
            "model": self.endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
            "n": params.n_samples,
            "max_tokens": params.max_tokens,
        }
        if params.stop:
            body["stop"] = list(params.stop)
        headers = self._headers()
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"

        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(min(self.backoff_cap_s, self.backoff_base_s * 2 ** (attempt - 1)))
            self._spend_request()
            try:
                with self._semaphore:
                    response = self._http.post(url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint {self.endpoint.id}: HTTP {response.status_code}")
            if response.status_code in RETRY_STATUSES:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise EndpointUnreachable(
                    f"endpoint {self.endpoint.id}: unexpected HTTP {response.status_code}"
                )
            payload = response.json()
            choices = sorted(payload["choices"], key=lambda c: c.get("index", 0))
            texts = tuple(choice["message"]["content"] for choice in choices)
            partial = len(texts) != params.n_samples
            if not partial:
                self._cache_write(key, texts)
            return GenerationBatch(key, texts, self.endpoint.id, params, cached=False, partial=partial)
        raise EndpointUnreachable(
            f"endpoint {self.endpoint.id}: gave up after {self.max_retries + 1} attempts "
            f"({last_error})"
        )

    def sample_many(self, prompts: Sequence[str], params: SamplingParams) -> list:
        """Sample all prompts concurrently; results align with the input order."""
        if not prompts:
            return []
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(lambda p: self.sample(p, params), prompts))
