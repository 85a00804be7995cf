"""Deterministic chat-completions endpoint for offline runs and tests.

Serves the standard wire format over loopback HTTP. Responses come from a
script: a list of entries matched by question substring, each carrying
per-mode completion pools. Greedy requests (temperature 0) always return
the first pooled text; sampled requests cycle the pool. The server records
peak request concurrency so client in-flight bounds are observable.

Script JSON:
    {
      "default": {"cot": ["..."], "pot": ["..."]},
      "entries": [
        {"match": "<question substring>", "cot": ["..."], "pot": ["..."],
         "fail_first": 0, "delay_ms": 0}
      ]
    }
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .prompts import POT_CUE


@dataclass
class MockScript:
    entries: list = field(default_factory=list)
    default: dict = field(default_factory=lambda: {"cot": ["The answer is 0."], "pot": ["answer = 0"]})

    @staticmethod
    def from_file(path) -> "MockScript":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return MockScript(entries=data.get("entries", []), default=data.get("default", MockScript().default))

    def completions(self, prompt: str, n: int, temperature: float) -> tuple:
        """Returns (texts, entry) for a prompt; entry is None on default fallback."""
        mode = "pot" if POT_CUE in prompt else "cot"
        entry = next((e for e in self.entries if e["match"] in prompt), None)
        pool = (entry or self.default).get(mode) or self.default[mode]
        if temperature == 0:
            return [pool[0]] * n, entry
        return [pool[i % len(pool)] for i in range(n)], entry


class MockEndpoint:
    """Threaded loopback server; use as a context manager."""

    def __init__(self, script: Optional[MockScript] = None, api_key: Optional[str] = None):
        self.script = script or MockScript()
        self.api_key = api_key
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0
        self.requests = 0
        self._fail_remaining: dict = {
            id(entry): int(entry.get("fail_first", 0)) for entry in self.script.entries
        }
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), self._make_handler())
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1"

    def stats(self) -> dict:
        with self._lock:
            return {"requests": self.requests, "max_in_flight": self.max_in_flight}

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _make_handler(self):
        endpoint = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send_json(self, code: int, payload: dict):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/stats":
                    self._send_json(200, endpoint.stats())
                else:
                    self._send_json(404, {"error": "unknown path"})

            def do_POST(self):
                if not self.path.endswith("/chat/completions"):
                    self._send_json(404, {"error": "unknown path"})
                    return
                with endpoint._lock:
                    endpoint._in_flight += 1
                    endpoint.requests += 1
                    endpoint.max_in_flight = max(endpoint.max_in_flight, endpoint._in_flight)
                try:
                    self._handle_completion()
                finally:
                    with endpoint._lock:
                        endpoint._in_flight -= 1

            def _handle_completion(self):
                if endpoint.api_key is not None:
                    header = self.headers.get("Authorization", "")
                    if header != f"Bearer {endpoint.api_key}":
                        self._send_json(401, {"error": {"message": "invalid api key"}})
                        return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    request = json.loads(self.rfile.read(length))
                    messages = request["messages"]
                    prompt = messages[-1]["content"]
                    n = int(request.get("n", 1))
                    temperature = float(request.get("temperature", 1.0))
                except (ValueError, KeyError, IndexError):
                    self._send_json(400, {"error": {"message": "bad request"}})
                    return
                texts, entry = endpoint.script.completions(prompt, n, temperature)
                if entry is not None:
                    with endpoint._lock:
                        if endpoint._fail_remaining.get(id(entry), 0) > 0:
                            endpoint._fail_remaining[id(entry)] -= 1
                            self._send_json(503, {"error": {"message": "scripted failure"}})
                            return
                    delay_ms = int(entry.get("delay_ms", 0))
                    if delay_ms:
                        time.sleep(delay_ms / 1000.0)
                self._send_json(
                    200,
                    {
                        "id": "mock-completion",
                        "object": "chat.completion",
                        "created": 0,
                        "model": request.get("model", "mock"),
                        "choices": [
                            {
                                "index": i,
                                "message": {"role": "assistant", "content": text},
                                "finish_reason": "stop",
                            }
                            for i, text in enumerate(texts)
                        ],
                        "usage": {"prompt_tokens": 0, "completion_tokens": 0, "total_tokens": 0},
                    },
                )

        return Handler
