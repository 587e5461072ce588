"""Deterministic in-process mock of an OpenAI-compatible endpoint.

Used by the test-suite and the remote demo so that nothing touches the
network. Behaviour is scripted through :class:`MockBehavior`.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional

import numpy as np


@dataclass
class MockBehavior:
    logprobs: dict[str, float] = field(default_factory=lambda: {"Yes": -0.12, "No": -2.2})
    logprob_fn: Optional[Callable[[str], dict[str, float]]] = None  # prompt text -> logprobs
    mode: str = "ok"  # "ok" | "malformed" | "missing" | "empty_answer"
    fail_first: int = 0  # answer 503 to this many requests before behaving
    answer: str = "yes"
    answer_fn: Optional[Callable[[str], str]] = None
    embedding_dim: int = 768
    zero_embedding: bool = False


class MockServer:
    def __init__(self, behavior: Optional[MockBehavior] = None, host: str = "127.0.0.1"):
        self.behavior = behavior or MockBehavior()
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._failures = 0
        self._httpd = ThreadingHTTPServer((host, 0), self._handler())
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def start(self) -> "MockServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def _handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status: int, body: dict) -> None:
                raw = json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(n) or b"{}")
                with server._lock:
                    server.requests.append(
                        {"path": self.path, "headers": dict(self.headers), "body": payload}
                    )
                    if server._failures < server.behavior.fail_first:
                        server._failures += 1
                        fail = True
                    else:
                        fail = False
                if fail:
                    self._send(503, {"error": {"message": "temporarily unavailable"}})
                elif self.path.endswith("/chat/completions"):
                    self._send(200, server._chat(payload))
                elif self.path.endswith("/embeddings"):
                    self._send(200, server._embed(payload))
                else:
                    self._send(404, {"error": {"message": f"no route {self.path}"}})

        return Handler

    @staticmethod
    def _prompt_text(payload: dict) -> str:
        msg = payload.get("messages", [{}])[-1].get("content", "")
        if isinstance(msg, list):
            return "\n".join(part.get("text", "") for part in msg if part.get("type") == "text")
        return msg

    def _chat(self, payload: dict) -> dict:
        b = self.behavior
        prompt = self._prompt_text(payload)
        if payload.get("logprobs"):
            if b.mode == "malformed":
                return {"choices": [{"index": 0, "message": {"role": "assistant", "content": "Yes"}}]}
            lps = b.logprob_fn(prompt) if b.logprob_fn else dict(b.logprobs)
            if b.mode == "missing":
                lps = {"Maybe": -0.5, "The": -1.5}
            ranked = sorted(lps.items(), key=lambda kv: (-kv[1], kv[0]))[: payload.get("top_logprobs", 20)]
            top = [{"token": t, "logprob": lp, "bytes": list(t.encode())} for t, lp in ranked]
            first = top[0]["token"] if top else ""
            return {
                "object": "chat.completion",
                "model": payload.get("model"),
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": first},
                        "logprobs": {"content": [{"token": first, "logprob": top[0]["logprob"] if top else 0.0, "top_logprobs": top}]},
                        "finish_reason": "length",
                    }
                ],
            }
        text = "" if b.mode == "empty_answer" else (b.answer_fn(prompt) if b.answer_fn else b.answer)
        return {
            "object": "chat.completion",
            "model": payload.get("model"),
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
        }

    def _embed(self, payload: dict) -> dict:
        b = self.behavior
        if b.zero_embedding:
            vec = [0.0] * b.embedding_dim
        else:
            text = str(payload.get("input"))
            seed = int.from_bytes(text.encode()[:32].ljust(32, b"\0"), "little") % 2**32
            vec = np.random.default_rng(seed).standard_normal(b.embedding_dim).tolist()
        return {"object": "list", "data": [{"object": "embedding", "index": 0, "embedding": vec}]}
