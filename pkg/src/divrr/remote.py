"""Client for OpenAI-compatible chat-completion and embedding endpoints.

Scoring asks for a single completion token with ``logprobs`` enabled and reads
the first position's ``top_logprobs``. Log-probabilities differ from raw
logits by one shared constant, which the relevance ratio ignores, so they are
used directly as token evidence.
"""

from __future__ import annotations

import base64
import logging
import math
import os
import random
import re
import threading
import time
from typing import Callable, Optional, Sequence

import httpx
import numpy as np

from .config import EMBEDDING_DIM, RemoteConfig, ScoringConfig
from .errors import (
    DegenerateEmbedding,
    EmbeddingDimensionMismatch,
    EmptyCompletion,
    MalformedResponse,
    MissingCandidates,
    TransportError,
)
from .memory import Memory, normalize
from .relevance import RelevanceResult, TokenEvidence, relevance_score
from .world import Observation, Question, World

log = logging.getLogger(__name__)

BACKOFF_BASE = 0.5
BACKOFF_FACTOR = 2.0
BACKOFF_JITTER = 0.2
FLOOR_MARGIN = 5.0
TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}
NO_OBSERVATIONS = "<no observations>"

# Non-normative; bump prompt_version in RemoteConfig when editing.
PROMPTS = {
    "v1": {
        "relevance": (
            "You are an embodied agent exploring a home.\n"
            "Question: {question}\n"
            "Current view: {view}\n"
            "Does the current view contain information useful for answering the question? "
            "Answer Yes or No."
        ),
        "answer": (
            "You explored a home and kept the following observations.\n"
            "Question: {question}\n"
            "Observations (in admission order):\n{memory}\n"
            "{choices}Answer concisely."
        ),
    }
}


def normalize_token(tok: str) -> str:
    return tok.strip().casefold()


def describe(obs: Observation) -> str:
    """Plain-text rendering of an observation for text-only backends."""
    if not obs.visible:
        return "nothing recognisable"
    parts = []
    for v in obs.visible:
        if v.kind == "human":
            parts.append(f"a person ({v.detail})" if v.detail else "a person (too far to tell what they are doing)")
        else:
            parts.append(f"a {v.category} ({v.detail})" if v.detail else f"a {v.category}")
    return "; ".join(parts)


def memory_prompt(question: Question, payloads: Sequence[Observation], version: str = "v1") -> str:
    if payloads:
        lines = []
        for i, obs in enumerate(payloads, 1):
            p = obs.pose
            lines.append(f"[{i}] at ({p.x}, {p.y}) facing {p.heading:.0f} deg, t={p.timestep}: {describe(obs)}")
        mem = "\n".join(lines)
    else:
        mem = NO_OBSERVATIONS
    choices = ""
    if question.choices:
        opts = "\n".join(f"{chr(65 + i)}. {c}" for i, c in enumerate(question.choices))
        choices = f"Options:\n{opts}\nReply with the option letter.\n"
    return PROMPTS[version]["answer"].format(question=question.text, memory=mem, choices=choices)


def extract_choice(text: str, n_choices: int) -> Optional[str]:
    """First option letter (A, B, ...) that appears as a standalone token."""
    letters = "".join(chr(65 + i) for i in range(n_choices))
    m = re.search(rf"(?<![A-Za-z])([{letters}])(?![A-Za-z])", text)
    return m.group(1) if m else None


def grade(answer: str, question: Question) -> bool:
    if question.choices:
        letter = extract_choice(answer, len(question.choices))
        if letter is None:
            return False
        picked = question.choices[ord(letter) - 65]
        return normalize_token(picked) == normalize_token(question.answer) or letter == question.answer.strip().upper()
    return normalize_token(answer) == normalize_token(question.answer)


def evidence_from_top_logprobs(
    top: Sequence[dict], scoring: ScoringConfig, missing: str = "error"
) -> TokenEvidence:
    """Merge case/space variants of each candidate and build token evidence."""
    buckets: dict[str, list[float]] = {}
    observed = []
    for item in top:
        try:
            tok, lp = item["token"], float(item["logprob"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad top_logprobs entry {item!r}") from exc
        observed.append(lp)
        buckets.setdefault(normalize_token(tok), []).append(lp)
    entries: dict[str, float] = {}
    absent = []
    for cand in scoring.candidate_tokens:
        lps = buckets.get(normalize_token(cand))
        if lps:
            top_lp = max(lps)
            entries[cand] = top_lp + math.log(math.fsum(math.exp(v - top_lp) for v in lps))
        else:
            absent.append(cand)
    if absent:
        if missing != "floor" or not entries:
            raise MissingCandidates(f"candidate tokens {absent} not among top_logprobs")
        floor = min(observed) - FLOOR_MARGIN
        for cand in absent:
            entries[cand] = floor
    return TokenEvidence.from_config(entries, scoring)


class RemoteClient:
    """Thread-safe client; at most ``max_in_flight`` requests run at once."""

    def __init__(
        self,
        cfg: RemoteConfig,
        scoring: ScoringConfig = ScoringConfig(),
        embedding_dim: int = EMBEDDING_DIM,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter_seed: Optional[int] = None,
    ):
        self.cfg = cfg
        self.scoring = scoring
        self.embedding_dim = embedding_dim
        self._sleep = sleep
        self._jitter = random.Random(jitter_seed)
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self._http = httpx.Client(base_url=cfg.base_url.rstrip("/"), timeout=cfg.timeout, transport=transport)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict:
        key = os.environ.get(self.cfg.api_key_env)
        return {"Authorization": f"Bearer {key}"} if key else {}

    def backoff(self, attempt: int) -> float:
        delay = BACKOFF_BASE * BACKOFF_FACTOR**attempt
        return delay * (1.0 + self._jitter.uniform(-BACKOFF_JITTER, BACKOFF_JITTER))

    def post(self, path: str, payload: dict) -> dict:
        last: Optional[Exception] = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self._sleep(self.backoff(attempt - 1))
            try:
                with self._slots:
                    resp = self._http.post(path, json=payload, headers=self._headers())
            except (httpx.TransportError, httpx.TimeoutException) as exc:
                last = exc
                log.warning("POST %s failed (%s), attempt %d", path, exc, attempt + 1)
                continue
            if resp.status_code in TRANSIENT_STATUS:
                last = TransportError(f"HTTP {resp.status_code}")
                log.warning("POST %s returned %d, attempt %d", path, resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"POST {path}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"POST {path}: body is not JSON") from exc
        raise TransportError(f"POST {path} failed after {self.cfg.max_retries + 1} attempts: {last}")

    # -- endpoints -----------------------------------------------------------

    def fetch_token_evidence(self, prompt: str, image_payload: Optional[bytes] = None) -> TokenEvidence:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        content: list[dict] = [{"type": "text", "text": prompt}]
        if image_payload is not None:
            b64 = base64.b64encode(image_payload).decode("ascii")
            content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}})
        body = self.post(
            "/chat/completions",
            {
                "model": self.cfg.model_name,
                "messages": [{"role": "user", "content": content}],
                "max_tokens": 1,
                "temperature": 0,
                "logprobs": True,
                "top_logprobs": self.cfg.top_logprobs,
            },
        )
        try:
            top = body["choices"][0]["logprobs"]["content"][0]["top_logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("response carries no logprobs for the first generated token") from exc
        if not isinstance(top, list):
            raise MalformedResponse("top_logprobs is not a list")
        return evidence_from_top_logprobs(top, self.scoring, self.cfg.missing_candidates)

    def fetch_embedding(self, payload) -> np.ndarray:
        if isinstance(payload, bytes):
            payload = base64.b64encode(payload).decode("ascii")
        body = self.post("/embeddings", {"model": self.cfg.embedding_model, "input": payload})
        try:
            vec = body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("embedding response has no data[0].embedding") from exc
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (self.embedding_dim,):
            raise EmbeddingDimensionMismatch(f"expected {self.embedding_dim}-D embedding, got shape {v.shape}")
        return normalize(v, self.embedding_dim)

    def fetch_answer(self, question: Question, memory_payloads: Sequence[Observation]) -> str:
        prompt = memory_prompt(question, memory_payloads, self.cfg.prompt_version)
        body = self.post(
            "/chat/completions",
            {
                "model": self.cfg.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "max_tokens": 64,
                "temperature": 0,
            },
        )
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("completion has no choices[0].message.content") from exc
        if not text or not str(text).strip():
            raise EmptyCompletion("model returned an empty answer")
        return str(text)


def fetch_token_evidence(cfg: RemoteConfig, prompt: str, image_payload: Optional[bytes] = None, **kw) -> TokenEvidence:
    with RemoteClient(cfg, **kw) as client:
        return client.fetch_token_evidence(prompt, image_payload)


def fetch_embedding(cfg: RemoteConfig, payload, **kw) -> np.ndarray:
    with RemoteClient(cfg, **kw) as client:
        return client.fetch_embedding(payload)


def fetch_answer(cfg: RemoteConfig, question: Question, memory_payloads: Sequence[Observation], **kw) -> str:
    with RemoteClient(cfg, **kw) as client:
        return client.fetch_answer(question, memory_payloads)


# -- protocol adapters ---------------------------------------------------------


class RemoteRelevanceProvider:
    """Relevance via a remote VLM. No region likelihood is requested."""

    def __init__(self, client: RemoteClient):
        self.client = client

    def score(self, obs: Observation, question: Question, world: World, episode_seed: int) -> RelevanceResult:
        prompt = PROMPTS[self.client.cfg.prompt_version]["relevance"].format(question=question.text, view=describe(obs))
        ev = self.client.fetch_token_evidence(prompt)
        return RelevanceResult(relevance_score(ev, self.client.scoring), None)


class RemoteEmbedder:
    def __init__(self, client: RemoteClient):
        self.client = client
        self.dim = client.embedding_dim

    def embed(self, obs: Observation) -> np.ndarray:
        vec = self.client.fetch_embedding(describe(obs))
        if not np.all(np.isfinite(vec)):
            raise DegenerateEmbedding("non-finite embedding")
        return vec


def remote_answerer(client: RemoteClient):
    def answer(question: Question, mem: Memory, world: World) -> tuple[str, bool]:
        text = client.fetch_answer(question, mem.observations())
        return text, grade(text, question)

    return answer
