"""Gated long-term memory.

A view enters memory only when it is both relevant (score >= tau_mem) and
valid, at most once per waypoint. Entries hold a unit-norm embedding, the
pose, and a reference to the stored observation payload.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np

from .config import EMBEDDING_DIM, ValidityConfig, stream_seed
from .errors import DegenerateEmbedding, DuplicateWaypointAdmission, EmbeddingDimensionMismatch, EmptyResultSet
from .world import Observation, Pose

NORM_TOL = 1e-6


# -- validity ----------------------------------------------------------------


def sharpness(img: np.ndarray) -> float:
    """Mean squared 4-neighbour Laplacian over the image interior (8-bit scale)."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        a = a.mean(axis=2)
    if a.shape[0] < 3 or a.shape[1] < 3:
        return 0.0
    lap = a[:-2, 1:-1] + a[2:, 1:-1] + a[1:-1, :-2] + a[1:-1, 2:] - 4.0 * a[1:-1, 1:-1]
    return float(np.mean(lap * lap))


def brightness(img: np.ndarray) -> float:
    return float(np.asarray(img, dtype=np.float64).mean())


def is_valid(obs: Union[Observation, np.ndarray], cfg: ValidityConfig = ValidityConfig()) -> bool:
    if cfg.mode == "synthetic":
        return len(obs.visible) > 0
    return sharpness(obs) >= cfg.sharpness_threshold and cfg.brightness_min <= brightness(obs) <= cfg.brightness_max


def admission_gate(score: float, valid: bool, tau_mem: float) -> bool:
    return score >= tau_mem and bool(valid)


# -- embeddings --------------------------------------------------------------


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, obs: Observation) -> np.ndarray: ...


class SyntheticEmbedder:
    """Seeded random projection of the visible-content token multiset."""

    def __init__(self, dim: int = EMBEDDING_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _token(self, tok: str) -> np.ndarray:
        v = self._cache.get(tok)
        if v is None:
            v = np.random.default_rng(stream_seed(self.seed, "embed:" + tok)).standard_normal(self.dim)
            self._cache[tok] = v
        return v

    def embed(self, obs: Observation) -> np.ndarray:
        # the place token keeps empty views from collapsing to the zero vector
        acc = self._token(f"place:{obs.pose.x}:{obs.pose.y}").copy()
        for ent in obs.visible:
            for tok in ent.tokens():
                acc += self._token(tok)
        return normalize(acc, self.dim)


def normalize(vec: Sequence[float], dim: int) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64).ravel()
    if v.shape[0] != dim:
        raise EmbeddingDimensionMismatch(f"expected {dim}-D embedding, got {v.shape[0]}")
    n = float(np.linalg.norm(v))
    if not np.isfinite(n) or n == 0.0:
        raise DegenerateEmbedding("embedding has zero or non-finite norm")
    return v / n


# -- entries -----------------------------------------------------------------


@dataclass(frozen=True)
class MemoryEntry:
    embedding: np.ndarray
    pose: Pose
    observation_ref: str
    waypoint_index: int
    admit_score: float

    def __eq__(self, other):
        if not isinstance(other, MemoryEntry):
            return NotImplemented
        return (
            self.pose == other.pose
            and self.observation_ref == other.observation_ref
            and self.waypoint_index == other.waypoint_index
            and self.admit_score == other.admit_score
            and np.array_equal(self.embedding, other.embedding)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        raw = np.ascontiguousarray(self.embedding, dtype="<f8").tobytes()
        return {
            "embedding": base64.b64encode(raw).decode("ascii"),
            "pose": self.pose.to_dict(),
            "observation_ref": self.observation_ref,
            "waypoint": self.waypoint_index,
            "score": self.admit_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MemoryEntry":
        emb = np.frombuffer(base64.b64decode(d["embedding"]), dtype="<f8").astype(np.float64)
        return cls(emb, Pose.from_dict(d["pose"]), d["observation_ref"], int(d["waypoint"]), float(d["score"]))


def make_entry(
    obs: Observation, pose: Pose, waypoint: int, score: float, embedder: EmbeddingProvider, dim: int = EMBEDDING_DIM
) -> MemoryEntry:
    emb = normalize(embedder.embed(obs), dim)
    return MemoryEntry(emb, pose, obs.id, waypoint, float(score))


@dataclass
class Memory:
    dim: int = EMBEDDING_DIM
    entries: tuple[MemoryEntry, ...] = ()
    last_admitted_waypoint: Optional[int] = None
    payloads: dict[str, Observation] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def observations(self) -> list[Observation]:
        """Admitted payloads in admission order."""
        return [self.payloads[e.observation_ref] for e in self.entries]

    def refs(self) -> list[str]:
        return [e.observation_ref for e in self.entries]

    def embeddings(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.dim))
        return np.stack([e.embedding for e in self.entries])

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "last_admitted_waypoint": self.last_admitted_waypoint,
            "entries": [e.to_dict() for e in self.entries],
            "observations": {ref: self.payloads[ref].to_dict() for ref in self.refs() if ref in self.payloads},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Memory":
        return cls(
            dim=int(d["dim"]),
            entries=tuple(MemoryEntry.from_dict(e) for e in d["entries"]),
            last_admitted_waypoint=d["last_admitted_waypoint"],
            payloads={ref: Observation.from_dict(o) for ref, o in d.get("observations", {}).items()},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "Memory":
        return cls.from_dict(json.loads(text))


def update_memory(
    mem: Memory, entry: Optional[MemoryEntry], gate: bool, waypoint: int, payload: Optional[Observation] = None
) -> Memory:
    """Append ``entry`` when the gate is open; otherwise return ``mem`` unchanged."""
    if not gate:
        return mem
    if entry is None:
        raise ValueError("gate is open but no entry was supplied")
    if entry.waypoint_index != waypoint:
        raise ValueError(f"entry waypoint {entry.waypoint_index} != {waypoint}")
    last = mem.last_admitted_waypoint
    if last is not None and waypoint == last:
        raise DuplicateWaypointAdmission(f"waypoint {waypoint} already has an admitted entry")
    if last is not None and waypoint < last:
        raise ValueError(f"waypoint {waypoint} precedes last admitted waypoint {last}")
    if entry.embedding.shape != (mem.dim,):
        raise EmbeddingDimensionMismatch(f"expected {mem.dim}-D embedding, got {entry.embedding.shape}")
    payloads = dict(mem.payloads)
    if payload is not None:
        payloads[entry.observation_ref] = payload
    return Memory(mem.dim, mem.entries + (entry,), waypoint, payloads)


def mem_metric(results: Iterable) -> float:
    """Average number of admitted entries per episode."""
    counts = [r.admitted_count for r in results]
    if not counts:
        raise EmptyResultSet("no episode results")
    return float(sum(counts)) / len(counts)
