"""Run configuration: typed sections, strict JSON loading, and seeded streams.

Every run is fully determined by one config file plus one integer seed.
Unknown keys are rejected so that a misspelled threshold name fails loudly
instead of silently falling back to a default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional
from urllib.parse import urlparse

import numpy as np

from .errors import DuplicateLabel, ParseError, ValidationError

TEMPERATURE = 1.0
TAU_MEM = 0.8
TAU_ROT = 0.6
TAU_REG = 0.5  # no published value
FOV_DEGREES = 110.0
SENSING_BUDGET = 3
EMBEDDING_DIM = 768


def _check(ok: bool, name: str, constraint: str) -> None:
    if not ok:
        raise ValidationError(name, constraint)


@dataclass(frozen=True)
class ScoringConfig:
    temperature: float = TEMPERATURE
    candidate_tokens: tuple[str, ...] = ("Yes", "No")
    affirmative_tokens: tuple[str, ...] = ("Yes",)

    def __post_init__(self):
        object.__setattr__(self, "candidate_tokens", tuple(self.candidate_tokens))
        object.__setattr__(self, "affirmative_tokens", tuple(self.affirmative_tokens))
        _check(self.temperature > 0, "temperature", "must be > 0")
        _check(len(set(self.candidate_tokens)) >= 2, "candidate_tokens", "needs >= 2 distinct tokens")
        _check(len(self.affirmative_tokens) > 0, "affirmative_tokens", "must be non-empty")
        _check(
            set(self.affirmative_tokens) <= set(self.candidate_tokens),
            "affirmative_tokens",
            "must be a subset of candidate_tokens",
        )
        _check(
            set(self.affirmative_tokens) != set(self.candidate_tokens),
            "affirmative_tokens",
            "candidate_tokens must contain at least one non-affirmative token",
        )


@dataclass(frozen=True)
class RefineConfig:
    tau_rot: float = TAU_ROT
    tau_mem: float = TAU_MEM
    tau_reg: float = TAU_REG
    region_gating_enabled: bool = False
    view_budget: int = SENSING_BUDGET
    sensing_budget: int = SENSING_BUDGET
    fov_degrees: float = FOV_DEGREES
    include_original_in_argmax: bool = True

    def __post_init__(self):
        for name in ("tau_rot", "tau_mem", "tau_reg"):
            v = getattr(self, name)
            _check(0.0 <= v <= 1.0, name, "must lie in [0, 1]")
        _check(self.tau_rot < self.tau_mem, "tau_rot", "must be < tau_mem (ambiguity band empty)")
        _check(self.sensing_budget >= 1, "sensing_budget", "must be >= 1")
        _check(
            1 <= self.view_budget <= self.sensing_budget,
            "view_budget",
            "must satisfy 1 <= view_budget <= sensing_budget",
        )
        _check(0.0 < self.fov_degrees < 360.0, "fov_degrees", "must lie in (0, 360)")


@dataclass(frozen=True)
class ValidityConfig:
    mode: str = "synthetic"
    sharpness_threshold: float = 100.0
    brightness_min: float = 20.0
    brightness_max: float = 235.0

    def __post_init__(self):
        _check(self.mode in ("synthetic", "image"), "mode", "must be 'synthetic' or 'image'")
        _check(self.brightness_min <= self.brightness_max, "brightness_min", "must be <= brightness_max")


@dataclass(frozen=True)
class SyntheticProviderConfig:
    """Calibration of the synthetic relevance oracle.

    score = clamp(logistic(slope * f + offset) + noise, 0, 1) where ``f`` is the
    fraction of required evidence observed.
    """

    slope: float = 6.0
    offset: float = -2.5
    noise: float = 0.05
    region_hit: float = 0.9
    region_miss: float = 0.1

    def __post_init__(self):
        _check(self.noise >= 0, "noise", "must be >= 0")
        _check(0.0 <= self.region_hit <= 1.0, "region_hit", "must lie in [0, 1]")
        _check(0.0 <= self.region_miss <= 1.0, "region_miss", "must lie in [0, 1]")


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str = "http://127.0.0.1:8000/v1"
    model_name: str = "qwen2.5-vl-7b-instruct"
    embedding_model: str = "clip-vit-l-14"
    api_key_env: str = "DIVRR_API_KEY"
    timeout: float = 30.0
    max_retries: int = 3
    top_logprobs: int = 20
    max_in_flight: int = 4
    missing_candidates: str = "error"
    prompt_version: str = "v1"

    def __post_init__(self):
        _check(self.timeout > 0, "timeout", "must be > 0")
        parsed = urlparse(self.base_url)
        _check(bool(parsed.scheme and parsed.netloc), "base_url", "must be an absolute URL")
        _check(self.max_retries >= 0, "max_retries", "must be >= 0")
        _check(self.top_logprobs >= 1, "top_logprobs", "must be >= 1")
        _check(self.max_in_flight >= 1, "max_in_flight", "must be >= 1")
        _check(
            self.missing_candidates in ("error", "floor"),
            "missing_candidates",
            "must be 'error' or 'floor'",
        )


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "synthetic"
    synthetic: SyntheticProviderConfig = field(default_factory=SyntheticProviderConfig)
    remote: Optional[RemoteConfig] = None

    def __post_init__(self):
        _check(self.kind in ("synthetic", "remote"), "kind", "must be 'synthetic' or 'remote'")
        _check(self.kind != "remote" or self.remote is not None, "remote", "required when kind='remote'")


@dataclass(frozen=True)
class RunConfig:
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    validity: ValidityConfig = field(default_factory=ValidityConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    embedding_dim: int = EMBEDDING_DIM
    step_budget: int = 60
    seed: int = 0
    view_range: float = 8.0
    move_dt: int = 10

    def __post_init__(self):
        _check(self.embedding_dim >= 1, "embedding_dim", "must be >= 1")
        _check(self.step_budget >= 1, "step_budget", "must be >= 1")
        _check(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        _check(self.view_range > 0, "view_range", "must be > 0")
        _check(self.move_dt >= 1, "move_dt", "must be >= 1")

    def to_dict(self) -> dict:
        return to_jsonable(self)


def to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    return obj


def _unwrap_optional(tp: Any) -> Any:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return tp


def from_dict(cls: type, data: Any, path: str = "") -> Any:
    """Build dataclass ``cls`` from plain JSON data, rejecting unknown keys."""
    where = path or cls.__name__
    if not isinstance(data, dict):
        raise ValidationError(where, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        key = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ValidationError(key, "unknown key")
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        tp = _unwrap_optional(hints[key])
        if value is not None and dataclasses.is_dataclass(tp):
            value = from_dict(tp, value, sub)
        elif typing.get_origin(tp) is tuple and isinstance(value, list):
            value = tuple(value)
        elif tp is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        full = f"{path}.{exc.field}" if path else exc.field
        raise ValidationError(full, exc.constraint) from None


def load_config(path: str | Path) -> RunConfig:
    """Load and validate a run config; an empty file yields all defaults."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        return RunConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_dict(RunConfig, data)


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# seeded streams


def stream_seed(seed: int, label: str) -> int:
    """128-bit integer keyed on (seed, label); independent of any other label."""
    h = hashlib.blake2b(f"{seed}\x1f{label}".encode(), digest_size=16, person=b"divrr-stream")
    return int.from_bytes(h.digest(), "little")


def derive_streams(seed: int, labels: Iterable[str]) -> dict[str, np.random.Generator]:
    labels = list(labels)
    seen: set[str] = set()
    for label in labels:
        if label in seen:
            raise DuplicateLabel(label)
        seen.add(label)
    return {label: np.random.Generator(np.random.PCG64(stream_seed(seed, label))) for label in labels}


def keyed_uniform(seed: int, *parts: object) -> float:
    """A uniform draw in [0, 1) addressed by key rather than by call order."""
    key = "\x1f".join(str(p) for p in parts)
    h = hashlib.blake2b(f"{seed}\x1e{key}".encode(), digest_size=8, person=b"divrr-keyed")
    return int.from_bytes(h.digest(), "little") / 2.0**64
