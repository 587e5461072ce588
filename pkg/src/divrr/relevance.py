"""Question-conditioned relevance scoring.

The score is the softmax mass that a language head places on affirmative
tokens, restricted to a small polar candidate set::

    s = sum_{w in T+} exp(E(w)/tau) / sum_{w in V_cand} exp(E(w)/tau)

Providers turn an observation plus a question into token evidence (or, for
the synthetic oracle, directly into a calibrated score).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Protocol, Sequence

from .config import ScoringConfig, SyntheticProviderConfig, keyed_uniform
from .errors import MissingLogit, NonFiniteLogit, NonPositiveTemperature, ValidationError
from .world import Observation, Question, World


@dataclass(frozen=True)
class TokenEvidence:
    entries: Mapping[str, float]
    candidate_set: tuple[str, ...] = ("Yes", "No")
    affirmative_set: tuple[str, ...] = ("Yes",)

    def __post_init__(self):
        object.__setattr__(self, "candidate_set", tuple(self.candidate_set))
        object.__setattr__(self, "affirmative_set", tuple(self.affirmative_set))
        if len(set(self.candidate_set)) < 2:
            raise ValidationError("candidate_set", "needs >= 2 distinct tokens")
        if not self.affirmative_set:
            raise ValidationError("affirmative_set", "must be non-empty")
        if not set(self.affirmative_set) <= set(self.candidate_set):
            raise ValidationError("affirmative_set", "must be a subset of candidate_set")
        if set(self.affirmative_set) == set(self.candidate_set):
            raise ValidationError("affirmative_set", "candidate_set needs a non-affirmative token")

    @classmethod
    def from_config(cls, entries: Mapping[str, float], cfg: ScoringConfig) -> "TokenEvidence":
        return cls(dict(entries), cfg.candidate_tokens, cfg.affirmative_tokens)


@dataclass(frozen=True)
class RelevanceResult:
    score: float
    region_likelihood: Optional[float] = None


def relevance_score(evidence: TokenEvidence, cfg: ScoringConfig = ScoringConfig()) -> float:
    tau = cfg.temperature
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {tau}")
    cands = list(dict.fromkeys(evidence.candidate_set))
    logits = []
    for w in cands:
        if w not in evidence.entries:
            raise MissingLogit(w)
        v = float(evidence.entries[w])
        if not math.isfinite(v):
            raise NonFiniteLogit(f"{w}: {v}")
        logits.append(v / tau)
    top = max(logits)
    weights = [math.exp(z - top) for z in logits]
    pos = set(evidence.affirmative_set)
    num = math.fsum(wt for w, wt in zip(cands, weights) if w in pos)
    return num / math.fsum(weights)


class RelevanceProvider(Protocol):
    def score(self, obs: Observation, question: Question, world: World, episode_seed: int) -> RelevanceResult: ...


def logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def evidence_fraction(obs: Observation, question: Question) -> float:
    """Fraction of required evidence items that are visible, unoccluded and readable."""
    ids = question.evidence_ids
    seen = obs.observed_ids()
    return sum(1 for eid in ids if eid in seen) / len(ids)


class SyntheticRelevanceProvider:
    """Calibrated stand-in for a vision-language relevance head.

    Noise is addressed by (episode seed, observation id, question id) rather
    than drawn sequentially, so a score never depends on what else was scored
    before it. That keeps ablation variants comparable view by view.
    """

    def __init__(self, cfg: SyntheticProviderConfig = SyntheticProviderConfig()):
        self.cfg = cfg

    def _noise(self, episode_seed: int, *key: object) -> float:
        if self.cfg.noise == 0:
            return 0.0
        return self.cfg.noise * (2.0 * keyed_uniform(episode_seed, "noise", *key) - 1.0)

    def score(self, obs: Observation, question: Question, world: World, episode_seed: int) -> RelevanceResult:
        f = evidence_fraction(obs, question)
        s = logistic(self.cfg.slope * f + self.cfg.offset) + self._noise(episode_seed, "s", question.id, obs.id)
        in_target = world.region_of(obs.pose.cell) == question.target_region
        rho = self.cfg.region_hit if in_target else self.cfg.region_miss
        rho += self._noise(episode_seed, "rho", question.id, obs.id)
        return RelevanceResult(min(1.0, max(0.0, s)), min(1.0, max(0.0, rho)))


def score_observation(
    provider: RelevanceProvider, obs: Observation, question: Question, world: World, episode_seed: int = 0
) -> RelevanceResult:
    return provider.score(obs, question, world, episode_seed)


def polar_logits(score: float, candidates: Sequence[str] = ("Yes", "No")) -> dict[str, float]:
    """Two-token logits whose softmax reproduces ``score`` (used by the mock server)."""
    score = min(max(score, 1e-12), 1 - 1e-12)
    return {candidates[0]: math.log(score), candidates[1]: math.log1p(-score)}
