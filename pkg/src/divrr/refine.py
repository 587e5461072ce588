"""View refinement: ambiguity-band trigger, in-place rotations, verified view."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .config import RefineConfig
from .errors import BudgetExceeded
from .relevance import RelevanceProvider, RelevanceResult
from .world import VIEW_RANGE, Observation, Pose, Question, World, observe

SKIP = "skip"
REFINE = "refine"
ADMIT_CANDIDATE = "admit-candidate"


def classify(score: float, cfg: RefineConfig) -> str:
    """Partition [0, 1] into below-band, ambiguity band, and admission candidates."""
    if score < cfg.tau_rot:
        return SKIP
    if score < cfg.tau_mem:
        return REFINE
    return ADMIT_CANDIDATE


@dataclass(frozen=True)
class TriggerDecision:
    band: str
    refine: bool
    gating_skipped: bool = False  # gating on but the provider gave no region likelihood
    region_suppressed: bool = False  # in band, but rho < tau_reg


def trigger(result: RelevanceResult, cfg: RefineConfig) -> TriggerDecision:
    band = classify(result.score, cfg)
    if band != REFINE:
        return TriggerDecision(band, False)
    if not cfg.region_gating_enabled:
        return TriggerDecision(band, True)
    if result.region_likelihood is None:
        return TriggerDecision(band, False, gating_skipped=True)
    if result.region_likelihood < cfg.tau_reg:
        return TriggerDecision(band, False, region_suppressed=True)
    return TriggerDecision(band, True)


def should_refine(result: RelevanceResult, cfg: RefineConfig) -> bool:
    return trigger(result, cfg).refine


@dataclass(frozen=True)
class ViewSet:
    views: tuple[tuple[Observation, float], ...]
    origin_pose: Pose

    def __post_init__(self):
        if not self.views:
            raise ValueError("a ViewSet holds at least one view")
        for obs, _ in self.views:
            p = obs.pose
            if (p.x, p.y, p.timestep) != (self.origin_pose.x, self.origin_pose.y, self.origin_pose.timestep):
                raise ValueError("rotated views must share the origin position and timestep")


def rotation_headings(origin: float, k: int) -> list[float]:
    """Evenly spaced headings over the circle, skipping the original one."""
    step = 360.0 / (k + 1)
    return [(origin + i * step) % 360.0 for i in range(1, k + 1)]


def collect_views(
    world: World,
    pose: Pose,
    question: Question,
    provider: RelevanceProvider,
    cfg: RefineConfig,
    k: Optional[int] = None,
    episode_seed: int = 0,
    view_range: float = VIEW_RANGE,
) -> ViewSet:
    """Rotate in place and score each view; the clock does not move."""
    k = cfg.view_budget if k is None else k
    if k < 1 or k > cfg.sensing_budget:
        raise BudgetExceeded(f"requested {k} views with a sensing budget of {cfg.sensing_budget}")
    world.validate_pose(pose)
    views = []
    for h in rotation_headings(pose.heading, k):
        obs = observe(world, pose.rotated(h), fov=cfg.fov_degrees, view_range=view_range, map_cells=False)
        views.append((obs, provider.score(obs, question, world, episode_seed).score))
    return ViewSet(tuple(views), pose)


def argmax_first(scores: Sequence[float]) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def select_verified(
    views: ViewSet, original: tuple[Observation, float], include_original: bool = True
) -> tuple[Observation, float]:
    """Highest-scoring candidate; ties go to the earliest (original first)."""
    cands = ([original] if include_original else []) + list(views.views)
    return cands[argmax_first([s for _, s in cands])]
