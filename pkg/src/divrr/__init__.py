"""Relevance-gated view refinement and memory admission for embodied question answering."""

from .config import RefineConfig, RunConfig, ScoringConfig, load_config
from .explore import VARIANT_ORDER, EpisodeResult, run_episode
from .harness import ExperimentConfig, run_ablation, run_suite
from .memory import Memory, admission_gate, update_memory
from .refine import classify, collect_views, select_verified, should_refine, trigger
from .relevance import RelevanceResult, SyntheticRelevanceProvider, TokenEvidence, relevance_score
from .scenario import GenConfig, generate_scenario, generate_suite, load_suite, write_suite
from .world import Observation, Pose, Question, World, observe

__version__ = "0.1.0"

__all__ = [
    "EpisodeResult",
    "ExperimentConfig",
    "GenConfig",
    "Memory",
    "Observation",
    "Pose",
    "Question",
    "RefineConfig",
    "RelevanceResult",
    "RunConfig",
    "ScoringConfig",
    "SyntheticRelevanceProvider",
    "TokenEvidence",
    "VARIANT_ORDER",
    "World",
    "admission_gate",
    "classify",
    "collect_views",
    "generate_scenario",
    "generate_suite",
    "load_config",
    "load_suite",
    "observe",
    "relevance_score",
    "run_ablation",
    "run_episode",
    "run_suite",
    "select_verified",
    "should_refine",
    "trigger",
    "update_memory",
    "write_suite",
]
