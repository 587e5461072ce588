import pytest

from divrr.config import RefineConfig
from divrr.errors import BudgetExceeded
from divrr.refine import (
    ADMIT_CANDIDATE,
    REFINE,
    SKIP,
    ViewSet,
    argmax_first,
    classify,
    collect_views,
    rotation_headings,
    select_verified,
    should_refine,
    trigger,
)
from divrr.relevance import RelevanceResult
from divrr.world import Observation, Pose, Question, WorldObject

from conftest import open_world

CFG = RefineConfig()
GATED = RefineConfig(region_gating_enabled=True)


@pytest.mark.parametrize(
    "s,band", [(0.0, SKIP), (0.3, SKIP), (0.59, SKIP), (0.6, REFINE), (0.7, REFINE), (0.79, REFINE), (0.8, ADMIT_CANDIDATE), (0.85, ADMIT_CANDIDATE), (1.0, ADMIT_CANDIDATE)]
)
def test_bands(s, band):
    assert classify(s, CFG) == band


def test_trigger_examples():
    assert should_refine(RelevanceResult(0.70), CFG)
    assert not should_refine(RelevanceResult(0.85), CFG)
    assert should_refine(RelevanceResult(0.60), CFG)
    assert not should_refine(RelevanceResult(0.70, 0.10), GATED)
    assert should_refine(RelevanceResult(0.70, 0.50), GATED)


def test_gating_without_region_signal_skips_and_flags():
    d = trigger(RelevanceResult(0.7, None), GATED)
    assert not d.refine and d.gating_skipped
    d = trigger(RelevanceResult(0.7, 0.2), GATED)
    assert not d.refine and d.region_suppressed


def test_rotation_headings():
    assert rotation_headings(0.0, 3) == [90.0, 180.0, 270.0]
    assert rotation_headings(0.0, 1) == [180.0]
    assert rotation_headings(300.0, 3) == [30.0, 120.0, 210.0]


class FixedScores:
    def __init__(self, table):
        self.table = table

    def score(self, obs, question, world, episode_seed):
        return RelevanceResult(self.table[obs.pose.heading])


def _world():
    return open_world(5, 5, objects=(WorldObject("A", "chair", {}, (4, 2)),))


def _q():
    return Question("q", "?", "existence", "yes", (("A", 1),), "room", Pose(2, 2))


def test_collect_views_budget():
    with pytest.raises(BudgetExceeded):
        collect_views(_world(), Pose(2, 2, 0.0, 3), _q(), FixedScores({}), CFG, k=5)


def test_collect_views_keeps_time_and_position():
    prov = FixedScores({90.0: 0.2, 180.0: 0.9, 270.0: 0.4})
    vs = collect_views(_world(), Pose(2, 2, 0.0, 3), _q(), prov, CFG)
    assert [o.pose.heading for o, _ in vs.views] == [90.0, 180.0, 270.0]
    assert all((o.pose.x, o.pose.y, o.pose.timestep) == (2, 2, 3) for o, _ in vs.views)
    assert [s for _, s in vs.views] == [0.2, 0.9, 0.4]


def _obs(h):
    return Observation(f"o{h}", Pose(1, 1, h, 0), (), ())


def _views(scores):
    return ViewSet(tuple((_obs(90.0 * (i + 1)), s) for i, s in enumerate(scores)), Pose(1, 1, 0.0, 0))


def test_select_unique_max():
    chosen, s = select_verified(_views([0.2, 0.9, 0.4]), (_obs(0.0), 0.5))
    assert chosen.id == "o180.0" and s == 0.9


def test_select_ties_go_to_original():
    chosen, _ = select_verified(_views([0.5, 0.5, 0.5]), (_obs(0.0), 0.5))
    assert chosen.id == "o0.0"


def test_select_ties_among_views():
    chosen, _ = select_verified(_views([0.9, 0.9]), (_obs(0.0), 0.3))
    assert chosen.id == "o90.0"


def test_select_excluding_original():
    chosen, s = select_verified(_views([0.1, 0.2]), (_obs(0.0), 0.99), include_original=False)
    assert chosen.id == "o180.0" and s == 0.2


def test_argmax_first():
    assert argmax_first([1, 3, 3, 2]) == 1
    assert argmax_first([0.5]) == 0


def test_viewset_rejects_moved_views():
    with pytest.raises(ValueError):
        ViewSet(((Observation("x", Pose(2, 1, 0.0, 0), (), ()), 0.1),), Pose(1, 1, 0.0, 0))
