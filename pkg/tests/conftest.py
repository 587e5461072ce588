import json
import sys
from pathlib import Path

import numpy as np
import pytest

from divrr.world import HumanTrack, Pose, Question, World, WorldObject

FIXTURES = Path(__file__).parent / "fixtures"


def open_world(width, height, walls=(), objects=(), humans=(), horizon=120, regions=None):
    walls = frozenset(walls)
    free = [(x, y) for x in range(width) for y in range(height) if (x, y) not in walls]
    regions = regions or {}
    return World(width, height, walls, {c: regions.get(c, "room") for c in free}, tuple(objects), tuple(humans), horizon)


def random_small_world(rng: np.random.Generator, horizon: int = 6) -> World:
    """Up to 8x8 with random walls, objects and humans doing random 4-neighbour walks."""
    w, h = int(rng.integers(3, 9)), int(rng.integers(3, 9))
    cells = [(x, y) for x in range(w) for y in range(h)]
    walls = {c for c in cells if rng.random() < 0.15}
    free = [c for c in cells if c not in walls]
    if len(free) < 3:
        walls = set()
        free = cells
    objs = []
    for i in range(int(rng.integers(1, 6))):
        objs.append(WorldObject(f"o{i}", "chair", {"color": "red"}, free[int(rng.integers(len(free)))]))
    humans = []
    free_set = set(free)
    for k in range(int(rng.integers(0, 4))):
        pos = [free[int(rng.integers(len(free)))]]
        for _ in range(horizon - 1):
            x, y = pos[-1]
            opts = [(x, y)] + [c for c in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)) if c in free_set]
            pos.append(opts[int(rng.integers(len(opts)))])
        humans.append(HumanTrack(f"h{k}", tuple(pos), tuple(f"act{t % 3}" for t in range(horizon))))
    return open_world(w, h, walls, objs, humans, horizon)


def load_three_waypoint():
    d = json.loads((FIXTURES / "three_waypoint.json").read_text())
    return World.from_dict(d["world"]), Question.from_dict(d["question"]), d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def corridor_question():
    return Question("q", "What color is the chair?", "attribute", "red", (("A", 1),), "room", Pose(0, 0, 0.0, 0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
