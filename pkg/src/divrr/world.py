"""Deterministic 2-D grid world with moving human occluders.

Cells are ``(x, y)`` integer pairs; x grows east, y grows south. Headings are
degrees in ``[0, 360)`` measured from +x toward +y, so 0 faces east and 90
faces south. Line of sight uses the supercover of the segment joining two
cell centres: every cell whose closed square the segment touches, corners
included, so there is no diagonal see-through between two blocking cells.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .config import FOV_DEGREES
from .errors import HorizonExceeded, InvalidPose, TimestepOutOfRange

Cell = tuple[int, int]

CATEGORIES = ("attribute", "counting", "existence", "interaction", "location", "object", "state")
VIEW_RANGE = 8.0
MOVE_DT = 10
MOTION_FRAMES = 120
HEADING_BUCKET = 45.0


def wrap_heading(h: float) -> float:
    h = math.fmod(h, 360.0)
    if h < 0:
        h += 360.0
    if h >= 360.0:  # fmod of tiny negatives
        h = 0.0
    return h


def heading_bucket(h: float) -> int:
    return int(wrap_heading(h) // HEADING_BUCKET) % 8


@dataclass(frozen=True)
class Pose:
    x: int
    y: int
    heading: float = 0.0
    timestep: int = 0

    @property
    def cell(self) -> Cell:
        return (self.x, self.y)

    def rotated(self, heading: float) -> "Pose":
        return Pose(self.x, self.y, wrap_heading(heading), self.timestep)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "heading": self.heading, "timestep": self.timestep}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(int(d["x"]), int(d["y"]), float(d["heading"]), int(d["timestep"]))


@dataclass(frozen=True)
class WorldObject:
    id: str
    category: str
    attributes: dict
    cell: Cell


@dataclass(frozen=True)
class HumanTrack:
    id: str
    positions: tuple[Cell, ...]
    activity_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.positions) != len(self.activity_labels):
            raise ValueError(f"{self.id}: positions and activity_labels differ in length")
        for (ax, ay), (bx, by) in zip(self.positions, self.positions[1:]):
            if abs(ax - bx) + abs(ay - by) > 1:
                raise ValueError(f"{self.id}: non-adjacent consecutive positions {(ax, ay)} -> {(bx, by)}")


@dataclass(frozen=True)
class VisibleEntity:
    id: str
    kind: str  # "object" | "human"
    category: str
    detail: Optional[str]  # attribute summary for objects, activity for humans (None when unreadable)

    def tokens(self) -> list[str]:
        out = [f"id:{self.id}", f"cat:{self.category}"]
        if self.detail is not None:
            out.append(f"detail:{self.category}:{self.detail}")
        return out


@dataclass(frozen=True)
class Observation:
    id: str
    pose: Pose
    visible: tuple[VisibleEntity, ...]
    occluded_ids: tuple[str, ...]
    seen_cells: tuple[tuple[Cell, bool], ...] = ()  # (cell, is_wall) revealed to the map

    def observed_ids(self) -> set[str]:
        """Ids whose evidence is usable: visible objects, and humans whose activity is readable."""
        return {v.id for v in self.visible if v.kind == "object" or v.detail is not None}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "pose": self.pose.to_dict(),
            "visible": [
                {"id": v.id, "kind": v.kind, "category": v.category, "detail": v.detail} for v in self.visible
            ],
            "occluded_ids": list(self.occluded_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observation":
        return cls(
            id=d["id"],
            pose=Pose.from_dict(d["pose"]),
            visible=tuple(VisibleEntity(v["id"], v["kind"], v["category"], v["detail"]) for v in d["visible"]),
            occluded_ids=tuple(d["occluded_ids"]),
        )


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    category: str
    answer: str
    required_evidence: tuple[tuple[str, int], ...]
    target_region: str
    start: Pose
    dynamic_only: bool = False
    choices: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown question category {self.category!r}")
        if not self.required_evidence or any(n < 1 for _, n in self.required_evidence):
            raise ValueError(f"{self.id}: required_evidence needs entries with count >= 1")

    @property
    def evidence_ids(self) -> list[str]:
        return [eid for eid, _ in self.required_evidence]

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "text": self.text,
            "category": self.category,
            "answer": self.answer,
            "required_evidence": [[eid, n] for eid, n in self.required_evidence],
            "target_region": self.target_region,
            "start": self.start.to_dict(),
            "dynamic_only": self.dynamic_only,
        }
        if self.choices is not None:
            d["choices"] = list(self.choices)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Question":
        choices = d.get("choices")
        return cls(
            id=d["id"],
            text=d["text"],
            category=d["category"],
            answer=d["answer"],
            required_evidence=tuple((str(e), int(n)) for e, n in d["required_evidence"]),
            target_region=d["target_region"],
            start=Pose.from_dict(d["start"]),
            dynamic_only=bool(d.get("dynamic_only", False)),
            choices=tuple(choices) if choices is not None else None,
        )


@dataclass
class World:
    width: int
    height: int
    walls: frozenset[Cell]
    regions: dict[Cell, str]
    objects: tuple[WorldObject, ...]
    humans: tuple[HumanTrack, ...]
    horizon: int = MOTION_FRAMES
    seed: int = 0
    _human_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _seen_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.walls = frozenset(self.walls)
        self.objects = tuple(self.objects)
        self.humans = tuple(self.humans)
        free = {(x, y) for x in range(self.width) for y in range(self.height)} - self.walls
        if set(self.regions) != free:
            raise ValueError("regions must partition exactly the free cells")
        for obj in self.objects:
            if obj.cell not in free:
                raise ValueError(f"object {obj.id} sits on a non-free cell {obj.cell}")
        for h in self.humans:
            if len(h.positions) != self.horizon:
                raise ValueError(f"human {h.id} track length {len(h.positions)} != horizon {self.horizon}")
            if any(p not in free for p in h.positions):
                raise ValueError(f"human {h.id} leaves the free cells")

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def is_free(self, c: Cell) -> bool:
        return self.in_bounds(c) and c not in self.walls

    def region_of(self, c: Cell) -> Optional[str]:
        return self.regions.get(c)

    def region_labels(self) -> list[str]:
        return sorted(set(self.regions.values()))

    def cells_of_region(self, label: str) -> list[Cell]:
        return sorted((c for c, r in self.regions.items() if r == label), key=lambda c: (c[1], c[0]))

    def human_positions(self, t: int) -> dict[str, Cell]:
        if t not in self._human_cache:
            self._human_cache[t] = {h.id: h.positions[t] for h in self.humans}
        return self._human_cache[t]

    def object(self, oid: str) -> WorldObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def human(self, hid: str) -> HumanTrack:
        for h in self.humans:
            if h.id == hid:
                return h
        raise KeyError(hid)

    def without_humans(self) -> "World":
        """The static twin: identical layout and objects, no humans."""
        return World(self.width, self.height, self.walls, dict(self.regions), self.objects, (), self.horizon, self.seed)

    def validate_pose(self, pose: Pose) -> None:
        if not self.is_free(pose.cell):
            raise InvalidPose(f"pose {pose} is outside the grid or on a wall")
        if not 0.0 <= pose.heading < 360.0:
            raise InvalidPose(f"heading {pose.heading} outside [0, 360)")
        if pose.timestep < 0 or pose.timestep >= self.horizon:
            raise TimestepOutOfRange(f"timestep {pose.timestep} outside [0, {self.horizon})")

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        by_region: dict[str, list] = {}
        for c, r in self.regions.items():
            by_region.setdefault(r, []).append(c)
        return {
            "width": self.width,
            "height": self.height,
            "horizon": self.horizon,
            "seed": self.seed,
            "walls": [list(c) for c in sorted(self.walls, key=lambda c: (c[1], c[0]))],
            "regions": {
                r: [list(c) for c in sorted(cells, key=lambda c: (c[1], c[0]))] for r, cells in sorted(by_region.items())
            },
            "objects": [
                {"id": o.id, "category": o.category, "attributes": dict(sorted(o.attributes.items())), "cell": list(o.cell)}
                for o in self.objects
            ],
            "humans": [
                {"id": h.id, "positions": [list(p) for p in h.positions], "activity_labels": list(h.activity_labels)}
                for h in self.humans
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "World":
        regions = {(int(x), int(y)): r for r, cells in d["regions"].items() for x, y in cells}
        return cls(
            width=int(d["width"]),
            height=int(d["height"]),
            walls=frozenset((int(x), int(y)) for x, y in d["walls"]),
            regions=regions,
            objects=tuple(
                WorldObject(o["id"], o["category"], dict(o["attributes"]), (int(o["cell"][0]), int(o["cell"][1])))
                for o in d["objects"]
            ),
            humans=tuple(
                HumanTrack(h["id"], tuple((int(x), int(y)) for x, y in h["positions"]), tuple(h["activity_labels"]))
                for h in d["humans"]
            ),
            horizon=int(d["horizon"]),
            seed=int(d["seed"]),
        )


def dumps(obj: dict) -> str:
    """Canonical JSON used for every file this package writes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# geometry


@lru_cache(maxsize=1 << 18)
def supercover(a: Cell, b: Cell) -> tuple[Cell, ...]:
    """Cells touched by the segment between the centres of ``a`` and ``b``.

    Exact integer stepping: the next x-boundary is crossed at parameter
    (1 + 2i) / (2 dx) and the next y-boundary at (1 + 2j) / (2 dy); when both
    coincide the segment passes through a lattice corner and all four cells
    around it are included.
    """
    x, y = a
    x1, y1 = b
    dx, dy = abs(x1 - x), abs(y1 - y)
    sx = 1 if x1 > x else -1
    sy = 1 if y1 > y else -1
    out = [(x, y)]
    i = j = 0
    while i < dx or j < dy:
        d = (1 + 2 * i) * dy - (1 + 2 * j) * dx
        if d == 0:
            out.append((x + sx, y))
            out.append((x, y + sy))
            x += sx
            y += sy
            i += 1
            j += 1
        elif d < 0:
            x += sx
            i += 1
        else:
            y += sy
            j += 1
        out.append((x, y))
    return tuple(out)


def angular_offset(pose_cell: Cell, heading: float, target: Cell) -> float:
    dx = target[0] - pose_cell[0]
    dy = target[1] - pose_cell[1]
    if dx == 0 and dy == 0:
        return 0.0
    ang = math.degrees(math.atan2(dy, dx))
    diff = (ang - heading + 180.0) % 360.0 - 180.0
    return abs(diff)


def in_frustum(pose: Pose, target: Cell, fov: float, view_range: float) -> bool:
    dx = target[0] - pose.x
    dy = target[1] - pose.y
    if dx * dx + dy * dy > view_range * view_range:
        return False
    return angular_offset(pose.cell, pose.heading, target) <= fov / 2.0


def _blocked(world: World, line: Sequence[Cell], blockers: set[Cell]) -> bool:
    # endpoints never block: the agent's own cell and the target's cell
    for c in line[1:-1]:
        if c in world.walls or c in blockers:
            return True
    return False


def _seen_cells(world: World, pose: Pose, fov: float, view_range: float) -> tuple[tuple[Cell, bool], ...]:
    key = (pose.x, pose.y, pose.heading, fov, view_range)
    hit = world._seen_cache.get(key)
    if hit is not None:
        return hit
    r = int(math.floor(view_range))
    out = []
    for y in range(max(0, pose.y - r), min(world.height, pose.y + r + 1)):
        for x in range(max(0, pose.x - r), min(world.width, pose.x + r + 1)):
            c = (x, y)
            if not in_frustum(pose, c, fov, view_range):
                continue
            line = supercover(pose.cell, c)
            if any(p in world.walls for p in line[1:-1]):
                continue
            out.append((c, c in world.walls))
    res = tuple(out)
    world._seen_cache[key] = res
    return res


def observation_id(pose: Pose) -> str:
    return f"obs:{pose.x}:{pose.y}:{pose.heading:.1f}:{pose.timestep}"


def observe(
    world: World, pose: Pose, fov: float = FOV_DEGREES, view_range: float = VIEW_RANGE, map_cells: bool = True
) -> Observation:
    """Egocentric observation from ``pose`` at ``pose.timestep``.

    An entity is visible when it lies within ``view_range`` and ``fov / 2`` of
    the heading and no wall or other human sits on the supercover between the
    agent and the entity. Humans block what is behind them but are visible
    themselves; their activity is readable only within ``view_range / 2``.
    """
    world.validate_pose(pose)
    t = pose.timestep
    humans_now = world.human_positions(t)
    occupied = set(humans_now.values())
    visible: list[VisibleEntity] = []
    occluded: list[str] = []

    for obj in world.objects:
        if not in_frustum(pose, obj.cell, fov, view_range):
            continue
        if _blocked(world, supercover(pose.cell, obj.cell), occupied - {obj.cell}):
            occluded.append(obj.id)
        else:
            detail = ",".join(f"{k}={v}" for k, v in sorted(obj.attributes.items())) or None
            visible.append(VisibleEntity(obj.id, "object", obj.category, detail))

    for h in world.humans:
        cell = humans_now[h.id]
        if not in_frustum(pose, cell, fov, view_range):
            continue
        if _blocked(world, supercover(pose.cell, cell), occupied - {cell}):
            occluded.append(h.id)
        else:
            dx, dy = cell[0] - pose.x, cell[1] - pose.y
            close = dx * dx + dy * dy <= (view_range / 2.0) ** 2
            visible.append(VisibleEntity(h.id, "human", "person", h.activity_labels[t] if close else None))

    seen = _seen_cells(world, pose, fov, view_range) if map_cells else ()
    return Observation(observation_id(pose), pose, tuple(visible), tuple(occluded), seen)


class Clock:
    """Per-episode simulation clock; in-place rotations advance by zero."""

    def __init__(self, horizon: int, t: int = 0):
        self.horizon = horizon
        self.t = t

    def advance(self, dt: int) -> int:
        if dt < 0:
            raise ValueError("dt must be non-negative")
        if self.t + dt > self.horizon:
            raise HorizonExceeded(f"t={self.t} + dt={dt} exceeds horizon {self.horizon}")
        self.t += dt
        return self.t


def advance(clock: Clock, dt: int) -> int:
    return clock.advance(dt)


# ---------------------------------------------------------------------------
# answering


def viewpoint_key(pose: Pose) -> tuple[int, int, int]:
    return (pose.x, pose.y, heading_bucket(pose.heading))


def evidence_coverage(question: Question, observations: Iterable[Observation]) -> dict[str, int]:
    """Distinct viewpoints (cell, 45-degree heading bucket) per required entity."""
    wanted = set(question.evidence_ids)
    views: dict[str, set] = {eid: set() for eid in wanted}
    for obs in observations:
        for eid in obs.observed_ids() & wanted:
            views[eid].add(viewpoint_key(obs.pose))
    return {eid: len(v) for eid, v in views.items()}


WRONG_ANSWER = "unknown"


def answer_oracle(question: Question, mem, world: Optional[World] = None) -> tuple[str, bool]:
    """Synthetic answerer: correct exactly when admitted memory covers the evidence."""
    cover = evidence_coverage(question, mem.observations())
    ok = all(cover[eid] >= need for eid, need in question.required_evidence)
    if ok:
        return question.answer, True
    wrong = WRONG_ANSWER if question.answer != WRONG_ANSWER else "none"
    return wrong, False
