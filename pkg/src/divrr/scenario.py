"""Seeded scenario generator and suite files.

A scenario is a room layout with objects and moving humans, its static twin
(same layout, humans removed), and a category-balanced batch of questions
whose evidence has to be gathered from more than one viewpoint.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import derive_streams, from_dict, to_jsonable, stream_seed
from .errors import SuiteParseError, UnsatisfiableConstraints, ValidationError
from .world import CATEGORIES, MOTION_FRAMES, Cell, HumanTrack, Pose, Question, World, WorldObject, dumps

ROOM_NAMES = (
    "kitchen", "living_room", "bedroom", "bathroom", "office", "dining_room",
    "hallway", "laundry", "study", "garage", "nursery", "pantry",
)  # fmt: skip
COLORS = ("red", "blue", "green", "white", "black", "yellow", "brown", "gray")
OBJECT_STATES = {
    "lamp": ("on", "off"),
    "tv": ("on", "off"),
    "laptop": ("on", "off"),
    "fridge": ("open", "closed"),
    "cabinet": ("open", "closed"),
    "window": ("open", "closed"),
}
OBJECT_CATEGORIES = (
    "chair", "table", "sofa", "bed", "plant", "mug", "book", "vase", "clock",
    "lamp", "tv", "laptop", "fridge", "cabinet", "window",
)  # fmt: skip
ACTIVITIES = (
    "cooking", "reading", "cleaning", "talking on the phone", "watching tv",
    "typing", "eating", "stretching", "folding laundry", "watering plants",
)  # fmt: skip


@dataclass(frozen=True)
class GenConfig:
    width: int = 32
    height: int = 32
    rooms_x: int = 3
    rooms_y: int = 3
    n_objects: int = 30
    n_humans: int = 4
    horizon: int = MOTION_FRAMES
    questions: int = 7
    door_width: int = 2
    human_room_bias: float = 0.7
    duplicate_bias: float = 0.35
    max_attempts: int = 20

    def __post_init__(self):
        if not (8 <= self.width <= 64 and 8 <= self.height <= 64):
            raise ValidationError("width/height", "grid must be between 8x8 and 64x64")
        if not 0 <= self.n_humans <= 8:
            raise ValidationError("n_humans", "must be in [0, 8]")
        if not 1 <= self.n_objects <= 40:
            raise ValidationError("n_objects", "must be in [1, 40]")
        if self.rooms_x < 1 or self.rooms_y < 1:
            raise ValidationError("rooms_x/rooms_y", "must be >= 1")
        if self.width // self.rooms_x < 5 or self.height // self.rooms_y < 5:
            raise ValidationError("rooms_x/rooms_y", "rooms need at least a 3x3 interior")
        if self.rooms_x * self.rooms_y > len(ROOM_NAMES):
            raise ValidationError("rooms_x/rooms_y", f"at most {len(ROOM_NAMES)} rooms")
        if self.horizon < 1:
            raise ValidationError("horizon", "must be >= 1")
        if self.questions < 1:
            raise ValidationError("questions", "must be >= 1")


@dataclass
class Scenario:
    id: str
    dynamic: World
    static: World
    questions: tuple[Question, ...]

    def world_for(self, split: str) -> World:
        return self.dynamic if split == "dynamic" else self.static

    def questions_for(self, split: str) -> list[Question]:
        if split == "dynamic":
            return list(self.questions)
        return [q for q in self.questions if not q.dynamic_only]


# ---------------------------------------------------------------------------
# layout


def _bounds(n: int, parts: int) -> list[int]:
    return [round(i * (n - 1) / parts) for i in range(parts + 1)]


def _layout(cfg: GenConfig, rng: np.random.Generator):
    W, H = cfg.width, cfg.height
    xs, ys = _bounds(W, cfg.rooms_x), _bounds(H, cfg.rooms_y)
    walls: set[Cell] = set()
    for x in range(W):
        for y in ys:
            walls.add((x, y))
    for y in range(H):
        for x in xs:
            walls.add((x, y))

    names = list(ROOM_NAMES)
    rng.shuffle(names)
    rooms = {}  # (i, j) -> (label, interior cells)
    regions: dict[Cell, str] = {}
    for j in range(cfg.rooms_y):
        for i in range(cfg.rooms_x):
            label = names[j * cfg.rooms_x + i]
            cells = [(x, y) for y in range(ys[j] + 1, ys[j + 1]) for x in range(xs[i] + 1, xs[i + 1])]
            rooms[(i, j)] = (label, cells)
            for c in cells:
                regions[c] = label

    doors: set[Cell] = set()
    dw = cfg.door_width
    for j in range(cfg.rooms_y):
        for i in range(cfg.rooms_x - 1):
            lo, hi = ys[j] + 1, ys[j + 1] - 1
            w = min(dw, hi - lo + 1)
            y0 = int(rng.integers(lo, hi - w + 2))
            for y in range(y0, y0 + w):
                c = (xs[i + 1], y)
                walls.discard(c)
                doors.add(c)
                regions[c] = rooms[(i, j)][0]
    for j in range(cfg.rooms_y - 1):
        for i in range(cfg.rooms_x):
            lo, hi = xs[i] + 1, xs[i + 1] - 1
            w = min(dw, hi - lo + 1)
            x0 = int(rng.integers(lo, hi - w + 2))
            for x in range(x0, x0 + w):
                c = (x, ys[j + 1])
                walls.discard(c)
                doors.add(c)
                regions[c] = rooms[(i, j)][0]
    return frozenset(walls), regions, rooms, doors


def _place_objects(cfg: GenConfig, rng: np.random.Generator, rooms, doors) -> list[WorldObject]:
    near_door = {(x + dx, y + dy) for x, y in doors for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
    keys = sorted(rooms)
    free_by_room = {k: [c for c in rooms[k][1] if c not in near_door] for k in keys}
    per_room: dict = {k: [] for k in keys}
    objs = []
    for n in range(cfg.n_objects):
        options = [k for k in keys if free_by_room[k]]
        if not options:
            break
        k = options[int(rng.integers(len(options)))]
        present = Counter(per_room[k])
        dup = [c for c, m in present.items() if m < 3]
        if dup and rng.random() < cfg.duplicate_bias:
            cat = dup[int(rng.integers(len(dup)))]
        else:
            cat = OBJECT_CATEGORIES[int(rng.integers(len(OBJECT_CATEGORIES)))]
        cells = free_by_room[k]
        cell = cells.pop(int(rng.integers(len(cells))))
        attrs = {"color": COLORS[int(rng.integers(len(COLORS)))]}
        if cat in OBJECT_STATES:
            states = OBJECT_STATES[cat]
            attrs["state"] = states[int(rng.integers(len(states)))]
        per_room[k].append(cat)
        objs.append(WorldObject(f"obj{n:02d}", cat, attrs, cell))
    return objs


def _bfs_path(start: Cell, goal: Cell, walkable: set[Cell]) -> list[Cell]:
    prev = {start: None}
    q = deque([start])
    while q:
        c = q.popleft()
        if c == goal:
            break
        x, y = c
        for n in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if n in walkable and n not in prev:
                prev[n] = c
                q.append(n)
    if goal not in prev:
        return [start]
    path = []
    c = goal
    while c is not None:
        path.append(c)
        c = prev[c]
    return path[::-1]


def _human_track(hid: str, cells: list[Cell], horizon: int, rng: np.random.Generator) -> HumanTrack:
    walkable = set(cells)
    pos = cells[int(rng.integers(len(cells)))]
    activity = ACTIVITIES[int(rng.integers(len(ACTIVITIES)))]
    track = [pos]
    while len(track) < horizon:
        if rng.random() < 0.35:
            track.extend([pos] * int(rng.integers(3, 12)))
        else:
            goal = cells[int(rng.integers(len(cells)))]
            track.extend(_bfs_path(pos, goal, walkable)[1:])
            pos = track[-1]
    track = track[:horizon]
    return HumanTrack(hid, tuple(track), tuple([activity] * horizon))


# ---------------------------------------------------------------------------
# questions


def _dist2(a: Cell, b: Cell) -> int:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2


class _QuestionBuilder:
    def __init__(self, world: World, rooms, rng: np.random.Generator, cfg: GenConfig, home: dict[str, str]):
        self.world = world
        self.rng = rng
        self.cfg = cfg
        self.labels = [rooms[k][0] for k in sorted(rooms)]
        self.home = home  # human id -> room label
        self.by_room: dict[str, list[WorldObject]] = {lab: [] for lab in self.labels}
        for o in world.objects:
            self.by_room[world.region_of(o.cell)].append(o)
        self.busy = {o.cell for o in world.objects}

    def _pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def _room(self) -> str:
        human_rooms = sorted(set(self.home.values()))
        if human_rooms and self.rng.random() < self.cfg.human_room_bias:
            return self._pick(human_rooms)
        return self._pick(self.labels)

    def _anchor(self, target: WorldObject) -> Optional[WorldObject]:
        others = [o for o in self.by_room[self.world.region_of(target.cell)] if o.id != target.id]
        if not others:
            return None
        return min(others, key=lambda o: (_dist2(o.cell, target.cell), o.id))

    def _start(self, room: str) -> Pose:
        t0 = set(self.world.human_positions(0).values()) if self.world.humans else set()
        cells = [c for c in self.world.cells_of_region(room) if c not in self.busy and c not in t0]
        c = self._pick(cells)
        return Pose(c[0], c[1], float(self._pick((0.0, 90.0, 180.0, 270.0))), 0)

    def build(self, category: str, room: Optional[str] = None):
        room = room or self._room()
        objs = self.by_room[room]
        nice = room.replace("_", " ")
        if category in ("attribute", "existence"):
            counts = Counter(o.category for o in objs)
            pool = [o for o in objs if counts[o.category] == 1]
            if not pool:
                return None
            t = self._pick(pool)
            a = self._anchor(t)
            if a is None:
                return None
            if category == "attribute":
                text = f"What color is the {t.category} near the {a.category} in the {nice}?"
                ans = t.attributes["color"]
            else:
                text = f"Is there a {t.category} near the {a.category} in the {nice}?"
                ans = "yes"
            return text, ans, ((t.id, 2), (a.id, 1)), room, False
        if category == "counting":
            counts = Counter(o.category for o in objs)
            cats = sorted(c for c, n in counts.items() if 2 <= n <= 3)
            if not cats:
                return None
            cat = self._pick(cats)
            members = sorted((o for o in objs if o.category == cat), key=lambda o: o.id)
            text = f"How many {cat}s are in the {nice}?"
            return text, str(len(members)), tuple((o.id, 1) for o in members), room, False
        if category == "location":
            keyed = Counter((o.category, o.attributes["color"]) for o in self.world.objects)
            pool = [o for o in objs if keyed[(o.category, o.attributes["color"])] == 1]
            if not pool:
                return None
            t = self._pick(pool)
            text = f"In which room is the {t.attributes['color']} {t.category}?"
            return text, nice, ((t.id, 2),), room, False
        if category == "object":
            pairs = []
            for a in objs:
                near = [o for o in objs if o.id != a.id and max(abs(o.cell[0] - a.cell[0]), abs(o.cell[1] - a.cell[1])) <= 2]
                if len(near) == 1 and near[0].category != a.category:
                    pairs.append((a, near[0]))
            if not pairs:
                return None
            a, n = self._pick(pairs)
            text = f"What object is next to the {a.category} in the {nice}?"
            return text, n.category, ((a.id, 1), (n.id, 1)), room, False
        if category in ("state", "interaction"):
            people = sorted(h for h, r in self.home.items() if r == room)
            if people:
                hid = self._pick(people)
                track = self.world.human(hid)
                activity = track.activity_labels[0]
                if category == "state":
                    return f"What is the person in the {nice} doing?", activity, ((hid, 2),), room, True
                mode = Counter(track.positions).most_common(1)[0][0]
                if not objs:
                    return None
                a = min(objs, key=lambda o: (_dist2(o.cell, mode), o.id))
                text = f"What is the person near the {a.category} doing?"
                return text, activity, ((hid, 1), (a.id, 1)), room, True
            if category == "interaction":
                return None
            pool = [o for o in objs if "state" in o.attributes]
            if not pool:
                return None
            t = self._pick(pool)
            lo, hi = OBJECT_STATES[t.category]
            text = f"Is the {t.category} in the {nice} {lo} or {hi}?"
            return text, t.attributes["state"], ((t.id, 2),), room, False
        raise ValueError(category)


def _make_world(cfg: GenConfig, seed: int):
    streams = derive_streams(seed, ["layout", "objects", "humans"])
    walls, regions, rooms, doors = _layout(cfg, streams["layout"])
    objects = _place_objects(cfg, streams["objects"], rooms, doors)
    rng = streams["humans"]
    busy = {o.cell for o in objects}
    keys = sorted(rooms)
    n = min(cfg.n_humans, len(keys))
    homes = [keys[int(i)] for i in rng.permutation(len(keys))[:n]]
    humans, home = [], {}
    for idx, k in enumerate(homes):
        label, cells = rooms[k]
        walk = [c for c in cells if c not in busy]
        if not walk:
            continue
        hid = f"human{idx}"
        humans.append(_human_track(hid, walk, cfg.horizon, rng))
        home[hid] = label
    world = World(cfg.width, cfg.height, walls, regions, tuple(objects), tuple(humans), cfg.horizon, seed)
    return world, rooms, home


def generate_scenario(
    cfg: GenConfig = GenConfig(), seed: int = 0, scenario_id: str = "sc000", category_offset: int = 0
) -> Scenario:
    """Build one paired Dynamic/Static scenario with ``cfg.questions`` questions."""
    for attempt in range(cfg.max_attempts):
        sub = seed if attempt == 0 else stream_seed(seed, f"retry:{attempt}") % 2**63
        world, rooms, home = _make_world(cfg, sub)
        qrng = derive_streams(sub, ["questions"])["questions"]
        builder = _QuestionBuilder(world, rooms, qrng, cfg, home)
        questions = []
        for q in range(cfg.questions):
            category = CATEGORIES[(category_offset + q) % len(CATEGORIES)]
            built = None
            for _ in range(30):
                built = builder.build(category)
                if built is not None:
                    break
            if built is None:
                # the chosen rooms could not host this category; try every room once
                for room in builder.labels:
                    built = builder.build(category, room)
                    if built is not None:
                        break
            if built is None:
                break
            text, answer, evidence, room, dyn = built
            questions.append(
                Question(f"{scenario_id}-q{q}", text, category, answer, evidence, room, builder._start(room), dyn)
            )
        if len(questions) == cfg.questions:
            return Scenario(scenario_id, world, world.without_humans(), tuple(questions))
    raise UnsatisfiableConstraints(f"no layout satisfied every question category after {cfg.max_attempts} attempts")


def generate_suite(n_questions: int, seed: int = 0, cfg: GenConfig = GenConfig()) -> list[Scenario]:
    """Scenarios until ``n_questions`` questions exist; categories rotate across scenarios."""
    out = []
    made = 0
    i = 0
    while made < n_questions:
        k = min(cfg.questions, n_questions - made)
        sub_cfg = cfg if k == cfg.questions else GenConfig(**{**to_jsonable(cfg), "questions": k})
        sc = generate_scenario(sub_cfg, stream_seed(seed, f"scenario:{i}") % 2**63, f"sc{i:03d}", made)
        out.append(sc)
        made += k
        i += 1
    return out


# ---------------------------------------------------------------------------
# files


def write_suite(scenarios: list[Scenario], out_dir: str | Path, seed: int = 0, cfg: Optional[GenConfig] = None) -> Path:
    out = Path(out_dir)
    manifest = {"version": 1, "seed": seed, "gen_config": to_jsonable(cfg) if cfg else None, "scenarios": []}
    for sc in scenarios:
        d = out / sc.id
        d.mkdir(parents=True, exist_ok=True)
        (d / "world_dynamic.json").write_text(dumps(sc.dynamic.to_dict()))
        (d / "world_static.json").write_text(dumps(sc.static.to_dict()))
        (d / "questions.json").write_text(dumps({"questions": [q.to_dict() for q in sc.questions]}))
        manifest["scenarios"].append(
            {
                "id": sc.id,
                "dynamic": f"{sc.id}/world_dynamic.json",
                "static": f"{sc.id}/world_static.json",
                "questions": f"{sc.id}/questions.json",
            }
        )
    path = out / "suite.json"
    path.write_text(dumps(manifest))
    return path


def load_suite(path: str | Path) -> list[Scenario]:
    p = Path(path)
    if p.is_dir():
        p = p / "suite.json"
    try:
        manifest = json.loads(p.read_text())
        base = p.parent
        out = []
        for entry in manifest["scenarios"]:
            dyn = World.from_dict(json.loads((base / entry["dynamic"]).read_text()))
            sta = World.from_dict(json.loads((base / entry["static"]).read_text()))
            qs = json.loads((base / entry["questions"]).read_text())["questions"]
            out.append(Scenario(entry["id"], dyn, sta, tuple(Question.from_dict(q) for q in qs)))
        return out
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise SuiteParseError(f"{p}: {exc}") from exc


def gen_config_from_dict(d: dict) -> GenConfig:
    return from_dict(GenConfig, d)
