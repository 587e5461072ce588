"""Exploration backbones and the per-waypoint sense/score/refine/admit loop."""

from __future__ import annotations

import dataclasses
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import RunConfig, derive_streams, stream_seed
from .errors import DivrrError, HorizonExceeded, NoFreeNeighbor
from .memory import EmbeddingProvider, Memory, SyntheticEmbedder, admission_gate, is_valid, make_entry, update_memory
from .refine import collect_views, select_verified, trigger
from .relevance import RelevanceProvider, SyntheticRelevanceProvider
from .world import Cell, Clock, Observation, Pose, Question, World, answer_oracle, observe

UNKNOWN, FREE, WALL = "unknown", "free", "wall"
BACKBONES = ("fbe", "re", "goe")


@dataclass(frozen=True)
class Modules:
    """Ablation switches: adaptive memory, view refinement, region detection."""

    am: bool = True
    vr: bool = True
    rd: bool = True


VARIANTS = {
    "base": Modules(am=False, vr=False, rd=False),
    "base+am": Modules(am=True, vr=False, rd=False),
    "base+am+vr": Modules(am=True, vr=True, rd=False),
    "full": Modules(am=True, vr=True, rd=True),
}
VARIANT_ORDER = ("base", "base+am", "base+am+vr", "full")


@dataclass(frozen=True)
class Action:
    kind: str  # "move_to" | "rotate_in_place" | "stop"
    cell: Optional[Cell] = None

    @classmethod
    def stop(cls) -> "Action":
        return cls("stop")


def _neighbors4(c: Cell):
    x, y = c
    return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))


@dataclass
class ExplorationState:
    width: int
    height: int
    occupancy: dict[Cell, str] = field(default_factory=dict)  # absent means unknown
    visited: set[Cell] = field(default_factory=set)
    current_path: Optional[list[Cell]] = None
    budget_left: int = 0
    best_score: float = -1.0
    best_goal: Optional[Cell] = None
    _entity_cells: dict = field(default_factory=dict, repr=False)

    def label(self, c: Cell) -> str:
        return self.occupancy.get(c, UNKNOWN)

    def update(self, obs: Observation) -> None:
        for c, wall in obs.seen_cells:
            self.occupancy[c] = WALL if wall else FREE
        self.occupancy[obs.pose.cell] = FREE
        self.visited.add(obs.pose.cell)

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def frontier(self) -> set[Cell]:
        out = set()
        for c, lab in self.occupancy.items():
            if lab != FREE:
                continue
            if any(self.in_bounds(n) and n not in self.occupancy for n in _neighbors4(c)):
                out.add(c)
        return out

    def note_score(self, obs: Observation, score: float) -> None:
        """Remember the most promising view for goal-oriented exploration."""
        if score > self.best_score and score > 0.5 and obs.visible:
            cells = [self._entity_cell(obs, v.id) for v in obs.visible]
            cells = [c for c in cells if c is not None]
            if not cells:
                return
            cx = sum(c[0] for c in cells) / len(cells)
            cy = sum(c[1] for c in cells) / len(cells)
            self.best_score = score
            self.best_goal = min(cells, key=lambda c: ((c[0] - cx) ** 2 + (c[1] - cy) ** 2, c[1], c[0]))

    def _entity_cell(self, obs: Observation, eid: str) -> Optional[Cell]:
        return self._entity_cells.get((obs.id, eid))


def _bfs(state: ExplorationState, start: Cell) -> tuple[dict[Cell, Optional[Cell]], dict[Cell, int]]:
    prev: dict[Cell, Optional[Cell]] = {start: None}
    dist = {start: 0}
    q = deque([start])
    while q:
        c = q.popleft()
        for n in _neighbors4(c):
            if n not in prev and state.label(n) == FREE:
                prev[n] = c
                dist[n] = dist[c] + 1
                q.append(n)
    return prev, dist


def _first_step(prev: dict, goal: Cell) -> Cell:
    c = goal
    while prev[c] is not None and prev[prev[c]] is not None:
        c = prev[c]
    return c


def _path(prev: dict, goal: Cell) -> list[Cell]:
    out = []
    c = goal
    while c is not None:
        out.append(c)
        c = prev[c]
    return out[::-1]


def _fbe(state: ExplorationState, here: Cell) -> Action:
    frontier = state.frontier()
    if not frontier:
        return Action.stop()
    prev, dist = _bfs(state, here)
    # A visited frontier cell keeps unknown side neighbours the forward FOV never
    # covers; re-targeting it makes the agent shuttle between two such cells.
    targets = [c for c in frontier if c not in state.visited and c in prev]
    if not targets:
        return Action("rotate_in_place") if here in frontier else Action.stop()
    goal = min(targets, key=lambda c: (dist[c], c[1], c[0]))
    state.current_path = _path(prev, goal)
    return Action("move_to", _first_step(prev, goal))


def _random_neighbor(world: World, here: Cell, rng: np.random.Generator) -> Cell:
    options = [n for n in _neighbors4(here) if world.is_free(n)]
    if not options:
        raise NoFreeNeighbor(f"no free neighbour around {here}")
    return options[int(rng.integers(len(options)))]


def next_action(
    policy: str,
    obs: Observation,
    question: Question,
    mem: Memory,
    state: ExplorationState,
    rng: np.random.Generator,
    world: Optional[World] = None,
) -> Action:
    """Choose the next move for the named backbone ("fbe", "re" or "goe")."""
    if state.budget_left <= 0:
        return Action.stop()
    here = obs.pose.cell
    if policy in ("fbe", "goe"):
        state.update(obs)  # idempotent when the waypoint loop already did it
    if policy == "fbe":
        return _fbe(state, here)
    if policy == "re":
        if world is None:
            raise ValueError("random exploration needs the world map")
        try:
            return Action("move_to", _random_neighbor(world, here, rng))
        except NoFreeNeighbor:
            return Action.stop()
    if policy == "goe":
        goal = state.best_goal
        if goal is not None and goal == here:
            state.best_goal, state.best_score = None, -1.0
            goal = None
        if goal is not None:
            prev, _ = _bfs(state, here)
            if goal in prev:
                state.current_path = _path(prev, goal)
                return Action("move_to", _first_step(prev, goal))
            state.best_goal, state.best_score = None, -1.0
        return _fbe(state, here)
    raise ValueError(f"unknown exploration backbone {policy!r}")


# ---------------------------------------------------------------------------
# waypoint / episode


@dataclass
class WaypointRecord:
    waypoint: int
    pose: Pose
    obs_id: str
    score: float
    region_likelihood: Optional[float]
    band: str
    refined: bool
    gating_skipped: bool
    region_suppressed: bool
    views: list[dict]
    selected_id: str
    selected_score: float
    valid: bool
    gate: bool
    admitted_ref: Optional[str]
    memory_size: int
    action: str = ""

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pose"] = self.pose.to_dict()
        return d


@dataclass
class Agent:
    config: RunConfig
    modules: Modules
    provider: RelevanceProvider
    embedder: EmbeddingProvider
    episode_seed: int
    pose: Pose
    state: ExplorationState
    memory: Memory
    backbone: str = "fbe"
    waypoint: int = 0
    sensing_steps: int = 0
    relevance_queries: int = 0
    records: list[WaypointRecord] = field(default_factory=list)
    last_obs: Optional[Observation] = None

    @property
    def refine_cfg(self):
        return dataclasses.replace(self.config.refine, region_gating_enabled=self.modules.rd)


def run_waypoint(agent: Agent, world: World, question: Question) -> WaypointRecord:
    """observe -> score -> (refine) -> gate -> at most one memory write."""
    cfg = agent.config
    rcfg = agent.refine_cfg
    obs = observe(world, agent.pose, fov=rcfg.fov_degrees, view_range=cfg.view_range)
    for v in obs.visible:
        agent.state._entity_cells[(obs.id, v.id)] = _entity_cell(world, v.id, agent.pose.timestep)
    agent.last_obs = obs
    res = agent.provider.score(obs, question, world, agent.episode_seed)
    agent.relevance_queries += 1
    agent.state.update(obs)
    agent.state.note_score(obs, res.score)

    decision = trigger(res, rcfg)
    views: list[dict] = []
    selected, sel_score = obs, res.score
    refined = agent.modules.vr and decision.refine
    if refined:
        vs = collect_views(
            world, agent.pose, question, agent.provider, rcfg, episode_seed=agent.episode_seed, view_range=cfg.view_range
        )
        agent.relevance_queries += len(vs.views)
        agent.sensing_steps += len(vs.views)
        views = [{"id": o.id, "heading": o.pose.heading, "score": s} for o, s in vs.views]
        selected, sel_score = select_verified(vs, (obs, res.score), rcfg.include_original_in_argmax)

    valid = is_valid(selected, cfg.validity)
    gate = admission_gate(sel_score, valid, rcfg.tau_mem) if agent.modules.am else valid
    admitted = None
    if gate:
        entry = make_entry(selected, selected.pose, agent.waypoint, sel_score, agent.embedder, cfg.embedding_dim)
        agent.memory = update_memory(agent.memory, entry, True, agent.waypoint, payload=selected)
        admitted = selected.id

    rec = WaypointRecord(
        waypoint=agent.waypoint,
        pose=agent.pose,
        obs_id=obs.id,
        score=res.score,
        region_likelihood=res.region_likelihood,
        band=decision.band,
        refined=refined,
        gating_skipped=decision.gating_skipped and agent.modules.vr,
        region_suppressed=decision.region_suppressed and agent.modules.vr,
        views=views,
        selected_id=selected.id,
        selected_score=sel_score,
        valid=valid,
        gate=gate,
        admitted_ref=admitted,
        memory_size=len(agent.memory),
    )
    agent.records.append(rec)
    return rec


def _entity_cell(world: World, eid: str, t: int) -> Optional[Cell]:
    for o in world.objects:
        if o.id == eid:
            return o.cell
    pos = world.human_positions(t)
    return pos.get(eid)


@dataclass
class EpisodeResult:
    question_id: str
    split: str
    seed: int
    variant: str
    backbone: str
    correct: bool
    answer: str
    admitted_count: int
    sensing_steps: int
    relevance_queries: int
    waypoints_visited: int
    wall_time: float
    failed: bool = False
    error: Optional[str] = None
    records: list[WaypointRecord] = field(default_factory=list, repr=False, compare=False)
    memory: Optional[Memory] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "split": self.split,
            "seed": self.seed,
            "variant": self.variant,
            "backbone": self.backbone,
            "correct": self.correct,
            "answer": self.answer,
            "admitted_count": self.admitted_count,
            "sensing_steps": self.sensing_steps,
            "relevance_queries": self.relevance_queries,
            "waypoints_visited": self.waypoints_visited,
            "wall_time": self.wall_time,
            "failed": self.failed,
            "error": self.error,
        }

    @property
    def episode_id(self) -> str:
        return episode_id(self.variant, self.backbone, self.split, self.question_id, self.seed)


def episode_id(variant: str, backbone: str, split: str, question_id: str, seed: int) -> str:
    return f"{variant}/{backbone}/{split}/{question_id}/{seed}"


def episode_seed_for(seed: int, question: Question) -> int:
    # shared by both splits so paired episodes see the same noise at the same pose
    return stream_seed(seed, f"episode:{question.id}") % 2**64


Answerer = Callable[[Question, Memory, World], tuple[str, bool]]


def run_episode(
    world: World,
    question: Question,
    config: RunConfig = RunConfig(),
    seed: Optional[int] = None,
    variant: str = "full",
    backbone: str = "fbe",
    split: str = "dynamic",
    provider: Optional[RelevanceProvider] = None,
    embedder: Optional[EmbeddingProvider] = None,
    answerer: Optional[Answerer] = None,
    step_budget: Optional[int] = None,
) -> EpisodeResult:
    """Explore, sense and admit until stop or budget exhaustion, then answer from memory."""
    t0 = time.perf_counter()
    seed = config.seed if seed is None else seed
    modules = VARIANTS[variant]
    if backbone not in BACKBONES:
        raise ValueError(f"unknown backbone {backbone!r}")
    provider = provider or SyntheticRelevanceProvider(config.provider.synthetic)
    embedder = embedder or SyntheticEmbedder(config.embedding_dim, seed)
    answerer = answerer or answer_oracle
    budget = config.step_budget if step_budget is None else step_budget
    eseed = episode_seed_for(seed, question)
    rng = derive_streams(eseed, ["policy"])["policy"]

    start = question.start
    agent = Agent(
        config=config,
        modules=modules,
        provider=provider,
        embedder=embedder,
        episode_seed=eseed,
        pose=Pose(start.x, start.y, start.heading, 0),
        state=ExplorationState(world.width, world.height, budget_left=budget),
        memory=Memory(config.embedding_dim),
        backbone=backbone,
    )
    clock = Clock(world.horizon)
    failed, error = False, None
    try:
        while agent.waypoint < budget and clock.t < world.horizon:
            rec = run_waypoint(agent, world, question)
            agent.state.budget_left = budget - agent.waypoint - 1
            action = next_action(backbone, agent.last_obs, question, agent.memory, agent.state, rng, world)
            rec.action = action.kind if action.cell is None else f"{action.kind}:{action.cell[0]},{action.cell[1]}"
            agent.waypoint += 1
            if action.kind == "stop":
                break
            try:
                clock.advance(config.move_dt)
            except HorizonExceeded:
                break
            if clock.t >= world.horizon:
                break
            agent.pose = _apply(agent.pose, action, clock.t)
        answer, correct = answerer(question, agent.memory, world)
    except DivrrError as exc:
        failed, error = True, f"{type(exc).__name__}: {exc}"
        answer, correct = "", False

    return EpisodeResult(
        question_id=question.id,
        split=split,
        seed=seed,
        variant=variant,
        backbone=backbone,
        correct=bool(correct),
        answer=answer,
        admitted_count=len(agent.memory),
        sensing_steps=agent.sensing_steps,
        relevance_queries=agent.relevance_queries,
        waypoints_visited=len(agent.records),
        wall_time=time.perf_counter() - t0,
        failed=failed,
        error=error,
        records=agent.records,
        memory=agent.memory,
    )


def _apply(pose: Pose, action: Action, t: int) -> Pose:
    if action.kind == "rotate_in_place":
        return Pose(pose.x, pose.y, (pose.heading + 90.0) % 360.0, t)
    x, y = action.cell
    heading = math.degrees(math.atan2(y - pose.y, x - pose.x)) % 360.0
    return Pose(x, y, heading, t)
