"""Run ablation suites over generated scenarios and write reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .config import RefineConfig, RunConfig, from_dict, to_jsonable
from .errors import IoFailure, ParseError, PartialFailure, ValidationError
from .explore import BACKBONES, VARIANT_ORDER, VARIANTS, EpisodeResult, run_episode
from .memory import mem_metric
from .scenario import Scenario, load_suite

log = logging.getLogger(__name__)

SPLITS = ("dynamic", "static")
VARIANT_LABELS = {
    "base": "baseline",
    "base+am": "Base+AM",
    "base+am+vr": "Base+AM+VR",
    "full": "Base+AM+VR+RD (full)",
}
CSV_COLUMNS = ("variant", "backbone", "split", "accuracy_pct", "mem", "sensing_steps", "episodes")
WALL_TIME_KEYS = {"wall_time", "mean_wall_time"}


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str = ""
    variant: str = "full"
    backbone: str = "fbe"
    thresholds: RefineConfig = RefineConfig()
    seeds: tuple[int, ...] = (0,)
    parallelism: int = 1
    run: RunConfig = RunConfig()
    splits: tuple[str, ...] = SPLITS
    strict: bool = False  # raise PartialFailure when any episode fails

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError("variant", f"one of {sorted(VARIANTS)}")
        if self.backbone not in BACKBONES:
            raise ValidationError("backbone", f"one of {list(BACKBONES)}")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("seeds", "non-empty and distinct")
        if self.parallelism < 1:
            raise ValidationError("parallelism", ">= 1")
        if not self.splits or any(s not in SPLITS for s in self.splits):
            raise ValidationError("splits", f"subset of {list(SPLITS)}")

    @property
    def effective_run(self) -> RunConfig:
        return replace(self.run, refine=self.thresholds)


def load_experiment(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return from_dict(ExperimentConfig, data)


@dataclass
class SplitMetrics:
    accuracy_pct: float
    mem: float
    sensing_steps: float
    relevance_queries: float
    mean_wall_time: float
    episodes: int
    failed: int

    @classmethod
    def of(cls, results: Sequence[EpisodeResult]) -> "SplitMetrics":
        n = len(results)
        if n == 0:
            return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0, 0)
        return cls(
            accuracy_pct=100.0 * sum(r.correct for r in results) / n,
            mem=mem_metric(results),
            sensing_steps=sum(r.sensing_steps for r in results) / n,
            relevance_queries=sum(r.relevance_queries for r in results) / n,
            mean_wall_time=sum(r.wall_time for r in results) / n,
            episodes=n,
            failed=sum(r.failed for r in results),
        )


@dataclass
class SuiteReport:
    variant: str
    backbone: str
    config: dict
    episodes: list[EpisodeResult] = field(default_factory=list)
    metrics: dict[str, SplitMetrics] = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return sum(r.failed for r in self.episodes)

    def accuracy(self, split: str = "all") -> float:
        return self.metrics[split].accuracy_pct

    def mem(self, split: str = "all") -> float:
        return self.metrics[split].mem

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "backbone": self.backbone,
            "config": self.config,
            "failed": self.failed,
            "metrics": {k: to_jsonable(v) for k, v in self.metrics.items()},
            "episodes": [r.to_dict() for r in self.episodes],
        }


def _sort_key(r: EpisodeResult):
    return (r.question_id, r.seed, r.split)


def aggregate(variant: str, backbone: str, config: dict, results: Iterable[EpisodeResult]) -> SuiteReport:
    results = sorted(results, key=_sort_key)
    metrics = {s: SplitMetrics.of([r for r in results if r.split == s]) for s in SPLITS}
    metrics["all"] = SplitMetrics.of(results)
    return SuiteReport(variant, backbone, config, results, metrics)


# Workers rebuild providers from config so nothing unpicklable crosses processes.
_WORKER_PROVIDERS: dict[str, Any] = {}


def _providers_for(run: RunConfig):
    if run.provider.kind != "remote":
        return None, None, None
    key = json.dumps(run.to_dict(), sort_keys=True)
    if key not in _WORKER_PROVIDERS:
        from .remote import RemoteClient, RemoteEmbedder, RemoteRelevanceProvider, remote_answerer

        client = RemoteClient(run.provider.remote, run.scoring, run.embedding_dim)
        _WORKER_PROVIDERS[key] = (RemoteRelevanceProvider(client), RemoteEmbedder(client), remote_answerer(client))
    return _WORKER_PROVIDERS[key]


def _run_job(job) -> EpisodeResult:
    scenario, split, question, seed, variant, backbone, run = job
    provider, embedder, answerer = _providers_for(run)
    return run_episode(
        scenario.world_for(split),
        question,
        run,
        seed=seed,
        variant=variant,
        backbone=backbone,
        split=split,
        provider=provider,
        embedder=embedder,
        answerer=answerer,
    )


def _jobs(scenarios: Sequence[Scenario], cfg: ExperimentConfig, variant: str):
    run = cfg.effective_run
    for sc in scenarios:
        for split in cfg.splits:
            for q in sc.questions_for(split):
                for seed in cfg.seeds:
                    yield (sc, split, q, seed, variant, cfg.backbone, run)


def run_suite(
    cfg: ExperimentConfig,
    scenarios: Optional[Sequence[Scenario]] = None,
    variant: Optional[str] = None,
    executor: Optional[ProcessPoolExecutor] = None,
) -> SuiteReport:
    """Run every (question, split, seed) episode for one variant and aggregate."""
    variant = variant or cfg.variant
    if scenarios is None:
        scenarios = load_suite(cfg.suite)
    jobs = list(_jobs(scenarios, cfg, variant))
    if cfg.parallelism == 1 and executor is None:
        results = [_run_job(j) for j in jobs]
    elif executor is not None:
        results = list(executor.map(_run_job, jobs, chunksize=max(1, len(jobs) // (8 * cfg.parallelism))))
    else:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (8 * cfg.parallelism))))
    # parallelism cannot change results, so it stays out of the report
    meta = {k: v for k, v in to_jsonable(replace(cfg, variant=variant)).items() if k != "parallelism"}
    report = aggregate(variant, cfg.backbone, meta, results)
    if report.failed:
        log.warning("%d of %d episodes failed", report.failed, len(results))
        if cfg.strict:
            raise PartialFailure(report.failed, report)
    return report


def run_ablation(
    cfg: ExperimentConfig,
    scenarios: Optional[Sequence[Scenario]] = None,
    variants: Sequence[str] = VARIANT_ORDER,
) -> list[SuiteReport]:
    if scenarios is None:
        scenarios = load_suite(cfg.suite)
    if cfg.parallelism == 1:
        return [run_suite(cfg, scenarios, v) for v in variants]
    with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
        return [run_suite(cfg, scenarios, v, executor=pool) for v in variants]


# -- output ------------------------------------------------------------------


def strip_wall_time(obj: Any) -> Any:
    """Drop timing fields so reports can be compared byte for byte."""
    if isinstance(obj, dict):
        return {k: strip_wall_time(v) for k, v in obj.items() if k not in WALL_TIME_KEYS}
    if isinstance(obj, list):
        return [strip_wall_time(v) for v in obj]
    return obj


def report_json(reports: Sequence[SuiteReport], wall_time: bool = True) -> str:
    data = [r.to_dict() for r in reports]
    if not wall_time:
        data = strip_wall_time(data)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _rows(reports: Sequence[SuiteReport]):
    for r in reports:
        for split in ("all",) + SPLITS:
            m = r.metrics[split]
            yield {
                "variant": r.variant,
                "backbone": r.backbone,
                "split": split,
                "accuracy_pct": f"{m.accuracy_pct:.2f}",
                "mem": f"{m.mem:.2f}",
                "sensing_steps": f"{m.sensing_steps:.2f}",
                "episodes": m.episodes,
            }


def report_csv(reports: Sequence[SuiteReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in _rows(reports):
        w.writerow(row)
    return buf.getvalue()


def report_table(reports: Sequence[SuiteReport]) -> str:
    order = {v: i for i, v in enumerate(VARIANT_ORDER)}
    reports = sorted(reports, key=lambda r: (r.backbone, order.get(r.variant, 99)))
    head = f"{'Variant':<24}{'Backbone':<10}" + "".join(f"{s.title() + ' Acc':>13}{'Mem':>7}" for s in ("all",) + SPLITS)
    lines = [head, "-" * len(head)]
    for r in reports:
        cells = "".join(f"{r.metrics[s].accuracy_pct:>13.1f}{r.metrics[s].mem:>7.2f}" for s in ("all",) + SPLITS)
        lines.append(f"{VARIANT_LABELS.get(r.variant, r.variant):<24}{r.backbone:<10}{cells}")
    return "\n".join(lines) + "\n"


def _report_from_dict(d: dict) -> SuiteReport:
    eps = [EpisodeResult(**e) for e in d.get("episodes", [])]
    rep = aggregate(d["variant"], d["backbone"], d.get("config", {}), eps)
    return rep


def load_reports(path: str | Path) -> list[SuiteReport]:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: {exc}") from exc
    return [_report_from_dict(d) for d in data]


def emit_report(reports: Sequence[SuiteReport], out_dir: str | Path) -> Path:
    """Write report.json, metrics.csv, table.txt and the per-waypoint episode log."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report_json(reports))
        (out / "metrics.csv").write_text(report_csv(reports))
        (out / "table.txt").write_text(report_table(reports))
        with open(out / "episodes.jsonl", "w") as fh:
            for r in reports:
                for ep in r.episodes:
                    rec = {"episode_id": ep.episode_id, **ep.to_dict(), "waypoints": [w.to_dict() for w in ep.records]}
                    if ep.memory is not None:
                        rec["memory_refs"] = ep.memory.refs()
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write reports to {out}: {exc}") from exc
    return out


def find_episode(log_dir: str | Path, episode: str) -> dict:
    p = Path(log_dir) / "episodes.jsonl"
    try:
        with open(p) as fh:
            for line in fh:
                rec = json.loads(line)
                if rec["episode_id"] == episode:
                    return rec
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    raise KeyError(episode)
