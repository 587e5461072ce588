"""Command line entry point: ``divrr gen | run | report | trace``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DivrrError
from .explore import VARIANT_ORDER
from .harness import (
    emit_report,
    find_episode,
    load_experiment,
    load_reports,
    report_csv,
    report_json,
    report_table,
    run_ablation,
    run_suite,
)
from .scenario import GenConfig, gen_config_from_dict, generate_suite, load_suite, write_suite

log = logging.getLogger("divrr")


def _gen(args) -> int:
    cfg = GenConfig()
    if args.config:
        cfg = gen_config_from_dict(json.loads(Path(args.config).read_text()))
    scenarios = generate_suite(args.questions, seed=args.seed, cfg=cfg)
    path = write_suite(scenarios, args.out, seed=args.seed, cfg=cfg)
    n = sum(len(s.questions) for s in scenarios)
    print(f"wrote {len(scenarios)} scenarios, {n} questions -> {path}")
    return 0


def _run(args) -> int:
    cfg = load_experiment(args.config)
    suite = args.suite or cfg.suite
    if not suite:
        raise SystemExit("no suite given: set 'suite' in the config or pass --suite")
    if not Path(suite).is_absolute() and not args.suite:
        suite = str(Path(args.config).parent / suite)
    if args.parallelism:
        cfg = replace(cfg, parallelism=args.parallelism)
    scenarios = load_suite(suite)
    if args.ablation:
        reports = run_ablation(cfg, scenarios, VARIANT_ORDER)
    else:
        reports = [run_suite(cfg, scenarios, v) for v in (args.variant or [cfg.variant])]
    out = emit_report(reports, args.out)
    sys.stdout.write(report_table(reports))
    failed = sum(r.failed for r in reports)
    if failed:
        log.warning("%d episodes failed; see %s/episodes.jsonl", failed, out)
    print(f"reports written to {out}")
    return 3 if failed else 0


def _report(args) -> int:
    reports = load_reports(args.input)
    render = {"csv": report_csv, "json": report_json, "table": report_table}[args.format]
    sys.stdout.write(render(reports))
    return 0


def _trace(args) -> int:
    try:
        rec = find_episode(args.input, args.episode)
    except KeyError:
        print(f"episode {args.episode!r} not found in {args.input}", file=sys.stderr)
        return 1
    print(f"{rec['episode_id']}  correct={rec['correct']}  answer={rec['answer']!r}  admitted={rec['admitted_count']}  sensing={rec['sensing_steps']}")
    for w in rec["waypoints"]:
        p = w["pose"]
        line = f"  #{w['waypoint']:>2} ({p['x']:>2},{p['y']:>2}) h={p['heading']:>5.1f} t={p['timestep']:>3}  s={w['score']:.3f} {w['band']:<15}"
        if w["refined"]:
            line += f" views={len(w['views'])} -> {w['selected_id']} ({w['selected_score']:.3f})"
        line += f"  gate={'admit' if w['gate'] else '-'}  {w['action']}"
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divrr", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a paired dynamic/static scenario suite")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--questions", type=int, default=200)
    g.add_argument("--config", help="JSON file with generator settings")
    g.set_defaults(fn=_gen)

    r = sub.add_parser("run", help="run an experiment config over a suite")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--suite", help="override the suite path in the config")
    r.add_argument("--variant", action="append", choices=VARIANT_ORDER)
    r.add_argument("--ablation", action="store_true", help="run all four variants")
    r.add_argument("--parallelism", type=int)
    r.set_defaults(fn=_run)

    p = sub.add_parser("report", help="render a finished run")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("csv", "json", "table"), default="table")
    p.set_defaults(fn=_report)

    t = sub.add_parser("trace", help="print the per-waypoint log of one episode")
    t.add_argument("--episode", required=True, help="variant/backbone/split/question/seed")
    t.add_argument("--in", dest="input", default=".")
    t.set_defaults(fn=_trace)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except DivrrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
