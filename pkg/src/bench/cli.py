"""Command line entry point: `bench run|validate|plan|episode|replay`."""

import argparse
import logging
import sys
import time
from dataclasses import replace
from typing import List, Optional

from src import settings
from src.bench.harness import BenchmarkConfig, run_benchmark
from src.bench.report import summarize
from src.errors import PlanningError
from src.monitor import EpisodeConfig, EpisodeSeeds, Monitor, Strategy
from src.pddl import load_domain, load_problem
from src.perception import PerceptionConfig
from src.planner import Planner, format_sas_plan, validate_plan
from src.tasks import load_task, task_names
from src.trace import config_from_header, episode_header, read_trace, write_trace
from src.world import load_situations


def cmd_run(args) -> int:
    cfg = BenchmarkConfig.from_file(args.config)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    print(f"Running {len(cfg.tasks)} task(s) x {len(cfg.strategies)} strategies x {cfg.trials} trials...")
    start = time.perf_counter()
    report = run_benchmark(cfg)
    summary = summarize(report, cfg.output_csv, cfg.output_json)
    print(summary.text)
    print(f"Finished {report.total_trials()} trials in {time.perf_counter() - start:.1f}s")
    for path in (cfg.output_csv, cfg.output_json):
        if path:
            print(f"Wrote {path}")
    return 0


def cmd_validate(args) -> int:
    domain = load_domain(args.domain)
    print(f"Domain {domain.name}: {len(domain.schemas)} actions, {len(domain.predicates)} predicates, {len(domain.types)} types")
    if not args.problem:
        return 0
    problem = load_problem(args.problem, domain)
    print(f"Problem {problem.name}: {len(problem.objects)} objects, {len(problem.init)} initial atoms, {len(problem.goal)} goal literals")
    planner = Planner(domain, problem)
    print(f"Grounded {len(planner.actions)} actions")
    if args.plan:
        with open(args.plan, encoding="utf-8") as f:
            steps = planner.read_sas_plan(f.read())
        result = validate_plan(problem.init, steps, problem.goal)
        if not result.valid:
            where = "goal not reached" if result.failed_at == len(steps) else f"step {result.failed_at + 1} ({steps[result.failed_at]}) not applicable"
            print(f"Plan is invalid: {where}")
            return 1
        print(f"Plan of {len(steps)} steps is valid")
        return 0
    found = planner.solve(problem.init)
    print(f"Solvable with a plan of {len(found)} steps")
    return 0


def cmd_plan(args) -> int:
    domain, problem = load_task(args.task)
    found = Planner(domain, problem).solve(problem.init)
    text = format_sas_plan(found.steps)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"Wrote {len(found)} steps to {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_episode(args) -> int:
    domain, problem = load_task(args.task)
    situations = load_situations()
    perception = PerceptionConfig(args.flip_rate, args.skip_rate, args.gate_on_inview)
    cfg = EpisodeConfig(Strategy(args.strategy), perception, situations)
    seeds = EpisodeSeeds.coerce(args.seed)
    result = Monitor(domain, problem).run(cfg, seeds)
    for event in result.events:
        qa = "; ".join(f"{q} -> {a}" for q, a in event.qa)
        print(f"[{event.step:>3}] {event.kind:<12} {event.action or ''} {event.outcome or ''} {qa}".rstrip())
    print(f"{'Success' if result.success else 'Failure'}: {result.reason} after {result.steps} steps and {result.replans} replans")
    if args.out:
        write_trace(args.out, episode_header(args.task, cfg, seeds, situations), result)
        print(f"Wrote trace to {args.out}")
    return 0


def cmd_replay(args) -> int:
    header, recorded = read_trace(args.trace)
    task, cfg, seeds = config_from_header(header)
    domain, problem = load_task(task)
    replayed = Monitor(domain, problem).run(cfg, seeds)
    if replayed == recorded:
        print(f"Replay matches: {len(recorded.events)} events, {recorded.reason}")
        return 0
    for i, (a, b) in enumerate(zip(recorded.events, replayed.events)):
        if a != b:
            print(f"First difference at event {i}:\n  recorded {a.to_dict()}\n  replayed {b.to_dict()}")
            break
    else:
        print(f"Event counts differ: recorded {len(recorded.events)}, replayed {len(replayed.events)}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Plan-execution monitoring benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark matrix from a config file")
    run.add_argument("--config", default=settings.BENCH_CONFIG)
    run.add_argument("--trials", type=int)
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="parse a domain (and problem), optionally check a plan file")
    validate.add_argument("--domain", default=settings.DOMAIN_FILE)
    validate.add_argument("--problem")
    validate.add_argument("--plan", help="plan in sas_plan format to validate")
    validate.set_defaults(func=cmd_validate)

    plan = sub.add_parser("plan", help="print the initial plan of a bundled task")
    plan.add_argument("--task", required=True, choices=task_names())
    plan.add_argument("--out")
    plan.set_defaults(func=cmd_plan)

    episode = sub.add_parser("episode", help="run and print one seeded episode")
    episode.add_argument("--task", required=True, choices=task_names())
    episode.add_argument("--strategy", default=Strategy.DKPROMPT.value, choices=[s.value for s in Strategy])
    episode.add_argument("--seed", type=int, default=0)
    episode.add_argument("--flip-rate", type=float, default=0.0)
    episode.add_argument("--skip-rate", type=float, default=0.0)
    episode.add_argument("--gate-on-inview", action="store_true")
    episode.add_argument("--out", help="write a JSON Lines trace here")
    episode.set_defaults(func=cmd_episode)

    replay = sub.add_parser("replay", help="re-run a recorded episode trace and compare")
    replay.add_argument("--trace", required=True)
    replay.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.LOG_LEVEL.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PlanningError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
