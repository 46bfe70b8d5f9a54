"""
Seeded trial matrices over tasks x strategies. Each trial is reproducible on its own: its two
random streams are a pure function of (base seed, task index, strategy index, trial index).
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple

from dotenv import dotenv_values

from src import settings
from src.bench.report import Cell, Report
from src.errors import ConfigurationError, ResourceLimitError, UnsolvableError
from src.monitor import EpisodeConfig, EpisodeSeeds, Monitor, Strategy, TrialResult
from src.perception import PerceptionConfig
from src.tasks import get_task, load_task, task_names
from src.world import SituationSpec, load_situations, without_situations

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "yes", "on"}


def derive_seeds(base_seed: int, task_index: int, strategy_index: int, trial: int) -> EpisodeSeeds:
    """
    The world stream ignores the strategy, so every strategy faces the same situations on the
    same trial. The perception stream is separate per strategy.
    """
    n = base_seed + trial
    return EpisodeSeeds(f"world:{task_index}:{n}", f"perception:{task_index}:{strategy_index}:{n}")


@dataclass(frozen=True)
class BenchmarkConfig:
    tasks: Tuple[str, ...] = field(default_factory=task_names)
    strategies: Tuple[Strategy, ...] = tuple(Strategy)
    trials: int = 20
    base_seed: int = 0
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    situations: str = "table"  # "table", "none" (all probabilities zero) or a CSV path
    max_replans: int = settings.MAX_REPLANS
    step_factor: int = settings.STEP_FACTOR
    workers: int = 1
    output_csv: Optional[str] = None
    output_json: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError(f"trials must be at least 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")
        object.__setattr__(self, "tasks", tuple(get_task(t).name for t in self.tasks))
        try:
            object.__setattr__(self, "strategies", tuple(Strategy(s) for s in self.strategies))
        except ValueError as e:
            raise ConfigurationError(f"{e}; expected one of {', '.join(s.value for s in Strategy)}") from None

    @classmethod
    def from_file(cls, path: str = settings.BENCH_CONFIG) -> "BenchmarkConfig":
        if not os.path.exists(path):
            raise ConfigurationError(f"benchmark config {path} not found")
        values = {k.upper(): v for k, v in dotenv_values(path).items() if v is not None and v.strip()}
        known = {"TASKS", "STRATEGIES", "TRIALS", "BASE_SEED", "FLIP_RATE", "SKIP_RATE", "GATE_ON_INVIEW", "SITUATIONS", "MAX_REPLANS", "STEP_FACTOR", "WORKERS", "OUTPUT_CSV", "OUTPUT_JSON"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"{path}: unknown keys {unknown}")
        kwargs = {}
        try:
            if "TASKS" in values:
                kwargs["tasks"] = tuple(values["TASKS"].replace(",", " ").split())
            if "STRATEGIES" in values:
                kwargs["strategies"] = tuple(values["STRATEGIES"].lower().replace(",", " ").split())
            for key in ("TRIALS", "BASE_SEED", "MAX_REPLANS", "STEP_FACTOR", "WORKERS"):
                if key in values:
                    kwargs[key.lower()] = int(values[key])
            kwargs["perception"] = PerceptionConfig(
                flip_rate=float(values.get("FLIP_RATE", 0.0)),
                skip_rate=float(values.get("SKIP_RATE", 0.0)),
                gate_on_inview=values.get("GATE_ON_INVIEW", "false").lower() in _TRUE,
            )
        except ValueError as e:
            raise ConfigurationError(f"{path}: {e}") from None
        base = os.path.dirname(os.path.abspath(path))
        if "SITUATIONS" in values:
            kwargs["situations"] = values["SITUATIONS"] if values["SITUATIONS"] in ("table", "none") else os.path.join(base, values["SITUATIONS"])
        for key in ("OUTPUT_CSV", "OUTPUT_JSON"):
            if key in values:
                kwargs[key.lower()] = values[key]
        return cls(**kwargs)

    def situation_specs(self) -> Tuple[SituationSpec, ...]:
        return _situation_specs(self.situations)

    def episode_config(self, strategy: Strategy) -> EpisodeConfig:
        return EpisodeConfig(strategy, self.perception, self.situation_specs(), max_replans=self.max_replans, step_factor=self.step_factor)


@lru_cache(maxsize=None)
def _situation_specs(source: str) -> Tuple[SituationSpec, ...]:
    if source == "table":
        return load_situations()
    if source == "none":
        return without_situations(load_situations())
    return load_situations(source)


class CellJob(NamedTuple):
    task_index: int
    strategy_index: int


@lru_cache(maxsize=None)
def _monitor(task: str) -> Monitor:
    # one per task and process; the planner memo is shared by every trial run here
    domain, problem = load_task(task)
    return Monitor(domain, problem)


def run_trial(cfg: BenchmarkConfig, task_index: int, strategy_index: int, trial: int) -> TrialResult:
    strategy = cfg.strategies[strategy_index]
    seeds = derive_seeds(cfg.base_seed, task_index, strategy_index, trial)
    return _monitor(cfg.tasks[task_index]).run(cfg.episode_config(strategy), seeds)


def run_cell(cfg: BenchmarkConfig, job: CellJob) -> Cell:
    successes = sum(run_trial(cfg, job.task_index, job.strategy_index, trial).success for trial in range(cfg.trials))
    cell = Cell(cfg.strategies[job.strategy_index].value, cfg.tasks[job.task_index], successes, cfg.trials)
    logger.info("%s on %s: %s", cell.strategy, cell.task, cell)
    return cell


def replay_trial(cfg: BenchmarkConfig, task: str, strategy: str, trial: int) -> TrialResult:
    """Re-run one trial of a benchmark in isolation."""
    task_index = cfg.tasks.index(get_task(task).name)
    strategy_index = cfg.strategies.index(Strategy(strategy))
    return run_trial(cfg, task_index, strategy_index, trial)


def preflight(cfg: BenchmarkConfig) -> Dict[str, int]:
    """Initial plan length per task; every task must be solvable from its initial state."""
    lengths = {}
    for task in cfg.tasks:
        monitor = _monitor(task)
        try:
            lengths[task] = len(monitor.planner.solve(monitor.problem.init))
        except (UnsolvableError, ResourceLimitError) as e:
            raise ConfigurationError(f"task '{task}' has no plan from its initial state: {e}") from None
    return lengths


def run_benchmark(cfg: BenchmarkConfig) -> Report:
    preflight(cfg)
    jobs = [CellJob(ti, si) for si in range(len(cfg.strategies)) for ti in range(len(cfg.tasks))]
    logger.info("running %d cells x %d trials on %d worker(s)", len(jobs), cfg.trials, cfg.workers)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            cells: List[Cell] = list(pool.map(run_cell, [cfg] * len(jobs), jobs))
    else:
        cells = [run_cell(cfg, job) for job in jobs]
    # pool.map keeps submission order, so the merge is index-ordered either way
    return Report(cfg.tasks, tuple(s.value for s in cfg.strategies), {(c.strategy, c.task): c for c in cells})
