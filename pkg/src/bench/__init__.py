from .harness import BenchmarkConfig, derive_seeds, preflight, replay_trial, run_benchmark
from .oracle import blind_success_probability
from .report import Cell, Report, Summary, summarize

__all__ = [
    "BenchmarkConfig",
    "Cell",
    "Report",
    "Summary",
    "blind_success_probability",
    "derive_seeds",
    "preflight",
    "replay_trial",
    "run_benchmark",
    "summarize",
]
