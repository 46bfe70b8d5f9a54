"""Success counts per (strategy, task) and the table, CSV and JSON renderings of them."""

import io
import json
import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import pandas as pd

from src.errors import ConfigurationError
from src.tasks import get_task

CSV_COLUMNS = ["strategy", "task", "successes", "trials", "rate"]


def _percent(successes: int, trials: int) -> float:
    return round(100.0 * successes / trials, 1)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> Tuple[float, float]:
    """Wilson score interval for a success proportion, in percent."""
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return round(100 * max(0.0, centre - half), 1), round(100 * min(1.0, centre + half), 1)


@dataclass(frozen=True)
class Cell:
    strategy: str
    task: str
    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return _percent(self.successes, self.trials)

    def __str__(self):
        return f"{self.successes}/{self.trials}"


@dataclass(frozen=True)
class Report:
    tasks: Tuple[str, ...] = ()
    strategies: Tuple[str, ...] = ()
    cells: Dict[Tuple[str, str], Cell] = field(default_factory=dict)  # (strategy, task) -> Cell

    def cell(self, strategy: str, task: str) -> Cell:
        return self.cells[(strategy, task)]

    def average(self, strategy: str) -> float:
        """Unweighted mean of the per-task rates, to one decimal."""
        rates = [100.0 * c.successes / c.trials for c in (self.cell(strategy, t) for t in self.tasks)]
        return round(sum(rates) / len(rates), 1) if rates else 0.0

    def total_trials(self) -> int:
        return sum(c.trials for c in self.cells.values())

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"strategy": s, "task": t, "successes": c.successes, "trials": c.trials, "rate": c.rate}
            for s in self.strategies
            for t in self.tasks
            for c in (self.cell(s, t),)
        ]
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def table(self) -> pd.DataFrame:
        """Strategies as rows, tasks in report order as "s/t" columns, then avg."""
        labels = [_label(t) for t in self.tasks]
        data = [[str(self.cell(s, t)) for t in self.tasks] + [f"{self.average(s):.1f}"] for s in self.strategies]
        return pd.DataFrame(data, index=list(self.strategies), columns=labels + ["avg"])

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, lineterminator="\n")

    @classmethod
    def from_csv(cls, text: str) -> "Report":
        df = pd.read_csv(io.StringIO(text), dtype={"strategy": str, "task": str})
        cells = {}
        for row in df.to_dict("records"):
            cells[(row["strategy"], row["task"])] = Cell(row["strategy"], row["task"], int(row["successes"]), int(row["trials"]))
        return cls(tuple(dict.fromkeys(df["task"])), tuple(dict.fromkeys(df["strategy"])), cells)

    def to_json(self) -> str:
        out = {"tasks": list(self.tasks), "strategies": []}
        for s in self.strategies:
            cells = []
            for t in self.tasks:
                c = self.cell(s, t)
                cells.append({"task": t, "successes": c.successes, "trials": c.trials, "rate": c.rate, "ci95": list(wilson_interval(c.successes, c.trials))})
            out["strategies"].append({"strategy": s, "cells": cells, "avg": self.average(s)})
        return json.dumps(out, indent=2)


def _label(task: str) -> str:
    try:
        return get_task(task).label
    except ConfigurationError:
        return task


class Summary(NamedTuple):
    text: str
    csv: str
    json: str


def summarize(report: Report, csv_path: Optional[str] = None, json_path: Optional[str] = None) -> Summary:
    table = report.table()
    text = table.to_string() if len(table) else "(no strategies)"
    summary = Summary(text, report.to_csv(), report.to_json())
    if csv_path:
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            f.write(summary.csv)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as f:
            f.write(summary.json + "\n")
    return summary
