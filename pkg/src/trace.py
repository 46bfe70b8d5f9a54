"""
Episode traces as JSON Lines: one header line with everything needed to re-run the episode,
one line per event, and a closing result line.
"""

import json
from dataclasses import asdict
from typing import Dict, List, Tuple

from src.errors import ConfigurationError
from src.monitor import EpisodeConfig, EpisodeSeeds, Event, TrialResult
from src.perception import PerceptionConfig
from src.world import SituationSpec


def episode_header(task: str, cfg: EpisodeConfig, seeds: EpisodeSeeds, situations: Tuple[SituationSpec, ...]) -> Dict:
    return {
        "kind": "header",
        "task": task,
        "strategy": cfg.strategy.value,
        "seeds": {"world": seeds.world, "perception": seeds.perception},
        "perception": asdict(cfg.perception),
        "max_steps": cfg.max_steps,
        "max_replans": cfg.max_replans,
        "step_factor": cfg.step_factor,
        "situations": [asdict(s) for s in situations],
    }


def config_from_header(header: Dict) -> Tuple[str, EpisodeConfig, EpisodeSeeds]:
    cfg = EpisodeConfig(
        strategy=header["strategy"],
        perception=PerceptionConfig(**header["perception"]),
        situations=tuple(SituationSpec(**s) for s in header["situations"]),
        max_steps=header["max_steps"],
        max_replans=header["max_replans"],
        step_factor=header["step_factor"],
    )
    return header["task"], cfg, EpisodeSeeds(header["seeds"]["world"], header["seeds"]["perception"])


def trace_lines(header: Dict, result: TrialResult) -> List[str]:
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(e.to_dict(), sort_keys=True) for e in result.events)
    summary = {
        "kind": "result",
        "success": result.success,
        "steps": result.steps,
        "replans": result.replans,
        "reason": result.reason,
        "initial_plan_length": result.initial_plan_length,
    }
    lines.append(json.dumps(summary, sort_keys=True))
    return lines


def write_trace(path: str, header: Dict, result: TrialResult):
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(trace_lines(header, result)) + "\n")


def read_trace(path: str) -> Tuple[Dict, TrialResult]:
    with open(path, encoding="utf-8") as f:
        records = [json.loads(line) for line in f if line.strip()]
    if not records or records[0].get("kind") != "header" or records[-1].get("kind") != "result":
        raise ConfigurationError(f"{path} is not an episode trace")
    header, summary = records[0], records[-1]
    events = tuple(Event.from_dict(r) for r in records[1:-1])
    result = TrialResult(summary["success"], summary["steps"], summary["replans"], summary["reason"], summary["initial_plan_length"], events)
    return header, result
