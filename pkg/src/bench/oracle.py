"""Exact success probability of executing a fixed plan without monitoring, by enumerating every outcome branch."""

from collections import defaultdict
from typing import Dict, FrozenSet, Iterable, Optional, Sequence

from src.pddl import Atom, GroundAction, Literal
from src.planner import holds
from src.world import Simulator, WorldState


def blind_success_probability(simulator: Simulator, plan: Sequence[GroundAction], goal: Iterable[Literal], world: Optional[WorldState] = None) -> float:
    """
    Probability that open-loop execution of `plan` reaches `goal`. The goal is checked before
    every step and after the last one, like an unmonitored episode does. Branches that end in
    the same true state are merged, so the tree stays small.
    """
    goal = tuple(goal)
    world = world or simulator.initial_world()
    frontier: Dict[FrozenSet[Atom], float] = {world.truth: 1.0}
    reached = 0.0
    for action in plan:
        branches: Dict[FrozenSet[Atom], float] = defaultdict(float)
        for truth, p in frontier.items():
            if holds(truth, goal):
                reached += p
                continue
            for q, after, _ in simulator.outcomes(WorldState(truth, world.floor), action):
                branches[after.truth] += p * q
        frontier = branches
    return reached + sum(p for truth, p in frontier.items() if holds(truth, goal))
