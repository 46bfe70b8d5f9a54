"""
Ground-truth simulator. Actions are gated by their family's constraints, then one situation
(or a clean success) is sampled from the situation table and applied to the true state.
"""

import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Callable, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Tuple, Union

import pandas as pd

from src import settings
from src.errors import ConfigurationError, UnknownActionFamilyError
from src.pddl import Atom, Domain, GroundAction, Literal, Problem
from src.planner import apply, holds

logger = logging.getLogger(__name__)

FAMILIES_FILE = os.path.join(settings.DATA_DIR, "families.csv")
SITUATIONS_FILE = os.path.join(settings.DATA_DIR, "situations.csv")
ROLES = ("agent", "target", "receptacle", "tool", "room", "content", "liquid")


@dataclass(frozen=True)
class WorldState:
    truth: FrozenSet[Atom]
    floor: Optional[str] = None  # where dropped objects land


class Roles(NamedTuple):
    agent: Optional[str] = None
    target: Optional[str] = None
    receptacle: Optional[str] = None
    tool: Optional[str] = None
    room: Optional[str] = None
    content: Optional[str] = None
    liquid: Optional[str] = None


class FamilyBinding(NamedTuple):
    schema: str
    family: str
    positions: Dict[str, int]  # role -> parameter index

    def bind(self, action: GroundAction) -> Roles:
        return Roles(**{role: action.args[i] for role, i in self.positions.items()})


@dataclass(frozen=True)
class SituationSpec:
    family: str
    label: str
    probability: float
    mutation: str
    unspecified: bool = False  # "N/A" in the source table; loaded as 0


@dataclass(frozen=True)
class CleanSuccess:
    tag = "success"

    def __str__(self):
        return self.tag


@dataclass(frozen=True)
class ConstraintFailure:
    violated: Tuple[str, ...]
    tag = "constraint-failure"

    def __str__(self):
        return f"{self.tag}:{','.join(self.violated)}"


@dataclass(frozen=True)
class Situation:
    label: str
    tag = "situation"

    def __str__(self):
        return f"{self.tag}:{self.label}"


ExecutionOutcome = Union[CleanSuccess, ConstraintFailure, Situation]


# Constraints: (label, check over (truth, roles)). Checks hold when the action may run.
def _inview(role: str):
    return lambda truth, r: Atom("inview", (r.agent, getattr(r, role))) in truth


def _inhand(role: str):
    return lambda truth, r: Atom("inhand", (r.agent, getattr(r, role))) in truth


def _same_room(truth, r: Roles) -> bool:
    return Atom("inroom", (r.agent, r.room)) in truth and Atom("inroom", (r.target, r.room)) in truth


def _hand_empty(truth, r: Roles) -> bool:
    return Atom("handempty", (r.agent,)) in truth


def _not_closed(truth, r: Roles) -> bool:
    return Atom("closed", (r.receptacle,)) not in truth


def _container_empty(truth, r: Roles) -> bool:
    return not any(a.predicate == "filled" and a.args[0] == r.target for a in truth)


def _sink_filled(truth, r: Roles) -> bool:
    return Atom("filledsink", (r.receptacle, r.liquid)) in truth


def _content_inside(truth, r: Roles) -> bool:
    return r.content is None or Atom("inside", (r.content, r.target)) in truth


def _content_filled(truth, r: Roles) -> bool:
    return r.liquid is None or Atom("filled", (r.content, r.liquid)) in truth


CONSTRAINTS: Dict[str, Tuple[Tuple[str, Callable], ...]] = {
    "find": (("same-room", _same_room),),
    "grasp": (("object-inview", _inview("target")), ("hand-empty", _hand_empty)),
    "placein": (("object-inhand", _inhand("target")), ("receptacle-inview", _inview("receptacle")), ("receptacle-not-closed", _not_closed)),
    "placeon": (("object-inhand", _inhand("target")), ("receptacle-inview", _inview("receptacle"))),
    "fillsink": (("sink-inview", _inview("target")),),
    "fill": (("container-inhand", _inhand("target")), ("near-sink", _inview("receptacle")), ("container-empty", _container_empty)),
    "open": (("object-inview", _inview("target")),),
    "close": (("object-inview", _inview("target")),),
    "turnon": (("object-inview", _inview("target")),),
    "cut": (("object-inview", _inview("target")), ("knife-inhand", _inhand("tool"))),
}

# Opt-in checks, enabled by label through EXTRA_CONSTRAINTS
EXTRA_CONSTRAINTS: Dict[str, Tuple[Tuple[str, Callable], ...]] = {
    "fill": (("sink-filled", _sink_filled),),
    "turnon": (("content-inside", _content_inside), ("content-filled", _content_filled)),
}


def constraint_table(extra: Iterable[str] = ()) -> Dict[str, Tuple[Tuple[str, Callable], ...]]:
    """Base checks per family plus the named opt-in ones."""
    extra = set(extra)
    known = {label for checks in EXTRA_CONSTRAINTS.values() for label, _ in checks}
    if extra - known:
        raise ConfigurationError(f"unknown extra constraints {sorted(extra - known)}; choose from {sorted(known)}")
    table = dict(CONSTRAINTS)
    for family, checks in EXTRA_CONSTRAINTS.items():
        table[family] += tuple(c for c in checks if c[0] in extra)
    return table


def _drop(truth: FrozenSet[Atom], agent: str, obj: str, floor: Optional[str]) -> FrozenSet[Atom]:
    """`obj` leaves the hand (if held) and lands on the floor nearby; room membership is kept."""
    removed = {a for a in truth if a.predicate in ("ontop", "inside", "onfloor") and a.args[0] == obj}
    removed.add(Atom("inview", (agent, obj)))
    added = set()
    if Atom("inhand", (agent, obj)) in truth:
        removed.add(Atom("inhand", (agent, obj)))
        if not any(a.predicate == "inhand" and a.args[0] == agent and a.args[1] != obj for a in truth):
            added.add(Atom("handempty", (agent,)))
    if floor is not None:
        added |= {Atom("onfloor", (obj, floor)), Atom("ontop", (obj, floor))}
    return frozenset((truth - removed) | added)


def _drop_held(truth: FrozenSet[Atom], agent: str, floor: Optional[str]) -> FrozenSet[Atom]:
    for held in sorted(a.args[1] for a in truth if a.predicate == "inhand" and a.args[0] == agent):
        truth = _drop(truth, agent, held, floor)
    return truth


def clear_held_locations(atoms: FrozenSet[Atom]) -> FrozenSet[Atom]:
    """A held object is nowhere else: drop its location atoms."""
    held = {a.args[1] for a in atoms if a.predicate == "inhand"}
    if not held:
        return atoms
    stale = {a for a in atoms if a.predicate in settings.LOCATION_PREDICATES and a.args and a.args[0] in held}
    return atoms - stale if stale else atoms


MUTATIONS: Dict[str, Callable[[WorldState, GroundAction, Roles], FrozenSet[Atom]]] = {
    "no_change": lambda w, action, r: w.truth,
    "drop_target": lambda w, action, r: _drop(w.truth, r.agent, r.target, w.floor),
    "drop_held": lambda w, action, r: _drop_held(w.truth, r.agent, w.floor),
    "effects_then_drop_held": lambda w, action, r: _drop_held(apply(w.truth, action, check=False), r.agent, w.floor),
    "effects_without_inview": lambda w, action, r: apply(w.truth, action, check=False) - {Atom("inview", (r.agent, r.target))},
}


def _optional_int(value) -> Optional[int]:
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else int(value)


def load_families(path: str = FAMILIES_FILE) -> Dict[str, FamilyBinding]:
    df = pd.read_csv(path, comment="#", dtype={"schema": str, "family": str})
    missing = {"schema", "family", "agent", "target"} - set(df.columns)
    if missing:
        raise ConfigurationError(f"{path}: missing columns {sorted(missing)}")
    families = {}
    for row in df.to_dict("records"):
        if row["family"] not in CONSTRAINTS:
            raise ConfigurationError(f"{path}: unknown action family '{row['family']}' for schema '{row['schema']}'")
        positions = {role: _optional_int(row.get(role)) for role in ROLES}
        families[row["schema"]] = FamilyBinding(row["schema"], row["family"], {k: v for k, v in positions.items() if v is not None})
    return families


def load_situations(path: str = SITUATIONS_FILE) -> Tuple[SituationSpec, ...]:
    df = pd.read_csv(path, comment="#", dtype={"family": str, "label": str, "mutation": str})
    specs = []
    for row in df.to_dict("records"):
        p = row["probability"]
        unspecified = isinstance(p, float) and math.isnan(p)
        spec = SituationSpec(row["family"], row["label"], 0.0 if unspecified else float(p), row["mutation"], unspecified)
        specs.append(spec)
    validate_situations(specs)
    return tuple(specs)


def validate_situations(specs: Iterable[SituationSpec]):
    totals: Dict[str, float] = defaultdict(float)
    for spec in specs:
        if spec.family not in CONSTRAINTS:
            raise ConfigurationError(f"situation '{spec.label}' names unknown family '{spec.family}'")
        if spec.mutation not in MUTATIONS:
            raise ConfigurationError(f"situation '{spec.label}' names unknown mutation '{spec.mutation}'")
        if not 0.0 <= spec.probability <= 1.0:
            raise ConfigurationError(f"situation '{spec.label}' has probability {spec.probability} outside [0, 1]")
        totals[spec.family] += spec.probability
    for family, total in totals.items():
        if total > 1.0 + 1e-9:
            raise ConfigurationError(f"situation probabilities of '{family}' sum to {total} > 1")


def without_situations(specs: Iterable[SituationSpec]) -> Tuple[SituationSpec, ...]:
    """Same table with every probability set to zero."""
    return tuple(replace(s, probability=0.0) for s in specs)


def goal_satisfied(world: WorldState, goal: Iterable[Literal]) -> bool:
    return holds(world.truth, goal)


class Simulator:
    """Executes ground actions against a WorldState. Holds only immutable tables; trials bring their own rng."""

    def __init__(
        self,
        domain: Domain,
        problem: Problem,
        families: Optional[Dict[str, FamilyBinding]] = None,
        situations: Optional[Iterable[SituationSpec]] = None,
        extra_constraints: Iterable[str] = settings.EXTRA_CONSTRAINTS,
    ):
        self.domain = domain
        self.problem = problem
        self.constraints = constraint_table(extra_constraints)
        self.families = load_families() if families is None else families
        self.situations = load_situations() if situations is None else tuple(situations)
        validate_situations(self.situations)
        self._by_family: Dict[str, Tuple[SituationSpec, ...]] = defaultdict(tuple)
        for spec in self.situations:
            self._by_family[spec.family] += (spec,)
        floors = problem.objects_of(domain, settings.FLOOR_TYPE) if settings.FLOOR_TYPE in domain.types else ()
        self.floor = floors[0] if floors else None

    def initial_world(self) -> WorldState:
        return WorldState(self.problem.init, self.floor)

    def binding(self, action: GroundAction) -> FamilyBinding:
        try:
            return self.families[action.name]
        except KeyError:
            raise UnknownActionFamilyError(f"action '{action.name}' belongs to no action family") from None

    def family_situations(self, family: str) -> Tuple[SituationSpec, ...]:
        return self._by_family[family]

    def check_constraints(self, world: WorldState, action: GroundAction) -> List[str]:
        binding = self.binding(action)
        roles = binding.bind(action)
        return [label for label, check in self.constraints[binding.family] if not check(world.truth, roles)]

    def mutate(self, world: WorldState, action: GroundAction, mutation: str) -> WorldState:
        return replace(world, truth=clear_held_locations(MUTATIONS[mutation](world, action, self.binding(action).bind(action))))

    def succeed(self, world: WorldState, action: GroundAction) -> WorldState:
        return replace(world, truth=clear_held_locations(apply(world.truth, action, check=False)))

    def execute(self, world: WorldState, action: GroundAction, rng) -> Tuple[WorldState, ExecutionOutcome]:
        """Run `action`; draws exactly one number from `rng` when the constraints hold and none otherwise."""
        violated = self.check_constraints(world, action)
        if violated:
            logger.debug("%s blocked by %s", action, violated)
            return world, ConstraintFailure(tuple(violated))
        u = rng.random()
        cumulative = 0.0
        for spec in self.family_situations(self.binding(action).family):
            cumulative += spec.probability
            if u < cumulative:
                logger.debug("%s hit situation %s", action, spec.label)
                return self.mutate(world, action, spec.mutation), Situation(spec.label)
        return self.succeed(world, action), CleanSuccess()

    def outcomes(self, world: WorldState, action: GroundAction) -> List[Tuple[float, WorldState, ExecutionOutcome]]:
        """Every outcome `execute` can produce with its probability; used by the exact oracle."""
        violated = self.check_constraints(world, action)
        if violated:
            return [(1.0, world, ConstraintFailure(tuple(violated)))]
        out = []
        residual = 1.0
        for spec in self.family_situations(self.binding(action).family):
            if spec.probability > 0:
                out.append((spec.probability, self.mutate(world, action, spec.mutation), Situation(spec.label)))
                residual -= spec.probability
        if residual > 1e-12:
            out.append((residual, self.succeed(world, action), CleanSuccess()))
        return out
