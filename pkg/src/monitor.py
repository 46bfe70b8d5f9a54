"""
Closed-loop plan execution. The agent plans from its belief, checks what it can see before and after
each action, and replans from the belief whenever an answer contradicts what the plan expects.
"""

import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple, Union

from src import settings
from src.errors import ConfigurationError, ResourceLimitError, UnsolvableError
from src.pddl import Atom, Domain, GroundAction, Literal, Problem
from src.perception import AnswerValue, PerceptionConfig, Question, QuestionBank, SimulatedPerceiver, VisibilityClass, affordance_question, default_bank, success_question
from src.planner import Planner, fired_effects
from src.world import Simulator, SituationSpec, WorldState, clear_held_locations, goal_satisfied

logger = logging.getLogger(__name__)

Belief = FrozenSet[Atom]


class Strategy(str, Enum):
    DKPROMPT = "dkprompt"
    EFF_ONLY = "eff-only"
    PRE_ONLY = "pre-only"
    CLASSICAL = "classical"
    SUC_QA = "suc-qa"
    AFF_QA = "aff-qa"
    SUC_AFF_QA = "suc-aff-qa"

    @property
    def checks_preconditions(self) -> bool:
        return self in (Strategy.DKPROMPT, Strategy.PRE_ONLY)

    @property
    def checks_effects(self) -> bool:
        return self in (Strategy.DKPROMPT, Strategy.EFF_ONLY)

    @property
    def asks_success(self) -> bool:
        return self in (Strategy.SUC_QA, Strategy.SUC_AFF_QA)

    @property
    def asks_affordance(self) -> bool:
        return self in (Strategy.AFF_QA, Strategy.SUC_AFF_QA)


@dataclass(frozen=True)
class EpisodeConfig:
    strategy: Strategy = Strategy.DKPROMPT
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    situations: Optional[Tuple[SituationSpec, ...]] = None  # None: the bundled table
    max_steps: Optional[int] = None  # None: STEP_FACTOR x initial plan length
    max_replans: int = settings.MAX_REPLANS
    step_factor: int = settings.STEP_FACTOR

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be positive, got {self.max_steps}")
        if self.max_replans < 1 or self.step_factor < 1:
            raise ConfigurationError("max_replans and step_factor must be positive")


class EpisodeSeeds(NamedTuple):
    """Names of the two independent random streams of one episode."""

    world: str
    perception: str

    @classmethod
    def coerce(cls, seed: Union[int, "EpisodeSeeds", Tuple[str, str]]) -> "EpisodeSeeds":
        if isinstance(seed, int):
            return cls(f"world:{seed}", f"perception:{seed}")
        return cls(*seed)


@dataclass(frozen=True)
class Event:
    step: int
    kind: str  # plan, replan, locate, precondition, affordance, execute, effect, success, end
    action: Optional[str] = None
    outcome: Optional[str] = None
    qa: Tuple[Tuple[str, str], ...] = ()
    added: Tuple[str, ...] = ()
    removed: Tuple[str, ...] = ()
    plan: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "action": self.action,
            "outcome": self.outcome,
            "qa": [list(pair) for pair in self.qa],
            "added": list(self.added),
            "removed": list(self.removed),
            "plan": list(self.plan),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "Event":
        return cls(
            d["step"],
            d["kind"],
            d.get("action"),
            d.get("outcome"),
            tuple(tuple(pair) for pair in d.get("qa", ())),
            tuple(d.get("added", ())),
            tuple(d.get("removed", ())),
            tuple(d.get("plan", ())),
        )


@dataclass(frozen=True)
class TrialResult:
    success: bool
    steps: int
    replans: int
    reason: str  # goal-reached, step-budget, replan-budget, unsolvable, planner-budget, plan-exhausted
    initial_plan_length: int
    events: Tuple[Event, ...] = ()

    @property
    def actions(self) -> Tuple[str, ...]:
        return tuple(e.action for e in self.events if e.kind == "execute")


def _delta(before: Belief, after: Belief) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    return tuple(sorted(str(a) for a in after - before)), tuple(sorted(str(a) for a in before - after))


def update_belief(belief: Belief, literal: Literal, answer: AnswerValue) -> Belief:
    """Yes makes `literal` true in the belief, No makes it false, Skip changes nothing."""
    if answer is AnswerValue.SKIP:
        return belief
    make_true = (answer is AnswerValue.YES) == literal.positive
    return belief | {literal.atom} if make_true else belief - {literal.atom}


def precondition_queries(action: GroundAction, bank: Optional[QuestionBank] = None) -> List[Question]:
    bank = bank or default_bank()
    return [bank.question(lit) for lit in action.precondition if bank.is_vision(lit.atom.predicate)]


def expected_effects(action: GroundAction, belief: Belief) -> List[Literal]:
    """Nominal effect literals, conditionals included when they fire in `belief`."""
    add, delete = fired_effects(belief, action)
    literals = [lit for lit in action.effects if lit.positive or lit.atom not in add]
    seen = set(literals)
    for atom in sorted(add):
        if Literal(atom, True) not in seen:
            literals.append(Literal(atom, True))
    for atom in sorted(delete - add):
        if Literal(atom, False) not in seen:
            literals.append(Literal(atom, False))
    return literals


def effect_queries(action: GroundAction, belief: Belief, bank: Optional[QuestionBank] = None) -> List[Question]:
    bank = bank or default_bank()
    return [bank.question(lit) for lit in expected_effects(action, belief) if bank.is_vision(lit.atom.predicate)]


class Projection(NamedTuple):
    added: FrozenSet[Atom]
    removed: FrozenSet[Atom]


def project(belief: Belief, action: GroundAction) -> Tuple[Belief, Projection]:
    add, delete = fired_effects(belief, action)
    after = frozenset((belief - delete) | add)
    return after, Projection(after - belief, belief - after)


def revert(belief: Belief, projection: Optional[Projection]) -> Belief:
    """Undo one step's projected effects; applying it twice changes nothing more."""
    if projection is None:
        return belief
    return frozenset((belief - projection.added) | projection.removed)


class Monitor:
    """Runs episodes of one task. Grounding and the planner memo are shared by every episode run here."""

    def __init__(self, domain: Domain, problem: Problem, bank: Optional[QuestionBank] = None, node_budget: int = settings.PLANNER_NODE_BUDGET):
        self.domain = domain
        self.problem = problem
        self.bank = bank or default_bank()
        self.planner = Planner(domain, problem, node_budget)
        self._simulators: Dict[Optional[Tuple[SituationSpec, ...]], Simulator] = {}
        self.non_vision = tuple(p for p in domain.predicates if self.bank.classify(p) is VisibilityClass.NON_VISION)
        self.location_questions = self._location_literals()

    def simulator(self, situations: Optional[Tuple[SituationSpec, ...]] = None) -> Simulator:
        if situations not in self._simulators:
            self._simulators[situations] = Simulator(self.domain, self.problem, situations=situations)
        return self._simulators[situations]

    def _location_literals(self) -> Dict[str, Tuple[Literal, ...]]:
        """Per locatable object, every location atom worth asking about when it goes missing."""
        objects = self.problem.objects
        locatable = sorted(o for o, t in objects.items() if any(self.domain.is_subtype(t, lt) for lt in settings.LOCATABLE_TYPES if lt in self.domain.types))
        out = {}
        for obj in locatable:
            literals = []
            for pred in settings.LOCATION_PREDICATES:
                signature = self.domain.predicates.get(pred)
                if signature is None or signature.arity != 2 or not self.bank.is_vision(pred):
                    continue
                for support in sorted(objects):
                    if support == obj or not self.domain.is_subtype(objects[support], signature.params[1].type):
                        continue
                    if not any(self.domain.is_subtype(objects[support], st) for st in settings.SUPPORT_TYPES if st in self.domain.types):
                        continue
                    literals.append(Literal(Atom(pred, (obj, support)), True))
            out[obj] = tuple(literals)
        return out

    def sync(self, belief: Belief, world: WorldState) -> Belief:
        """Copy non-vision facts from the truth; the agent senses those directly. Held objects lose their old location."""
        if self.non_vision:
            stale = {a for a in belief if a.predicate in self.non_vision}
            fresh = {a for a in world.truth if a.predicate in self.non_vision}
            belief = frozenset((belief - stale) | fresh)
        return clear_held_locations(belief)

    def lost_objects(self, belief: Belief) -> List[str]:
        located = {a.args[0] for a in belief if a.predicate in settings.LOCATION_PREDICATES and a.args}
        held = {a.args[1] for a in belief if a.predicate == "inhand"}
        return [o for o in self.location_questions if o not in located and o not in held]

    def run(self, cfg: EpisodeConfig, seed, world: Optional[WorldState] = None, perceiver=None) -> TrialResult:
        seeds = EpisodeSeeds.coerce(seed)
        simulator = self.simulator(cfg.situations)
        world_rng = random.Random(seeds.world)
        if perceiver is None:
            perceiver = SimulatedPerceiver(cfg.perception, random.Random(seeds.perception), self.bank)
        world = world or simulator.initial_world()
        return _Episode(self, simulator, cfg, world, world_rng, perceiver).run()


class _Episode:
    """Mutable state of a single run; one instance per episode."""

    def __init__(self, monitor: Monitor, simulator: Simulator, cfg: EpisodeConfig, world: WorldState, world_rng, perceiver):
        self.m = monitor
        self.simulator = simulator
        self.cfg = cfg
        self.world = world
        self.world_rng = world_rng
        self.perceiver = perceiver
        self.goal = monitor.problem.goal
        self.belief: Belief = monitor.problem.init
        self.events: List[Event] = []
        self.steps = 0
        self.replans = 0
        self.initial_length = 0

    def log(self, kind: str, action: Optional[GroundAction] = None, before: Optional[Belief] = None, **kwargs):
        added, removed = _delta(before, self.belief) if before is not None else ((), ())
        self.events.append(Event(self.steps, kind, str(action) if action is not None else None, added=added, removed=removed, **kwargs))

    def finish(self, success: bool, reason: str) -> TrialResult:
        self.log("end", outcome=reason)
        logger.debug("episode ended: %s after %d steps, %d replans", reason, self.steps, self.replans)
        return TrialResult(success, self.steps, self.replans, reason, self.initial_length, tuple(self.events))

    def ask_round(self, kind: str, action: Optional[GroundAction], questions: Sequence[Question], undo: Optional[Projection] = None) -> Tuple[bool, bool]:
        """
        Ask a batch and fold the answers into the belief. Returns (contradicted, learned_something).
        On a contradiction with `undo` given, that projection is rolled back first and the answers
        are folded into the rolled-back belief, so nothing derived from a refuted effect survives.
        """
        if not questions:
            return False, False
        before = self.belief
        answers = self.perceiver.ask(self.world, questions)
        self.belief = self._fold(before, questions, answers)
        contradicted = any(not q.literal.holds_in(self.belief) for q in questions)
        if contradicted and undo is not None:
            self.belief = self._fold(self.m.sync(revert(before, undo), self.world), questions, answers)
        self.log(kind, action, before, qa=tuple((q.text, a.value) for q, a in zip(questions, answers)))
        return contradicted, self.belief != before

    @staticmethod
    def _fold(belief: Belief, questions: Sequence[Question], answers: Sequence[AnswerValue]) -> Belief:
        for q, a in zip(questions, answers):
            belief = update_belief(belief, q.literal, q.literal_answer(a))
        return belief

    def locate(self) -> bool:
        """Ask where lost objects are; True when any was found."""
        questions = [self.m.bank.question(lit) for obj in self.m.lost_objects(self.belief) for lit in self.m.location_questions[obj]]
        _, learned = self.ask_round("locate", None, questions)
        return learned

    def run(self) -> TrialResult:
        strategy = self.cfg.strategy
        plan = list(self.m.planner.solve(self.belief, self.goal))
        self.initial_length = len(plan)
        max_steps = self.cfg.max_steps or self.cfg.step_factor * max(1, len(plan))
        self.log("plan", plan=tuple(str(a) for a in plan))
        replan_pending = False
        last_projection: Optional[Projection] = None
        while True:
            if goal_satisfied(self.world, self.goal):
                return self.finish(True, "goal-reached")
            if self.steps >= max_steps:
                return self.finish(False, "step-budget")
            if strategy.checks_preconditions and self.locate():
                replan_pending = True
            if replan_pending:
                if self.replans >= self.cfg.max_replans:
                    return self.finish(False, "replan-budget")
                self.replans += 1
                replan_pending = False
                try:
                    plan = list(self.m.planner.solve(self.belief, self.goal))
                except UnsolvableError:
                    return self.finish(False, "unsolvable")
                except ResourceLimitError:
                    return self.finish(False, "planner-budget")
                self.log("replan", plan=tuple(str(a) for a in plan))
            if not plan:
                return self.finish(False, "plan-exhausted")
            action = plan[0]

            if strategy.checks_preconditions:
                contradicted, _ = self.ask_round("precondition", action, precondition_queries(action, self.m.bank))
                if contradicted:
                    replan_pending = True
                    continue
            if strategy.asks_affordance:
                answer = self.perceiver.ask_affordance(self.world, action)
                before = self.belief
                if answer is AnswerValue.NO:
                    self.belief = self.m.sync(revert(self.belief, last_projection), self.world)
                    last_projection = None
                    replan_pending = True
                self.log("affordance", action, before, qa=((affordance_question(action), answer.value),))
                if replan_pending:
                    continue

            plan.pop(0)
            world_before, belief_before = self.world, self.belief
            self.world, outcome = self.simulator.execute(self.world, action, self.world_rng)
            self.steps += 1
            self.belief, last_projection = project(self.belief, action)
            self.belief = self.m.sync(self.belief, self.world)
            self.log("execute", action, belief_before, outcome=str(outcome))

            if strategy.checks_effects:
                contradicted, _ = self.ask_round("effect", action, effect_queries(action, belief_before, self.m.bank), undo=last_projection)
                if contradicted:
                    last_projection = None
                    replan_pending = True
            if strategy.asks_success:
                answer = self.perceiver.ask_success(world_before, self.world, action)
                before = self.belief
                if answer is AnswerValue.NO:
                    self.belief = self.m.sync(revert(self.belief, last_projection), self.world)
                    last_projection = None
                    replan_pending = True
                self.log("success", action, before, qa=((success_question(action), answer.value),))


def run_episode(domain: Domain, problem: Problem, world: Optional[WorldState], cfg: EpisodeConfig, seed) -> TrialResult:
    return Monitor(domain, problem).run(cfg, seed, world)
