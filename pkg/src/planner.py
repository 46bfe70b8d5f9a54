"""
State transitions, plan validation and forward search over the grounded action set.
States are frozensets of ground atoms under the closed-world assumption.
"""

import heapq
import itertools
import logging
from collections import OrderedDict, defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from src import settings
from src.errors import PDDLSemanticError, PreconditionViolation, ResourceLimitError, UnsolvableError
from src.pddl import Atom, Domain, GroundAction, Literal, Problem, ground

logger = logging.getLogger(__name__)

State = FrozenSet[Atom]


def holds(state: State, condition: Iterable[Literal]) -> bool:
    return all(lit.holds_in(state) for lit in condition)


def applicable(state: State, action: GroundAction) -> bool:
    return action.pre_pos <= state and state.isdisjoint(action.pre_neg)


def fired_effects(state: State, action: GroundAction) -> Tuple[FrozenSet[Atom], FrozenSet[Atom]]:
    """(add, delete) of `action` in `state`, conditional effects judged against `state`."""
    add, delete = set(action.add), set(action.delete)
    for c in action.expanded:
        if c.cond_pos <= state and state.isdisjoint(c.cond_neg):
            add |= c.add
            delete |= c.delete
    return frozenset(add), frozenset(delete)


def apply(state: State, action: GroundAction, check: bool = True) -> State:
    if check and not applicable(state, action):
        raise PreconditionViolation(action, [lit for lit in action.precondition if not lit.holds_in(state)])
    add, delete = fired_effects(state, action)
    return frozenset((state - delete) | add)


@dataclass(frozen=True)
class Plan:
    steps: Tuple[GroundAction, ...] = ()

    @property
    def cost(self) -> int:
        return len(self.steps)

    def __len__(self):
        return len(self.steps)

    def __iter__(self) -> Iterator[GroundAction]:
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]


class Validation(NamedTuple):
    valid: bool
    failed_at: Optional[int]  # step index, or len(plan) when only the goal fails


def validate_plan(init: State, plan: Sequence[GroundAction], goal: Iterable[Literal]) -> Validation:
    state = init
    for i, action in enumerate(plan):
        if not applicable(state, action):
            return Validation(False, i)
        state = apply(state, action, check=False)
    if not holds(state, goal):
        return Validation(False, len(plan))
    return Validation(True, None)


def format_sas_plan(plan: Sequence[GroundAction]) -> str:
    """Plan text in the layout Fast Downward writes to `sas_plan`."""
    lines = [str(a) for a in plan]
    lines.append(f"; cost = {len(lines)} (unit cost)")
    return "\n".join(lines) + "\n"


class Planner:
    """Grounds a task once and answers repeated (state, goal) queries with greedy best-first search."""

    def __init__(self, domain: Domain, problem: Problem, node_budget: int = settings.PLANNER_NODE_BUDGET, memo_size: int = settings.PLANNER_MEMO_SIZE):
        self.domain = domain
        self.problem = problem
        self.node_budget = node_budget
        self.memo_size = memo_size
        self.actions = ground(domain, problem)
        self.index: Dict[Tuple[str, Tuple[str, ...]], GroundAction] = {a.sort_key: a for a in self.actions}
        self._memo: OrderedDict[Tuple[State, Tuple[Literal, ...]], Optional[Plan]] = OrderedDict()  # least recently used first
        # each action is filed under one of its positive preconditions so successor generation only looks at candidates
        self._triggered: Dict[Atom, List[int]] = defaultdict(list)
        self._untriggered: List[int] = []
        for rank, a in enumerate(self.actions):
            if a.pre_pos:
                self._triggered[min(a.pre_pos)].append(rank)
            else:
                self._untriggered.append(rank)

    def successors(self, state: State) -> Iterator[Tuple[GroundAction, State]]:
        """Applicable actions in (name, args) order with their successor states."""
        ranks = list(self._untriggered)
        for atom in state:
            ranks.extend(self._triggered.get(atom, ()))
        for rank in sorted(ranks):
            action = self.actions[rank]
            if applicable(state, action):
                yield action, apply(state, action, check=False)

    def action(self, name: str, *args: str) -> GroundAction:
        try:
            return self.index[(name, tuple(args))]
        except KeyError:
            raise PDDLSemanticError(f"no ground action ({' '.join((name, *args))})") from None

    def read_sas_plan(self, text: str) -> Plan:
        steps = []
        for line in text.splitlines():
            line = line.split(";", 1)[0].strip()
            if not line:
                continue
            tokens = line.strip("()").lower().split()
            steps.append(self.action(tokens[0], *tokens[1:]))
        return Plan(tuple(steps))

    def relaxed_reachable(self, init: State, goal: Iterable[Literal]) -> bool:
        """Delete-relaxed reachability of the positive goal atoms; negative conditions are assumed satisfiable."""
        reached = set(init)
        pending = list(self.actions)
        changed = True
        while changed:
            changed = False
            remaining = []
            for a in pending:
                if a.pre_pos <= reached:
                    before = len(reached)
                    reached |= a.add
                    for c in a.expanded:
                        if c.cond_pos <= reached:
                            reached |= c.add
                    changed = changed or len(reached) != before
                    # conditionals may fire later as `reached` grows
                    if a.expanded:
                        remaining.append(a)
                else:
                    remaining.append(a)
            pending = remaining
        return all(lit.atom in reached for lit in goal if lit.positive)

    def solve(self, init: Iterable[Atom], goal: Optional[Iterable[Literal]] = None) -> Plan:
        init = frozenset(init)
        goal = tuple(self.problem.goal if goal is None else goal)
        key = (init, goal)
        if key in self._memo:
            self._memo.move_to_end(key)
            cached = self._memo[key]
            if cached is None:
                raise UnsolvableError(f"no plan for {self.problem.name}")
            return cached
        try:
            plan = self._solve(init, goal)
        except UnsolvableError:
            self._remember(key, None)
            raise
        self._remember(key, plan)
        return plan

    def _remember(self, key: Tuple[State, Tuple[Literal, ...]], plan: Optional[Plan]):
        self._memo[key] = plan
        while len(self._memo) > self.memo_size:
            self._memo.popitem(last=False)

    def _solve(self, init: State, goal: Tuple[Literal, ...]) -> Plan:
        if holds(init, goal):
            return Plan(())
        if not self.relaxed_reachable(init, goal):
            raise UnsolvableError(f"goal of {self.problem.name} is unreachable even with deletes ignored")
        try:
            steps = self._search(init, goal, self.node_budget // 2, greedy=True)
        except ResourceLimitError as e:
            logger.info("greedy search gave up after %d expansions, falling back to breadth-first", e.expanded)
            steps = self._search(init, goal, self.node_budget, greedy=False)
        if steps is None:
            raise UnsolvableError(f"search space of {self.problem.name} exhausted without reaching the goal")
        logger.debug("plan of length %d for %s", len(steps), self.problem.name)
        return Plan(tuple(steps))

    def _search(self, init: State, goal: Tuple[Literal, ...], budget: int, greedy: bool) -> Optional[List[GroundAction]]:
        goal_pos = frozenset(lit.atom for lit in goal if lit.positive)
        goal_neg = frozenset(lit.atom for lit in goal if not lit.positive)

        def goal_count(state: State) -> int:
            return len(goal_pos - state) + len(goal_neg & state) if greedy else 0

        counter = itertools.count()
        parents: Dict[State, Optional[Tuple[State, GroundAction]]] = {init: None}
        frontier = [(goal_count(init), 0, next(counter), init)]
        expanded = 0
        while frontier:
            _, g, _, state = heapq.heappop(frontier)
            if goal_pos <= state and state.isdisjoint(goal_neg):
                return self._extract(parents, state)
            expanded += 1
            if expanded > budget:
                raise ResourceLimitError(f"node budget of {budget} expansions exceeded", expanded)
            for action, child in self.successors(state):
                if child in parents:
                    continue
                parents[child] = (state, action)
                heapq.heappush(frontier, (goal_count(child), g + 1, next(counter), child))
        return None

    @staticmethod
    def _extract(parents, state: State) -> List[GroundAction]:
        steps = []
        while parents[state] is not None:
            state, action = parents[state]
            steps.append(action)
        steps.reverse()
        return steps


def plan(domain: Domain, problem: Problem, init: Optional[Iterable[Atom]] = None, goal: Optional[Iterable[Literal]] = None, node_budget: int = settings.PLANNER_NODE_BUDGET) -> Plan:
    return Planner(domain, problem, node_budget).solve(problem.init if init is None else init, goal)
