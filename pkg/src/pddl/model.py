"""
Typed PDDL model: atoms, literals, schemas, domains, problems and ground actions.
All values are immutable so parsed domains and grounded action sets can be shared between trials.
"""

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterator, NamedTuple, Tuple

ROOT_TYPE = "object"


class Atom(NamedTuple):
    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self):
        return "(" + " ".join((self.predicate, *self.args)) + ")"

    def substitute(self, binding: Dict[str, str]) -> "Atom":
        return Atom(self.predicate, tuple(binding.get(a, a) for a in self.args))

    @property
    def is_ground(self) -> bool:
        return not any(a.startswith("?") for a in self.args)


class Literal(NamedTuple):
    atom: Atom
    positive: bool = True

    def __str__(self):
        return str(self.atom) if self.positive else f"(not {self.atom})"

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.positive)

    def substitute(self, binding: Dict[str, str]) -> "Literal":
        return Literal(self.atom.substitute(binding), self.positive)

    def holds_in(self, state: FrozenSet[Atom]) -> bool:
        return (self.atom in state) == self.positive


class TypedParam(NamedTuple):
    name: str
    type: str = ROOT_TYPE


@dataclass(frozen=True)
class PredicateSignature:
    name: str
    params: Tuple[TypedParam, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ConditionalEffect:
    """`(forall (vars) (when condition consequent))`; a plain `when` has no variables."""

    variables: Tuple[TypedParam, ...]
    condition: Tuple[Literal, ...]
    consequent: Tuple[Literal, ...]


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: Tuple[TypedParam, ...]
    precondition: Tuple[Literal, ...]
    effects: Tuple[Literal, ...]
    conditionals: Tuple[ConditionalEffect, ...] = ()


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: Tuple[str, ...]
    types: Dict[str, str]  # child -> parent, in declaration order
    predicates: Dict[str, PredicateSignature]
    schemas: Dict[str, ActionSchema]

    def ancestors(self, type_name: str) -> Tuple[str, ...]:
        """The type itself followed by its parents up to `object`."""
        chain = [type_name]
        while chain[-1] != ROOT_TYPE:
            chain.append(self.types.get(chain[-1], ROOT_TYPE))
        return tuple(chain)

    def is_subtype(self, type_name: str, parent: str) -> bool:
        return parent in self.ancestors(type_name)

    @property
    def type_names(self) -> Tuple[str, ...]:
        return (ROOT_TYPE, *(t for t in self.types if t != ROOT_TYPE))


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: Dict[str, str]  # object -> declared type
    init: FrozenSet[Atom]
    goal: Tuple[Literal, ...]

    def objects_of(self, domain: Domain, type_name: str) -> Tuple[str, ...]:
        return tuple(sorted(o for o, t in self.objects.items() if domain.is_subtype(t, type_name)))


class ExpandedConditional(NamedTuple):
    cond_pos: FrozenSet[Atom]
    cond_neg: FrozenSet[Atom]
    add: FrozenSet[Atom]
    delete: FrozenSet[Atom]


@dataclass(frozen=True)
class GroundConditional:
    """A conditional effect with the action parameters bound; quantified variables still open."""

    variables: Tuple[TypedParam, ...]
    condition: Tuple[Literal, ...]
    consequent: Tuple[Literal, ...]
    ranges: Tuple[Tuple[str, ...], ...]  # candidate objects per quantified variable

    def expand(self) -> Iterator[Tuple[Tuple[Literal, ...], Tuple[Literal, ...]]]:
        names = [v.name for v in self.variables]
        for combo in itertools.product(*self.ranges):
            binding = dict(zip(names, combo))
            yield (tuple(lit.substitute(binding) for lit in self.condition), tuple(lit.substitute(binding) for lit in self.consequent))


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: Tuple[str, ...]
    precondition: Tuple[Literal, ...] = field(compare=False)
    effects: Tuple[Literal, ...] = field(compare=False)
    conditionals: Tuple[GroundConditional, ...] = field(default=(), compare=False)

    def __str__(self):
        return "(" + " ".join((self.name, *self.args)) + ")"

    @property
    def sort_key(self):
        return (self.name, self.args)

    @cached_property
    def pre_pos(self) -> FrozenSet[Atom]:
        return frozenset(lit.atom for lit in self.precondition if lit.positive)

    @cached_property
    def pre_neg(self) -> FrozenSet[Atom]:
        return frozenset(lit.atom for lit in self.precondition if not lit.positive)

    @cached_property
    def add(self) -> FrozenSet[Atom]:
        return frozenset(lit.atom for lit in self.effects if lit.positive)

    @cached_property
    def delete(self) -> FrozenSet[Atom]:
        return frozenset(lit.atom for lit in self.effects if not lit.positive)

    @cached_property
    def expanded(self) -> Tuple[ExpandedConditional, ...]:
        """Conditional effects expanded over the problem's objects, built on first use."""
        out = []
        for conditional in self.conditionals:
            for condition, consequent in conditional.expand():
                out.append(
                    ExpandedConditional(
                        frozenset(lit.atom for lit in condition if lit.positive),
                        frozenset(lit.atom for lit in condition if not lit.positive),
                        frozenset(lit.atom for lit in consequent if lit.positive),
                        frozenset(lit.atom for lit in consequent if not lit.positive),
                    )
                )
        return tuple(out)
