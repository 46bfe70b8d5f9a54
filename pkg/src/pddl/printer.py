"""Canonical PDDL text for parsed domains and problems. Re-reading the output gives back an equal model."""

from itertools import groupby
from typing import Iterable, List, Tuple

from .model import ConditionalEffect, Domain, Literal, Problem

INDENT = "    "


def _typed(params: Iterable[Tuple[str, str]]) -> str:
    return " ".join(f"{name} - {type_name}" for name, type_name in params)


def _conjunction(literals: Iterable[Literal]) -> str:
    return "(and " + " ".join(str(lit) for lit in literals) + ")" if literals else "(and)"


def _conditional(effect: ConditionalEffect) -> str:
    when = f"(when {_conjunction(effect.condition)} {_conjunction(effect.consequent)})"
    if not effect.variables:
        return when
    return f"(forall ({_typed(effect.variables)}) {when})"


def domain_to_pddl(domain: Domain) -> str:
    lines: List[str] = [f"(define (domain {domain.name})"]
    if domain.requirements:
        lines.append(f"{INDENT}(:requirements {' '.join(domain.requirements)})")
    if domain.types:
        lines.append(f"{INDENT}(:types")
        for parent, group in groupby(domain.types.items(), key=lambda kv: kv[1]):
            lines.append(f"{INDENT * 2}{' '.join(child for child, _ in group)} - {parent}")
        lines.append(f"{INDENT})")
    lines.append(f"{INDENT}(:predicates")
    for signature in domain.predicates.values():
        params = f" {_typed(signature.params)}" if signature.params else ""
        lines.append(f"{INDENT * 2}({signature.name}{params})")
    lines.append(f"{INDENT})")
    for schema in domain.schemas.values():
        effects = [str(lit) for lit in schema.effects] + [_conditional(c) for c in schema.conditionals]
        lines.append(f"{INDENT}(:action {schema.name}")
        lines.append(f"{INDENT * 2}:parameters ({_typed(schema.params)})")
        lines.append(f"{INDENT * 2}:precondition {_conjunction(schema.precondition)}")
        lines.append(f"{INDENT * 2}:effect (and {' '.join(effects)})" if effects else f"{INDENT * 2}:effect (and)")
        lines.append(f"{INDENT})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def problem_to_pddl(problem: Problem) -> str:
    lines: List[str] = [f"(define (problem {problem.name})", f"{INDENT}(:domain {problem.domain_name})", f"{INDENT}(:objects"]
    for name, type_name in problem.objects.items():
        lines.append(f"{INDENT * 2}{name} - {type_name}")
    lines.append(f"{INDENT})")
    lines.append(f"{INDENT}(:init")
    for atom in sorted(problem.init):
        lines.append(f"{INDENT * 2}{atom}")
    lines.append(f"{INDENT})")
    lines.append(f"{INDENT}(:goal {_conjunction(problem.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"

