import itertools
import logging
from typing import Dict, Tuple

from .model import ActionSchema, Domain, GroundAction, GroundConditional, Problem

logger = logging.getLogger(__name__)


def type_extensions(domain: Domain, objects: Dict[str, str]) -> Dict[str, Tuple[str, ...]]:
    """Objects belonging to each type, subtypes included, in sorted order."""
    ext: Dict[str, list] = {t: [] for t in domain.type_names}
    for obj in sorted(objects):
        for type_name in domain.ancestors(objects[obj]):
            ext.setdefault(type_name, []).append(obj)
    return {t: tuple(members) for t, members in ext.items()}


def instantiate(schema: ActionSchema, args: Tuple[str, ...], ext: Dict[str, Tuple[str, ...]]) -> GroundAction:
    binding = {p.name: a for p, a in zip(schema.params, args)}
    conditionals = tuple(
        GroundConditional(
            c.variables,
            tuple(lit.substitute(binding) for lit in c.condition),
            tuple(lit.substitute(binding) for lit in c.consequent),
            tuple(ext.get(v.type, ()) for v in c.variables),
        )
        for c in schema.conditionals
    )
    return GroundAction(
        schema.name,
        tuple(args),
        tuple(lit.substitute(binding) for lit in schema.precondition),
        tuple(lit.substitute(binding) for lit in schema.effects),
        conditionals,
    )


def ground(domain: Domain, problem: Problem) -> Tuple[GroundAction, ...]:
    """Every type-consistent instantiation of every schema, ordered by (name, args)."""
    ext = type_extensions(domain, problem.objects)
    actions = []
    for schema in domain.schemas.values():
        for args in itertools.product(*(ext.get(p.type, ()) for p in schema.params)):
            actions.append(instantiate(schema, args, ext))
    actions.sort(key=lambda a: a.sort_key)
    logger.debug("grounded %d actions for %s", len(actions), problem.name)
    return tuple(actions)
