from .grounding import ground, instantiate, type_extensions
from .model import ROOT_TYPE, ActionSchema, Atom, ConditionalEffect, Domain, GroundAction, GroundConditional, Literal, PredicateSignature, Problem, TypedParam
from .parser import SUPPORTED_REQUIREMENTS, load_domain, load_problem, parse_domain, parse_problem
from .printer import domain_to_pddl, problem_to_pddl

__all__ = [
    "ROOT_TYPE",
    "SUPPORTED_REQUIREMENTS",
    "ActionSchema",
    "Atom",
    "ConditionalEffect",
    "Domain",
    "GroundAction",
    "GroundConditional",
    "Literal",
    "PredicateSignature",
    "Problem",
    "TypedParam",
    "domain_to_pddl",
    "ground",
    "instantiate",
    "load_domain",
    "load_problem",
    "parse_domain",
    "parse_problem",
    "problem_to_pddl",
    "type_extensions",
]
