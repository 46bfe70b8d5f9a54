"""
PDDL reader for the typed STRIPS fragment with negative preconditions and conditional effects.
Text is read into located S-expressions with pyparsing, then checked against the domain's types and predicates.
"""

import logging
from typing import Dict, List, Optional, Tuple

import pyparsing as pp

from src.errors import PDDLSemanticError, PDDLSyntaxError, UnsupportedRequirementError

from .model import ROOT_TYPE, ActionSchema, Atom, ConditionalEffect, Domain, Literal, PredicateSignature, Problem, TypedParam

logger = logging.getLogger(__name__)

SUPPORTED_REQUIREMENTS = (":strips", ":typing", ":negative-preconditions", ":conditional-effects")


class Symbol(str):
    """A lower-cased token that remembers where it started in the source text."""

    def __new__(cls, text: str, loc: int):
        obj = super().__new__(cls, text.lower())
        obj.loc = loc
        return obj


class SExpr:
    __slots__ = ("items", "loc")

    def __init__(self, items: list, loc: int):
        self.items = items
        self.loc = loc

    def head(self) -> Optional[str]:
        return self.items[0] if self.items and isinstance(self.items[0], Symbol) else None

    def __repr__(self):
        return f"SExpr({self.items!r})"


def _grammar():
    symbol = pp.Regex(r"[^\s();]+").set_parse_action(lambda s, loc, toks: Symbol(toks[0], loc))
    sexpr = pp.Forward()
    sexpr <<= (pp.Suppress("(") + pp.ZeroOrMore(symbol | sexpr) + pp.Suppress(")")).set_parse_action(lambda s, loc, toks: SExpr(list(toks), loc))
    document = sexpr + pp.StringEnd()
    document.ignore(";" + pp.rest_of_line)
    return document


_DOCUMENT = _grammar()


def _check_balance(text: str):
    """Report the first unmatched parenthesis with its position; pyparsing alone points at the end of input."""
    open_at: List[int] = []
    in_comment = False
    for i, ch in enumerate(text):
        if in_comment:
            in_comment = ch != "\n"
        elif ch == ";":
            in_comment = True
        elif ch == "(":
            open_at.append(i)
        elif ch == ")":
            if not open_at:
                raise PDDLSyntaxError("unexpected ')'", pp.lineno(i, text), pp.col(i, text))
            open_at.pop()
    if open_at:
        raise PDDLSyntaxError("unclosed '('", pp.lineno(open_at[-1], text), pp.col(open_at[-1], text))


def read_sexpr(text: str) -> SExpr:
    _check_balance(text)
    try:
        return _DOCUMENT.parse_string(text, parse_all=True)[0]
    except pp.ParseBaseException as e:
        raise PDDLSyntaxError(f"expected a single parenthesised expression ({e.msg})", e.lineno, e.col) from None


class _Reader:
    """Shared helpers for domain and problem readers; keeps the text for error positions."""

    def __init__(self, text: str):
        self.text = text

    def error(self, message: str, node=None, cls=PDDLSemanticError):
        if node is None or not hasattr(node, "loc"):
            return cls(message)
        return cls(message, pp.lineno(node.loc, self.text), pp.col(node.loc, self.text))

    def expect_list(self, node, what: str) -> SExpr:
        if not isinstance(node, SExpr):
            raise self.error(f"expected {what}", node, PDDLSyntaxError)
        return node

    def expect_symbol(self, node, what: str) -> Symbol:
        if not isinstance(node, Symbol):
            raise self.error(f"expected {what}", node, PDDLSyntaxError)
        return node

    def header(self, root: SExpr, kind: str) -> Tuple[Symbol, list]:
        """Check `(define (kind name) ...)` and return the name and the remaining sections."""
        if root.head() != "define" or len(root.items) < 2:
            raise self.error("expected (define ...)", root, PDDLSyntaxError)
        head = self.expect_list(root.items[1], f"({kind} <name>)")
        if head.head() != kind or len(head.items) != 2:
            raise self.error(f"expected ({kind} <name>)", head, PDDLSyntaxError)
        return self.expect_symbol(head.items[1], f"{kind} name"), root.items[2:]

    def typed_list(self, items: list, variables: bool) -> List[Tuple[Symbol, str]]:
        """`a b - t c` -> [(a, t), (b, t), (c, object)]."""
        out: List[Tuple[Symbol, str]] = []
        pending: List[Symbol] = []
        i = 0
        while i < len(items):
            item = self.expect_symbol(items[i], "a name")
            if item == "-":
                if i + 1 >= len(items) or not pending:
                    raise self.error("dangling '-' in typed list", item, PDDLSyntaxError)
                type_node = items[i + 1]
                if isinstance(type_node, SExpr):
                    raise self.error("'either' types are not supported", type_node)
                out.extend((name, str(type_node)) for name in pending)
                pending = []
                i += 2
                continue
            if variables != item.startswith("?"):
                raise self.error(f"{'variable' if variables else 'name'} expected, got '{item}'", item)
            pending.append(item)
            i += 1
        out.extend((name, ROOT_TYPE) for name in pending)
        return out


class DomainReader(_Reader):
    def read(self) -> Domain:
        root = read_sexpr(self.text)
        name, sections = self.header(root, "domain")
        self.requirements: Tuple[str, ...] = ()
        self.types: Dict[str, str] = {}
        self.predicates: Dict[str, PredicateSignature] = {}
        self.schemas: Dict[str, ActionSchema] = {}
        actions = []
        for section in sections:
            section = self.expect_list(section, "a domain section")
            key = section.head()
            if key == ":requirements":
                self.read_requirements(section)
            elif key == ":types":
                self.read_types(section)
            elif key == ":predicates":
                self.read_predicates(section)
            elif key == ":action":
                actions.append(section)
            else:
                raise self.error(f"unsupported domain section '{key}'", section)
        # actions are checked once every type and predicate is known
        for section in actions:
            schema = self.read_action(section)
            self.schemas[schema.name] = schema
        logger.debug("parsed domain %s: %d predicates, %d schemas", name, len(self.predicates), len(self.schemas))
        return Domain(str(name), self.requirements, self.types, self.predicates, self.schemas)

    def read_requirements(self, section: SExpr):
        flags = []
        for flag in section.items[1:]:
            flag = self.expect_symbol(flag, "a requirement flag")
            if flag not in SUPPORTED_REQUIREMENTS:
                raise self.error(f"unsupported requirement '{flag}'", flag, UnsupportedRequirementError)
            flags.append(str(flag))
        self.requirements = tuple(flags)

    def read_types(self, section: SExpr):
        for name, parent in self.typed_list(section.items[1:], variables=False):
            if name == ROOT_TYPE:
                continue
            if name in self.types:
                raise self.error(f"duplicate type '{name}'", name)
            self.types[str(name)] = parent
        for child, parent in self.types.items():
            if parent != ROOT_TYPE and parent not in self.types:
                raise self.error(f"unknown parent type '{parent}' of '{child}'", section)
        for child in self.types:
            seen = {child}
            cursor = self.types[child]
            while cursor != ROOT_TYPE:
                if cursor in seen:
                    raise self.error(f"cyclic type hierarchy at '{child}'", section)
                seen.add(cursor)
                cursor = self.types[cursor]

    def check_type(self, type_name: str, node):
        if type_name != ROOT_TYPE and type_name not in self.types:
            raise self.error(f"unknown type '{type_name}'", node)

    def is_subtype(self, type_name: str, parent: str) -> bool:
        while True:
            if type_name == parent:
                return True
            if type_name == ROOT_TYPE:
                return False
            type_name = self.types.get(type_name, ROOT_TYPE)

    def read_params(self, node: SExpr) -> Tuple[TypedParam, ...]:
        params = []
        seen = set()
        for var, type_name in self.typed_list(node.items, variables=True):
            self.check_type(type_name, var)
            if var in seen:
                raise self.error(f"duplicate parameter '{var}'", var)
            seen.add(var)
            params.append(TypedParam(str(var), type_name))
        return tuple(params)

    def read_predicates(self, section: SExpr):
        for node in section.items[1:]:
            node = self.expect_list(node, "a predicate declaration")
            if not node.items:
                raise self.error("empty predicate declaration", node, PDDLSyntaxError)
            name = self.expect_symbol(node.items[0], "a predicate name")
            if name in self.predicates:
                raise self.error(f"duplicate predicate '{name}'", name)
            self.predicates[str(name)] = PredicateSignature(str(name), self.read_params(SExpr(node.items[1:], node.loc)))

    def read_action(self, section: SExpr) -> ActionSchema:
        if len(section.items) < 2:
            raise self.error("action without a name", section, PDDLSyntaxError)
        name = self.expect_symbol(section.items[1], "an action name")
        if name in self.schemas:
            raise self.error(f"duplicate action '{name}'", name)
        fields = {}
        rest = section.items[2:]
        if len(rest) % 2:
            raise self.error(f"action '{name}' has a key without a value", section, PDDLSyntaxError)
        for key, value in zip(rest[::2], rest[1::2]):
            key = self.expect_symbol(key, "an action key")
            if key not in (":parameters", ":precondition", ":effect"):
                raise self.error(f"unsupported action key '{key}'", key)
            fields[str(key)] = value
        params = self.read_params(self.expect_list(fields.get(":parameters", SExpr([], section.loc)), "a parameter list"))
        scope = {p.name: p.type for p in params}
        precondition = self.read_conjunction(fields.get(":precondition"), scope)
        effects, conditionals = self.read_effect(fields.get(":effect"), scope)
        return ActionSchema(str(name), params, precondition, effects, conditionals)

    def read_literal(self, node, scope: Dict[str, str]) -> Literal:
        node = self.expect_list(node, "a literal")
        if node.head() == "not":
            if len(node.items) != 2:
                raise self.error("'not' takes exactly one argument", node, PDDLSyntaxError)
            return self.read_literal(node.items[1], scope).negate()
        return Literal(self.read_atom(node, scope), True)

    def read_atom(self, node: SExpr, scope: Dict[str, str]) -> Atom:
        if not node.items:
            raise self.error("empty atom", node, PDDLSyntaxError)
        name = self.expect_symbol(node.items[0], "a predicate name")
        signature = self.predicates.get(name)
        if signature is None:
            raise self.error(f"unknown predicate '{name}'", name)
        args = node.items[1:]
        if len(args) != signature.arity:
            raise self.error(f"arity mismatch for '{name}': expected {signature.arity}, got {len(args)}", node)
        for arg, param in zip(args, signature.params):
            arg = self.expect_symbol(arg, "an argument")
            if arg not in scope:
                raise self.error(f"unknown variable '{arg}'", arg)
            if not self.is_subtype(scope[arg], param.type):
                raise self.error(f"'{arg}' of type '{scope[arg]}' does not fit '{param.type}' in '{name}'", arg)
        return Atom(str(name), tuple(str(a) for a in args))

    def read_conjunction(self, node, scope: Dict[str, str]) -> Tuple[Literal, ...]:
        if node is None:
            return ()
        node = self.expect_list(node, "a condition")
        if not node.items:
            return ()
        if node.head() == "and":
            return tuple(self.read_literal(item, scope) for item in node.items[1:])
        if node.head() in ("or", "imply", "exists", "forall", "when"):
            raise self.error(f"'{node.head()}' is not supported in conditions", node)
        return (self.read_literal(node, scope),)

    def read_effect(self, node, scope: Dict[str, str]) -> Tuple[Tuple[Literal, ...], Tuple[ConditionalEffect, ...]]:
        if node is None:
            return (), ()
        node = self.expect_list(node, "an effect")
        items = node.items[1:] if node.head() == "and" else ([node] if node.items else [])
        effects, conditionals = [], []
        for item in items:
            item = self.expect_list(item, "an effect")
            if item.head() == "forall":
                conditionals.append(self.read_forall(item, scope))
            elif item.head() == "when":
                conditionals.append(self.read_when(item, (), scope))
            else:
                effects.append(self.read_literal(item, scope))
        return tuple(effects), tuple(conditionals)

    def read_forall(self, node: SExpr, scope: Dict[str, str]) -> ConditionalEffect:
        if len(node.items) != 3:
            raise self.error("expected (forall (<vars>) <effect>)", node, PDDLSyntaxError)
        variables = self.read_params(self.expect_list(node.items[1], "a variable list"))
        for var in variables:
            if var.name in scope:
                raise self.error(f"quantified variable '{var.name}' shadows a parameter", node.items[1])
        body = self.expect_list(node.items[2], "a quantified effect")
        if body.head() == "when":
            return self.read_when(body, variables, scope)
        inner = {**scope, **{v.name: v.type for v in variables}}
        effects, nested = self.read_effect(body, inner)
        if nested:
            raise self.error("nested conditional effects are not supported", body)
        return ConditionalEffect(variables, (), effects)

    def read_when(self, node: SExpr, variables: Tuple[TypedParam, ...], scope: Dict[str, str]) -> ConditionalEffect:
        if len(node.items) != 3:
            raise self.error("expected (when <condition> <effect>)", node, PDDLSyntaxError)
        inner = {**scope, **{v.name: v.type for v in variables}}
        condition = self.read_conjunction(node.items[1], inner)
        consequent, nested = self.read_effect(node.items[2], inner)
        if nested:
            raise self.error("nested conditional effects are not supported", node.items[2])
        return ConditionalEffect(variables, condition, consequent)


class ProblemReader(_Reader):
    def __init__(self, text: str, domain: Domain):
        super().__init__(text)
        self.domain = domain

    def read(self) -> Problem:
        root = read_sexpr(self.text)
        name, sections = self.header(root, "problem")
        objects: Dict[str, str] = {}
        init = set()
        goal: Tuple[Literal, ...] = ()
        for section in sections:
            section = self.expect_list(section, "a problem section")
            key = section.head()
            if key == ":domain":
                wanted = section.items[1] if len(section.items) == 2 else None
                if wanted != self.domain.name:
                    raise self.error(f"problem is for domain '{wanted}', not '{self.domain.name}'", section)
            elif key == ":objects":
                for obj, type_name in self.typed_list(section.items[1:], variables=False):
                    if type_name != ROOT_TYPE and type_name not in self.domain.types:
                        raise self.error(f"unknown type '{type_name}'", obj)
                    if obj in objects:
                        raise self.error(f"duplicate object '{obj}'", obj)
                    objects[str(obj)] = type_name
            elif key == ":init":
                for item in section.items[1:]:
                    item = self.expect_list(item, "an init atom")
                    if item.head() == "not":
                        raise self.error("negative literals are not allowed in :init", item)
                    init.add(self.read_atom(item, objects))
            elif key == ":goal":
                if len(section.items) != 2:
                    raise self.error("expected (:goal <condition>)", section, PDDLSyntaxError)
                goal = self.read_goal(section.items[1], objects)
            else:
                raise self.error(f"unsupported problem section '{key}'", section)
        logger.debug("parsed problem %s: %d objects, %d init atoms", name, len(objects), len(init))
        return Problem(str(name), self.domain.name, objects, frozenset(init), goal)

    def read_atom(self, node: SExpr, objects: Dict[str, str]) -> Atom:
        if not node.items:
            raise self.error("empty atom", node, PDDLSyntaxError)
        name = self.expect_symbol(node.items[0], "a predicate name")
        signature = self.domain.predicates.get(name)
        if signature is None:
            raise self.error(f"unknown predicate '{name}'", name)
        args = node.items[1:]
        if len(args) != signature.arity:
            raise self.error(f"arity mismatch for '{name}': expected {signature.arity}, got {len(args)}", node)
        for arg, param in zip(args, signature.params):
            arg = self.expect_symbol(arg, "an object name")
            if arg.startswith("?"):
                raise self.error(f"non-ground atom: variable '{arg}'", arg)
            if arg not in objects:
                raise self.error(f"unknown object '{arg}'", arg)
            if not self.domain.is_subtype(objects[arg], param.type):
                raise self.error(f"object '{arg}' of type '{objects[arg]}' does not fit '{param.type}' in '{name}'", arg)
        return Atom(str(name), tuple(str(a) for a in args))

    def read_literal(self, node, objects: Dict[str, str]) -> Literal:
        node = self.expect_list(node, "a literal")
        if node.head() == "not":
            if len(node.items) != 2:
                raise self.error("'not' takes exactly one argument", node, PDDLSyntaxError)
            return self.read_literal(node.items[1], objects).negate()
        return Literal(self.read_atom(node, objects), True)

    def read_goal(self, node, objects: Dict[str, str]) -> Tuple[Literal, ...]:
        node = self.expect_list(node, "a goal")
        if not node.items:
            return ()
        if node.head() == "and":
            return tuple(self.read_literal(item, objects) for item in node.items[1:])
        return (self.read_literal(node, objects),)


def parse_domain(text: str) -> Domain:
    return DomainReader(text).read()


def parse_problem(text: str, domain: Domain) -> Problem:
    return ProblemReader(text, domain).read()


def load_domain(path: str) -> Domain:
    with open(path, encoding="utf-8") as f:
        return parse_domain(f.read())


def load_problem(path: str, domain: Domain) -> Problem:
    with open(path, encoding="utf-8") as f:
        return parse_problem(f.read(), domain)
