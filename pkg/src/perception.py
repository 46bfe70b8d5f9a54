"""
Simulated perception: which predicates a camera can check, how they are asked, and noisy yes/no/skip answers.
"""

import logging
import os
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import pandas as pd
from langchain.prompts import PromptTemplate

from src import settings
from src.errors import ConfigurationError, PerceptionContractError
from src.pddl import Atom, GroundAction, Literal, PredicateSignature
from src.planner import applicable, fired_effects
from src.prompt import affordance_template, describe_action, humanize, success_template

logger = logging.getLogger(__name__)

VISIBILITY_FILE = os.path.join(settings.DATA_DIR, "visibility.csv")
TEMPLATES_FILE = os.path.join(settings.DATA_DIR, "templates.csv")


class VisibilityClass(str, Enum):
    VISION = "vision"
    NON_VISION = "non-vision"
    IMPERCEPTIBLE = "imperceptible"


class AnswerValue(str, Enum):
    YES = "yes"
    NO = "no"
    SKIP = "skip"

    def inverted(self) -> "AnswerValue":
        return {AnswerValue.YES: AnswerValue.NO, AnswerValue.NO: AnswerValue.YES}.get(self, self)


@dataclass(frozen=True)
class PerceptionConfig:
    flip_rate: float = 0.0  # chance a truthful yes/no comes back inverted
    skip_rate: float = 0.0
    gate_on_inview: bool = False  # skip questions about objects the camera cannot see

    def __post_init__(self):
        for name in ("flip_rate", "skip_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be within [0, 1], got {value}")


class Question(NamedTuple):
    literal: Literal  # what the monitor wants to know
    about: Literal  # what the text actually asks; either `literal` or its positive atom
    text: str

    def literal_answer(self, answer: AnswerValue) -> AnswerValue:
        """Turn an answer to `text` into an answer about `literal`."""
        return answer if self.about == self.literal else answer.inverted()


class QuestionBank:
    """Visibility classes and question templates for one domain's predicates."""

    def __init__(self, visibility: Dict[str, VisibilityClass], templates: Dict[Tuple[str, bool], PromptTemplate]):
        self.visibility = visibility
        self.templates = templates
        missing = [p for p, v in visibility.items() if v is VisibilityClass.VISION and (p, True) not in templates]
        if missing:
            raise ConfigurationError(f"vision predicates without a question template: {missing}")
        self._questions: Dict[Literal, Question] = {}

    @classmethod
    def from_files(cls, visibility_path: str = VISIBILITY_FILE, templates_path: str = TEMPLATES_FILE) -> "QuestionBank":
        vis_df = pd.read_csv(visibility_path, comment="#", dtype=str)
        try:
            visibility = {row.predicate: VisibilityClass(row.visibility) for row in vis_df.itertuples()}
        except ValueError as e:
            raise ConfigurationError(f"{visibility_path}: {e}") from None
        tpl_df = pd.read_csv(templates_path, comment="#", dtype=str)
        templates = {}
        for row in tpl_df.itertuples():
            if row.polarity not in ("positive", "negative"):
                raise ConfigurationError(f"{templates_path}: polarity must be positive or negative, got '{row.polarity}'")
            templates[(row.predicate, row.polarity == "positive")] = PromptTemplate.from_template(row.template)
        return cls(visibility, templates)

    def classify(self, predicate: Union[str, PredicateSignature]) -> VisibilityClass:
        name = predicate.name if isinstance(predicate, PredicateSignature) else predicate
        return self.visibility.get(name, VisibilityClass.IMPERCEPTIBLE)

    def is_vision(self, predicate: str) -> bool:
        return self.classify(predicate) is VisibilityClass.VISION

    def question(self, literal: Literal) -> Question:
        if literal not in self._questions:
            self._questions[literal] = self._build(literal)
        return self._questions[literal]

    def _build(self, literal: Literal) -> Question:
        key = (literal.atom.predicate, literal.positive)
        about = literal
        if key not in self.templates:
            # negative literal without its own wording: ask about the atom itself
            about = Literal(literal.atom, True)
            key = (literal.atom.predicate, True)
        template = self.templates.get(key)
        if template is None:
            raise PerceptionContractError(f"no question template for '{literal.atom.predicate}'")
        names = {f"arg{i}": humanize(a) for i, a in enumerate(literal.atom.args)}
        text = template.format(**{v: names.get(v, "") for v in template.input_variables})
        return Question(literal, about, text)

    def render_question(self, literal: Literal) -> str:
        return self.question(literal).text


@lru_cache(maxsize=1)
def default_bank() -> QuestionBank:
    return QuestionBank.from_files()


def classify(predicate: Union[str, PredicateSignature], bank: Optional[QuestionBank] = None) -> VisibilityClass:
    return (bank or default_bank()).classify(predicate)


def render_question(literal: Literal, bank: Optional[QuestionBank] = None) -> str:
    return (bank or default_bank()).render_question(literal)


def _noisy(value: bool, cfg: PerceptionConfig, rng, gated: bool = False) -> AnswerValue:
    # two draws per answer regardless of outcome, so streams stay aligned across configs
    skip_draw, flip_draw = rng.random(), rng.random()
    if gated or skip_draw < cfg.skip_rate:
        return AnswerValue.SKIP
    if flip_draw < cfg.flip_rate:
        value = not value
    return AnswerValue.YES if value else AnswerValue.NO


def _gated(truth, atom: Atom, cfg: PerceptionConfig) -> bool:
    if not cfg.gate_on_inview or atom.predicate == "inview" or not atom.args:
        return False
    return not any(a.predicate == "inview" and a.args[1] == atom.args[0] for a in truth)


def answer(world, atom: Atom, cfg: PerceptionConfig, rng, bank: Optional[QuestionBank] = None) -> AnswerValue:
    """Noisy answer to "is `atom` true?" about a vision-class atom."""
    bank = bank or default_bank()
    if not bank.is_vision(atom.predicate):
        raise PerceptionContractError(f"{atom} is not perceptible in vision")
    return _noisy(atom in world.truth, cfg, rng, _gated(world.truth, atom, cfg))


def answer_literal(world, literal: Literal, cfg: PerceptionConfig, rng, bank: Optional[QuestionBank] = None) -> AnswerValue:
    value = answer(world, literal.atom, cfg, rng, bank)
    return value if literal.positive else value.inverted()


def answer_success(world_before, world_after, action: GroundAction, cfg: PerceptionConfig, rng) -> AnswerValue:
    """Yes iff every effect expected from `world_before` shows up in `world_after`."""
    add, delete = fired_effects(world_before.truth, action)
    achieved = add <= world_after.truth and world_after.truth.isdisjoint(delete - add)
    return _noisy(achieved, cfg, rng)


def answer_affordance(world, action: GroundAction, cfg: PerceptionConfig, rng) -> AnswerValue:
    """Yes iff the action's declared precondition holds in the true state."""
    return _noisy(applicable(world.truth, action), cfg, rng)


def success_question(action: GroundAction) -> str:
    return success_template.format(action=describe_action(action.name, action.args))


def affordance_question(action: GroundAction) -> str:
    return affordance_template.format(action=describe_action(action.name, action.args))


class SimulatedPerceiver:
    """Answers question batches from the true world state with configurable noise."""

    def __init__(self, cfg: PerceptionConfig, rng, bank: Optional[QuestionBank] = None):
        self.cfg = cfg
        self.rng = rng
        self.bank = bank or default_bank()
        self.queries = 0

    def ask(self, world, questions: Iterable[Question]) -> List[AnswerValue]:
        questions = list(questions)
        answers = []
        for q in questions:
            answers.append(answer_literal(world, q.about, self.cfg, self.rng, self.bank))
            self.queries += 1
        logger.debug("asked %s -> %s", [q.text for q in questions], [a.value for a in answers])
        return answers

    def ask_success(self, world_before, world_after, action: GroundAction) -> AnswerValue:
        self.queries += 1
        return answer_success(world_before, world_after, action, self.cfg, self.rng)

    def ask_affordance(self, world, action: GroundAction) -> AnswerValue:
        self.queries += 1
        return answer_affordance(world, action, self.cfg, self.rng)
