"""The five bundled household tasks, in the order reports list them."""

import os
from functools import lru_cache
from typing import NamedTuple, Tuple

from src import settings
from src.errors import ConfigurationError
from src.pddl import Domain, Problem, load_domain, load_problem


class Task(NamedTuple):
    name: str
    description: str
    initial_plan_length: int

    @property
    def label(self) -> str:
        return self.name.replace("_", " ")

    @property
    def problem_file(self) -> str:
        return os.path.join(settings.PROBLEMS_DIR, f"{self.name}.pddl")


TASKS: Tuple[Task, ...] = (
    Task("boil_water_in_the_microwave", "Pick up an empty cup in a closed cabinet, fill it with water using a sink, and boil it in a microwave.", 12),
    Task("bring_in_empty_bottle", "Find two empty bottles in the garden and bring them inside.", 8),
    Task("cook_a_frozen_pie", "Take an apple pie out of the fridge and heat it using an oven.", 8),
    Task("halve_an_egg", "Find a knife in the kitchen and use it to cut a hard-boiled egg into half.", 4),
    Task("store_firewood", "Collect two wooden sticks and place them on a table.", 8),
)


def task_names() -> Tuple[str, ...]:
    return tuple(t.name for t in TASKS)


def get_task(name: str) -> Task:
    key = name.strip().replace(" ", "_").replace("-", "_").lower()
    for task in TASKS:
        if task.name == key:
            return task
    raise ConfigurationError(f"unknown task '{name}'; expected one of {', '.join(task_names())}")


@lru_cache(maxsize=None)
def bundled_domain(path: str = settings.DOMAIN_FILE) -> Domain:
    return load_domain(path)


def load_task(name: str, domain_file: str = settings.DOMAIN_FILE) -> Tuple[Domain, Problem]:
    domain = bundled_domain(domain_file)
    return domain, load_problem(get_task(name).problem_file, domain)
