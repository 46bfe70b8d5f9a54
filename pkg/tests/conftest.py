import pytest

from src.monitor import Monitor
from src.perception import default_bank
from src.tasks import bundled_domain, load_task, task_names


class ScriptedRng:
    """Stands in for random.Random: hands out scripted draws, then `fallback` forever."""

    def __init__(self, draws=(), fallback=0.999):
        self.draws = list(draws)
        self.fallback = fallback
        self.calls = 0

    def random(self):
        self.calls += 1
        return self.draws.pop(0) if self.draws else self.fallback


@pytest.fixture(scope="session")
def domain():
    return bundled_domain()


@pytest.fixture(scope="session")
def bank():
    return default_bank()


@pytest.fixture(scope="session")
def problems(domain):
    return {name: load_task(name)[1] for name in task_names()}


@pytest.fixture(scope="session")
def monitors(domain, problems):
    return {name: Monitor(domain, problem) for name, problem in problems.items()}


@pytest.fixture
def scripted_rng():
    return ScriptedRng
