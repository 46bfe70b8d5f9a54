import random
from types import SimpleNamespace

import pytest

import src.monitor as monitor_module
from src.monitor import (
    EpisodeConfig,
    EpisodeSeeds,
    Monitor,
    Strategy,
    effect_queries,
    expected_effects,
    precondition_queries,
    project,
    revert,
    run_episode,
    update_belief,
)
from src.pddl import Atom, Literal
from src.perception import AnswerValue, PerceptionConfig, SimulatedPerceiver
from src.prompt import humanize
from src.tasks import TASKS
from src.world import SituationSpec, WorldState

A, MUG, CAB, MW, WATER = "agent-n-01", "mug-n-04", "cabinet-n-01", "microwave-n-02", "water-n-06"
EGG, KNIFE, FLOOR = "hard__boiled_egg-n-01", "carving_knife-n-01", "floor-n-01"
CLOSED = Atom("closed", (CAB,))
NO_SITUATIONS = ()


class Nay:
    """A camera that says No to everything."""

    def __init__(self):
        self.queries = 0

    def ask(self, world, questions):
        self.queries += len(questions)
        return [AnswerValue.NO] * len(questions)

    def ask_success(self, world_before, world_after, action):
        self.queries += 1
        return AnswerValue.NO

    def ask_affordance(self, world, action):
        self.queries += 1
        return AnswerValue.NO


@pytest.mark.parametrize(
    "literal, answer, expected",
    [
        (Literal(CLOSED, False), AnswerValue.YES, frozenset()),
        (Literal(CLOSED, False), AnswerValue.NO, frozenset({CLOSED})),
        (Literal(CLOSED, False), AnswerValue.SKIP, frozenset({CLOSED})),
        (Literal(CLOSED, True), AnswerValue.NO, frozenset()),
        (Literal(Atom("inside", (MUG, CAB)), True), AnswerValue.YES, frozenset({CLOSED, Atom("inside", (MUG, CAB))})),
    ],
)
def test_update_belief(literal, answer, expected):
    assert update_belief(frozenset({CLOSED}), literal, answer) == expected


def test_precondition_queries_keep_vision_literals_only(monitors):
    planner = monitors["boil_water_in_the_microwave"].planner
    graspin = planner.action("graspin", A, MUG, CAB)
    assert [q.text for q in precondition_queries(graspin)] == ["Is mug inview agent?", "Is mug inside cabinet?"]
    placein = planner.action("placein", A, MUG, MW)
    assert [q.text for q in precondition_queries(placein)] == ["Is microwave inview agent?", "Is microwave open?"]


def test_effect_queries_include_fired_conditionals(monitors):
    planner = monitors["boil_water_in_the_microwave"].planner
    placein = planner.action("placein", A, MUG, MW)
    belief = frozenset({Atom("inhand", (A, MUG)), Atom("inside", (WATER, MUG))})
    assert [q.text for q in effect_queries(placein, belief)] == ["Is mug inside microwave?", "Is water inside microwave?"]
    assert [q.text for q in effect_queries(placein, frozenset({Atom("inhand", (A, MUG))}))] == ["Is mug inside microwave?"]


def test_expected_effects_of_graspin(monitors):
    graspin = monitors["boil_water_in_the_microwave"].planner.action("graspin", A, MUG, CAB)
    effects = expected_effects(graspin, frozenset())
    assert Literal(Atom("inside", (MUG, CAB)), False) in effects
    assert Literal(Atom("inhand", (A, MUG)), True) in effects


def test_revert_undoes_projection_once(monitors):
    planner = monitors["halve_an_egg"].planner
    belief = planner.problem.init | {Atom("found", (A, "countertop-n-01"))}
    after, projection = project(belief, planner.action("find", A, "carving_knife-n-01", "kitchen"))
    assert after != belief
    assert revert(after, projection) == belief
    assert revert(revert(after, projection), projection) == belief
    assert revert(belief, None) == belief


@pytest.mark.parametrize("strategy", list(Strategy))
@pytest.mark.parametrize("task", TASKS, ids=lambda t: t.name)
def test_perfect_world_always_succeeds(monitors, task, strategy):
    cfg = EpisodeConfig(strategy=strategy, situations=NO_SITUATIONS)
    result = monitors[task.name].run(cfg, 0)
    assert result.success and result.reason == "goal-reached"
    assert result.replans == 0
    assert result.steps == result.initial_plan_length == task.initial_plan_length
    assert result.events[0].kind == "plan" and result.events[-1].kind == "end"


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("task", TASKS, ids=lambda t: t.name)
def test_all_skip_answers_reduce_to_open_loop(monitors, task, seed):
    blind = PerceptionConfig(skip_rate=1.0)
    monitor = monitors[task.name]
    checked = monitor.run(EpisodeConfig(strategy=Strategy.DKPROMPT, perception=blind), seed)
    open_loop = monitor.run(EpisodeConfig(strategy=Strategy.CLASSICAL, perception=blind), seed)
    assert checked.actions == open_loop.actions
    assert (checked.success, checked.steps, checked.reason) == (open_loop.success, open_loop.steps, open_loop.reason)
    assert checked.replans == 0


def test_failed_open_is_noticed_and_retried(monitors, scripted_rng, monkeypatch):
    monitor = monitors["boil_water_in_the_microwave"]
    initial = list(monitor.planner.solve(monitor.problem.init))
    first_open = next(i for i, a in enumerate(initial) if a.name == "openit")
    target = initial[first_open]
    # only opening can misfire; every draw up to the first open lands in remains-closed
    table = (SituationSpec("open", "remains-closed", 0.5, "no_change"),)
    world_rng = scripted_rng([0.0] * (first_open + 1))
    monkeypatch.setattr(monitor_module, "random", SimpleNamespace(Random=lambda seed: world_rng))
    perceiver = SimulatedPerceiver(PerceptionConfig(), random.Random(0), monitor.bank)

    result = monitor.run(EpisodeConfig(strategy=Strategy.DKPROMPT, situations=table), 0, perceiver=perceiver)

    failed = next(i for i, e in enumerate(result.events) if e.kind == "execute" and e.action == str(target))
    assert result.events[failed].outcome == "situation:remains-closed"
    effect = result.events[failed + 1]
    assert effect.kind == "effect"
    assert (f"Is {humanize(target.args[1])} open?", "no") in effect.qa
    # whatever the open would have revealed goes back out with it
    assert f"(inroom {MUG} kitchen)" in effect.removed
    replan = next(e for e in result.events[failed:] if e.kind == "replan")
    assert str(target) in replan.plan
    assert result.actions.count(str(target)) == 2
    assert result.success and result.replans == 1


def test_knife_dropped_twice_is_found_both_times(domain, problems, scripted_rng, monkeypatch):
    monitor = Monitor(domain, problems["halve_an_egg"])
    table = (SituationSpec("cut", "not-cut-knife-drops", 0.5, "drop_held"),)
    sim = monitor.simulator(table)
    execute, cuts = sim.execute, []

    # the first two cuts drop the knife, the third one lands
    def scripted_execute(world, action, rng):
        if action.name != "cut_into_half":
            return execute(world, action, rng)
        cuts.append(action)
        return execute(world, action, scripted_rng([0.0 if len(cuts) <= 2 else 0.999]))

    monkeypatch.setattr(sim, "execute", scripted_execute)
    result = monitor.run(EpisodeConfig(strategy=Strategy.DKPROMPT, situations=table), 0)

    assert result.success and result.reason == "goal-reached"
    assert len(cuts) == 3
    assert [e.outcome for e in result.events if e.kind == "execute"].count("situation:not-cut-knife-drops") == 2
    knife = humanize(KNIFE)
    located = [e for e in result.events if e.kind == "locate" and any(knife in q and a == "yes" for q, a in e.qa)]
    assert len(located) == 2
    assert result.actions.count(f"(graspon {A} {KNIFE} {FLOOR})") == 2


def test_sync_forgets_where_a_held_object_was(monitors):
    monitor = monitors["halve_an_egg"]
    belief = frozenset({Atom("onfloor", (KNIFE, FLOOR)), Atom("ontop", (EGG, "countertop-n-01"))})
    world = WorldState(frozenset({Atom("inhand", (A, KNIFE))}))
    synced = monitor.sync(belief, world)
    assert Atom("onfloor", (KNIFE, FLOOR)) not in synced
    assert Atom("ontop", (EGG, "countertop-n-01")) in synced
    assert monitor.lost_objects(synced) == []


def test_step_budget(monitors):
    result = monitors["halve_an_egg"].run(EpisodeConfig(strategy=Strategy.CLASSICAL, situations=NO_SITUATIONS, max_steps=1), 0)
    assert (result.success, result.reason, result.steps) == (False, "step-budget", 1)


def test_replan_budget(monitors):
    cfg = EpisodeConfig(strategy=Strategy.DKPROMPT, situations=NO_SITUATIONS, max_replans=3)
    result = monitors["halve_an_egg"].run(cfg, 0, perceiver=Nay())
    assert (result.success, result.reason, result.replans) == (False, "replan-budget", 3)


def test_affordance_no_blocks_every_action(monitors):
    cfg = EpisodeConfig(strategy=Strategy.AFF_QA, situations=NO_SITUATIONS, max_replans=2)
    result = monitors["halve_an_egg"].run(cfg, 0, perceiver=Nay())
    assert result.reason == "replan-budget"
    assert result.steps == 0
    assert [e.kind for e in result.events].count("affordance") == 3


def test_success_no_reverts_projection(monitors):
    cfg = EpisodeConfig(strategy=Strategy.SUC_QA, situations=NO_SITUATIONS, max_replans=1)
    result = monitors["halve_an_egg"].run(cfg, 0, perceiver=Nay())
    success = next(e for e in result.events if e.kind == "success")
    execute = next(e for e in result.events if e.kind == "execute")
    assert success.qa[0][1] == "no"
    # the belief went back to where it was before the step
    assert set(success.removed) == set(execute.added)


def test_goal_true_from_the_start(monitors, problems):
    problem = problems["halve_an_egg"]
    world = WorldState(problem.init | {Atom("halved", (EGG,))})
    result = monitors["halve_an_egg"].run(EpisodeConfig(), 0, world=world)
    assert result.success and result.steps == 0


def test_same_seed_same_episode(domain, problems, monitors):
    cfg = EpisodeConfig(strategy=Strategy.DKPROMPT, perception=PerceptionConfig(flip_rate=0.1, skip_rate=0.1))
    seeds = EpisodeSeeds("world:replay", "perception:replay")
    fresh = Monitor(domain, problems["boil_water_in_the_microwave"])
    assert fresh.run(cfg, seeds) == monitors["boil_water_in_the_microwave"].run(cfg, seeds)


def test_seed_coercion():
    assert EpisodeSeeds.coerce(7) == EpisodeSeeds("world:7", "perception:7")
    assert EpisodeSeeds.coerce(("a", "b")) == EpisodeSeeds("a", "b")


def test_episode_config_coerces_strategy_names():
    assert EpisodeConfig(strategy="suc-aff-qa").strategy is Strategy.SUC_AFF_QA
    with pytest.raises(ValueError):
        EpisodeConfig(strategy="psychic")


def test_sync_copies_non_vision_facts(monitors):
    monitor = monitors["halve_an_egg"]
    belief = frozenset({Atom("handempty", (A,)), CLOSED})
    world = WorldState(frozenset({Atom("inhand", (A, "carving_knife-n-01"))}))
    assert monitor.sync(belief, world) == frozenset({CLOSED, Atom("inhand", (A, "carving_knife-n-01"))})


def test_run_episode_matches_monitor(domain, problems, monitors):
    cfg = EpisodeConfig(strategy=Strategy.PRE_ONLY, perception=PerceptionConfig(skip_rate=0.2))
    assert run_episode(domain, problems["cook_a_frozen_pie"], None, cfg, 5) == monitors["cook_a_frozen_pie"].run(cfg, 5)
