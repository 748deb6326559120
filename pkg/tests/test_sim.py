import copy
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guiknow.sim import (
    FIXTURES,
    MockEnv,
    SpecValidationError,
    StaleTargetError,
    emit_app_spec,
    fixture_path,
    load_app,
    load_app_spec,
    load_fixture,
    random_app_spec,
    random_baseline_step,
    raw_state_key,
    run_random_baseline,
)
from guiknow.ui import UiAction, compute_state_signature, parse_snapshot
from oracles import reachable_activities


def fixture_doc(name):
    return json.loads(fixture_path(name).read_text())


def current(env):
    return parse_snapshot(env._last or env.observe())


def act(env, eid, kind="touch", **kw):
    s = current(env)
    env.perform_action(UiAction(kind, (s.state_id, eid), **kw))
    return parse_snapshot(env.observe())


# loading

def test_calculator_fixture():
    spec = load_fixture("calculator")
    assert len(spec.activities) == 3
    assert len(spec.screen("main").static_elements) == 12


@pytest.mark.parametrize("name", FIXTURES)
def test_fixtures_load_and_round_trip(name):
    spec = load_fixture(name)
    assert load_app_spec(emit_app_spec(spec)) == spec
    assert load_app_spec(json.dumps(emit_app_spec(spec))) == spec


def test_load_app_accepts_prefixed_names_and_paths():
    assert load_app("fixtures/linear3") == load_fixture("linear3")
    assert load_app(str(fixture_path("linear3"))) == load_fixture("linear3")
    with pytest.raises(FileNotFoundError):
        load_app("no_such_app")


def test_missing_screen_is_named():
    doc = fixture_doc("linear3")
    doc["transitions"].append({"screen": "welcome", "element": 1, "target": "nowhere"})
    with pytest.raises(SpecValidationError) as info:
        load_app_spec(doc)
    assert any("'nowhere'" in p for p in info.value.problems)


def test_empty_screen_list():
    doc = fixture_doc("linear3")
    doc["screens"] = []
    with pytest.raises(SpecValidationError) as info:
        load_app_spec(doc)
    assert any("screens" in p for p in info.value.problems)


def test_all_problems_reported_together():
    doc = fixture_doc("linear3")
    doc["schema_version"] = 9
    doc["initial_screen"] = "nope"
    doc["transitions"][0]["probability"] = 2.0
    with pytest.raises(SpecValidationError) as info:
        load_app_spec(doc)
    assert len(info.value.problems) == 3


def test_bad_regex_and_misplaced_pattern():
    doc = fixture_doc("input_form")
    bad = copy.deepcopy(doc)
    bad["transitions"][0]["input_pattern"] = "(["
    with pytest.raises(SpecValidationError):
        load_app_spec(bad)
    bad = copy.deepcopy(doc)
    bad["transitions"][1]["input_pattern"] = "x"
    with pytest.raises(SpecValidationError):
        load_app_spec(bad)


# observing

def test_dynamic_list_observations_differ_but_share_signature():
    env = MockEnv(load_fixture("dynamic_list"), 1)
    a = parse_snapshot(env.observe())
    b = parse_snapshot(env.observe())
    assert a.state_id != b.state_id
    assert [e.text for e in a.elements] != [e.text for e in b.elements]
    assert compute_state_signature(a) == compute_state_signature(b)


def test_static_screen_observed_twice():
    env = MockEnv(load_fixture("linear3"))
    a, b = env.observe(), env.observe()
    assert a["state_id"] != b["state_id"]
    assert a["elements"] == b["elements"]


def test_out_of_app_snapshot():
    spec = load_fixture("cross_app")
    env = MockEnv(spec)
    env.observe()
    away = act(env, 1)
    assert away.source_app != spec.package


def test_observation_is_seed_deterministic():
    spec = load_fixture("dynamic_list")
    assert MockEnv(spec, 5).observe() == MockEnv(spec, 5).observe()


# acting

def test_touch_changes_screen():
    env = MockEnv(load_fixture("linear3"))
    env.observe()
    assert act(env, 1).activity == "FeaturesActivity"


def test_input_gate_holds_and_opens():
    env = MockEnv(load_fixture("input_form"))
    env.observe()
    assert act(env, 1, "input", input_text="not-a-name").activity == "SignupNameActivity"
    assert act(env, 1, "input", input_text="Ada Lovelace").activity == "SignupEmailActivity"
    assert act(env, 1, "input", input_text="not-an-email").activity == "SignupEmailActivity"
    assert act(env, 1, "input", input_text="ada@example.org").activity == "SignupPhoneActivity"


def test_touch_without_rule_is_a_no_op():
    env = MockEnv(load_fixture("single_screen"))
    before = env.observe()
    after = act(env, 1)
    assert after.activity == before["activity"]
    assert env.state.current_screen == "main"


def test_restart_and_back():
    env = MockEnv(load_fixture("linear3"))
    env.observe()
    act(env, 1)
    act(env, 1)
    env.perform_action(UiAction("back"))
    assert parse_snapshot(env.observe()).activity == "FeaturesActivity"
    env.perform_action(UiAction("restart"))
    assert parse_snapshot(env.observe()).activity == "WelcomeActivity"


def test_stale_target_rejected():
    env = MockEnv(load_fixture("linear3"))
    first = env.observe()
    env.observe()
    with pytest.raises(StaleTargetError):
        env.perform_action(UiAction("touch", (first["state_id"], 1)))
    with pytest.raises(StaleTargetError):
        env.perform_action(UiAction("touch", (env._last["state_id"], 42)))


def test_one_shot_fault_fires_once():
    doc = fixture_doc("linear3")
    doc["faults"] = [{"screen": "welcome", "element": 1, "effect": "stay", "max_fires": 1}]
    env = MockEnv(load_app_spec(doc))
    env.observe()
    assert act(env, 1).activity == "WelcomeActivity"
    assert act(env, 1).activity == "FeaturesActivity"


def test_sticky_trap_survives_back_but_not_restart():
    doc = fixture_doc("cross_app")
    doc["transitions"][0]["sticky"] = True
    spec = load_app_spec(doc)
    env = MockEnv(spec)
    env.observe()
    act(env, 1)
    env.perform_action(UiAction("back"))
    assert parse_snapshot(env.observe()).source_app != spec.package
    env.perform_action(UiAction("restart"))
    assert parse_snapshot(env.observe()).source_app == spec.package


def test_probabilistic_edges_sometimes_fail():
    spec = load_fixture("probabilistic")
    outcomes = set()
    for seed in range(30):
        env = MockEnv(spec, seed)
        env.observe()
        outcomes.add(act(env, 1).activity)
    assert outcomes == {"HomeActivity", "FeedActivity"}


# baseline

def test_baseline_on_one_action_screen():
    spec = load_fixture("linear3")
    env = MockEnv(spec)
    env.observe()
    a = random_baseline_step(env, random.Random(0))
    assert a.action_type == "touch" and a.element_id == 1


def test_baseline_is_seed_reproducible():
    spec = load_fixture("dynamic_list")

    def actions(seed):
        env = MockEnv(spec, 3)
        rng = random.Random(seed)
        out = []
        for _ in range(100):
            s = parse_snapshot(env.observe())
            a = random_baseline_step(env, rng, s)
            env.perform_action(a)
            out.append(a.to_dict())
        return out

    assert actions(1) == actions(1)
    assert actions(1) != actions(2)


def test_baseline_run_counts():
    spec = load_fixture("dynamic_list")
    run = run_random_baseline(spec, 200, seed=1)
    assert run.steps == 200 == len(run.coverage_log)
    assert len(run.state_ids) == 201
    assert run.coverage_log == sorted(run.coverage_log)
    assert run.steps_to_cover(1) == 1
    quick = run_random_baseline(spec, 200, seed=1, stop_at=2, track_raw=False)
    assert quick.reached_activities and not quick.raw_state_keys
    assert len(quick.reached_activities) == 2 == quick.coverage_log[-1]


def test_raw_key_ignores_state_id_only():
    env = MockEnv(load_fixture("linear3"))
    a, b = parse_snapshot(env.observe()), parse_snapshot(env.observe())
    assert raw_state_key(a) == raw_state_key(b)
    env = MockEnv(load_fixture("dynamic_list"))
    a, b = parse_snapshot(env.observe()), parse_snapshot(env.observe())
    assert raw_state_key(a) != raw_state_key(b)


# generated specs

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_random_specs_are_valid_and_deterministic(seed):
    spec = random_app_spec(seed)
    assert spec.deterministic
    assert 1 <= len(spec.screens) <= 10
    assert load_app_spec(emit_app_spec(spec)) == spec
    assert random_app_spec(seed) == spec


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_baseline_never_leaves_reachable_set(seed):
    spec = random_app_spec(seed)
    reachable = reachable_activities(emit_app_spec(spec))
    run = run_random_baseline(spec, 100, seed=seed, track_raw=False)
    assert run.reached_activities <= reachable


@pytest.mark.parametrize("name, expected", [
    ("cross_app", {"PeopleActivity", "AboutActivity", "LicenseActivity"}),
    ("linear3", {"WelcomeActivity", "FeaturesActivity", "DoneActivity"}),
])
def test_reachability_oracle_on_known_topologies(name, expected):
    assert reachable_activities(fixture_doc(name)) == expected
