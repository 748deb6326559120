import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import button, field, label, scroller, state
from guiknow.sim import MockEnv, load_fixture
from guiknow.ui import (
    EmptyStateError,
    SnapshotError,
    StateSignature,
    UiAction,
    UiElement,
    compute_state_signature,
    enumerate_candidate_actions,
    parse_snapshot,
    render_html,
    state_to_snapshot,
)


def doc(*elements, activity="Main", state_id="s1"):
    return {"state_id": state_id, "activity": activity, "elements": list(elements)}


def test_parse_single_button():
    s = parse_snapshot(doc({"element_id": 0, "class": "android.widget.Button", "touchable": True}))
    assert s.activity == "Main"
    assert len(s.elements) == 1
    assert s.elements[0].affordances == {"touchable"}


def test_missing_text_defaults_to_empty():
    s = parse_snapshot(doc({"element_id": 0, "class": "android.widget.TextView"}))
    assert s.elements[0].text == ""
    assert s.elements[0].content_desc == ""
    assert s.elements[0].enabled is True


def test_parse_accepts_json_text():
    raw = json.dumps(doc({"element_id": 4, "class": "X", "editable": True}))
    assert parse_snapshot(raw).elements[0].element_id == 4


def test_calculator_snapshot_keeps_paths():
    spec = load_fixture("calculator")
    snap = MockEnv(spec, 0).observe()
    s = parse_snapshot(snap)
    assert len(s.elements) == 12
    declared = {e.element_id: e.structural_path for e in spec.screen("main").static_elements}
    assert {e.element_id: e.structural_path for e in s.elements} == declared


@pytest.mark.parametrize("bad, path", [
    ({"activity": "A", "elements": [{"element_id": 0, "class": "X"}]}, "$.state_id"),
    (doc({"class": "X"}), "$.elements[0].element_id"),
    (doc({"element_id": 0, "class": "X", "touchable": "yes"}), "$.elements[0].touchable"),
    (doc({"element_id": 0, "class": "X", "bounds": [0, 0, 1]}), "$.elements[0].bounds"),
    (doc({"element_id": 0, "class": "X"}, {"element_id": 0, "class": "Y"}), "$.elements[1].element_id"),
])
def test_malformed_snapshots_name_the_path(bad, path):
    with pytest.raises(SnapshotError) as info:
        parse_snapshot(bad)
    assert info.value.path == path


def test_inverted_bounds_rejected():
    with pytest.raises(SnapshotError):
        parse_snapshot(doc({"element_id": 0, "class": "X", "bounds": [50, 0, 10, 10]}))


def test_empty_state_is_an_error():
    with pytest.raises(EmptyStateError):
        parse_snapshot(doc())


def test_not_json():
    with pytest.raises(SnapshotError):
        parse_snapshot("{nope")


# signatures

def test_contacts_screens_with_other_names_share_signature():
    a = state("a", "Contacts", label(0, "name", "Alice"), button(1, "row", "Alice"))
    b = state("b", "Contacts", label(0, "name", "Bob"), button(1, "row", "Bob"))
    assert compute_state_signature(a) == compute_state_signature(b)


def test_activity_is_part_of_signature():
    a = state("a", "Main", button(1, "ok"))
    b = state("b", "Other", button(1, "ok"))
    assert compute_state_signature(a) != compute_state_signature(b)


def test_checkbox_toggle_keeps_signature():
    box = UiElement(1, "android.widget.CheckBox", "chk", "Remember", affordances=frozenset({"touchable"}))
    a = state("a", "Main", box)
    b = state("b", "Main", UiElement(1, "android.widget.CheckBox", "chk", "Remember",
                                     affordances=frozenset({"touchable"}), checked=True))
    assert compute_state_signature(a) == compute_state_signature(b)


def test_resource_id_changes_signature():
    a = state("a", "Main", button(1, "ok"))
    b = state("b", "Main", button(1, "cancel"))
    assert compute_state_signature(a) != compute_state_signature(b)


def test_signature_round_trip():
    s = state("a", "Main", button(1, "ok", long=True), field(2, "name"))
    sig = compute_state_signature(s)
    assert StateSignature.from_dict(json.loads(json.dumps(sig.to_dict()))) == sig


# candidate actions

def test_touch_and_long_touch():
    s = state("a", "Main", button(1, "b", long=True))
    assert [a.action_type for a in enumerate_candidate_actions(s)] == ["touch", "long_touch"]


def test_disabled_element_has_no_actions():
    s = state("a", "Main", button(1, "b", enabled=False))
    assert enumerate_candidate_actions(s) == []


def test_scrollable_gets_both_directions():
    s = state("a", "Main", scroller(1, "list"))
    acts = enumerate_candidate_actions(s)
    assert [(a.action_type, a.scroll_direction) for a in acts] == [("scroll", "up"), ("scroll", "down")]


def test_labels_have_no_actions():
    assert enumerate_candidate_actions(state("a", "Main", label(0, "t", "hi"))) == []


# html

def test_button_html():
    s = state("a", "Main", button(3, "save", "Save"))
    assert '<button id="e3">Save</button>' in render_html(s)


def test_empty_body_still_emitted():
    s = state("a", "Main", button(3, "save"))
    assert render_html(s) == '<button id="e3"></button>'


def test_input_html():
    s = state("a", "Main", field(5, "phone", "Phone number"))
    assert '<input id="e5">Phone number</input>' in render_html(s)


def test_html_nests_by_path_and_escapes():
    parent = UiElement(0, "android.widget.LinearLayout", "", "", "", structural_path=(0,))
    kid = button(1, "b", "a < b", path=[0, 0])
    out = render_html(state("a", "Main", parent, kid))
    assert out.splitlines() == ['<p id="e0">', '  <button id="e1">a &lt; b</button>', "</p>"]


def test_checkbox_tag():
    box = UiElement(2, "android.widget.CheckBox", "c", "Remember", affordances=frozenset({"touchable"}))
    assert render_html(state("a", "Main", box)) == '<checkbox id="e2">Remember</checkbox>'


# actions

def test_action_invariants():
    with pytest.raises(ValueError):
        UiAction("touch")
    with pytest.raises(ValueError):
        UiAction("restart", ("s", 1))
    with pytest.raises(ValueError):
        UiAction("scroll", ("s", 1))
    with pytest.raises(ValueError):
        UiAction("touch", ("s", 1), input_text="x")
    with pytest.raises(ValueError):
        UiAction("fling", ("s", 1))


@pytest.mark.parametrize("action", [
    UiAction("restart"), UiAction("touch", ("s", 1)), UiAction("input", ("s", 2), "hi"),
    UiAction("scroll", ("s", 3), scroll_direction="down"),
])
def test_action_dict_round_trip(action):
    assert UiAction.from_dict(json.loads(json.dumps(action.to_dict()))) == action


# properties

affordance_sets = st.frozensets(st.sampled_from(["touchable", "long_touchable", "scrollable", "editable"]))


@st.composite
def elements(draw, eid):
    x = draw(st.integers(0, 500))
    y = draw(st.integers(0, 500))
    return UiElement(
        eid,
        draw(st.sampled_from(["android.widget.Button", "android.widget.TextView", "android.widget.EditText"])),
        draw(st.sampled_from(["", "ok", "row", "title"])),
        draw(st.text(max_size=8)),
        draw(st.text(max_size=8)),
        (x, y, x + draw(st.integers(0, 100)), y + draw(st.integers(0, 100))),
        draw(affordance_sets),
        draw(st.booleans()),
        draw(st.booleans()),
        draw(st.booleans()),
        tuple(draw(st.lists(st.integers(0, 3), max_size=3))),
    )


@st.composite
def ui_states(draw):
    n = draw(st.integers(1, 6))
    els = tuple(draw(elements(i)) for i in range(n))
    return state(draw(st.text(min_size=1, max_size=5)), draw(st.sampled_from(["A", "B"])), *els)


@given(ui_states())
def test_snapshot_round_trip(s):
    again = parse_snapshot(json.dumps(state_to_snapshot(s)))
    assert again == s
    assert compute_state_signature(again) == compute_state_signature(s)


@given(ui_states(), st.randoms())
def test_signature_ignores_order_and_dynamic_fields(s, rnd):
    shuffled = list(s.elements)
    rnd.shuffle(shuffled)
    mutated = tuple(UiElement(e.element_id, e.class_name, e.resource_id, e.text + "x", "", (0, 0, 1, 1),
                              e.affordances, not e.checked, not e.selected, e.enabled, e.structural_path)
                    for e in shuffled)
    assert compute_state_signature(state("other", s.activity, *mutated)) == compute_state_signature(s)


@given(ui_states())
def test_candidates_respect_affordances(s):
    need = {"touch": "touchable", "long_touch": "long_touchable", "scroll": "scrollable", "input": "editable"}
    acts = enumerate_candidate_actions(s)
    for a in acts:
        el = s.element(a.element_id)
        assert el.enabled and need[a.action_type] in el.affordances
    expected = sum(len(e.affordances) + ("scrollable" in e.affordances) for e in s.elements if e.enabled)
    assert len(acts) == expected


@given(ui_states())
def test_html_lists_every_element_once(s):
    out = render_html(s)
    for e in s.elements:
        assert out.count(f'id="e{e.element_id}"') == 1
