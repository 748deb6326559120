"""Declarative mock apps that behave like a device driver.

A mock app is a JSON document (see ``fixtures/``) listing screens, the
transitions between them and optional faults. :class:`MockEnv` serves
snapshots for the current screen and applies :class:`~guiknow.ui.UiAction`
objects to it.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import string
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .ui import (
    BACK,
    INPUT,
    LONG_TOUCHABLE,
    REQUIRED_AFFORDANCE,
    RESTART,
    TOUCHABLE,
    UiAction,
    UiElement,
    UiState,
    element_to_dict,
    enumerate_candidate_actions,
    parse_snapshot,
)

SCHEMA_VERSION = 1
OUT_OF_APP = "<out-of-app>"
DEFAULT_FOREIGN_APP = "com.android.foreign"
TRIGGER_TYPES = ("touch", "long_touch", "scroll", "input")


class SpecValidationError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid mock app spec:\n  " + "\n  ".join(problems))


class StaleTargetError(LookupError):
    """The action's target is not on the screen currently shown."""


@dataclass(frozen=True)
class DynamicContentRule:
    kind: str  # list_rows | toggle_checked | random_text
    element: int | None = None
    resource_id: str = ""
    class_name: str = "android.widget.TextView"
    min_count: int = 1
    max_count: int = 1
    touchable: bool = True
    long_touchable: bool = False
    text_prefix: str = ""


@dataclass(frozen=True)
class ScreenTemplate:
    screen_id: str
    activity: str
    static_elements: tuple[UiElement, ...]
    dynamic_rules: tuple[DynamicContentRule, ...] = ()


@dataclass(frozen=True)
class TransitionRule:
    screen: str
    action_type: str
    element: int | None = None
    resource_id: str | None = None
    input_pattern: str | None = None
    target_screen: str | None = None
    probability: float = 1.0
    out_of_app: bool = False
    foreign_app: str = DEFAULT_FOREIGN_APP
    sticky: bool = False


@dataclass(frozen=True)
class FaultRule:
    probability: float
    effect: str = "stay"  # stay | goto | out_of_app
    screen: str | None = None
    element: int | None = None
    action_type: str | None = None
    target_screen: str | None = None
    max_fires: int | None = None
    sticky: bool = False


@dataclass(frozen=True)
class MockAppSpec:
    app_name: str
    package: str
    activities: tuple[str, ...]
    screens: tuple[ScreenTemplate, ...]
    initial_screen: str
    transitions: tuple[TransitionRule, ...] = ()
    faults: tuple[FaultRule, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def screen(self, screen_id: str) -> ScreenTemplate:
        for s in self.screens:
            if s.screen_id == screen_id:
                return s
        raise KeyError(screen_id)

    @property
    def deterministic(self) -> bool:
        return not self.faults and all(t.probability == 1.0 for t in self.transitions)


# loading and emitting

def _element_from_doc(d: Mapping, where: str, problems: list[str]) -> UiElement | None:
    try:
        el = parse_snapshot({"state_id": "x", "activity": "x", "elements": [d]}).elements[0]
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None
    return el


def load_app_spec(document: Mapping | str | bytes) -> MockAppSpec:
    """Validate a mock-app document and build a :class:`MockAppSpec`.

    All problems are collected and reported together in one
    :class:`SpecValidationError`.
    """
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    problems: list[str] = []
    version = document.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"unsupported schema_version {version!r}")
    activities = tuple(document.get("activities", ()))
    if len(set(activities)) != len(activities):
        problems.append("duplicate activity names")
    screens = []
    seen_screens: set[str] = set()
    raw_screens = document.get("screens") or []
    if not raw_screens:
        problems.append("screens: empty list")
    for i, sd in enumerate(raw_screens):
        sid = sd.get("screen_id")
        where = f"screens[{i}]"
        if not sid:
            problems.append(f"{where}: missing screen_id")
            continue
        if sid in seen_screens:
            problems.append(f"{where}: duplicate screen id {sid!r}")
        seen_screens.add(sid)
        activity = sd.get("activity", "")
        if activity not in activities:
            problems.append(f"{where}: activity {activity!r} not declared")
        elements = []
        ids: set[int] = set()
        for j, ed in enumerate(sd.get("elements", [])):
            el = _element_from_doc(ed, f"{where}.elements[{j}]", problems)
            if el is None:
                continue
            if el.element_id in ids:
                problems.append(f"{where}.elements[{j}]: duplicate element id {el.element_id}")
            ids.add(el.element_id)
            elements.append(el)
        rules = []
        for j, rd in enumerate(sd.get("dynamic", [])):
            kind = rd.get("kind")
            if kind not in ("list_rows", "toggle_checked", "random_text"):
                problems.append(f"{where}.dynamic[{j}]: unknown kind {kind!r}")
                continue
            rule = DynamicContentRule(
                kind=kind,
                element=rd.get("element"),
                resource_id=rd.get("resource_id", ""),
                class_name=rd.get("class", "android.widget.TextView"),
                min_count=rd.get("min", 1),
                max_count=rd.get("max", 1),
                touchable=rd.get("touchable", True),
                long_touchable=rd.get("long_touchable", False),
                text_prefix=rd.get("text_prefix", ""),
            )
            if rule.element is not None and rule.element not in ids:
                problems.append(f"{where}.dynamic[{j}]: element {rule.element} not on screen")
            if kind != "list_rows" and rule.element is None:
                problems.append(f"{where}.dynamic[{j}]: {kind} needs an element")
            if kind == "list_rows" and not (0 <= rule.min_count <= rule.max_count):
                problems.append(f"{where}.dynamic[{j}]: bad row count range")
            rules.append(rule)
        screens.append(ScreenTemplate(sid, activity, tuple(elements), tuple(rules)))
    by_id = {s.screen_id: s for s in screens}
    initial = document.get("initial_screen")
    if initial not in by_id:
        problems.append(f"initial_screen {initial!r} does not exist")

    transitions = []
    for i, td in enumerate(document.get("transitions", [])):
        where = f"transitions[{i}]"
        rule = TransitionRule(
            screen=td.get("screen"),
            action_type=td.get("action", "touch"),
            element=td.get("element"),
            resource_id=td.get("resource_id"),
            input_pattern=td.get("input_pattern"),
            target_screen=td.get("target"),
            probability=td.get("probability", 1.0),
            out_of_app=td.get("out_of_app", False),
            foreign_app=td.get("foreign_app", DEFAULT_FOREIGN_APP),
            sticky=td.get("sticky", False),
        )
        _check_trigger(rule.screen, rule.element, rule.resource_id, rule.action_type, by_id, where, problems)
        if not rule.out_of_app and rule.target_screen not in by_id:
            problems.append(f"{where}: target screen {rule.target_screen!r} does not exist")
        if not 0 < rule.probability <= 1:
            problems.append(f"{where}: probability must be in (0, 1]")
        if rule.input_pattern is not None:
            if rule.action_type != INPUT:
                problems.append(f"{where}: input_pattern on a {rule.action_type} trigger")
            else:
                try:
                    re.compile(rule.input_pattern)
                except re.error as exc:
                    problems.append(f"{where}: bad input_pattern ({exc})")
        transitions.append(rule)

    faults = []
    for i, fd in enumerate(document.get("faults", [])):
        where = f"faults[{i}]"
        rule = FaultRule(
            probability=fd.get("probability", 1.0),
            effect=fd.get("effect", "stay"),
            screen=fd.get("screen"),
            element=fd.get("element"),
            action_type=fd.get("action"),
            target_screen=fd.get("target"),
            max_fires=fd.get("max_fires"),
            sticky=fd.get("sticky", False),
        )
        if rule.screen is not None and rule.screen not in by_id:
            problems.append(f"{where}: screen {rule.screen!r} does not exist")
        if rule.effect not in ("stay", "goto", "out_of_app"):
            problems.append(f"{where}: unknown effect {rule.effect!r}")
        if rule.effect == "goto" and rule.target_screen not in by_id:
            problems.append(f"{where}: target screen {rule.target_screen!r} does not exist")
        if not 0 < rule.probability <= 1:
            problems.append(f"{where}: probability must be in (0, 1]")
        faults.append(rule)

    if problems:
        raise SpecValidationError(problems)
    return MockAppSpec(
        app_name=document.get("app_name", ""),
        package=document.get("package", ""),
        activities=activities,
        screens=tuple(screens),
        initial_screen=initial,
        transitions=tuple(transitions),
        faults=tuple(faults),
        schema_version=version,
    )


def _check_trigger(screen, element, resource_id, action_type, by_id, where, problems):
    if screen not in by_id:
        problems.append(f"{where}: screen {screen!r} does not exist")
        return
    if action_type not in TRIGGER_TYPES:
        problems.append(f"{where}: unknown action {action_type!r}")
    if (element is None) == (resource_id is None):
        problems.append(f"{where}: give exactly one of element / resource_id")
        return
    tmpl = by_id[screen]
    if element is not None and element not in {e.element_id for e in tmpl.static_elements}:
        problems.append(f"{where}: element {element} not on screen {screen!r}")
    if resource_id is not None:
        rids = {e.resource_id for e in tmpl.static_elements}
        rids |= {r.resource_id for r in tmpl.dynamic_rules if r.kind == "list_rows"}
        if resource_id not in rids:
            problems.append(f"{where}: resource_id {resource_id!r} not on screen {screen!r}")


def _drop_defaults(d: dict, defaults: Mapping) -> dict:
    return {k: v for k, v in d.items() if k not in defaults or defaults[k] != v}


def emit_app_spec(spec: MockAppSpec) -> dict:
    screens = []
    for s in spec.screens:
        rules = []
        for r in s.dynamic_rules:
            rules.append(_drop_defaults({
                "kind": r.kind, "element": r.element, "resource_id": r.resource_id,
                "class": r.class_name, "min": r.min_count, "max": r.max_count,
                "touchable": r.touchable, "long_touchable": r.long_touchable,
                "text_prefix": r.text_prefix,
            }, {"element": None, "resource_id": "", "class": "android.widget.TextView", "min": 1,
                "max": 1, "touchable": True, "long_touchable": False, "text_prefix": ""}))
        sd = {"screen_id": s.screen_id, "activity": s.activity,
              "elements": [element_to_dict(e) for e in s.static_elements]}
        if rules:
            sd["dynamic"] = rules
        screens.append(sd)
    transitions = [_drop_defaults({
        "screen": t.screen, "action": t.action_type, "element": t.element,
        "resource_id": t.resource_id, "input_pattern": t.input_pattern, "target": t.target_screen,
        "probability": t.probability, "out_of_app": t.out_of_app, "foreign_app": t.foreign_app,
        "sticky": t.sticky,
    }, {"element": None, "resource_id": None, "input_pattern": None, "target": None,
        "probability": 1.0, "out_of_app": False, "foreign_app": DEFAULT_FOREIGN_APP, "sticky": False})
        for t in spec.transitions]
    faults = [_drop_defaults({
        "probability": f.probability, "effect": f.effect, "screen": f.screen, "element": f.element,
        "action": f.action_type, "target": f.target_screen, "max_fires": f.max_fires, "sticky": f.sticky,
    }, {"screen": None, "element": None, "action": None, "target": None, "max_fires": None, "sticky": False})
        for f in spec.faults]
    return {
        "schema_version": spec.schema_version,
        "app_name": spec.app_name,
        "package": spec.package,
        "activities": list(spec.activities),
        "initial_screen": spec.initial_screen,
        "screens": screens,
        "transitions": transitions,
        "faults": faults,
    }


FIXTURES = ("single_screen", "linear3", "calculator", "dynamic_list", "wide_fanout",
            "probabilistic", "input_form", "cross_app", "dead_end")


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("guiknow") / "fixtures" / f"{name}.json"))


def load_fixture(name: str) -> MockAppSpec:
    return load_app_spec(fixture_path(name).read_text())


def load_app(path_or_name: str) -> MockAppSpec:
    """Load a spec from a path, or a bundled fixture by (optionally
    ``fixtures/``-prefixed) name."""
    path = Path(path_or_name)
    if path.is_file():
        return load_app_spec(path.read_text())
    name = path.name.removesuffix(".json")
    if name in FIXTURES:
        return load_fixture(name)
    raise FileNotFoundError(path_or_name)


# runtime

_WORDS = ("Alice", "Bob", "Carol", "Dave", "Erin", "Frank", "Grace", "Heidi", "Ivan", "Judy",
          "Mallory", "Niaj", "Olivia", "Peggy", "Rupert", "Sybil", "Trent", "Victor", "Walter")


@dataclass
class EnvState:
    current_screen: str
    history: list[str] = field(default_factory=list)
    visits: dict[str, int] = field(default_factory=dict)
    fault_fires: dict[int, int] = field(default_factory=dict)
    foreign_app: str = DEFAULT_FOREIGN_APP
    sticky: bool = False
    return_screen: str | None = None


class MockEnv:
    """Environment driver over a :class:`MockAppSpec`.

    Per-visit randomness (dynamic content, probabilistic transitions and
    faults) comes from the env's own ``seed``, independent of any explorer.
    """

    def __init__(self, spec: MockAppSpec, seed: int = 0):
        self.spec = spec
        self.seed = seed
        self.reset()

    @property
    def app_name(self) -> str:
        return self.spec.app_name

    @property
    def package(self) -> str:
        return self.spec.package

    @property
    def declared_activities(self) -> tuple[str, ...]:
        return self.spec.activities

    def reset(self):
        self.rng = random.Random(self.seed)
        self.state = EnvState(self.spec.initial_screen)
        self._observations = 0
        self._last: dict | None = None

    # observation

    def observe(self) -> dict:
        """Render the current screen into a fresh snapshot document."""
        self._observations += 1
        state_id = f"{self.spec.package}#{self._observations}"
        if self.state.current_screen == OUT_OF_APP:
            doc = {
                "state_id": state_id,
                "activity": f"{self.state.foreign_app}.MainActivity",
                "source_app": self.state.foreign_app,
                "elements": [element_to_dict(UiElement(
                    0, "android.widget.Button", "foreign:id/dial", "Call", "",
                    (0, 0, 1080, 200), frozenset({TOUCHABLE}), structural_path=(0,)))],
            }
        else:
            tmpl = self.spec.screen(self.state.current_screen)
            self.state.visits[tmpl.screen_id] = self.state.visits.get(tmpl.screen_id, 0) + 1
            doc = {
                "state_id": state_id,
                "activity": tmpl.activity,
                "source_app": self.spec.package,
                "elements": [element_to_dict(e) for e in self._render(tmpl)],
            }
        self._last = doc
        return doc

    def _render(self, tmpl: ScreenTemplate) -> list[UiElement]:
        elements = {e.element_id: e for e in tmpl.static_elements}
        next_id = max(elements, default=-1) + 1
        for rule in tmpl.dynamic_rules:
            if rule.kind == "toggle_checked":
                el = elements[rule.element]
                elements[el.element_id] = replace(el, checked=self.rng.random() < 0.5)
            elif rule.kind == "random_text":
                el = elements[rule.element]
                elements[el.element_id] = replace(el, text=self._random_text(rule.text_prefix))
            elif rule.kind == "list_rows":
                parent_path: tuple[int, ...] = ()
                if rule.element is not None:
                    parent_path = elements[rule.element].structural_path
                taken = sum(1 for e in elements.values()
                            if len(e.structural_path) == len(parent_path) + 1
                            and e.structural_path[:-1] == parent_path)
                count = self.rng.randint(rule.min_count, rule.max_count)
                affordances = set()
                if rule.touchable:
                    affordances.add(TOUCHABLE)
                if rule.long_touchable:
                    affordances.add(LONG_TOUCHABLE)
                for i in range(count):
                    top = 200 + 120 * i
                    elements[next_id] = UiElement(
                        next_id, rule.class_name, rule.resource_id,
                        self._random_text(rule.text_prefix), "", (0, top, 1080, top + 120),
                        frozenset(affordances), structural_path=parent_path + (taken + i,),
                    )
                    next_id += 1
        return [elements[i] for i in sorted(elements)]

    def _random_text(self, prefix: str) -> str:
        word = self.rng.choice(_WORDS)
        suffix = "".join(self.rng.choice(string.ascii_lowercase) for _ in range(4))
        return f"{prefix}{word} {suffix}".strip()

    # actions

    def perform_action(self, a: UiAction) -> None:
        st = self.state
        if a.action_type == RESTART:
            st.current_screen = self.spec.initial_screen
            st.history.clear()
            st.sticky = False
            return
        if a.action_type == BACK:
            if st.current_screen == OUT_OF_APP:
                if not st.sticky:
                    st.current_screen = st.return_screen or self.spec.initial_screen
            elif st.history:
                st.current_screen = st.history.pop()
            return
        el = self._resolve(a)
        if st.current_screen == OUT_OF_APP:
            return
        required = REQUIRED_AFFORDANCE[a.action_type]
        if required not in el.affordances or not el.enabled:
            return
        if self._apply_fault(a, el):
            return
        for rule in self.spec.transitions:
            if not self._matches(rule.screen, rule.element, rule.resource_id, rule.action_type, a, el):
                continue
            if rule.input_pattern is not None and not re.search(rule.input_pattern, a.input_text or ""):
                continue
            if rule.probability < 1.0 and self.rng.random() >= rule.probability:
                return
            if rule.out_of_app:
                self._leave(rule.foreign_app, rule.sticky)
            else:
                self._goto(rule.target_screen)
            return

    def _resolve(self, a: UiAction) -> UiElement:
        if self._last is None:
            raise StaleTargetError("nothing observed yet")
        state_id, element_id = a.target
        if state_id != self._last["state_id"]:
            raise StaleTargetError(f"action targets {state_id}, screen shows {self._last['state_id']}")
        for ed in self._last["elements"]:
            if ed["element_id"] == element_id:
                return parse_snapshot({"state_id": "x", "activity": "x", "elements": [ed]}).elements[0]
        raise StaleTargetError(f"element {element_id} not on screen")

    def _matches(self, screen, element, resource_id, action_type, a: UiAction, el: UiElement) -> bool:
        if screen is not None and screen != self.state.current_screen:
            return False
        if action_type is not None and action_type != a.action_type:
            return False
        if element is not None and element != el.element_id:
            return False
        if resource_id is not None and resource_id != el.resource_id:
            return False
        return True

    def _apply_fault(self, a: UiAction, el: UiElement) -> bool:
        for i, fault in enumerate(self.spec.faults):
            if not self._matches(fault.screen, fault.element, None, fault.action_type, a, el):
                continue
            fired = self.state.fault_fires.get(i, 0)
            if fault.max_fires is not None and fired >= fault.max_fires:
                continue
            if fault.probability < 1.0 and self.rng.random() >= fault.probability:
                continue
            self.state.fault_fires[i] = fired + 1
            if fault.effect == "goto":
                self._goto(fault.target_screen)
            elif fault.effect == "out_of_app":
                self._leave(DEFAULT_FOREIGN_APP, fault.sticky)
            return True
        return False

    def _goto(self, screen: str):
        if screen != self.state.current_screen:
            self.state.history.append(self.state.current_screen)
        self.state.current_screen = screen

    def _leave(self, foreign_app: str, sticky: bool):
        self.state.return_screen = self.state.current_screen
        self.state.current_screen = OUT_OF_APP
        self.state.foreign_app = foreign_app
        self.state.sticky = sticky


# random baseline

def raw_state_key(s: UiState) -> str:
    """Content identity of a raw state (everything except its id)."""
    payload = json.dumps([s.activity, s.source_app, [element_to_dict(e) for e in s.elements]],
                         sort_keys=True)
    return hashlib.sha1(payload.encode()).hexdigest()


def random_text(rng: random.Random) -> str:
    return "".join(rng.choice(string.ascii_letters + string.digits) for _ in range(rng.randint(1, 12)))


def random_baseline_step(env: MockEnv, rng: random.Random, state: UiState | None = None) -> UiAction:
    """Uniform choice over the candidate actions of ``state`` (default: the last observation)."""
    if state is None:
        state = parse_snapshot(env._last if env._last is not None else env.observe())
    if state.source_app != env.package:
        return UiAction(BACK)
    candidates = enumerate_candidate_actions(state)
    if not candidates:
        return UiAction(RESTART)
    action = rng.choice(candidates)
    if action.action_type == INPUT:
        action = action.with_text(random_text(rng))
    return action


@dataclass
class BaselineRun:
    steps: int
    reached_activities: set[str]
    coverage_log: list[int]
    raw_state_keys: set[str]
    raw_edges: set[tuple[str, str, str]]
    state_ids: set[str]

    def steps_to_cover(self, n_activities: int) -> int | None:
        for step, n in enumerate(self.coverage_log, start=1):
            if n >= n_activities:
                return step
        return None


def run_random_baseline(spec: MockAppSpec, steps: int, seed: int = 0, env_seed: int | None = None,
                        stop_at: int | None = None, track_raw: bool = True) -> BaselineRun:
    """Drive a uniform-random explorer for ``steps`` actions.

    Raw states are identified by content, the way a plain transition-graph
    explorer would see them. Stops early once ``stop_at`` activities are
    reached, when given. ``track_raw=False`` skips the raw-state graph.
    """
    env = MockEnv(spec, seed if env_seed is None else env_seed)
    rng = random.Random(seed)
    state = parse_snapshot(env.observe())
    reached = {state.activity} if state.source_app == spec.package else set()
    key = raw_state_key(state) if track_raw else ""
    keys = {key} if track_raw else set()
    ids = {state.state_id}
    edges: set[tuple[str, str, str]] = set()
    log: list[int] = []
    for _ in range(steps):
        action = random_baseline_step(env, rng, state)
        env.perform_action(action)
        new = parse_snapshot(env.observe())
        ids.add(new.state_id)
        if track_raw:
            new_key = raw_state_key(new)
            edges.add((key, f"{action.action_type}:{action.element_id}:{action.scroll_direction}", new_key))
            keys.add(new_key)
            key = new_key
        if new.source_app == spec.package and new.activity in spec.activities:
            reached.add(new.activity)
        log.append(len(reached))
        state = new
        if stop_at is not None and len(reached) >= stop_at:
            break
    return BaselineRun(len(log), reached, log, keys, edges, ids)


# random topologies

def random_app_spec(seed: int, max_screens: int = 10) -> MockAppSpec:
    """A random deterministic mock app with up to ``max_screens`` screens."""
    rng = random.Random(seed)
    n = rng.randint(1, max_screens)
    screen_ids = [f"s{i}" for i in range(n)]
    activities = [f"Activity{i}" for i in range(n)]
    screens = []
    transitions = []
    for i, sid in enumerate(screen_ids):
        elements = [{"element_id": 0, "class": "android.widget.TextView", "resource_id": f"title{i}",
                     "text": f"Screen {i}", "path": [0]}]
        for j in range(rng.randint(0, 4)):
            eid = j + 1
            kind = rng.random()
            ed: dict[str, Any] = {"element_id": eid, "class": "android.widget.Button",
                                  "resource_id": f"btn_{chr(97 + j)}", "text": f"B{j}",
                                  "path": [eid], "touchable": True}
            action = "touch"
            if kind < 0.15:
                ed = {"element_id": eid, "class": "android.widget.EditText",
                      "resource_id": f"field_{chr(97 + j)}", "content_desc": "Name",
                      "path": [eid], "editable": True}
                action = "input"
            elif kind < 0.3:
                ed["long_touchable"] = True
            elif kind < 0.4:
                ed["class"] = "android.widget.ListView"
                ed["touchable"] = False
                ed["scrollable"] = True
                action = "scroll"
            elements.append(ed)
            if rng.random() < 0.7:
                transitions.append({"screen": sid, "element": eid, "action": action,
                                    "target": rng.choice(screen_ids)})
        dynamic = []
        if rng.random() < 0.3:
            dynamic.append({"kind": "list_rows", "resource_id": f"row{i}", "min": 1, "max": 4})
            transitions.append({"screen": sid, "resource_id": f"row{i}", "action": "touch",
                                "target": rng.choice(screen_ids)})
        screens.append({"screen_id": sid, "activity": activities[i], "elements": elements,
                        "dynamic": dynamic})
    return load_app_spec({
        "schema_version": SCHEMA_VERSION,
        "app_name": f"Random{seed}",
        "package": f"com.example.random{seed}",
        "activities": activities,
        "initial_screen": screen_ids[0],
        "screens": screens,
        "transitions": transitions,
    })
