"""Raw GUI entities: elements, states, actions, and their abstraction signatures.

A :class:`UiState` is one observed screen. Snapshots arrive as plain dicts
(or JSON text) from an environment driver and are parsed with
:func:`parse_snapshot`; :func:`state_to_snapshot` is the inverse.
"""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

TOUCHABLE = "touchable"
LONG_TOUCHABLE = "long_touchable"
SCROLLABLE = "scrollable"
EDITABLE = "editable"
AFFORDANCES = (TOUCHABLE, LONG_TOUCHABLE, SCROLLABLE, EDITABLE)

TOUCH = "touch"
LONG_TOUCH = "long_touch"
SCROLL = "scroll"
INPUT = "input"
RESTART = "restart"
BACK = "back"
ACTION_TYPES = (TOUCH, LONG_TOUCH, SCROLL, INPUT, RESTART, BACK)
# never stored as abstract actions
NAVIGATION_ONLY = (RESTART, BACK)

REQUIRED_AFFORDANCE = {
    TOUCH: TOUCHABLE,
    LONG_TOUCH: LONG_TOUCHABLE,
    SCROLL: SCROLLABLE,
    INPUT: EDITABLE,
}

VERTICAL = ("up", "down")
ALL_DIRECTIONS = ("up", "down", "left", "right")

CHECKABLE_CLASS_MARKERS = ("CheckBox", "Switch", "RadioButton", "ToggleButton", "CheckedTextView")


class SnapshotError(ValueError):
    """A snapshot document does not conform to the schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class EmptyStateError(SnapshotError):
    """A snapshot has no elements."""


ElementKey = tuple  # (class_name, resource_id, frozenset of affordances)


@dataclass(frozen=True)
class UiElement:
    element_id: int
    class_name: str
    resource_id: str = ""
    text: str = ""
    content_desc: str = ""
    bounds: tuple[int, int, int, int] = (0, 0, 0, 0)
    affordances: frozenset = frozenset()
    checked: bool = False
    selected: bool = False
    enabled: bool = True
    structural_path: tuple[int, ...] = ()

    def __post_init__(self):
        left, top, right, bottom = self.bounds
        if min(self.bounds) < 0 or left > right or top > bottom:
            raise ValueError(f"invalid bounds {self.bounds} on element {self.element_id}")
        unknown = set(self.affordances) - set(AFFORDANCES)
        if unknown:
            raise ValueError(f"unknown affordances {sorted(unknown)}")

    @property
    def key(self) -> ElementKey:
        return (self.class_name, self.resource_id, frozenset(self.affordances))

    @property
    def hint(self) -> str:
        return self.text or self.content_desc


@dataclass(frozen=True)
class UiState:
    state_id: str
    activity: str
    elements: tuple[UiElement, ...]
    source_app: str = ""

    def element(self, element_id: int) -> UiElement:
        for el in self.elements:
            if el.element_id == element_id:
                return el
        raise KeyError(element_id)


@dataclass(frozen=True)
class UiAction:
    action_type: str
    target: tuple[str, int] | None = None
    input_text: str | None = None
    scroll_direction: str | None = None

    def __post_init__(self):
        if self.action_type not in ACTION_TYPES:
            raise ValueError(f"unknown action type {self.action_type!r}")
        if self.action_type in NAVIGATION_ONLY:
            if self.target is not None:
                raise ValueError(f"{self.action_type} takes no target")
        elif self.target is None:
            raise ValueError(f"{self.action_type} needs a target")
        if (self.action_type == SCROLL) != (self.scroll_direction is not None):
            raise ValueError("scroll_direction is required for scroll and only for scroll")
        if self.scroll_direction is not None and self.scroll_direction not in ALL_DIRECTIONS:
            raise ValueError(f"bad scroll direction {self.scroll_direction!r}")
        if self.input_text is not None and self.action_type != INPUT:
            raise ValueError("input_text only applies to input actions")

    @property
    def element_id(self) -> int | None:
        return None if self.target is None else self.target[1]

    def with_text(self, text: str) -> "UiAction":
        return UiAction(self.action_type, self.target, text, self.scroll_direction)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"type": self.action_type}
        if self.target is not None:
            d["target"] = [self.target[0], self.target[1]]
        if self.input_text is not None:
            d["text"] = self.input_text
        if self.scroll_direction is not None:
            d["direction"] = self.scroll_direction
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "UiAction":
        target = d.get("target")
        return cls(
            d["type"],
            None if target is None else (str(target[0]), int(target[1])),
            d.get("text"),
            d.get("direction"),
        )

    def __str__(self):
        parts = [self.action_type]
        if self.target is not None:
            parts.append(f"e{self.target[1]}")
        if self.scroll_direction:
            parts.append(self.scroll_direction)
        if self.input_text is not None:
            parts.append(repr(self.input_text))
        return " ".join(parts)


@dataclass(frozen=True)
class StateSignature:
    activity: str
    element_keys: frozenset = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        keys = sorted([c, r, sorted(a)] for c, r, a in self.element_keys)
        return {"activity": self.activity, "element_keys": keys}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StateSignature":
        keys = frozenset((c, r, frozenset(a)) for c, r, a in d["element_keys"])
        return cls(d["activity"], keys)


def _field(obj: Mapping, name: str, path: str, kind, default=None, required=False):
    if name not in obj:
        if required:
            raise SnapshotError(f"{path}.{name}", "missing required field")
        return default
    value = obj[name]
    if kind is bool:
        if not isinstance(value, bool):
            raise SnapshotError(f"{path}.{name}", f"expected boolean, got {type(value).__name__}")
    elif kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SnapshotError(f"{path}.{name}", f"expected integer, got {type(value).__name__}")
    elif kind is str:
        if value is None:
            return default
        if not isinstance(value, str):
            raise SnapshotError(f"{path}.{name}", f"expected string, got {type(value).__name__}")
    return value


def _int_list(value, path: str, length: int | None = None) -> tuple[int, ...]:
    if not isinstance(value, (list, tuple)):
        raise SnapshotError(path, "expected a list of integers")
    if length is not None and len(value) != length:
        raise SnapshotError(path, f"expected {length} integers, got {len(value)}")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int):
            raise SnapshotError(f"{path}[{i}]", "expected integer")
    return tuple(value)


def _parse_element(raw, path: str) -> UiElement:
    if not isinstance(raw, Mapping):
        raise SnapshotError(path, "expected an object")
    affordances = frozenset(
        name for name in AFFORDANCES if _field(raw, name, path, bool, default=False)
    )
    bounds = _int_list(raw.get("bounds", [0, 0, 0, 0]), f"{path}.bounds", 4)
    try:
        return UiElement(
            element_id=_field(raw, "element_id", path, int, required=True),
            class_name=_field(raw, "class", path, str, required=True),
            resource_id=_field(raw, "resource_id", path, str, default=""),
            text=_field(raw, "text", path, str, default=""),
            content_desc=_field(raw, "content_desc", path, str, default=""),
            bounds=bounds,
            affordances=affordances,
            checked=_field(raw, "checked", path, bool, default=False),
            selected=_field(raw, "selected", path, bool, default=False),
            enabled=_field(raw, "enabled", path, bool, default=True),
            structural_path=_int_list(raw.get("path", []), f"{path}.path"),
        )
    except ValueError as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise SnapshotError(path, str(exc)) from None


def parse_snapshot(raw: Mapping | str | bytes) -> UiState:
    """Parse a snapshot document (dict or JSON text) into a :class:`UiState`.

    Unknown fields are ignored and optional ones default to empty strings or
    false flags. Raises :class:`SnapshotError` naming the offending path, or
    :class:`EmptyStateError` when the element list is empty.
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SnapshotError("$", f"not valid JSON ({exc.msg})") from None
    if not isinstance(raw, Mapping):
        raise SnapshotError("$", "expected an object")
    state_id = raw.get("state_id")
    if isinstance(state_id, int) and not isinstance(state_id, bool):
        state_id = str(state_id)
    if not isinstance(state_id, str) or not state_id:
        raise SnapshotError("$.state_id", "missing or empty")
    activity = _field(raw, "activity", "$", str, required=True)
    source_app = _field(raw, "source_app", "$", str, default="")
    elements_raw = raw.get("elements")
    if not isinstance(elements_raw, list):
        raise SnapshotError("$.elements", "missing or not a list")
    if not elements_raw:
        raise EmptyStateError("$.elements", "state has no elements")
    elements = tuple(_parse_element(e, f"$.elements[{i}]") for i, e in enumerate(elements_raw))
    seen: set[int] = set()
    for i, el in enumerate(elements):
        if el.element_id in seen:
            raise SnapshotError(f"$.elements[{i}].element_id", f"duplicate id {el.element_id}")
        seen.add(el.element_id)
    return UiState(state_id, activity, elements, source_app)


def element_to_dict(el: UiElement) -> dict:
    d = {
        "element_id": el.element_id,
        "class": el.class_name,
        "resource_id": el.resource_id,
        "text": el.text,
        "content_desc": el.content_desc,
        "bounds": list(el.bounds),
        "checked": el.checked,
        "selected": el.selected,
        "enabled": el.enabled,
        "path": list(el.structural_path),
    }
    for name in AFFORDANCES:
        d[name] = name in el.affordances
    return d


def state_to_snapshot(s: UiState) -> dict:
    return {
        "state_id": s.state_id,
        "activity": s.activity,
        "source_app": s.source_app,
        "elements": [element_to_dict(el) for el in s.elements],
    }


def compute_state_signature(s: UiState) -> StateSignature:
    """Structure signature of a state with dynamic properties removed.

    Only the activity and each element's (class, resource id, affordances)
    survive; text, descriptions, check/selection flags, bounds and ordering
    are dropped, and duplicate keys collapse.
    """
    return StateSignature(s.activity, frozenset(el.key for el in s.elements))


def admissible_types(el: UiElement, scroll_directions: Iterable[str] = VERTICAL) -> list[tuple[str, str | None]]:
    """(action_type, direction) pairs an enabled element supports, in fixed order."""
    if not el.enabled:
        return []
    out: list[tuple[str, str | None]] = []
    if TOUCHABLE in el.affordances:
        out.append((TOUCH, None))
    if LONG_TOUCHABLE in el.affordances:
        out.append((LONG_TOUCH, None))
    if EDITABLE in el.affordances:
        out.append((INPUT, None))
    if SCROLLABLE in el.affordances:
        out.extend((SCROLL, d) for d in scroll_directions)
    return out


def enumerate_candidate_actions(s: UiState, scroll_directions: Iterable[str] = VERTICAL) -> list[UiAction]:
    scroll_directions = tuple(scroll_directions)
    actions = []
    for el in sorted(s.elements, key=lambda e: e.element_id):
        for action_type, direction in admissible_types(el, scroll_directions):
            actions.append(UiAction(action_type, (s.state_id, el.element_id), None, direction))
    return actions


def html_tag(el: UiElement) -> str:
    if EDITABLE in el.affordances:
        return "input"
    if any(marker in el.class_name for marker in CHECKABLE_CLASS_MARKERS):
        return "checkbox"
    if TOUCHABLE in el.affordances:
        return "button"
    return "p"


def _body(el: UiElement) -> str:
    parts = [p for p in (el.text, el.content_desc) if p]
    if len(parts) == 2 and parts[0] == parts[1]:
        parts = parts[:1]
    return html.escape(" ".join(parts).replace("\n", " "), quote=False)


def render_html(s: UiState) -> str:
    """Render a state as indented, line-oriented HTML for prompts.

    Nesting follows ``structural_path``: an element is placed under the
    closest element whose path is a proper prefix of its own.
    """
    by_path = {el.structural_path: el for el in s.elements}
    children: dict[int | None, list[UiElement]] = {}
    for el in s.elements:
        parent = None
        path = el.structural_path
        for cut in range(len(path) - 1, 0, -1):
            anc = by_path.get(path[:cut])
            if anc is not None and anc is not el:
                parent = anc.element_id
                break
        children.setdefault(parent, []).append(el)
    for kids in children.values():
        kids.sort(key=lambda e: (e.structural_path, e.element_id))

    lines: list[str] = []

    def emit(el: UiElement, depth: int):
        tag = html_tag(el)
        pad = "  " * depth
        kids = children.get(el.element_id, [])
        if not kids:
            lines.append(f'{pad}<{tag} id="e{el.element_id}">{_body(el)}</{tag}>')
            return
        lines.append(f'{pad}<{tag} id="e{el.element_id}">{_body(el)}')
        for kid in kids:
            emit(kid, depth + 1)
        lines.append(f"{pad}</{tag}>")

    for root in children.get(None, []):
        emit(root, 0)
    return "\n".join(lines)
