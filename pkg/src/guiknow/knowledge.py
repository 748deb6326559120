"""App knowledge: raw trace, abstract states and actions, and the interaction graph.

:func:`update_knowledge` folds one observed step into a :class:`Knowledge`.
New abstract states are registered with element groups produced by a
*grouper* callable (normally an LLM-backed organizer from
:mod:`guiknow.llm`); without one every element becomes its own group.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .ui import (
    INPUT,
    NAVIGATION_ONLY,
    VERTICAL,
    StateSignature,
    UiAction,
    UiElement,
    UiState,
    admissible_types,
    compute_state_signature,
    state_to_snapshot,
    parse_snapshot,
)

UNEXPLORED = "unexplored"
EXPLORED = "explored"
INEFFECTIVE = "ineffective"

DEFAULT_EDGE_FAILURE_THRESHOLD = 2

Slot = tuple  # (ElementKey, structural_path)
Edge = tuple  # (src abs_state_id, abs_action_id, dst abs_state_id)


class KnowledgeError(Exception):
    pass


class ConflictError(KnowledgeError):
    """An abstract state with the same signature already exists."""


class ConsistencyError(KnowledgeError):
    """An executed action does not match anything the knowledge knows about."""


class EdgeNotFound(KnowledgeError, KeyError):
    pass


def slot_of(el: UiElement) -> Slot:
    return (el.key, el.structural_path)


@dataclass(frozen=True)
class GroupSpec:
    """One entry of a grouping instruction: element ids sharing a function."""

    member_element_ids: tuple[int, ...]
    function: str = ""


@dataclass
class ElementGroup:
    group_id: int
    abs_state_id: int
    member_element_keys: frozenset
    function: str = ""


@dataclass
class AbstractState:
    abs_state_id: int
    signature: StateSignature
    representative_state: UiState
    member_state_ids: list[str] = field(default_factory=list)
    visit_count: int = 0
    group_ids: list[int] = field(default_factory=list)

    @property
    def activity(self) -> str:
        return self.signature.activity


@dataclass
class AbstractAction:
    abs_action_id: int
    abs_state_id: int
    action_type: str
    element_group: ElementGroup
    flag: frozenset = frozenset({UNEXPLORED})
    function: str = ""
    execution_count: int = 0
    # scroll actions are split per direction
    scroll_direction: str | None = None
    # last text typed for input actions; reused when navigating
    input_text: str | None = None

    @property
    def unexplored(self) -> bool:
        return UNEXPLORED in self.flag

    @property
    def ineffective(self) -> bool:
        return INEFFECTIVE in self.flag

    def label(self) -> str:
        kind = self.action_type if self.scroll_direction is None else f"scroll-{self.scroll_direction}"
        return f"a{self.abs_action_id}:{kind}"


@dataclass
class EdgeStats:
    successes: int = 0
    failures: int = 0


class InteractionGraph:
    """Directed multigraph over abstract state ids with abstract-action edges.

    Edges removed for repeated failure are kept as tombstones and are never
    re-added, so a pruned edge stays pruned for the rest of the run.
    """

    def __init__(self):
        self.nodes: set[int] = set()
        self.edges: dict[Edge, EdgeStats] = {}
        self.removed: dict[Edge, EdgeStats] = {}
        self._adjacency: tuple[tuple[int, int], dict[int, list[Edge]]] | None = None

    def add_node(self, node: int):
        self.nodes.add(node)

    def add_edge(self, src: int, action_id: int, dst: int) -> bool:
        if src not in self.nodes or dst not in self.nodes:
            raise KnowledgeError(f"edge endpoints must be nodes: {(src, action_id, dst)}")
        edge = (src, action_id, dst)
        if edge in self.edges or edge in self.removed:
            return False
        self.edges[edge] = EdgeStats()
        return True

    def out_edges(self, src: int) -> list[Edge]:
        return sorted(e for e in self.edges if e[0] == src)

    def __contains__(self, edge) -> bool:
        return edge in self.edges

    def _sorted_adjacency(self) -> dict[int, list[Edge]]:
        # edges are only ever added or moved to the tombstones, so the two
        # sizes identify the edge set
        version = (len(self.edges), len(self.removed))
        if self._adjacency is None or self._adjacency[0] != version:
            adjacency: dict[int, list[Edge]] = {}
            for edge in sorted(self.edges, key=lambda e: (e[1], e[2], e[0])):
                if edge[0] != edge[2]:
                    adjacency.setdefault(edge[0], []).append(edge)
            self._adjacency = (version, adjacency)
        return self._adjacency[1]

    def shortest_path(self, src: int, dst: int) -> list[Edge] | None:
        """BFS path of edges; ties resolved towards the smallest (action, dst)."""
        if src == dst:
            return []
        adjacency = self._sorted_adjacency()
        parent: dict[int, Edge | None] = {src: None}
        frontier = [src]
        while frontier:
            nxt = []
            for node in frontier:
                for edge in adjacency.get(node, ()):
                    if edge[2] in parent:
                        continue
                    parent[edge[2]] = edge
                    if edge[2] == dst:
                        path = []
                        cur = dst
                        while parent[cur] is not None:
                            path.append(parent[cur])
                            cur = parent[cur][0]
                        return path[::-1]
                    nxt.append(edge[2])
            frontier = nxt
        return None


@dataclass
class TraceStep:
    prev: UiState | None
    action: UiAction | None
    state: UiState


Grouper = Callable[[UiState], Sequence[GroupSpec]]


class Knowledge:
    def __init__(self, app_package: str | None = None, *,
                 edge_failure_threshold: int = DEFAULT_EDGE_FAILURE_THRESHOLD,
                 scroll_directions: Iterable[str] = VERTICAL):
        self.app_package = app_package
        self.edge_failure_threshold = edge_failure_threshold
        self.scroll_directions = tuple(scroll_directions)
        self.trace: list[TraceStep] = []
        self.abstract_states: dict[int, AbstractState] = {}
        self.abstract_actions: dict[int, AbstractAction] = {}
        self.groups: dict[int, ElementGroup] = {}
        self.graph = InteractionGraph()
        self.initial_state_id: int | None = None
        self.state_index: dict[str, int] = {}
        self.register_calls = 0
        # (trace length, "success" | "failure", edge) for replay
        self.edge_events: list[tuple[int, str, Edge]] = []
        self._by_signature: dict[StateSignature, int] = {}
        self._action_index: dict[tuple, int] = {}
        self._slot_index: dict[int, dict[Slot, int]] = {}

    # lookups

    def in_app(self, s: UiState) -> bool:
        return self.app_package is None or s.source_app == self.app_package

    def abstract_of(self, s: UiState) -> AbstractState | None:
        abs_id = self.state_index.get(s.state_id)
        return None if abs_id is None else self.abstract_states[abs_id]

    def actions_of(self, abs_state_id: int) -> list[AbstractAction]:
        return sorted(
            (a for a in self.abstract_actions.values() if a.abs_state_id == abs_state_id),
            key=lambda a: a.abs_action_id,
        )

    def resolve_group(self, abs_state: AbstractState, el: UiElement) -> ElementGroup | None:
        """Group owning ``el`` in ``abs_state``.

        Exact (key, path) slot first; otherwise the group holding the same
        element key at the path sharing the longest prefix, lowest id first.
        """
        index = self._slot_index.get(abs_state.abs_state_id, {})
        slot = slot_of(el)
        gid = index.get(slot)
        if gid is not None:
            return self.groups[gid]
        best = None
        for (key, path), gid in index.items():
            if key != el.key:
                continue
            common = 0
            for a, b in zip(path, el.structural_path):
                if a != b:
                    break
                common += 1
            rank = (-common, gid)
            if best is None or rank < best[0]:
                best = (rank, gid)
        return None if best is None else self.groups[best[1]]

    def match_action(self, s: UiState, a: UiAction) -> AbstractAction | None:
        abs_state = self.abstract_of(s)
        if abs_state is None or a.target is None:
            return None
        try:
            el = s.element(a.target[1])
        except KeyError:
            return None
        group = self.resolve_group(abs_state, el)
        if group is None:
            return None
        aid = self._action_index.get((group.group_id, a.action_type, a.scroll_direction))
        return None if aid is None else self.abstract_actions[aid]

    def concrete_actions(self, s: UiState, abs_action: AbstractAction) -> list[UiAction]:
        """UI actions on ``s`` that realize ``abs_action`` (empty if unavailable)."""
        abs_state = self.abstract_of(s)
        if abs_state is None or abs_state.abs_state_id != abs_action.abs_state_id:
            return []
        out = []
        for el in s.elements:
            for action_type, direction in admissible_types(el, self.scroll_directions):
                if action_type != abs_action.action_type or direction != abs_action.scroll_direction:
                    continue
                group = self.resolve_group(abs_state, el)
                if group is not None and group.group_id == abs_action.element_group.group_id:
                    out.append(UiAction(action_type, (s.state_id, el.element_id), None, direction))
        return out

    # mutation helpers

    def _add_group(self, abs_state: AbstractState, members: list[UiElement], function: str) -> ElementGroup:
        gid = len(self.groups)
        group = ElementGroup(gid, abs_state.abs_state_id, frozenset(slot_of(m) for m in members), function)
        self.groups[gid] = group
        abs_state.group_ids.append(gid)
        index = self._slot_index.setdefault(abs_state.abs_state_id, {})
        for m in members:
            index.setdefault(slot_of(m), gid)
        for action_type, direction in admissible_types(members[0], self.scroll_directions):
            aid = len(self.abstract_actions)
            self.abstract_actions[aid] = AbstractAction(
                aid, abs_state.abs_state_id, action_type, group,
                frozenset({UNEXPLORED}), function, 0, direction,
            )
            self._action_index[(gid, action_type, direction)] = aid
        return group

    def to_dict(self) -> dict:
        return knowledge_to_dict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _actionable(el: UiElement, directions) -> bool:
    return bool(admissible_types(el, directions))


def classify_state(k: Knowledge, s: UiState) -> AbstractState | None:
    abs_id = k._by_signature.get(compute_state_signature(s))
    return None if abs_id is None else k.abstract_states[abs_id]


def register_abstract_state(k: Knowledge, s: UiState, groups: Sequence[GroupSpec] = ()) -> AbstractState:
    """Create an abstract state from ``s`` plus one abstract action per
    (group, admissible action type). Elements not covered by ``groups``
    become singleton groups; a group mixing affordance sets is split so every
    action stays admissible for all of its members.
    """
    sig = compute_state_signature(s)
    if sig in k._by_signature:
        raise ConflictError(f"signature already registered as s{k._by_signature[sig]}")
    k.register_calls += 1
    abs_state = AbstractState(len(k.abstract_states), sig, s)
    k.abstract_states[abs_state.abs_state_id] = abs_state
    k._by_signature[sig] = abs_state.abs_state_id
    k.graph.add_node(abs_state.abs_state_id)
    if k.initial_state_id is None:
        k.initial_state_id = abs_state.abs_state_id

    actionable = {el.element_id: el for el in s.elements if _actionable(el, k.scroll_directions)}
    used: set[int] = set()
    for spec in groups:
        members = [actionable[i] for i in spec.member_element_ids if i in actionable and i not in used]
        by_affordance: dict[frozenset, list[UiElement]] = {}
        for m in members:
            by_affordance.setdefault(m.affordances, []).append(m)
        for part in by_affordance.values():
            part.sort(key=lambda e: e.element_id)
            k._add_group(abs_state, part, spec.function)
            used.update(m.element_id for m in part)
    for eid in sorted(actionable):
        if eid not in used:
            k._add_group(abs_state, [actionable[eid]], "")
    return abs_state


def _adopt_orphans(k: Knowledge, abs_state: AbstractState, s: UiState):
    # elements whose key has no group yet (e.g. disabled in the representative)
    for el in sorted(s.elements, key=lambda e: e.element_id):
        if _actionable(el, k.scroll_directions) and k.resolve_group(abs_state, el) is None:
            k._add_group(abs_state, [el], "")


def update_knowledge(k: Knowledge, s_prev: UiState | None, a_prev: UiAction | None,
                     s_new: UiState, grouper: Grouper | None = None) -> Knowledge:
    """Fold the step ``(s_prev, a_prev, s_new)`` into ``k`` and return it.

    Pass ``s_prev = a_prev = None`` for the first observation. Steps landing
    outside the app are traced and flag the action explored but touch neither
    the abstract states nor the graph. Restart and back are navigation-only.
    """
    if (s_prev is None) != (a_prev is None):
        raise ValueError("s_prev and a_prev must both be given or both be None")
    if k.app_package is None:
        k.app_package = s_new.source_app
    k.trace.append(TraceStep(s_prev, a_prev, s_new))

    abs_new = None
    if k.in_app(s_new):
        abs_new = classify_state(k, s_new)
        if abs_new is None:
            groups = grouper(s_new) if grouper is not None else ()
            abs_new = register_abstract_state(k, s_new, groups)
        else:
            _adopt_orphans(k, abs_new, s_new)
        abs_new.member_state_ids.append(s_new.state_id)
        abs_new.visit_count += 1
        k.state_index[s_new.state_id] = abs_new.abs_state_id

    if a_prev is None or a_prev.action_type in NAVIGATION_ONLY or not k.in_app(s_prev):
        return k

    abs_prev = k.abstract_of(s_prev)
    act = k.match_action(s_prev, a_prev)
    if abs_prev is None or act is None:
        raise ConsistencyError(f"action {a_prev} on state {s_prev.state_id} matches no abstract action")
    flag = (act.flag - {UNEXPLORED}) | {EXPLORED}
    if abs_new is not None and abs_new.abs_state_id == abs_prev.abs_state_id:
        flag |= {INEFFECTIVE}
    act.flag = frozenset(flag)
    act.execution_count += 1
    if a_prev.action_type == INPUT and a_prev.input_text is not None:
        act.input_text = a_prev.input_text
    if abs_new is not None:
        k.graph.add_edge(abs_prev.abs_state_id, act.abs_action_id, abs_new.abs_state_id)
    return k


def unexplored_actions(k: Knowledge, restrict_to: AbstractState | int | None = None) -> list[AbstractAction]:
    if isinstance(restrict_to, AbstractState):
        restrict_to = restrict_to.abs_state_id
    return [
        a for a in sorted(k.abstract_actions.values(), key=lambda a: a.abs_action_id)
        if a.unexplored and (restrict_to is None or a.abs_state_id == restrict_to)
    ]


def record_edge_failure(k: Knowledge, edge: Edge, threshold: int | None = None) -> Knowledge:
    """Count a failed traversal; at ``threshold`` failures the edge is removed."""
    threshold = k.edge_failure_threshold if threshold is None else threshold
    stats = k.graph.edges.get(edge)
    if stats is None:
        raise EdgeNotFound(edge)
    k.edge_events.append((len(k.trace), "failure", edge))
    stats.failures += 1
    if stats.failures >= threshold:
        k.graph.removed[edge] = k.graph.edges.pop(edge)
    return k


def record_edge_success(k: Knowledge, edge: Edge) -> None:
    stats = k.graph.edges.get(edge)
    if stats is not None:
        k.edge_events.append((len(k.trace), "success", edge))
        stats.successes += 1


# export / serialization

def _flag_list(flag) -> list[str]:
    order = (UNEXPLORED, EXPLORED, INEFFECTIVE)
    return [f for f in order if f in flag]


def export_graph(k: Knowledge) -> dict:
    nodes = [
        {"id": s.abs_state_id, "activity": s.activity, "visits": s.visit_count}
        for s in sorted(k.abstract_states.values(), key=lambda s: s.abs_state_id)
    ]
    edges = []
    for src, aid, dst in sorted(k.graph.edges):
        act = k.abstract_actions[aid]
        edges.append({
            "src": src, "dst": dst, "action_id": aid,
            "type": act.action_type if act.scroll_direction is None else f"scroll_{act.scroll_direction}",
            "flags": _flag_list(act.flag), "function": act.function,
        })
    return {"nodes": nodes, "edges": edges}


def export_graph_json(k: Knowledge) -> str:
    return json.dumps(export_graph(k), sort_keys=True, indent=1) + "\n"


def export_dot(k: Knowledge) -> str:
    doc = export_graph(k)
    lines = ["digraph aig {", "  node [shape=box];"]
    for n in doc["nodes"]:
        lines.append(f'  s{n["id"]} [label="s{n["id"]}\\n{n["activity"]}\\nvisits={n["visits"]}"];')
    for e in doc["edges"]:
        style = ' style=dashed' if "ineffective" in e["flags"] else ""
        label = f'a{e["action_id"]} {e["type"]}'
        lines.append(f'  s{e["src"]} -> s{e["dst"]} [label="{label}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def knowledge_to_dict(k: Knowledge) -> dict:
    states = []
    for s in sorted(k.abstract_states.values(), key=lambda s: s.abs_state_id):
        states.append({
            "id": s.abs_state_id,
            "signature": s.signature.to_dict(),
            "members": list(s.member_state_ids),
            "visits": s.visit_count,
            "groups": list(s.group_ids),
            "representative": state_to_snapshot(s.representative_state),
        })
    groups = []
    for g in sorted(k.groups.values(), key=lambda g: g.group_id):
        slots = sorted([[key[0], key[1], sorted(key[2])], list(path)] for key, path in g.member_element_keys)
        groups.append({"id": g.group_id, "state": g.abs_state_id, "slots": slots, "function": g.function})
    actions = []
    for a in sorted(k.abstract_actions.values(), key=lambda a: a.abs_action_id):
        actions.append({
            "id": a.abs_action_id, "state": a.abs_state_id, "type": a.action_type,
            "direction": a.scroll_direction, "group": a.element_group.group_id,
            "flag": _flag_list(a.flag), "function": a.function,
            "executions": a.execution_count, "input_text": a.input_text,
        })

    def edge_rows(edges):
        return [[src, aid, dst, st.successes, st.failures] for (src, aid, dst), st in sorted(edges.items())]

    trace = []
    for step in k.trace:
        trace.append({
            "prev": None if step.prev is None else step.prev.state_id,
            "action": None if step.action is None else step.action.to_dict(),
            "state": state_to_snapshot(step.state),
        })
    return {
        "app_package": k.app_package,
        "edge_failure_threshold": k.edge_failure_threshold,
        "scroll_directions": list(k.scroll_directions),
        "initial_state": k.initial_state_id,
        "register_calls": k.register_calls,
        "abstract_states": states,
        "groups": groups,
        "abstract_actions": actions,
        "graph": {
            "nodes": sorted(k.graph.nodes),
            "edges": edge_rows(k.graph.edges),
            "removed": edge_rows(k.graph.removed),
        },
        "trace": trace,
    }


def knowledge_from_dict(d: dict) -> Knowledge:
    k = Knowledge(d["app_package"], edge_failure_threshold=d["edge_failure_threshold"],
                  scroll_directions=d["scroll_directions"])
    k.initial_state_id = d["initial_state"]
    k.register_calls = d["register_calls"]
    for row in d["abstract_states"]:
        s = AbstractState(row["id"], StateSignature.from_dict(row["signature"]),
                          parse_snapshot(row["representative"]), list(row["members"]),
                          row["visits"], list(row["groups"]))
        k.abstract_states[s.abs_state_id] = s
        k._by_signature[s.signature] = s.abs_state_id
        for sid in s.member_state_ids:
            k.state_index[sid] = s.abs_state_id
    for row in d["groups"]:
        slots = frozenset(((c, r, frozenset(a)), tuple(path)) for (c, r, a), path in row["slots"])
        g = ElementGroup(row["id"], row["state"], slots, row["function"])
        k.groups[g.group_id] = g
        index = k._slot_index.setdefault(g.abs_state_id, {})
        for slot in sorted(slots, key=repr):
            index.setdefault(slot, g.group_id)
    for row in d["abstract_actions"]:
        a = AbstractAction(row["id"], row["state"], row["type"], k.groups[row["group"]],
                           frozenset(row["flag"]), row["function"], row["executions"],
                           row["direction"], row["input_text"])
        k.abstract_actions[a.abs_action_id] = a
        k._action_index[(a.element_group.group_id, a.action_type, a.scroll_direction)] = a.abs_action_id
    k.graph.nodes = set(d["graph"]["nodes"])
    for src, aid, dst, ok, bad in d["graph"]["edges"]:
        k.graph.edges[(src, aid, dst)] = EdgeStats(ok, bad)
    for src, aid, dst, ok, bad in d["graph"]["removed"]:
        k.graph.removed[(src, aid, dst)] = EdgeStats(ok, bad)
    states: dict[str, UiState] = {}
    for row in d["trace"]:
        state = parse_snapshot(row["state"])
        prev = None if row["prev"] is None else states[row["prev"]]
        action = None if row["action"] is None else UiAction.from_dict(row["action"])
        states[state.state_id] = state
        k.trace.append(TraceStep(prev, action, state))
    return k


def load_knowledge(text: str) -> Knowledge:
    return knowledge_from_dict(json.loads(text))
