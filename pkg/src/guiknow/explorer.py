"""Knowledge-guided exploration loop.

The loop picks unexplored abstract actions (current screen first, then
app-wide), walks the interaction graph to reach them when needed, and only
calls the LLM when a new abstract state is registered or a text field must
be filled.
"""

from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .knowledge import (
    AbstractAction,
    AbstractState,
    Knowledge,
    record_edge_failure,
    record_edge_success,
    unexplored_actions,
    update_knowledge,
)
from .llm import (
    DEFAULT_MAX_RETRIES,
    DEFAULT_TIMEOUT,
    Backend,
    HeuristicBackend,
    InputRequest,
    LlmGrouper,
    TokenLedger,
    generate_input_text,
)
from .sim import StaleTargetError
from .ui import BACK, INPUT, RESTART, UiAction, UiState, parse_snapshot, render_html

log = logging.getLogger(__name__)

EXPLORE = "explore"
NAVIGATE = "navigate"
REVISIT = "revisit"
RECOVER = "recover"
INIT = "init"


class Environment(Protocol):
    app_name: str
    package: str

    def observe(self) -> dict: ...

    def perform_action(self, a: UiAction) -> None: ...


class NavigationError(Exception):
    """No path to the target state, even after a restart."""


class OutOfAppError(Exception):
    """The app could not be brought back to the foreground."""


class ExplorationAborted(Exception):
    def __init__(self, message: str, knowledge: Knowledge, coverage: "CoverageTracker"):
        super().__init__(message)
        self.knowledge = knowledge
        self.coverage = coverage


@dataclass
class ExplorerConfig:
    max_steps: int = 2000
    max_wall_time: float | None = None
    rng_seed: int = 0
    max_nav_alternatives: int = 3
    edge_failure_threshold: int = 2
    restart_on_unreachable: bool = True
    out_of_app_policy: str = "auto-return"
    # "stop" ends the run once nothing is left to explore; "revisit" keeps
    # re-running explored actions until the budget is spent
    on_exhausted: str = "stop"
    max_retries: int = DEFAULT_MAX_RETRIES
    llm_timeout: float = DEFAULT_TIMEOUT
    checkpoint_every: int = 50

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.max_wall_time is not None and self.max_wall_time <= 0:
            raise ValueError("max_wall_time must be positive")
        if self.max_nav_alternatives < 1 or self.edge_failure_threshold < 1:
            raise ValueError("navigation budgets must be positive")
        if self.on_exhausted not in ("stop", "revisit"):
            raise ValueError(f"unknown on_exhausted policy {self.on_exhausted!r}")


@dataclass(frozen=True)
class NavStep:
    expected_state: int
    action_id: int | None  # None means restart the app
    expected_next: int


@dataclass
class NavigationPlan:
    steps: list[NavStep]
    target_action: int
    attempts_used: int = 0

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class CoverageEntry:
    step: int
    seconds: float
    activities: int
    tokens: int
    queries: int


@dataclass
class CoverageTracker:
    declared_activities: tuple[str, ...] = ()
    reached_activities: set[str] = field(default_factory=set)
    log: list[CoverageEntry] = field(default_factory=list)

    def reach(self, activity: str):
        if not self.declared_activities or activity in self.declared_activities:
            self.reached_activities.add(activity)

    def record(self, step: int, seconds: float, ledger: TokenLedger):
        self.log.append(CoverageEntry(step, seconds, len(self.reached_activities),
                                      ledger.total_tokens, ledger.query_count))

    @property
    def ratio(self) -> float:
        if not self.declared_activities:
            return 0.0
        return len(self.reached_activities) / len(self.declared_activities)

    def steps_to(self, n_activities: int) -> int | None:
        for entry in self.log:
            if entry.activities >= n_activities:
                return entry.step
        return None


def _state_id(s: AbstractState | int) -> int:
    return s.abs_state_id if isinstance(s, AbstractState) else s


def select_explore_action(k: Knowledge, current: AbstractState | int | None, rng: random.Random,
                          exclude=frozenset()) -> AbstractAction | None:
    """Random unexplored action on the current state, else anywhere in the app."""
    pool: list[AbstractAction] = []
    if current is not None:
        pool = [a for a in unexplored_actions(k, _state_id(current)) if a.abs_action_id not in exclude]
    if not pool:
        pool = [a for a in unexplored_actions(k) if a.abs_action_id not in exclude]
    if not pool:
        return None
    if len(pool) == 1:
        return pool[0]
    return rng.choice(pool)


def find_navigate_path(k: Knowledge, source: AbstractState | int, target_action: AbstractAction, *,
                       restart_on_unreachable: bool = True) -> NavigationPlan:
    """Shortest known route from ``source`` to the state owning ``target_action``.

    Falls back to restarting the app and routing from the initial state.
    Raises :class:`NavigationError` if neither works.
    """
    src = _state_id(source)
    dst = target_action.abs_state_id
    if src == dst:
        raise ValueError("target action is on the source state already")
    path = k.graph.shortest_path(src, dst)
    if path is not None:
        return NavigationPlan([NavStep(u, a, v) for u, a, v in path], target_action.abs_action_id)
    init = k.initial_state_id
    if restart_on_unreachable and init is not None and init != src:
        tail = k.graph.shortest_path(init, dst)
        if tail is not None:
            steps = [NavStep(src, None, init)] + [NavStep(u, a, v) for u, a, v in tail]
            return NavigationPlan(steps, target_action.abs_action_id)
    raise NavigationError(f"state s{dst} unreachable from s{src}")


def repair_navigation(k: Knowledge, plan: NavigationPlan, observed: AbstractState | int, *,
                      max_alternatives: int = 3, restart_on_unreachable: bool = True) -> NavigationPlan | None:
    """Handle landing on ``observed`` instead of the head step's expectation.

    The head step's edge is charged a failure. If ``observed`` is already on
    the remaining route the plan is cut down to that suffix; otherwise a new
    route is computed while attempts remain. ``None`` means give up.
    """
    obs = _state_id(observed)
    head = plan.steps[0]
    if head.action_id is not None:
        edge = (head.expected_state, head.action_id, head.expected_next)
        if edge in k.graph:
            record_edge_failure(k, edge)
    plan.attempts_used += 1
    remaining = plan.steps[1:]
    for i, st in enumerate(remaining):
        if st.expected_state == obs:
            return NavigationPlan(remaining[i:], plan.target_action, plan.attempts_used)
    target = k.abstract_actions[plan.target_action]
    if target.abs_state_id == obs:
        return NavigationPlan([], plan.target_action, plan.attempts_used)
    if plan.attempts_used >= max_alternatives:
        return None
    try:
        fresh = find_navigate_path(k, obs, target, restart_on_unreachable=restart_on_unreachable)
    except NavigationError:
        return None
    fresh.attempts_used = plan.attempts_used
    return fresh


def handle_out_of_app(env: Environment, k: Knowledge, state: UiState, grouper=None) -> UiState:
    """Bring the app back to the foreground: back first, then restart.

    Each recovery step goes into the knowledge trace. Raises
    :class:`OutOfAppError` when even a restart leaves us outside.
    """
    if k.in_app(state):
        return state
    for action in (UiAction(BACK), UiAction(RESTART)):
        env.perform_action(action)
        new = parse_snapshot(env.observe())
        update_knowledge(k, state, action, new, grouper)
        state = new
        if k.in_app(state):
            return state
    raise OutOfAppError(f"still outside the app in {state.activity}")


@dataclass
class ExplorationResult:
    knowledge: Knowledge
    coverage: CoverageTracker
    ledger: TokenLedger
    grouping_records: list[dict]
    modes: list[str]
    steps: int
    stop_reason: str
    aborted: bool = False
    abandoned: set[int] = field(default_factory=set)


class Explorer:
    """One exploration run over an environment."""

    def __init__(self, env: Environment, config: ExplorerConfig | None = None,
                 backend: Backend | None = None, *, app_name: str | None = None,
                 declared_activities=None,
                 on_checkpoint: Callable[["Explorer"], None] | None = None):
        self.env = env
        self.config = config or ExplorerConfig()
        self.backend = backend or HeuristicBackend()
        self.app_name = app_name or getattr(env, "app_name", "")
        self.rng = random.Random(self.config.rng_seed)
        self.ledger = TokenLedger()
        self.grouper = LlmGrouper(self.app_name, self.backend, self.ledger,
                                  max_retries=self.config.max_retries, timeout=self.config.llm_timeout)
        self.knowledge = Knowledge(getattr(env, "package", None),
                                   edge_failure_threshold=self.config.edge_failure_threshold)
        if declared_activities is None:
            declared_activities = getattr(env, "declared_activities", ())
        self.coverage = CoverageTracker(tuple(declared_activities))
        self.on_checkpoint = on_checkpoint
        self.modes: list[str] = []
        self.steps = 0
        self.abandoned: set[int] = set()
        self.stop_reason = ""
        self.aborted = False
        self._start = 0.0

    # helpers

    def _seconds(self) -> float:
        return time.monotonic() - self._start

    def _seen(self, s: UiState):
        if self.knowledge.in_app(s):
            self.coverage.reach(s.activity)

    def _log_new_steps(self, before: int, mode: str):
        for step in self.knowledge.trace[before:]:
            self.steps += 1
            self.modes.append(mode)
            self._seen(step.state)
            self.coverage.record(self.steps, self._seconds(), self.ledger)
            if self.on_checkpoint and self.steps % self.config.checkpoint_every == 0:
                self.on_checkpoint(self)

    def _perform(self, s: UiState, action: UiAction, mode: str) -> UiState:
        k = self.knowledge
        before = len(k.trace)
        try:
            self.env.perform_action(action)
        except StaleTargetError as exc:
            log.warning("stale target %s: %s", action, exc)
        new = parse_snapshot(self.env.observe())
        update_knowledge(k, s, action, new, self.grouper)
        self._log_new_steps(before, mode)
        if not k.in_app(new):
            before = len(k.trace)
            try:
                new = handle_out_of_app(self.env, k, new, self.grouper)
            finally:
                self._log_new_steps(before, RECOVER)
        return new

    def _choose(self, options: list[UiAction]) -> UiAction:
        return options[0] if len(options) == 1 else self.rng.choice(options)

    def _input_text(self, s: UiState, action: UiAction, abs_action: AbstractAction, fresh: bool) -> UiAction:
        if not fresh and abs_action.input_text is not None:
            return action.with_text(abs_action.input_text)
        el = s.element(action.element_id)
        request = InputRequest(self.app_name, render_html(s), el.element_id, el.hint)
        text = generate_input_text(request, self.backend, self.ledger,
                                   max_retries=self.config.max_retries, timeout=self.config.llm_timeout)
        return action.with_text(text)

    def _revisit_target(self, current: AbstractState | None) -> AbstractAction | None:
        k = self.knowledge
        usable = [a for a in sorted(k.abstract_actions.values(), key=lambda a: a.abs_action_id)
                  if not a.unexplored and not a.ineffective and a.abs_action_id not in self.abandoned]
        local = [a for a in usable if current is not None and a.abs_state_id == current.abs_state_id]
        pool = local or usable
        if not pool:
            return None
        return self.rng.choice(pool)

    def _budget_left(self) -> bool:
        if self.steps >= self.config.max_steps:
            return False
        if self.config.max_wall_time is not None and self._seconds() >= self.config.max_wall_time:
            return False
        return True

    # main loop

    def run(self) -> ExplorationResult:
        cfg = self.config
        k = self.knowledge
        self._start = time.monotonic()
        self.ledger.current_step = 0
        s = parse_snapshot(self.env.observe())
        if k.app_package is None:
            k.app_package = s.source_app
        update_knowledge(k, None, None, s, self.grouper)
        self.modes.append(INIT)
        self._seen(s)
        plan: NavigationPlan | None = None
        try:
            if not k.in_app(s):
                before = len(k.trace)
                try:
                    s = handle_out_of_app(self.env, k, s, self.grouper)
                finally:
                    self._log_new_steps(before, RECOVER)
            while True:
                if not self._budget_left():
                    self.stop_reason = "budget"
                    break
                self.ledger.current_step = self.steps + 1
                current = k.abstract_of(s)
                if plan is not None and plan.steps:
                    mode = NAVIGATE
                else:
                    plan = None
                    mode = EXPLORE
                    target = select_explore_action(k, current, self.rng, self.abandoned)
                    if target is None and cfg.on_exhausted == "revisit":
                        target = self._revisit_target(current)
                        mode = REVISIT
                    if target is None:
                        self.stop_reason = "exhausted"
                        break
                    options = k.concrete_actions(s, target)
                    if not options:
                        if current is None or target.abs_state_id == current.abs_state_id:
                            self.abandoned.add(target.abs_action_id)
                            continue
                        try:
                            plan = find_navigate_path(k, current, target,
                                                      restart_on_unreachable=cfg.restart_on_unreachable)
                        except NavigationError:
                            log.info("abandoning %s: unreachable", target.label())
                            self.abandoned.add(target.abs_action_id)
                            continue
                        mode = NAVIGATE
                    else:
                        action = self._choose(options)
                        if action.action_type == INPUT:
                            action = self._input_text(s, action, target, fresh=mode == EXPLORE)
                        s = self._perform(s, action, mode)
                        continue

                head = plan.steps[0]
                if head.action_id is None:
                    action = UiAction(RESTART)
                else:
                    abs_action = k.abstract_actions[head.action_id]
                    options = k.concrete_actions(s, abs_action)
                    if not options:
                        plan = repair_navigation(k, plan, current, max_alternatives=cfg.max_nav_alternatives,
                                                 restart_on_unreachable=cfg.restart_on_unreachable)
                        continue
                    action = self._choose(options)
                    if action.action_type == INPUT:
                        action = self._input_text(s, action, abs_action, fresh=False)
                s = self._perform(s, action, NAVIGATE)
                landed = k.abstract_of(s)
                if landed is not None and landed.abs_state_id == head.expected_next:
                    if head.action_id is not None:
                        record_edge_success(k, (head.expected_state, head.action_id, head.expected_next))
                    plan.steps.pop(0)
                else:
                    plan = repair_navigation(k, plan, landed if landed is not None else -1,
                                             max_alternatives=cfg.max_nav_alternatives,
                                             restart_on_unreachable=cfg.restart_on_unreachable)
        except OutOfAppError as exc:
            log.error("aborting run: %s", exc)
            self.stop_reason = "aborted"
            self.aborted = True
        if self.on_checkpoint:
            self.on_checkpoint(self)
        return self.result()

    def result(self) -> ExplorationResult:
        return ExplorationResult(self.knowledge, self.coverage, self.ledger, self.grouper.records,
                                 self.modes, self.steps, self.stop_reason, self.aborted, set(self.abandoned))


def explore_main(app, env: Environment, config: ExplorerConfig | None = None,
                 backend: Backend | None = None) -> tuple[Knowledge, CoverageTracker]:
    """Explore ``env`` until nothing is left to try or the budget runs out.

    ``app`` is the app name used in prompts. Raises
    :class:`ExplorationAborted` (carrying the partial knowledge and
    coverage) if the app cannot be recovered.
    """
    explorer = Explorer(env, config, backend, app_name=app)
    result = explorer.run()
    if result.aborted:
        raise ExplorationAborted(result.stop_reason, result.knowledge, result.coverage)
    return result.knowledge, result.coverage
