"""Prompting, response parsing, retries and token accounting for LLM backends.

A backend is anything with ``complete(prompt, *, metadata, timeout) -> str``.
:class:`HeuristicBackend` answers offline from the structured request carried
in ``metadata``; :class:`RemoteBackend` posts the prompt to a
chat-completions endpoint and ignores the metadata.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import socket
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .knowledge import GroupSpec
from .ui import UiState, admissible_types, render_html

log = logging.getLogger(__name__)

GROUPING = "grouping"
INPUT_GEN = "input"

DEFAULT_MAX_RETRIES = 3
DEFAULT_TIMEOUT = 30.0
MAX_INPUT_LEN = 64
FALLBACK_INPUT = "test input"
API_KEY_ENV = "GUIKNOW_API_KEY"


class FormatError(ValueError):
    """The response contains no usable structured answer."""


class BackendError(Exception):
    pass


class BackendTimeout(BackendError):
    pass


class BackendExhausted(BackendError):
    def __init__(self, purpose: str, attempts: int):
        self.purpose = purpose
        self.attempts = attempts
        super().__init__(f"{purpose} query failed after {attempts} attempts")


def count_tokens(text: str) -> int:
    """Approximate token count: one token per four characters, rounded up.

    This is deliberately crude; it tracks cost trends, not billing.
    """
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class GroupingRequest:
    app_name: str
    state_html: str
    candidate_element_ids: tuple[int, ...]


@dataclass(frozen=True)
class GroupingInstruction:
    groups: tuple[GroupSpec, ...] = ()


@dataclass(frozen=True)
class InputRequest:
    app_name: str
    state_html: str
    target_element_id: int
    field_hint: str = ""


@dataclass
class QueryRecord:
    purpose: str
    input_tokens: int
    output_tokens: int
    latency: float
    attempt: int = 0
    ok: bool = True
    step: int = 0


@dataclass
class TokenLedger:
    records: list[QueryRecord] = field(default_factory=list)
    input_tokens: int = 0
    output_tokens: int = 0
    current_step: int = 0

    def record(self, purpose: str, input_tokens: int, output_tokens: int, latency: float,
               attempt: int = 0, ok: bool = True) -> QueryRecord:
        rec = QueryRecord(purpose, input_tokens, output_tokens, latency, attempt, ok, self.current_step)
        self.records.append(rec)
        self.input_tokens += input_tokens
        self.output_tokens += output_tokens
        return rec

    @property
    def query_count(self) -> int:
        return len(self.records)

    @property
    def retries(self) -> int:
        return sum(1 for r in self.records if r.attempt > 0)

    @property
    def total_tokens(self) -> int:
        return self.input_tokens + self.output_tokens

    def count(self, purpose: str) -> int:
        return sum(1 for r in self.records if r.purpose == purpose)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "TokenLedger":
        ledger = cls()
        for line in text.splitlines():
            if line.strip():
                r = json.loads(line)
                ledger.current_step = r["step"]
                ledger.record(r["purpose"], r["input_tokens"], r["output_tokens"], r["latency"],
                              r["attempt"], r["ok"])
        return ledger


class Backend(Protocol):
    def complete(self, prompt: str, *, metadata: Mapping | None = None, timeout: float = DEFAULT_TIMEOUT) -> str:
        ...


# prompts

def build_grouping_prompt(r: GroupingRequest) -> str:
    ids = ", ".join(f"e{i}" for i in r.candidate_element_ids)
    return "\n".join([
        f'You are helping an automated tester explore the Android app "{r.app_name}".',
        "Your job is to find interactive UI elements on the current screen that do the same "
        "thing, so the tester can try one of them instead of all of them.",
        "",
        "Current screen (HTML):",
        "<screen>",
        r.state_html,
        "</screen>",
        f"Interactive elements: {ids}",
        "",
        "Reason it through first: say briefly what each interactive element is for, then "
        "decide which elements would lead to the same kind of screen or trigger the same "
        "feature with different data (list rows, digits, dates, similar links). Elements "
        "with a unique purpose stay on their own.",
        "",
        "Finish with exactly one JSON dict and nothing after it, shaped like:",
        '{"groups": [{"members": ["e1", "e2"], "function": "short description"}]}',
        "Use only the element ids listed above and put each id in at most one group.",
    ])


def build_input_prompt(r: InputRequest) -> str:
    return "\n".join([
        f'You are filling in a form while testing the Android app "{r.app_name}". '
        "Type what a real user would type so that the app accepts it.",
        "",
        "Current screen (HTML):",
        "<screen>",
        r.state_html,
        "</screen>",
        "",
        f'Text field to fill: e{r.target_element_id} (hint: "{r.field_hint}")',
        "",
        'Reply with one JSON dict: {"input_text": "..."}. Keep it on one line.',
    ])


# parsing

def _first_json_object(raw: str):
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", raw):
        try:
            obj, _ = decoder.raw_decode(raw, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise FormatError("no JSON object in response")


def _element_id(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        m = re.fullmatch(r"\s*e?(\d+)\s*", value)
        if m:
            return int(m.group(1))
    return None


def parse_grouping_response(raw: str, candidates: Sequence[int]) -> GroupingInstruction:
    """Extract a grouping instruction from a free-form response.

    Groups naming an unknown id are dropped, and a group overlapping an
    earlier accepted group is dropped as a whole.
    """
    obj = _first_json_object(raw)
    groups = obj.get("groups")
    if not isinstance(groups, list):
        raise FormatError('response object has no "groups" list')
    allowed = set(candidates)
    taken: set[int] = set()
    out = []
    for g in groups:
        if not isinstance(g, Mapping):
            continue
        members = g.get("members", g.get("elements", g.get("ids")))
        if not isinstance(members, list) or not members:
            continue
        ids = [_element_id(m) for m in members]
        if any(i is None or i not in allowed for i in ids):
            continue
        ids = list(dict.fromkeys(ids))
        if taken.intersection(ids):
            continue
        taken.update(ids)
        function = g.get("function", "")
        out.append(GroupSpec(tuple(ids), function if isinstance(function, str) else str(function)))
    return GroupingInstruction(tuple(out))


def clean_input_text(text: str) -> str:
    text = " ".join(text.split())
    return text[:MAX_INPUT_LEN].rstrip()


def parse_input_response(raw: str) -> str:
    try:
        obj = _first_json_object(raw)
    except FormatError:
        obj = None
    if obj is not None:
        value = obj.get("input_text", obj.get("text"))
        if isinstance(value, (str, int, float)) and not isinstance(value, bool):
            text = clean_input_text(str(value))
            if text:
                return text
        raise FormatError('response object has no usable "input_text"')
    for line in raw.splitlines():
        text = clean_input_text(line.strip().strip("\"'`"))
        if text:
            return text
    raise FormatError("empty response")


# querying

def query_with_retry(prompt: str, purpose: str, backend: Backend, ledger: TokenLedger, *,
                     validate: Callable[[str], object] | None = None,
                     metadata: Mapping | None = None,
                     max_retries: int = DEFAULT_MAX_RETRIES,
                     timeout: float = DEFAULT_TIMEOUT) -> str:
    """Query ``backend`` until a response passes ``validate``.

    The identical prompt is resent on every attempt and each attempt lands in
    the ledger. Raises :class:`BackendExhausted` once ``max_retries`` attempts
    have failed; timeouts and backend errors count as failed attempts.
    """
    in_tokens = count_tokens(prompt)
    for attempt in range(max_retries):
        start = time.perf_counter()
        try:
            raw = backend.complete(prompt, metadata=metadata, timeout=timeout)
        except BackendError as exc:
            log.warning("%s query attempt %d failed: %s", purpose, attempt + 1, exc)
            ledger.record(purpose, in_tokens, 0, time.perf_counter() - start, attempt, ok=False)
            continue
        latency = time.perf_counter() - start
        try:
            if validate is not None:
                validate(raw)
        except FormatError as exc:
            log.info("%s response attempt %d malformed: %s", purpose, attempt + 1, exc)
            ledger.record(purpose, in_tokens, count_tokens(raw), latency, attempt, ok=False)
            continue
        ledger.record(purpose, in_tokens, count_tokens(raw), latency, attempt, ok=True)
        return raw
    raise BackendExhausted(purpose, max_retries)


def grouping_candidates(s: UiState, scroll_directions=("up", "down")) -> list[int]:
    return [el.element_id for el in s.elements if admissible_types(el, scroll_directions)]


class LlmGrouper:
    """Grouper for :func:`guiknow.knowledge.update_knowledge` backed by an LLM.

    Every raw response (``None`` after exhaustion) is kept in ``records``
    keyed by state id so a run can be replayed offline.
    """

    def __init__(self, app_name: str, backend: Backend, ledger: TokenLedger, *,
                 max_retries: int = DEFAULT_MAX_RETRIES, timeout: float = DEFAULT_TIMEOUT):
        self.app_name = app_name
        self.backend = backend
        self.ledger = ledger
        self.max_retries = max_retries
        self.timeout = timeout
        self.records: list[dict] = []

    def __call__(self, s: UiState) -> tuple[GroupSpec, ...]:
        candidates = grouping_candidates(s)
        if len(candidates) < 2:
            # nothing to merge; the singleton fallback is the only possible answer
            return ()
        request = GroupingRequest(self.app_name, render_html(s), tuple(candidates))
        prompt = build_grouping_prompt(request)
        try:
            raw = query_with_retry(
                prompt, GROUPING, self.backend, self.ledger,
                validate=lambda t: parse_grouping_response(t, candidates),
                metadata={"purpose": GROUPING, "request": request, "state": s},
                max_retries=self.max_retries, timeout=self.timeout,
            )
        except BackendExhausted:
            log.warning("grouping exhausted for %s; using singleton groups", s.state_id)
            raw = None
        self.records.append({"state_id": s.state_id, "response": raw})
        if raw is None:
            return ()
        return parse_grouping_response(raw, candidates).groups


class RecordedGrouper:
    """Replays grouping responses captured by :class:`LlmGrouper`."""

    def __init__(self, records: Sequence[Mapping]):
        self.responses = {r["state_id"]: r["response"] for r in records}

    def __call__(self, s: UiState) -> tuple[GroupSpec, ...]:
        raw = self.responses.get(s.state_id)
        if raw is None:
            return ()
        try:
            return parse_grouping_response(raw, grouping_candidates(s)).groups
        except FormatError:
            return ()


def generate_input_text(r: InputRequest, backend: Backend, ledger: TokenLedger, *,
                        max_retries: int = DEFAULT_MAX_RETRIES, timeout: float = DEFAULT_TIMEOUT) -> str:
    prompt = build_input_prompt(r)
    try:
        raw = query_with_retry(
            prompt, INPUT_GEN, backend, ledger, validate=parse_input_response,
            metadata={"purpose": INPUT_GEN, "request": r},
            max_retries=max_retries, timeout=timeout,
        )
    except BackendExhausted:
        return heuristic_input_text(r.field_hint)
    return parse_input_response(raw)


# heuristic backend

_INPUT_TABLE = (
    (("mail",), "john.doe@example.com"),
    (("phone", "mobile", "tel"), "+1 555 010 2030"),
    (("password", "passcode"), "Passw0rd!2024"),
    (("birth", "date"), "2024-05-17"),
    (("address", "street"), "123 Main Street"),
    (("url", "website", "link"), "https://example.com"),
    (("name", "contact", "user"), "John Doe"),
    (("search", "query", "find"), "weather"),
    (("amount", "price", "age", "number", "count", "quantity"), "42"),
    (("title", "subject"), "Weekly meeting notes"),
    (("note", "message", "comment", "description", "body"), "Remember to buy milk"),
)


def heuristic_input_text(hint: str) -> str:
    lowered = hint.lower()
    for keywords, text in _INPUT_TABLE:
        if any(k in lowered for k in keywords):
            return text
    return FALLBACK_INPUT


def _rid_stem(resource_id: str) -> str:
    return re.sub(r"[_\-]?\d+$", "", resource_id)


def heuristic_groups(s: UiState, candidates: Sequence[int]) -> list[dict]:
    """Group candidates by (class, resource-id stem, affordances).

    Elements with no resource id are never merged.
    """
    buckets: dict[tuple, list[int]] = {}
    order = []
    for el in s.elements:
        if el.element_id not in candidates:
            continue
        if el.resource_id:
            key = (el.class_name, _rid_stem(el.resource_id), el.affordances)
        else:
            key = ("#", el.element_id)
        if key not in buckets:
            buckets[key] = []
            order.append(key)
        buckets[key].append(el.element_id)
    groups = []
    for key in order:
        ids = buckets[key]
        if key[0] == "#":
            el = s.element(ids[0])
            function = f"{el.hint or el.class_name.rsplit('.', 1)[-1]}"
        else:
            function = key[1] if len(ids) == 1 else f"one of {len(ids)} {key[1]} items"
        groups.append({"members": [f"e{i}" for i in ids], "function": function})
    return groups


class HeuristicBackend:
    """Deterministic offline stand-in for an LLM."""

    def complete(self, prompt: str, *, metadata: Mapping | None = None, timeout: float = DEFAULT_TIMEOUT) -> str:
        metadata = metadata or {}
        purpose = metadata.get("purpose")
        request = metadata.get("request")
        if purpose == GROUPING and isinstance(request, GroupingRequest) and "state" in metadata:
            groups = heuristic_groups(metadata["state"], request.candidate_element_ids)
            return ("Elements sharing a resource-id stem do the same thing.\n"
                    + json.dumps({"groups": groups}))
        if purpose == INPUT_GEN and isinstance(request, InputRequest):
            return json.dumps({"input_text": heuristic_input_text(request.field_hint)})
        if "input_text" in prompt:
            return json.dumps({"input_text": FALLBACK_INPUT})
        return json.dumps({"groups": []})


class ScriptedBackend:
    """Backend replaying a fixed script of responses; exceptions in the
    script are raised instead of returned. Useful for tests."""

    def __init__(self, script: Sequence, *, repeat_last: bool = True):
        self.script = list(script)
        self.repeat_last = repeat_last
        self.calls: list[str] = []

    def complete(self, prompt: str, *, metadata: Mapping | None = None, timeout: float = DEFAULT_TIMEOUT) -> str:
        self.calls.append(prompt)
        idx = len(self.calls) - 1
        if idx >= len(self.script):
            if not self.repeat_last or not self.script:
                raise BackendError("script exhausted")
            idx = len(self.script) - 1
        item = self.script[idx]
        if isinstance(item, BaseException):
            raise item
        if callable(item):
            return item(prompt, metadata)
        return item


class RemoteBackend:
    """Chat-completions-style HTTP backend.

    The API key is read from ``GUIKNOW_API_KEY`` unless given. When
    ``log_dir`` is set, request and response bodies are written there
    verbatim, one numbered pair per call.
    """

    def __init__(self, base_url: str, model: str, *, api_key: str | None = None,
                 log_dir: str | os.PathLike | None = None, temperature: float = 0.0):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.log_dir = Path(log_dir) if log_dir else None
        self.temperature = temperature
        self._n = 0

    def _log(self, suffix: str, body: bytes):
        if self.log_dir is None:
            return
        self.log_dir.mkdir(parents=True, exist_ok=True)
        (self.log_dir / f"{self._n:05d}-{suffix}.json").write_bytes(body)

    def complete(self, prompt: str, *, metadata: Mapping | None = None, timeout: float = DEFAULT_TIMEOUT) -> str:
        self._n += 1
        body = json.dumps({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }).encode()
        self._log("request", body)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                payload = resp.read()
        except (socket.timeout, TimeoutError) as exc:
            raise BackendTimeout(str(exc)) from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                raise BackendTimeout(str(exc)) from exc
            raise BackendError(str(exc)) from exc
        self._log("response", payload)
        try:
            data = json.loads(payload)
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected response body: {exc}") from exc
