"""Reading and writing run directories.

Layout::

    config.json       flags and app metadata echoed at start
    run.json          step counts, stop reason, coverage summary
    trace.jsonl       one record per trace step, with full snapshots
    knowledge.json    the knowledge document
    graph.json        interaction-graph export (graph.dot alongside)
    coverage.csv      step, seconds, activities, tokens, queries
    ledger.jsonl      one record per LLM query attempt
    groupings.jsonl   raw grouping responses, for replay

Every file is written to a temporary name and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from .explorer import Explorer
from .knowledge import Knowledge, export_dot, export_graph_json, record_edge_failure, record_edge_success, \
    update_knowledge
from .llm import RecordedGrouper
from .ui import UiAction, parse_snapshot, state_to_snapshot


class RunDataError(Exception):
    """A run directory is incomplete or corrupt."""


def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def trace_jsonl(k: Knowledge, modes: list[str]) -> str:
    events: dict[int, list] = {}
    for trace_len, kind, edge in k.edge_events:
        events.setdefault(trace_len, []).append([kind, list(edge)])
    lines = []
    for i, step in enumerate(k.trace):
        lines.append(json.dumps({
            "step": i,
            "mode": modes[i] if i < len(modes) else "",
            "prev": None if step.prev is None else step.prev.state_id,
            "action": None if step.action is None else step.action.to_dict(),
            "state": state_to_snapshot(step.state),
            "edge_events": events.get(i + 1, []),
        }, sort_keys=True))
    return "\n".join(lines) + "\n"


def coverage_csv(explorer: Explorer) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "seconds", "activities", "tokens", "queries"])
    for e in explorer.coverage.log:
        w.writerow([e.step, f"{e.seconds:.4f}", e.activities, e.tokens, e.queries])
    return buf.getvalue()


def write_run(out: Path, explorer: Explorer, config_echo: dict, *, complete: bool):
    k = explorer.knowledge
    atomic_write(out / "config.json", _dump(config_echo))
    atomic_write(out / "trace.jsonl", trace_jsonl(k, explorer.modes))
    atomic_write(out / "knowledge.json", k.to_json())
    atomic_write(out / "graph.json", export_graph_json(k))
    atomic_write(out / "graph.dot", export_dot(k))
    atomic_write(out / "coverage.csv", coverage_csv(explorer))
    atomic_write(out / "ledger.jsonl", explorer.ledger.to_jsonl())
    atomic_write(out / "groupings.jsonl",
                 "".join(json.dumps(r, sort_keys=True) + "\n" for r in explorer.grouper.records))
    cov = explorer.coverage
    atomic_write(out / "run.json", _dump({
        "complete": complete,
        "steps": explorer.steps,
        "trace_records": len(k.trace),
        "stop_reason": explorer.stop_reason,
        "aborted": explorer.aborted,
        "declared_activities": list(cov.declared_activities),
        "reached_activities": sorted(cov.reached_activities),
        "queries": explorer.ledger.query_count,
        "input_tokens": explorer.ledger.input_tokens,
        "output_tokens": explorer.ledger.output_tokens,
        "abstract_states": len(k.abstract_states),
        "abstract_actions": len(k.abstract_actions),
    }))


def read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise RunDataError(f"missing {path.name}") from None
    except json.JSONDecodeError as exc:
        raise RunDataError(f"{path.name} is not valid JSON: {exc}") from None


def read_jsonl(path: Path) -> list[dict]:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise RunDataError(f"missing {path.name}") from None
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            raise RunDataError(f"{path.name}:{n} is not valid JSON (truncated?)") from None
    return rows


def replay_trace(records: list[dict], grouping_records: list[dict], *, app_package: str,
                 edge_failure_threshold: int, scroll_directions=("up", "down")) -> Knowledge:
    """Rebuild knowledge from trace records and recorded grouping responses."""
    if not records:
        raise RunDataError("trace is empty")
    grouper = RecordedGrouper(grouping_records)
    k = Knowledge(app_package, edge_failure_threshold=edge_failure_threshold,
                  scroll_directions=scroll_directions)
    states = {}
    for i, rec in enumerate(records):
        if rec.get("step") != i:
            raise RunDataError(f"trace record {i} has step {rec.get('step')!r}")
        try:
            state = parse_snapshot(rec["state"])
            action = None if rec["action"] is None else UiAction.from_dict(rec["action"])
            prev = None if rec["prev"] is None else states[rec["prev"]]
        except (KeyError, ValueError) as exc:
            raise RunDataError(f"trace record {i} is malformed: {exc}") from None
        states[state.state_id] = state
        update_knowledge(k, prev, action, state, grouper)
        for kind, edge in rec.get("edge_events", []):
            edge = tuple(edge)
            if kind == "failure":
                record_edge_failure(k, edge)
            else:
                record_edge_success(k, edge)
    return k
