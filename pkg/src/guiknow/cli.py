"""Command-line entry points: ``explore``, ``report`` and ``replay``.

Exit codes: 0 success, 1 replay mismatch, 2 aborted run, 64 usage error,
65 bad or incomplete input data.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from .explorer import Explorer, ExplorerConfig
from .knowledge import KnowledgeError
from .llm import API_KEY_ENV, HeuristicBackend, RemoteBackend, TokenLedger
from .rundir import RunDataError, atomic_write, read_json, read_jsonl, replay_trace, write_run
from .sim import MockEnv, SpecValidationError, load_app

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_ABORTED = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65

log = logging.getLogger("guiknow")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="guiknow", description="Knowledge-guided GUI exploration of mock apps.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("explore", help="explore an app and write a run directory")
    ex.add_argument("--app", required=True, help="mock app spec path or bundled fixture name")
    ex.add_argument("--backend", choices=("heuristic", "remote"), default="heuristic")
    ex.add_argument("--base-url", help="remote backend base URL")
    ex.add_argument("--model", default="gpt-3.5-turbo", help="remote backend model name")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--env-seed", type=int, help="mock app seed (defaults to --seed)")
    ex.add_argument("--max-steps", type=int, default=2000)
    ex.add_argument("--max-seconds", type=float)
    ex.add_argument("--out", default="run", help="run directory")
    ex.add_argument("--log-llm", action="store_true", help="log LLM request/response bodies")
    ex.add_argument("--nav-alternatives", type=int, default=3)
    ex.add_argument("--edge-failure-threshold", type=int, default=2)
    ex.add_argument("--revisit", action="store_true",
                    help="keep re-running explored actions until the budget is spent")

    rep = sub.add_parser("report", help="coverage and token tables for a run")
    rep.add_argument("run_dir")

    rp = sub.add_parser("replay", help="rebuild knowledge from a trace and compare")
    rp.add_argument("trace", help="run directory or its trace.jsonl")
    rp.add_argument("--groupings", help="alternative groupings.jsonl")
    rp.add_argument("--out", help="where to write the rebuilt knowledge document")
    return parser


class _LoggingBackend:
    def __init__(self, inner, log_dir: Path):
        self.inner = inner
        self.log_dir = log_dir
        self.n = 0

    def complete(self, prompt, *, metadata=None, timeout=30.0):
        self.n += 1
        self.log_dir.mkdir(parents=True, exist_ok=True)
        (self.log_dir / f"{self.n:05d}-request.txt").write_text(prompt)
        reply = self.inner.complete(prompt, metadata=metadata, timeout=timeout)
        (self.log_dir / f"{self.n:05d}-response.txt").write_text(reply)
        return reply


def cmd_explore(args) -> int:
    try:
        spec = load_app(args.app)
    except FileNotFoundError:
        raise UsageError(f"no such app spec: {args.app}")
    except (SpecValidationError, ValueError) as exc:
        print(f"invalid app spec: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    out = Path(args.out)
    if args.backend == "remote":
        if not args.base_url:
            raise UsageError("--backend remote needs --base-url")
        backend = RemoteBackend(args.base_url, args.model, log_dir=out / "llm" if args.log_llm else None)
    else:
        backend = HeuristicBackend()
        if args.log_llm:
            backend = _LoggingBackend(backend, out / "llm")
    try:
        config = ExplorerConfig(
            max_steps=args.max_steps, max_wall_time=args.max_seconds, rng_seed=args.seed,
            max_nav_alternatives=args.nav_alternatives, edge_failure_threshold=args.edge_failure_threshold,
            on_exhausted="revisit" if args.revisit else "stop",
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    env_seed = args.seed if args.env_seed is None else args.env_seed
    echo = {
        "app": args.app, "app_name": spec.app_name, "package": spec.package,
        "backend": args.backend, "model": args.model if args.backend == "remote" else None,
        "base_url": args.base_url, "seed": args.seed, "env_seed": env_seed,
        "max_steps": args.max_steps, "max_seconds": args.max_seconds,
        "nav_alternatives": args.nav_alternatives, "edge_failure_threshold": args.edge_failure_threshold,
        "on_exhausted": config.on_exhausted, "api_key_env": API_KEY_ENV,
    }
    explorer = Explorer(MockEnv(spec, env_seed), config, backend,
                        on_checkpoint=lambda ex: write_run(out, ex, echo, complete=False))
    result = explorer.run()
    write_run(out, explorer, echo, complete=True)
    cov = result.coverage
    n_decl = len(cov.declared_activities)
    pct = 100.0 * len(cov.reached_activities) / n_decl if n_decl else 0.0
    print(f"app: {spec.app_name} ({spec.package})")
    print(f"steps: {result.steps}  stop: {result.stop_reason}")
    print(f"coverage: {len(cov.reached_activities)}/{n_decl} activities ({pct:.1f}%)")
    print(f"abstract states: {len(result.knowledge.abstract_states)}  "
          f"abstract actions: {len(result.knowledge.abstract_actions)}")
    print(f"llm queries: {result.ledger.query_count}  input tokens: {result.ledger.input_tokens}  "
          f"output tokens: {result.ledger.output_tokens}")
    print(f"run directory: {out}")
    return EXIT_ABORTED if result.aborted else EXIT_OK


def _table(rows: list[list], header: list[str]) -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _sample(rows: list, n: int = 20) -> list:
    if len(rows) <= n:
        return rows
    stride = len(rows) / n
    picked = [rows[int(i * stride)] for i in range(n)]
    if picked[-1] is not rows[-1]:
        picked.append(rows[-1])
    return picked


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_report(args) -> int:
    run = Path(args.run_dir)
    meta = read_json(run / "run.json")
    if not meta.get("complete"):
        raise RunDataError("run is incomplete")
    try:
        with open(run / "coverage.csv", newline="") as fh:
            cov_rows = list(csv.DictReader(fh))
    except FileNotFoundError:
        raise RunDataError("missing coverage.csv") from None
    ledger = TokenLedger.from_jsonl((run / "ledger.jsonl").read_text()) if (run / "ledger.jsonl").exists() \
        else TokenLedger()
    n_decl = len(meta["declared_activities"]) or 1

    by_step, by_time, tokens = [], [], []
    for r in cov_rows:
        acts = int(r["activities"])
        share = f"{100.0 * acts / n_decl:.2f}"
        by_step.append([int(r["step"]), acts, share])
        by_time.append([r["seconds"], acts, share])
        tokens.append([int(r["step"]), int(r["tokens"]), int(r["queries"])])

    out = run / "report"
    atomic_write(out / "coverage_by_step.csv", _csv(by_step, ["step", "activities", "coverage_pct"]))
    atomic_write(out / "coverage_by_time.csv", _csv(by_time, ["seconds", "activities", "coverage_pct"]))
    atomic_write(out / "tokens_by_step.csv", _csv(tokens, ["step", "cumulative_tokens", "cumulative_queries"]))

    q = ledger.query_count
    summary_rows = [
        ["Number of queries", q],
        ["Input tokens per query", f"{ledger.input_tokens / q:.2f}" if q else "0.00"],
        ["Output tokens per query", f"{ledger.output_tokens / q:.2f}" if q else "0.00"],
        ["Grouping queries", ledger.count("grouping")],
        ["Input-generation queries", ledger.count("input")],
        ["Retries", ledger.retries],
        ["Total tokens", ledger.total_tokens],
        ["Steps", meta["steps"]],
        ["Activities reached", f"{len(meta['reached_activities'])}/{len(meta['declared_activities'])}"],
    ]
    summary = _table(summary_rows, ["metric", "value"])
    text = "\n\n".join([
        "Coverage by step\n" + _table(_sample(by_step), ["step", "activities", "coverage_pct"]),
        "Cumulative tokens by step\n" + _table(_sample(tokens), ["step", "tokens", "queries"]),
        "Query summary\n" + summary,
    ]) + "\n"
    atomic_write(out / "summary.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.trace)
    run = path if path.is_dir() else path.parent
    trace_path = path / "trace.jsonl" if path.is_dir() else path
    config = read_json(run / "config.json")
    meta = read_json(run / "run.json")
    records = read_jsonl(trace_path)
    if len(records) != meta["trace_records"]:
        raise RunDataError(f"trace has {len(records)} records, run.json expects {meta['trace_records']}")
    groupings = read_jsonl(Path(args.groupings) if args.groupings else run / "groupings.jsonl")
    original = (run / "knowledge.json").read_text()
    try:
        k = replay_trace(records, groupings, app_package=config["package"],
                         edge_failure_threshold=config["edge_failure_threshold"])
    except KnowledgeError as exc:
        print(f"replay diverged: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    rebuilt = k.to_json()
    atomic_write(Path(args.out) if args.out else run / "replay" / "knowledge.json", rebuilt)
    if rebuilt == original:
        print(f"replay matches ({len(records)} trace steps, {len(k.abstract_states)} abstract states)")
        return EXIT_OK
    a, b = original.splitlines(), rebuilt.splitlines()
    line = next((i for i, (x, y) in enumerate(zip(a, b)) if x != y), min(len(a), len(b)))
    print(f"replay mismatch at knowledge.json line {line + 1}", file=sys.stderr)
    return EXIT_MISMATCH


COMMANDS = {"explore": cmd_explore, "report": cmd_report, "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"guiknow {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunDataError as exc:
        print(f"guiknow {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATAERR


if __name__ == "__main__":
    sys.exit(main())
