import json
import re
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import button, label, state
from guiknow.knowledge import Knowledge, update_knowledge
from guiknow.llm import (
    FALLBACK_INPUT,
    MAX_INPUT_LEN,
    BackendError,
    BackendExhausted,
    BackendTimeout,
    FormatError,
    GroupingRequest,
    HeuristicBackend,
    InputRequest,
    LlmGrouper,
    RecordedGrouper,
    RemoteBackend,
    ScriptedBackend,
    TokenLedger,
    build_grouping_prompt,
    build_input_prompt,
    count_tokens,
    generate_input_text,
    parse_grouping_response,
    parse_input_response,
    query_with_retry,
)
from guiknow.ui import render_html


def calc():
    return state("c", "Calculator", *[button(i, f"digit_{i}", str(i)) for i in range(10)],
                 button(10, "op_add", "+"), button(11, "op_equals", "="))


# prompts

def test_grouping_prompt_names_the_app_first():
    p = build_grouping_prompt(GroupingRequest("Calculator", "<p></p>", (1, 2)))
    assert "Calculator" in p.split("\n\n")[0]


def test_grouping_prompt_lists_ten_digit_buttons():
    s = state("c", "Calculator", *[button(i, f"digit_{i}", str(i)) for i in range(10)])
    p = build_grouping_prompt(GroupingRequest("Calculator", render_html(s), tuple(range(10))))
    assert len(re.findall(r"<button id=", p)) == 10


def test_prompts_are_deterministic():
    r = GroupingRequest("A", render_html(calc()), tuple(range(12)))
    assert build_grouping_prompt(r) == build_grouping_prompt(r)
    i = InputRequest("A", "<input id=\"e1\"></input>", 1, "Email")
    assert build_input_prompt(i) == build_input_prompt(i)
    assert 'e1' in build_input_prompt(i) and "Email" in build_input_prompt(i)


# parsing

def test_one_group_three_members():
    raw = 'Sure.\n{"groups": [{"members": ["e2", "e3", "e4"], "function": "digit buttons"}]}'
    g = parse_grouping_response(raw, [1, 2, 3, 4, 5])
    assert len(g.groups) == 1
    assert g.groups[0].member_element_ids == (2, 3, 4)
    assert g.groups[0].function == "digit buttons"


def test_unknown_id_drops_group():
    raw = json.dumps({"groups": [{"members": [2, 99]}, {"members": [3, 4]}]})
    g = parse_grouping_response(raw, [2, 3, 4])
    assert [x.member_element_ids for x in g.groups] == [(3, 4)]


def test_overlap_keeps_earlier_group():
    raw = json.dumps({"groups": [{"members": ["e1", "e2"]}, {"members": ["e2", "e3"]}, {"members": ["e4"]}]})
    g = parse_grouping_response(raw, [1, 2, 3, 4])
    assert [x.member_element_ids for x in g.groups] == [(1, 2), (4,)]


def test_prose_only_is_format_error():
    with pytest.raises(FormatError):
        parse_grouping_response("I think buttons 1 and 2 are the same.", [1, 2])


def test_object_without_groups_is_format_error():
    with pytest.raises(FormatError):
        parse_grouping_response('{"answer": 1}', [1])


def test_first_object_wins_after_broken_braces():
    raw = 'thinking {not json} then {"groups": [{"members": ["e1"]}]} and {"groups": []}'
    assert parse_grouping_response(raw, [1]).groups[0].member_element_ids == (1,)


@given(st.lists(st.lists(st.integers(0, 20), min_size=1, max_size=5), max_size=6),
       st.sets(st.integers(0, 20), max_size=15))
def test_parsed_groups_are_disjoint_and_valid(groups, candidates):
    raw = json.dumps({"groups": [{"members": [f"e{i}" for i in g]} for g in groups]})
    seen = set()
    for g in parse_grouping_response(raw, sorted(candidates)).groups:
        ids = set(g.member_element_ids)
        assert ids <= candidates
        assert not ids & seen
        seen |= ids


def test_input_response_forms():
    assert parse_input_response('{"input_text": "John Doe"}') == "John Doe"
    assert parse_input_response("  \n\"hello   there\"\n") == "hello there"
    assert len(parse_input_response(json.dumps({"input_text": "x" * 200}))) == MAX_INPUT_LEN
    with pytest.raises(FormatError):
        parse_input_response('{"input_text": ""}')
    with pytest.raises(FormatError):
        parse_input_response("   ")


# retries

def test_first_try_success():
    ledger = TokenLedger()
    out = query_with_retry("p", "grouping", ScriptedBackend(["ok"]), ledger)
    assert out == "ok" and ledger.query_count == 1 and ledger.retries == 0


def test_two_failures_then_success():
    ledger = TokenLedger()
    backend = ScriptedBackend([BackendTimeout("slow"), "garbage", '{"groups": []}'])
    out = query_with_retry("p", "grouping", backend, ledger, validate=lambda t: parse_grouping_response(t, []))
    assert out == '{"groups": []}'
    assert ledger.query_count == 3 and ledger.retries == 2
    assert [r.ok for r in ledger.records] == [False, False, True]


def test_always_malformed_exhausts_and_grouping_falls_back():
    ledger = TokenLedger()
    backend = ScriptedBackend(["no json here"])
    grouper = LlmGrouper("Calc", backend, ledger)
    assert grouper(calc()) == ()
    assert ledger.query_count == 3
    assert grouper.records == [{"state_id": "c", "response": None}]
    k = Knowledge("com.test.app")
    update_knowledge(k, None, None, calc(), LlmGrouper("Calc", ScriptedBackend(["nope"]), TokenLedger()))
    assert len(k.abstract_actions) == 12
    assert all(len(a.element_group.member_element_keys) == 1 for a in k.abstract_actions.values())


def test_exhaustion_raises_with_attempt_count():
    with pytest.raises(BackendExhausted) as info:
        query_with_retry("p", "input", ScriptedBackend([BackendError("down")]), TokenLedger(), max_retries=2)
    assert info.value.attempts == 2


def test_ledger_round_trip():
    ledger = TokenLedger()
    ledger.current_step = 4
    ledger.record("grouping", 10, 3, 0.5)
    ledger.record("input", 7, 2, 0.1, attempt=1, ok=False)
    again = TokenLedger.from_jsonl(ledger.to_jsonl())
    assert again.records == ledger.records
    assert (again.input_tokens, again.output_tokens, again.total_tokens) == (17, 5, 22)
    assert again.count("grouping") == 1 and again.retries == 1


# tokens

@pytest.mark.parametrize("text, n", [("", 0), ("abcdefgh", 2), ("abcdefghi", 3), ("x" * 2028, 507)])
def test_count_tokens(text, n):
    assert count_tokens(text) == n


@given(st.text())
def test_count_tokens_is_ceiling_of_quarter(text):
    n = count_tokens(text)
    assert 4 * n >= len(text) > 4 * (n - 1) or (n == 0 and text == "")


# input generation

def test_name_field_gets_a_human_name():
    text = generate_input_text(InputRequest("Contacts", "", 1, "Name"), HeuristicBackend(), TokenLedger())
    assert re.fullmatch(r"[A-Z][a-z]+ [A-Z][a-z]+", text)


def test_email_hint_gives_address():
    ledger = TokenLedger()
    text = generate_input_text(InputRequest("A", "", 1, "Email"), HeuristicBackend(), ledger)
    assert "@" in text
    assert ledger.count("input") == 1


def test_exhausted_backend_with_empty_hint_falls_back():
    ledger = TokenLedger()
    text = generate_input_text(InputRequest("A", "", 1, ""), ScriptedBackend([BackendError("x")]), ledger)
    assert text == FALLBACK_INPUT
    assert ledger.query_count == 3


@given(st.text(max_size=300))
def test_generated_text_is_one_short_line(reply):
    backend = ScriptedBackend([json.dumps({"input_text": reply})])
    text = generate_input_text(InputRequest("A", "", 1, "Phone"), backend, TokenLedger(), max_retries=1)
    assert text and "\n" not in text and len(text) <= MAX_INPUT_LEN


# groupers

def test_heuristic_grouping_merges_digits_only():
    ledger = TokenLedger()
    groups = LlmGrouper("Calculator", HeuristicBackend(), ledger)(calc())
    sizes = sorted(len(g.member_element_ids) for g in groups)
    assert sizes == [1, 1, 10]
    assert ledger.count("grouping") == 1


def test_heuristic_never_merges_blank_resource_ids():
    s = state("s", "M", button(1, "", "A"), button(2, "", "B"), label(0, "", "t"))
    groups = LlmGrouper("M", HeuristicBackend(), TokenLedger())(s)
    assert sorted(g.member_element_ids for g in groups) == [(1,), (2,)]


def test_recorded_grouper_replays_responses():
    live = LlmGrouper("Calculator", HeuristicBackend(), TokenLedger())
    first = live(calc())
    assert RecordedGrouper(live.records)(calc()) == first
    assert RecordedGrouper([{"state_id": "c", "response": None}])(calc()) == ()
    assert RecordedGrouper([])(calc()) == ()


def test_heuristic_backend_without_metadata():
    b = HeuristicBackend()
    assert json.loads(b.complete("fill input_text please")) == {"input_text": FALLBACK_INPUT}
    assert json.loads(b.complete("group these")) == {"groups": []}


# remote backend against a local server

class _Handler(BaseHTTPRequestHandler):
    replies = []
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((self.headers.get("Authorization"), body))
        status, payload = type(self).replies.pop(0)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(json.dumps(payload).encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.replies, _Handler.seen = [], []
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}/v1", _Handler
    httpd.shutdown()
    httpd.server_close()


def test_remote_backend_round_trip(server, tmp_path, monkeypatch):
    url, handler = server
    monkeypatch.setenv("GUIKNOW_API_KEY", "sekret")
    handler.replies.append((200, {"choices": [{"message": {"content": '{"input_text": "hi"}'}}]}))
    backend = RemoteBackend(url, "test-model", log_dir=tmp_path)
    assert backend.complete("prompt text", timeout=5) == '{"input_text": "hi"}'
    auth, body = handler.seen[0]
    assert auth == "Bearer sekret"
    assert body["model"] == "test-model"
    assert body["messages"][0]["content"] == "prompt text"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["00001-request.json", "00001-response.json"]


def test_remote_errors_are_backend_errors(server):
    url, handler = server
    handler.replies.extend([(500, {"error": "boom"}), (200, {"unexpected": True})])
    backend = RemoteBackend(url, "m", api_key="")
    with pytest.raises(BackendError):
        backend.complete("p", timeout=5)
    with pytest.raises(BackendError):
        backend.complete("p", timeout=5)
    assert handler.seen[0][0] is None


def test_remote_unreachable_counts_as_failed_attempts():
    ledger = TokenLedger()
    backend = RemoteBackend("http://127.0.0.1:9", "m", api_key="")
    text = generate_input_text(InputRequest("A", "", 1, "Email"), backend, ledger, timeout=2)
    assert "@" in text
    assert ledger.query_count == 3 and not any(r.ok for r in ledger.records)


def test_single_candidate_state_is_not_queried():
    ledger = TokenLedger()
    grouper = LlmGrouper("M", ScriptedBackend(["unused"]), ledger)
    assert grouper(state("s", "M", button(1, "ok"), label(0, "t", "Title"))) == ()
    assert ledger.query_count == 0 and grouper.records == []
