import json
import socket
import asyncio
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from codeserve.backends.base import UnknownInstruction
from codeserve.backends.oracle import OracleBackend
from codeserve.config import ConfigError, EngineConfig
from codeserve.context.packer import CURSOR_MARKER
from codeserve.harness.clock import AsyncioClock, ClockError, VirtualClock
from codeserve.harness.engine import InvalidAction
from codeserve.harness.replay import InvalidTrace, make_engine, replay, replay_wall_clock
from codeserve.harness.service import BindError, EngineService, ProtocolSession, parse_listen
from codeserve.harness.trace import TraceParseError, parse_trace
from codeserve.metrics.models import ReplayRun
from codeserve.session.documents import EditorEvent

GROUND_TRUTH = "result = compute_total(values)\n"

BEFORE = """import math
def total(num1, num2):
    result = abc + num2
    return result
"""

AFTER = """import math
def total(num1, num2):
    result = num1 + num2
    return result
"""


def trace_lines(events):
    return [json.dumps(e) for e in events]


def forward_typing(chars=20, char_ms=50):
    """Open an empty file and type GROUND_TRUTH one character at a time,
    asking for a completion before the first keystroke and after each one."""
    events = [
        {"ts": 0, "kind": "open", "file": "main.py", "content": ""},
        {"ts": 0, "kind": "request", "id": "r0"},
    ]
    for k in range(1, chars + 1):
        events.append({"ts": k * char_ms, "kind": "insert", "file": "main.py", "text": GROUND_TRUTH[k - 1]})
        events.append({"ts": k * char_ms, "kind": "request", "id": f"r{k}"})
    return parse_trace(trace_lines(events))


INSTRUCTION = "use num1 to 3 instead of abc"


def oracle(**kwargs):
    kwargs.setdefault("ground_truth", {"main.py": GROUND_TRUTH})
    kwargs.setdefault("latency_ms", 200)
    return OracleBackend(**kwargs)


class RecordingBackend(OracleBackend):
    """Oracle that keeps the prompt of every completion it answers."""

    def __init__(self, **kwargs):
        kwargs.setdefault("latency_ms", 200)
        super().__init__(**kwargs)
        self.prompts = {}

    def complete(self, request, bundle=None):
        self.prompts[request.request_id] = bundle
        return super().complete(request, bundle)


def transform_trace(*tail):
    events = [
        {"ts": 0, "kind": "open", "file": "total.py", "content": BEFORE},
        {"ts": 10, "kind": "transform", "file": "total.py", "instruction": INSTRUCTION, "id": "t"},
    ]
    return parse_trace(trace_lines(events + list(tail)))


class VirtualClockTests(SimpleTestCase):

    def test_timers_fire_in_order(self):
        clock = VirtualClock()
        fired = []
        clock.call_later(200, lambda: fired.append(("b", clock.now())))
        clock.call_later(100, lambda: fired.append(("a", clock.now())))
        clock.call_later(200, lambda: fired.append(("c", clock.now())))
        clock.advance_to(150)
        self.assertEqual(fired, [("a", 100)])
        self.assertEqual(clock.now(), 150)
        clock.advance_to(200)
        self.assertEqual(fired, [("a", 100), ("b", 200), ("c", 200)])

    def test_time_only_advances(self):
        clock = VirtualClock()
        clock.advance_to(10)
        with self.assertRaises(ClockError):
            clock.advance_to(5)

    def test_drain_runs_chained_timers(self):
        clock = VirtualClock()
        fired = []
        clock.call_later(10, lambda: clock.call_later(10, lambda: fired.append(clock.now())))
        clock.drain()
        self.assertEqual(fired, [20])
        self.assertEqual(clock.pending, 0)


class TraceTests(SimpleTestCase):

    def test_parse(self):
        events = parse_trace([
            '{"ts": 0, "kind": "open", "file": "a.py", "content": "x"}',
            '',
            '{"ts": 5, "kind": "paste", "file": "a.py", "text": "yy", "full_file": true}',
            '{"ts": 5, "kind": "transform", "file": "a.py", "instruction": "go", "selection": [0, 1]}',
        ])
        self.assertEqual([e.kind for e in events], ["open", "paste", "transform"])
        self.assertTrue(events[1].full_file)
        self.assertEqual(events[1].line, 3)
        self.assertEqual(events[2].selection, (0, 1))
        self.assertEqual(events[1].to_editor_event().kind, "paste")

    def test_errors(self):
        bad = [
            '{"ts": 0, "kind": "open"',
            '{"ts": 0, "kind": "type", "file": "a.py"}',
            '{"ts": 0, "kind": "insert", "file": "a.py"}',
            '{"ts": 0, "kind": "delete", "file": "a.py", "count": true}',
            '{"ts": -1, "kind": "request"}',
            '{"ts": 0, "kind": "accept", "id": "r1", "text": "x"}',
            '{"ts": 0, "kind": "transform", "file": "a", "instruction": "i", "selection": [3, 1]}',
        ]
        for line in bad:
            with self.assertRaises(TraceParseError, msg=line):
                parse_trace([line])

    def test_timestamps_must_not_decrease(self):
        with self.assertRaises(TraceParseError):
            parse_trace(['{"ts": 10, "kind": "request"}', '{"ts": 5, "kind": "request"}'])


class ReplayTests(SimpleTestCase):

    def test_forward_typing_is_served_from_cache(self):
        engine = replay(forward_typing(20), EngineConfig(), backend=oracle())
        report = engine.report()

        # r0 and r1 reach the model; r2 and r3 wait in the queue until r0's
        # answer at 200 ms, and everything after is adapted from it
        self.assertEqual(engine.outcomes["r0"].served_from, "model")
        self.assertEqual(engine.outcomes["r1"].served_from, "model")
        for k in range(2, 21):
            self.assertEqual(engine.outcomes[f"r{k}"].served_from, "cache", f"r{k}")
        self.assertEqual(engine.outcomes["r5"].text, GROUND_TRUTH[5:])

        self.assertEqual(report.cache_hit_rate, 19 / 21)
        self.assertGreaterEqual(report.cache_hit_rate, 0.35)
        self.assertEqual(report.counts["requests"], 21)
        self.assertEqual(report.counts["served_from_model"], 2)

    def test_empty_trace(self):
        report = replay([], EngineConfig()).report()
        self.assertEqual(report.fcml, 0)
        self.assertEqual(report.cache_hit_rate, 0)
        self.assertEqual(report.latency_p90_ms, 0)
        self.assertTrue(all(v == 0 for v in report.counts.values()))

    def test_replay_is_deterministic(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "main.py", "content": "res"},
            {"ts": 0, "kind": "request", "id": "a"},
            {"ts": 10, "kind": "request", "id": "b"},
            {"ts": 20, "kind": "request", "id": "c"},
            {"ts": 30, "kind": "cancel", "id": "c"},
            {"ts": 400, "kind": "accept", "id": "a"},
            {"ts": 450, "kind": "paste", "file": "main.py", "text": "\n# done\n"},
            {"ts": 460, "kind": "request"},
        ]))
        first = replay(events, EngineConfig(), backend=oracle(fail_rate=2)).report().to_json()
        second = replay(events, EngineConfig(), backend=oracle(fail_rate=2)).report().to_json()
        self.assertEqual(first, second)

        counts = json.loads(first)["counts"]
        self.assertEqual(counts["failed"], 1)
        self.assertEqual(counts["cancelled"], 1)
        self.assertEqual(counts["accepted"], 1)

    def test_cancelled_request_is_never_shown(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "main.py", "content": "res"},
            {"ts": 0, "kind": "request", "id": "a"},
            {"ts": 100, "kind": "cancel", "id": "a"},
        ]))
        engine = replay(events, EngineConfig(), backend=oracle())
        self.assertEqual(engine.outcomes["a"].status, "cancelled")
        self.assertEqual(engine.report().counts["shown"], 0)
        # the answer still lands in the streak cache
        self.assertEqual(engine.scheduler.cache[0].predicted_text, GROUND_TRUTH)

    def test_accept_inserts_without_counting_as_typed(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "main.py", "content": ""},
            {"ts": 0, "kind": "insert", "file": "main.py", "text": "res"},
            {"ts": 0, "kind": "request", "id": "a"},
            {"ts": 300, "kind": "accept", "id": "a"},
        ]))
        engine = replay(events, EngineConfig(), backend=oracle())
        self.assertEqual(engine.session.document("main.py").content, GROUND_TRUTH)
        self.assertEqual(engine.report().fcml, (len(GROUND_TRUTH) - 3) / len(GROUND_TRUTH))

    def test_accept_of_unknown_suggestion(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "main.py", "content": ""},
            {"ts": 5, "kind": "accept", "id": "nope"},
        ]))
        with self.assertRaises(InvalidTrace):
            replay(events, EngineConfig(), backend=oracle())

    def test_reject_without_suggestion(self):
        engine = make_engine(EngineConfig(), VirtualClock(), backend=oracle())
        with self.assertRaises(InvalidAction):
            engine.reject("missing")

    def test_queued_request_is_packed_for_its_own_file(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "a.py", "content": "al"},
            {"ts": 0, "kind": "request", "id": "r1"},
            {"ts": 0, "kind": "request", "id": "r2"},
            {"ts": 0, "kind": "request", "id": "r3"},
            {"ts": 10, "kind": "open", "file": "b.py", "content": "other = 1\n"},
        ]))
        backend = RecordingBackend()
        engine = replay(events, EngineConfig(), backend=backend)

        # r3 waits in the queue until r1 answers, long after b.py took focus
        prompt = backend.prompts["r3"]
        self.assertEqual(prompt.file_id, "a.py")
        self.assertIn("al" + CURSOR_MARKER, prompt.cursor_section)
        self.assertNotIn("other", prompt.cursor_section)
        self.assertEqual(engine.outcomes["r3"].status, "empty")

    def test_queued_request_for_a_closed_file_fails(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "a.py", "content": "al"},
            {"ts": 0, "kind": "request", "id": "r1"},
            {"ts": 0, "kind": "request", "id": "r2"},
            {"ts": 0, "kind": "request", "id": "r3"},
            {"ts": 10, "kind": "close", "file": "a.py"},
        ]))
        backend = RecordingBackend()
        engine = replay(events, EngineConfig(), backend=backend)

        self.assertNotIn("r3", backend.prompts)
        self.assertEqual(engine.outcomes["r3"].status, "error")
        self.assertEqual(engine.outcomes["r1"].status, "empty")
        self.assertEqual(engine.report().counts["failed"], 1)
        self.assertEqual(engine.scheduler.states["r3"], "failed")

    def test_transform_waits_for_accept(self):
        backend = oracle(transforms={INSTRUCTION: AFTER})
        engine = replay(transform_trace(), EngineConfig(), backend=backend)
        self.assertEqual(engine.session.document("total.py").content, BEFORE)
        self.assertEqual(engine.transforms["t"].content, AFTER)

        engine = replay(transform_trace({"ts": 20, "kind": "accept", "id": "t"}), EngineConfig(), backend=backend)
        self.assertEqual(engine.session.document("total.py").content, AFTER)
        self.assertEqual(engine.session.recent_edits()[0].file_id, "total.py")
        report = engine.report()
        self.assertEqual(report.transform_acceptance_rate, 1)
        self.assertEqual(report.counts["transforms_accepted"], 1)
        # accepting an edit is not typing
        self.assertEqual(report.counts["accepted"], 0)
        self.assertIn("fcml", report.zero_denominators)

    def test_rejected_transform_leaves_the_file(self):
        events = transform_trace({"ts": 900, "kind": "reject", "id": "t"})
        engine = replay(events, EngineConfig(), backend=oracle(transforms={INSTRUCTION: AFTER}))
        self.assertEqual(engine.session.document("total.py").content, BEFORE)
        report = engine.report()
        self.assertEqual(report.transform_acceptance_rate, 0)
        self.assertEqual(report.counts["transforms_rejected"], 1)
        self.assertNotIn("transform_acceptance_rate", report.zero_denominators)

    def test_accept_after_an_edit_reapplies_the_script(self):
        events = transform_trace(
            {"ts": 20, "kind": "insert", "file": "total.py", "text": "# end\n"},
            {"ts": 30, "kind": "accept", "id": "t"},
        )
        engine = replay(events, EngineConfig(), backend=oracle(transforms={INSTRUCTION: AFTER}))
        self.assertEqual(engine.session.document("total.py").content, AFTER + "# end\n")

    def test_transform_ids_are_shared_with_requests(self):
        events = transform_trace({"ts": 20, "kind": "request", "id": "t"})
        with self.assertRaises(InvalidTrace):
            replay(events, EngineConfig(), backend=oracle(transforms={INSTRUCTION: AFTER}))

    def test_transform_selection_out_of_range(self):
        events = parse_trace(trace_lines([
            {"ts": 0, "kind": "open", "file": "total.py", "content": BEFORE},
            {"ts": 10, "kind": "transform", "file": "total.py", "instruction": INSTRUCTION, "selection": [0, 5000]},
        ]))
        with self.assertRaises(InvalidTrace):
            replay(events, EngineConfig(), backend=oracle(transforms={INSTRUCTION: AFTER}))

    def test_failed_transform_is_logged(self):
        engine = make_engine(EngineConfig(), VirtualClock(), backend=oracle())
        engine.apply(EditorEvent.file_open("total.py", 0, BEFORE))
        with self.assertRaises(UnknownInstruction):
            engine.transform("total.py", "rename total")
        counts = engine.report().counts
        self.assertEqual(counts["transforms"], 1)
        self.assertEqual(counts["transforms_failed"], 1)
        self.assertEqual(counts["transforms_shown"], 0)


class ProtocolTests(SimpleTestCase):

    def setUp(self):
        self.clock = VirtualClock()
        backend = OracleBackend(
            ground_truth={"main.py": "Build()"},
            transforms={"use num1 to 3 instead of abc": AFTER},
            horizon_chars=4,
            latency_ms=200,
        )
        self.responses = []
        engine = make_engine(EngineConfig(), self.clock, backend=backend)
        self.session = ProtocolSession(engine, self.responses.append)

    def send(self, **message):
        self.session.handle_line(json.dumps(message))
        return self.responses[-1] if self.responses else None

    def test_complete_then_adapt(self):
        self.send(id=1, op="open", file="main.py", content="B()")
        self.send(id=2, op="edit", file="main.py", kind="move", offset=1)
        self.responses.clear()
        self.send(id=3, op="complete")
        self.assertEqual(self.responses, [])

        self.clock.advance_to(200)
        self.assertEqual(self.responses[-1], {
            "id": 3, "ok": True, "status": "suggestion", "text": "uild", "served_from": "model",
        })

        self.send(id=4, op="edit", file="main.py", kind="insert", text="u")
        response = self.send(id=5, op="complete")
        self.assertEqual(response["text"], "ild")
        self.assertEqual(response["served_from"], "cache")

    def test_cancel_unknown_keeps_connection(self):
        response = self.send(id="c1", op="cancel", target="nope")
        self.assertFalse(response["ok"])
        self.assertEqual(response["error"]["type"], "UnknownRequest")
        response = self.send(id="m1", op="metrics")
        self.assertTrue(response["ok"])
        self.assertIn("fcml", response["report"])

    def test_malformed_messages(self):
        self.session.handle_line("{oops")
        self.assertEqual(self.responses[-1]["error"]["type"], "ProtocolError")
        self.assertIsNone(self.responses[-1]["id"])
        self.assertEqual(self.send(id=1, op="dance")["error"]["type"], "ProtocolError")
        self.assertEqual(self.send(id=2, op="open", file="a.py")["error"]["type"], "ProtocolError")
        self.assertEqual(self.send(id=3, op="complete")["error"]["type"], "NoFocusedDocument")

    def test_cancel_in_flight(self):
        self.send(id=1, op="open", file="main.py", content="B")
        self.responses.clear()
        self.send(id=2, op="complete")
        self.send(id=3, op="cancel", target=2)
        self.assertEqual(self.responses, [
            {"id": 2, "ok": True, "status": "cancelled"},
            {"id": 3, "ok": True, "state": "in_flight"},
        ])
        self.clock.drain()
        self.assertEqual(len(self.responses), 2)

    def test_every_request_gets_one_terminal_response(self):
        self.send(id=1, op="open", file="main.py", content="B")
        self.responses.clear()
        for n in range(2, 7):
            self.send(id=n, op="complete")
        self.send(id=7, op="cancel", target=5)
        self.clock.drain()
        answered = [r["id"] for r in self.responses if "status" in r or not r["ok"]]
        self.assertEqual(sorted(answered), [2, 3, 4, 5, 6])

    def test_transform(self):
        self.send(id=1, op="open", file="total.py", content=BEFORE)
        response = self.send(id=2, op="transform", file="total.py", instruction=INSTRUCTION)
        self.assertTrue(response["ok"])
        self.assertEqual(response["target"], "2")
        self.assertEqual(response["content"], AFTER)
        self.assertEqual(response["diff"]["counts"]["modified"], 1)
        tags = [line["tag"] for line in response["diff"]["lines"]]
        self.assertIn("modified", tags)
        self.assertEqual(self.session.engine.session.document("total.py").content, BEFORE)

        response = self.send(id=3, op="accept", target="2")
        self.assertTrue(response["ok"])
        self.assertEqual(response["content"], AFTER)
        self.assertEqual(self.session.engine.session.document("total.py").content, AFTER)

        report = self.send(id=4, op="metrics")["report"]
        self.assertEqual(report["counts"]["transforms_accepted"], 1)
        self.assertEqual(report["transform_acceptance_rate"], 1)

    def test_transform_errors_keep_connection(self):
        self.send(id=1, op="open", file="total.py", content=BEFORE)
        response = self.send(id=2, op="transform", file="total.py", instruction="rename total")
        self.assertEqual(response["error"]["type"], "UnknownInstruction")
        response = self.send(id=3, op="transform", file="total.py", instruction=INSTRUCTION, selection=[5, 1])
        self.assertEqual(response["error"]["type"], "MalformedRange")
        self.assertEqual(self.send(id=4, op="reject", target=3)["error"]["type"], "InvalidAction")
        self.assertTrue(self.send(id=5, op="metrics")["ok"])

    def test_parse_listen(self):
        self.assertEqual(parse_listen("127.0.0.1:8765"), ("127.0.0.1", 8765))
        self.assertEqual(parse_listen(":9000"), ("127.0.0.1", 9000))
        with self.assertRaises(ConfigError):
            parse_listen("localhost")


def feed(lines):
    reader = asyncio.StreamReader()
    for line in lines:
        reader.feed_data((json.dumps(line) + "\n").encode("utf-8"))
    reader.feed_eof()
    return reader


class EngineServiceTests(SimpleTestCase):

    def setUp(self):
        backend = OracleBackend(
            ground_truth={"main.py": "Build()"},
            transforms={INSTRUCTION: AFTER},
            horizon_chars=4,
            latency_ms=0,
        )
        self.service = EngineService(EngineConfig(), backend=backend)

    def run_session(self, lines):
        responses = []

        async def session():
            await self.service.run_session(feed(lines), responses.append)

        asyncio.run(session())
        return {r["id"]: r for r in responses}, responses

    def test_stream_session(self):
        by_id, responses = self.run_session([
            {"id": 1, "op": "open", "file": "main.py", "content": "B()"},
            {"id": 2, "op": "edit", "file": "main.py", "kind": "move", "offset": 1},
            {"id": 3, "op": "complete"},
            "not an object",
            {"id": 4, "op": "open", "file": "total.py", "content": BEFORE},
            {"id": 5, "op": "transform", "file": "total.py", "instruction": INSTRUCTION},
        ])
        self.assertEqual(len(responses), 6)
        self.assertEqual(by_id[1], {"id": 1, "ok": True, "version": 1})
        self.assertEqual(by_id[3]["text"], "uild")
        self.assertEqual(by_id[3]["served_from"], "model")
        self.assertEqual(by_id[None]["error"]["type"], "ProtocolError")
        self.assertEqual(by_id[5]["content"], AFTER)

    def test_sessions_are_independent(self):
        self.run_session([{"id": 1, "op": "open", "file": "main.py", "content": "B"}])
        by_id, _ = self.run_session([{"id": 1, "op": "complete"}])
        self.assertEqual(by_id[1]["error"]["type"], "NoFocusedDocument")

    def test_bind_failure(self):
        with socket.socket() as taken:
            taken.bind(("127.0.0.1", 0))
            taken.listen()
            port = taken.getsockname()[1]
            with self.assertRaises(BindError):
                asyncio.run(self.service.listen(f"127.0.0.1:{port}"))


class AsyncioClockTests(SimpleTestCase):

    def test_calls_and_timers(self):
        results = []

        async def run():
            clock = AsyncioClock(asyncio.get_running_loop())
            clock.submit(lambda: 42, 10, results.append, results.append)
            clock.submit(lambda: int("x"), 0, results.append, lambda e: results.append(type(e)))
            clock.call_later(5, lambda: results.append("timer"))
            await clock.wait_idle()
            return clock.pending

        self.assertEqual(asyncio.run(run()), 0)
        self.assertCountEqual(results, [42, ValueError, "timer"])

    def test_wall_clock_replay_answers_every_request(self):
        engine = replay_wall_clock(forward_typing(chars=3, char_ms=5), EngineConfig(), backend=oracle(latency_ms=0))
        self.assertEqual(set(engine.outcomes), {"r0", "r1", "r2", "r3"})
        self.assertEqual(engine.clock.pending, 0)
        self.assertEqual(engine.report().counts["requests"], 4)


class ServeCommandTests(SimpleTestCase):

    def test_bind_failure_exits_with_input_error(self):
        refused = mock.Mock(side_effect=OSError("address already in use"))
        with mock.patch("codeserve.harness.service.asyncio.start_server", refused):
            with self.assertRaises(CommandError) as cm:
                call_command("serve", "--listen", "127.0.0.1:8765")
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn("cannot listen", str(cm.exception))

    def test_bad_listen_address(self):
        with self.assertRaises(CommandError) as cm:
            call_command("serve", "--listen", "localhost")
        self.assertEqual(cm.exception.returncode, 2)


class ReplayCommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        (self.dir / "oracle.json").write_text(json.dumps({"ground_truth": {"main.py": GROUND_TRUTH}}))
        (self.dir / "engine.env").write_text("ORACLE_FIXTURE=oracle.json\nORACLE_LATENCY_MS=200\n")
        events = [
            {"ts": 0, "kind": "open", "file": "main.py", "content": "res"},
            {"ts": 0, "kind": "request", "id": "a"},
            {"ts": 300, "kind": "accept", "id": "a"},
        ]
        (self.dir / "trace.jsonl").write_text("\n".join(trace_lines(events)) + "\n")

    def tearDown(self):
        self.tmp.cleanup()

    def run_replay(self, *args):
        out = StringIO()
        call_command("replay", str(self.dir / "trace.jsonl"), "--config", str(self.dir / "engine.env"), *args, stdout=out)
        return out.getvalue()

    def test_json_report(self):
        first = self.run_replay()
        self.assertEqual(first, self.run_replay())
        report = json.loads(first)
        self.assertEqual(report["counts"]["accepted"], 1)
        self.assertEqual(report["fcml"], 1.0)

    def test_table_and_save(self):
        out = self.run_replay("--report", "table", "--save")
        self.assertIn("Acceptance rate", out)
        run = ReplayRun.objects.get()
        self.assertEqual(run.trace_name, "trace.jsonl")
        self.assertEqual(run.acceptance_rate, 1.0)

    def test_bad_trace_exits_with_input_error(self):
        (self.dir / "trace.jsonl").write_text('{"ts": 0, "kind": "bogus"}\n')
        with self.assertRaises(CommandError) as cm:
            self.run_replay()
        self.assertEqual(cm.exception.returncode, 2)

    def test_invalid_action_exits_with_input_error(self):
        (self.dir / "trace.jsonl").write_text('{"ts": 0, "kind": "request"}\n')
        with self.assertRaises(CommandError) as cm:
            self.run_replay()
        self.assertEqual(cm.exception.returncode, 2)

    def test_unknown_config_key(self):
        (self.dir / "engine.env").write_text("NOT_A_KEY=1\n")
        with self.assertRaises(CommandError) as cm:
            self.run_replay()
        self.assertEqual(cm.exception.returncode, 2)
