import random

from django.test import SimpleTestCase

from codeserve.completion.scheduler import (
    DISPATCHED,
    ENQUEUED,
    SERVED_FROM_CACHE,
    ResponseForCompletedEntry,
    StreakScheduler,
    DuplicateRequest,
    UnknownRequest,
)
from codeserve.completion.streaks import CompletionRequest, StreakEntry, try_adapt
from codeserve.session.documents import EditorEvent, EditorSession


def make_request(request_id, text, issued_at=0, file_id="a", window=4096):
    """`text` marks the cursor with a "|"."""
    cursor = text.index("|")
    content = text.replace("|", "")
    return CompletionRequest.from_text(request_id, file_id, content, cursor, issued_at, prefix_chars=window)


class CountingBackend:
    """Stands in for the model: records every dispatched request."""

    def __init__(self):
        self.calls = []

    def __call__(self, request):
        self.calls.append(request.request_id)


def make_scheduler(**kwargs):
    backend = CountingBackend()
    return StreakScheduler(backend, **kwargs), backend


class TryAdaptTests(SimpleTestCase):

    def test_reply_ild_to_bu(self):
        scheduler, backend = make_scheduler()
        scheduler.submit(make_request("r1", "B|()"))
        scheduler.on_model_response("r1", "uild")
        entry = scheduler.cache[0]
        self.assertEqual(entry.predicted_text, "Build")
        self.assertEqual(entry.anchor, 0)

        decision = scheduler.submit(make_request("r2", "Bu|()", issued_at=50))
        self.assertEqual(decision.outcome, SERVED_FROM_CACHE)
        self.assertEqual(decision.text, "ild")
        self.assertEqual(backend.calls, ["r1"])

    def test_oldest_match_wins(self):
        scheduler, _ = make_scheduler()
        scheduler.submit(make_request("r1", "B|()", issued_at=0))
        scheduler.submit(make_request("r2", "B|()", issued_at=10))
        # the newer one answers first, age is what counts
        scheduler.on_model_response("r2", "undle")
        scheduler.on_model_response("r1", "uild")

        adaptation = scheduler.try_adapt(make_request("r3", "Bu|()", issued_at=20))
        self.assertEqual(adaptation.text, "ild")
        self.assertEqual(adaptation.entry.request_id, "r1")

    def test_equal_age_breaks_on_request_id(self):
        first = StreakEntry(make_request("a1", "B|()"), created_at=5)
        second = StreakEntry(make_request("a2", "B|()"), created_at=5)
        first.complete("undle")
        second.complete("uild")
        adaptation = try_adapt([second, first], make_request("x", "Bu|()"), 4096)
        self.assertEqual(adaptation.text, "ndle")

    def test_deletion_breaks_adaptation(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, "xB()"))
        session.apply_event(EditorEvent.cursor_move("a", 0, 2))

        def request_now(request_id, ts):
            return CompletionRequest.from_document(request_id, session.document("a"), ts, 4096, 1024)

        entry = StreakEntry(request_now("r1", 0), created_at=0)
        entry.complete("uild")

        session.apply_event(EditorEvent.insert("a", 10, "u"))
        self.assertEqual(try_adapt([entry], request_now("r2", 10), 4096).text, "ild")

        session.apply_event(EditorEvent.delete("a", 20, 3))
        self.assertIsNone(try_adapt([entry], request_now("r3", 20), 4096))

        session.apply_event(EditorEvent.insert("a", 30, "yBu"))
        self.assertEqual(session.document("a").content, "yBu()")
        self.assertIsNone(try_adapt([entry], request_now("r4", 30), 4096))

    def test_suffix_edit_breaks_adaptation(self):
        entry = StreakEntry(make_request("r1", "B|()"), created_at=0)
        entry.complete("uild")
        self.assertIsNone(try_adapt([entry], make_request("r2", "Bu|(x)"), 4096))

    def test_edit_outside_the_windows_breaks_adaptation(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, "B\n" + "x" * 3000))
        session.apply_event(EditorEvent.cursor_move("a", 0, 1))

        def request_now(request_id, ts):
            return CompletionRequest.from_document(request_id, session.document("a"), ts, 4096, 1024)

        entry = StreakEntry(request_now("r1", 0), created_at=0)
        entry.complete("uild")
        session.apply_event(EditorEvent.insert("a", 10, "u"))
        self.assertEqual(try_adapt([entry], request_now("r2", 10), 4096).text, "ild")

        session.apply_event(EditorEvent.cursor_move("a", 20, 2500))
        session.apply_event(EditorEvent.insert("a", 20, "CHANGED"))
        session.apply_event(EditorEvent.cursor_move("a", 30, 2))
        self.assertEqual(len(request_now("r3", 30).suffix_window), 1024)
        self.assertIsNone(try_adapt([entry], request_now("r3", 30), 4096))

    def test_edit_before_a_saturated_prefix_window_breaks_adaptation(self):
        content = "y" * 50 + "\nB()"
        entry = StreakEntry(make_request("r1", content[:-2] + "|()", window=8), created_at=0)
        entry.complete("uild")
        self.assertEqual(try_adapt([entry], make_request("r2", content[:-2] + "u|()", window=8), 8).text, "ild")

        changed = "z" + content[1:]
        self.assertIsNone(try_adapt([entry], make_request("r3", changed[:-2] + "u|()", window=8), 8))

    def test_fully_typed_prediction_is_not_a_match(self):
        entry = StreakEntry(make_request("r1", "B|()"), created_at=0)
        entry.complete("uild")
        self.assertEqual(try_adapt([entry], make_request("r2", "Buil|()"), 4096).text, "d")
        self.assertIsNone(try_adapt([entry], make_request("r3", "Build|()"), 4096))

    def test_empty_prediction_never_adapts(self):
        entry = StreakEntry(make_request("r1", "x = |"), created_at=0)
        entry.complete("")
        self.assertEqual(entry.status, "completed")
        self.assertIsNone(try_adapt([entry], make_request("r2", "x = |"), 4096))

    def test_multi_character_paste_of_prefix(self):
        entry = StreakEntry(make_request("r1", "x = |"), created_at=0)
        entry.complete("compute(values)")
        self.assertEqual(try_adapt([entry], make_request("r2", "x = comp|"), 4096).text, "ute(values)")

    def test_saturated_prefix_window(self):
        body = "0123456789" * 3
        entry = StreakEntry(make_request("r1", body + "|", window=8), created_at=0)
        entry.complete("abc")
        request = make_request("r2", body + "a|", window=8)
        self.assertEqual(try_adapt([entry], request, 8).text, "bc")

    def test_adaptation_is_a_pure_suffix_operation(self):
        rng = random.Random(5)
        for _ in range(200):
            before = "".join(rng.choice("ab _(") for _ in range(rng.randint(0, 8)))
            prediction = "".join(rng.choice("xyz_(") for _ in range(rng.randint(1, 8)))
            entry = StreakEntry(make_request("r1", before + "|;"), created_at=0)
            entry.complete(prediction)
            typed = rng.randint(0, len(prediction) - 1)
            current = before + prediction[:typed]
            adaptation = try_adapt([entry], make_request("r2", current + "|;"), 4096)
            self.assertIsNotNone(adaptation)
            self.assertEqual(current + adaptation.text, before + prediction)


class SchedulerTests(SimpleTestCase):

    def test_first_request_is_dispatched(self):
        scheduler, backend = make_scheduler()
        self.assertEqual(scheduler.submit(make_request("r1", "x|")).outcome, DISPATCHED)
        self.assertEqual(backend.calls, ["r1"])

    def test_third_request_is_queued(self):
        scheduler, backend = make_scheduler()
        scheduler.submit(make_request("r1", "a|"))
        scheduler.submit(make_request("r2", "ab|"))
        self.assertEqual(scheduler.submit(make_request("r3", "abc|")).outcome, ENQUEUED)
        self.assertEqual(len(scheduler.in_flight), 2)
        self.assertEqual(backend.calls, ["r1", "r2"])

    def test_adaptable_request_skips_the_queue(self):
        scheduler, backend = make_scheduler()
        scheduler.submit(make_request("r1", "B|()"))
        scheduler.on_model_response("r1", "uild")
        scheduler.submit(make_request("r2", "x|", file_id="b"))
        scheduler.submit(make_request("r3", "y|", file_id="b"))
        decision = scheduler.submit(make_request("r4", "Bu|()"))
        self.assertEqual(decision.outcome, SERVED_FROM_CACHE)
        self.assertEqual(decision.text, "ild")
        self.assertEqual(list(scheduler.in_flight), ["r2", "r3"])
        self.assertEqual(len(scheduler.queue), 0)

    def test_duplicate_request(self):
        scheduler, _ = make_scheduler()
        scheduler.submit(make_request("r1", "x|"))
        with self.assertRaises(DuplicateRequest):
            scheduler.submit(make_request("r1", "x|"))

    def test_cancel_queued_request(self):
        scheduler, backend = make_scheduler()
        scheduler.submit(make_request("r1", "a|"))
        scheduler.submit(make_request("r2", "ab|"))
        scheduler.submit(make_request("r3", "abc|"))
        self.assertEqual(scheduler.cancel("r3"), "queued")
        self.assertEqual(len(scheduler.queue), 0)
        scheduler.on_model_response("r1", "")
        scheduler.on_model_response("r2", "")
        self.assertNotIn("r3", backend.calls)

    def test_cancel_unknown_request(self):
        scheduler, _ = make_scheduler()
        with self.assertRaises(UnknownRequest):
            scheduler.cancel("nope")

    def test_cancelled_in_flight_response_is_cached_not_delivered(self):
        scheduler, _ = make_scheduler()
        scheduler.submit(make_request("r1", "B|()"))
        self.assertEqual(scheduler.cancel("r1"), "in_flight")
        self.assertEqual(scheduler.in_flight["r1"].status, "cancelled")

        result = scheduler.on_model_response("r1", "uild")
        self.assertTrue(result.discarded)
        self.assertEqual(result.deliveries, [])
        self.assertEqual(scheduler.cache[0].status, "completed")

        decision = scheduler.submit(make_request("r2", "Bu|()", issued_at=30))
        self.assertEqual(decision.text, "ild")

    def test_cancel_after_completion_is_a_no_op(self):
        scheduler, _ = make_scheduler()
        scheduler.submit(make_request("r1", "x|"))
        scheduler.on_model_response("r1", "yz")
        self.assertEqual(scheduler.cancel("r1"), "completed")
        self.assertEqual(len(scheduler.cache), 1)

    def test_response_answers_waiting_requests(self):
        scheduler, _ = make_scheduler()
        scheduler.submit(make_request("r1", "B|()"))
        scheduler.submit(make_request("r0", "q|", file_id="b"))
        self.assertEqual(scheduler.submit(make_request("r2", "Bu|()", issued_at=50)).outcome, ENQUEUED)

        result = scheduler.on_model_response("r1", "uild")
        self.assertEqual(
            [(d.request_id, d.text, d.served_from) for d in result.deliveries],
            [("r1", "uild", "model"), ("r2", "ild", "cache")],
        )
        self.assertEqual(len(scheduler.queue), 0)
        self.assertEqual(result.dispatched, [])

    def test_response_for_unknown_or_finished_request(self):
        scheduler, _ = make_scheduler()
        with self.assertRaises(UnknownRequest):
            scheduler.on_model_response("nope", "x")
        scheduler.submit(make_request("r1", "x|"))
        scheduler.on_model_response("r1", "y")
        with self.assertRaises(ResponseForCompletedEntry):
            scheduler.on_model_response("r1", "y")

    def test_response_dispatches_queue_head(self):
        scheduler, backend = make_scheduler()
        scheduler.submit(make_request("r1", "a|"))
        scheduler.submit(make_request("r2", "b|"))
        scheduler.submit(make_request("r3", "zz|", issued_at=5))
        result = scheduler.on_model_response("r1", "aaa", now=100)
        self.assertEqual([r.request_id for r in result.dispatched], ["r3"])
        self.assertEqual(list(scheduler.in_flight), ["r2", "r3"])
        self.assertEqual(scheduler.in_flight["r3"].created_at, 100)
        self.assertEqual(backend.calls, ["r1", "r2", "r3"])

    def test_failure_frees_the_slot(self):
        scheduler, backend = make_scheduler()
        scheduler.submit(make_request("r1", "a|"))
        scheduler.submit(make_request("r2", "b|"))
        scheduler.submit(make_request("r3", "c|"))
        result = scheduler.on_model_failure("r1")
        self.assertEqual(scheduler.state_of("r1"), "failed")
        self.assertEqual([r.request_id for r in result.dispatched], ["r3"])


class EvictionTests(SimpleTestCase):

    def fill(self, scheduler, count):
        for n in range(count):
            scheduler.submit(make_request(f"r{n:02d}", f"{n}|", issued_at=n))
            scheduler.on_model_response(f"r{n:02d}", "x")

    def test_capacity(self):
        scheduler, _ = make_scheduler(cache_capacity=16)
        self.fill(scheduler, 17)
        scheduler.evict(now=17)
        self.assertEqual(len(scheduler.cache), 16)
        self.assertNotIn("r00", [e.request_id for e in scheduler.cache])

    def test_ttl(self):
        scheduler, _ = make_scheduler(cache_ttl_ms=30000)
        self.fill(scheduler, 1)
        self.assertEqual(scheduler.evict(now=30000), [])
        self.assertEqual(len(scheduler.evict(now=30001)), 1)
        self.assertEqual(scheduler.cache, [])

    def test_fresh_entries_stay(self):
        scheduler, _ = make_scheduler()
        self.fill(scheduler, 3)
        self.assertEqual(scheduler.evict(now=10), [])
        self.assertEqual(len(scheduler.cache), 3)


class SchedulerPropertyTests(SimpleTestCase):

    PREFIXES = ["", "B", "Bu", "Bui", "x", "Bx"]
    RESPONSES = ["uild", "ild", "", "undle", "x"]

    def run_schedule(self, rng):
        outstanding = set()
        peak = [0]

        def dispatch(request):
            self.assertNotIn(request.request_id, cancelled_queued)
            outstanding.add(request.request_id)
            peak[0] = max(peak[0], len(outstanding))

        scheduler = StreakScheduler(dispatch, max_in_flight=2)
        outcomes = {}
        cancelled_queued = set()
        cancelled = set()
        ids = []

        def terminal(request_id, outcome):
            outcomes.setdefault(request_id, []).append(outcome)

        def settle(result):
            for delivery in result.deliveries:
                self.assertNotIn(delivery.request_id, cancelled)
                terminal(delivery.request_id, "suggestion" if delivery.text else "empty")

        for step in range(rng.randint(1, 14)):
            op = rng.random()
            if op < 0.45 or not ids:
                request_id = f"r{len(ids)}"
                ids.append(request_id)
                request = make_request(request_id, rng.choice(self.PREFIXES) + "|()", issued_at=step)
                decision = scheduler.submit(request)
                if decision.outcome == SERVED_FROM_CACHE:
                    terminal(request_id, "suggestion")
            elif op < 0.6:
                request_id = rng.choice(ids)
                state = scheduler.cancel(request_id)
                if state in ("queued", "in_flight"):
                    cancelled.add(request_id)
                    terminal(request_id, "cancelled")
                if state == "queued":
                    cancelled_queued.add(request_id)
            elif outstanding:
                request_id = rng.choice(sorted(outstanding))
                outstanding.discard(request_id)
                if op < 0.92:
                    settle(scheduler.on_model_response(request_id, rng.choice(self.RESPONSES), now=step))
                else:
                    scheduler.on_model_failure(request_id, now=step)
                    if request_id not in cancelled:
                        terminal(request_id, "error")
            self.assertLessEqual(len(scheduler.in_flight), 2)
            self.assertLessEqual(len(outstanding), 2)

        while outstanding:
            request_id = sorted(outstanding)[0]
            outstanding.discard(request_id)
            settle(scheduler.on_model_response(request_id, rng.choice(self.RESPONSES)))
            self.assertLessEqual(len(scheduler.in_flight), 2)

        self.assertEqual(len(scheduler.queue), 0)
        self.assertLessEqual(peak[0], 2)
        for request_id in ids:
            self.assertEqual(len(outcomes.get(request_id, [])), 1, f"{request_id}: {outcomes.get(request_id)}")

    def test_randomized_interleavings(self):
        rng = random.Random(2024)
        for _ in range(10000):
            self.run_schedule(rng)

    def test_typing_a_cached_prediction_needs_no_model_calls(self):
        scheduler, backend = make_scheduler()
        prediction = "compute_total(values)"
        scheduler.submit(make_request("r0", "x = |\n", issued_at=0))
        scheduler.on_model_response("r0", prediction)
        for n in range(1, len(prediction)):
            decision = scheduler.submit(make_request(f"r{n}", "x = " + prediction[:n] + "|\n", issued_at=n))
            self.assertEqual(decision.outcome, SERVED_FROM_CACHE)
            self.assertEqual(decision.text, prediction[n:])
        self.assertEqual(backend.calls, ["r0"])
