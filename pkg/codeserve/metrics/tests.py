import json
import random

from django.test import SimpleTestCase, TestCase

from codeserve.metrics.events import (
    EmptyLog,
    MetricEvent,
    SessionEventLog,
    UnmatchedSuggestion,
)
from codeserve.metrics.models import ReplayRun
from codeserve.metrics.report import (
    MetricsReport,
    acceptance_rate,
    avg_chars_per_accept,
    LARGE_DIFF_CHARS,
    avg_transform_prompt_chars,
    cache_hit_rate,
    fcml,
    fcml_no_paste,
    latency_percentiles,
    transform_acceptance_rate,
)


def accepted_suggestion(log, suggestion_id, chars, ts=0):
    log.append(MetricEvent.shown(suggestion_id, ts, chars))
    log.append(MetricEvent.accepted(suggestion_id, ts + 100))


def rejected_suggestion(log, suggestion_id, visible_ms, ts=0):
    log.append(MetricEvent.shown(suggestion_id, ts, 10))
    log.append(MetricEvent.rejected(suggestion_id, ts + visible_ms))


def proposed_edit(log, transform_id, diff_chars, accept, ts=0):
    log.append(MetricEvent.transform_requested(transform_id, ts, 400))
    log.append(MetricEvent.transform_shown(transform_id, ts + 200, diff_chars))
    if accept:
        log.append(MetricEvent.transform_accepted(transform_id, ts + 300))
    else:
        log.append(MetricEvent.transform_rejected(transform_id, ts + 300))


def random_log(rng):
    log = SessionEventLog()
    ts = 0
    for i in range(rng.randint(0, 40)):
        ts += rng.randint(0, 300)
        choice = rng.random()
        if choice < 0.3:
            log.append(MetricEvent.typed(rng.randint(1, 20), ts))
        elif choice < 0.4:
            log.append(MetricEvent.pasted(rng.randint(1, 2000), rng.random() < 0.2, ts))
        elif choice < 0.6:
            log.append(MetricEvent.request_issued(f"r{i}", ts))
            log.append(MetricEvent.request_latency(rng.randint(1, 500), rng.choice(["cache", "model"]), ts, f"r{i}"))
            log.append(MetricEvent.shown(f"r{i}", ts, rng.randint(1, 50)))
            if rng.random() < 0.5:
                log.append(MetricEvent.accepted(f"r{i}", ts + rng.randint(0, 2000)))
            elif rng.random() < 0.7:
                log.append(MetricEvent.rejected(f"r{i}", ts + rng.randint(0, 2000)))
        else:
            log.append(MetricEvent.request_issued(f"r{i}", ts))
    return log


class SessionEventLogTests(SimpleTestCase):

    def test_accept_of_unknown_suggestion(self):
        log = SessionEventLog()
        with self.assertRaises(UnmatchedSuggestion):
            log.append(MetricEvent.accepted("s1", 10))

    def test_suggestion_resolves_once(self):
        log = SessionEventLog()
        accepted_suggestion(log, "s1", 5)
        self.assertFalse(log.is_open("s1"))
        with self.assertRaises(UnmatchedSuggestion):
            log.append(MetricEvent.rejected("s1", 900))

    def test_suggestion_and_edit_ids_are_separate(self):
        log = SessionEventLog()
        accepted_suggestion(log, "x1", 5)
        proposed_edit(log, "x1", 20, accept=False)
        self.assertFalse(log.is_open("x1", kind="transform_shown"))
        with self.assertRaises(UnmatchedSuggestion):
            log.append(MetricEvent.transform_accepted("x2", 10))
        with self.assertRaises(UnmatchedSuggestion):
            log.append(MetricEvent.transform_accepted("x1", 10))

    def test_invalid_kind(self):
        with self.assertRaises(ValueError):
            MetricEvent("clicked")


class FcmlTests(SimpleTestCase):

    def test_published_ratio(self):
        log = SessionEventLog()
        log.append(MetricEvent.typed(513))
        log.append(MetricEvent.pasted(200))
        accepted_suggestion(log, "s1", 287)
        self.assertEqual(fcml(log), 0.287)
        self.assertEqual(fcml_no_paste(log), 287 / 800)

    def test_long_paste_is_excluded(self):
        log = SessionEventLog()
        log.append(MetricEvent.typed(50))
        log.append(MetricEvent.pasted(1500))
        accepted_suggestion(log, "s1", 50)
        self.assertEqual(fcml(log), 0.5)

    def test_paste_limit_boundary(self):
        log = SessionEventLog()
        log.append(MetricEvent.typed(10))
        log.append(MetricEvent.pasted(1000))
        log.append(MetricEvent.pasted(999))
        log.append(MetricEvent.pasted(20, full_file=True))
        accepted_suggestion(log, "s1", 1)
        self.assertEqual(fcml(log), 1 / 1010)

    def test_no_accepts(self):
        log = SessionEventLog()
        log.append(MetricEvent.typed(40))
        self.assertEqual(fcml(log), 0)
        self.assertEqual(fcml(SessionEventLog()), 0)

    def test_no_paste_variant_is_never_smaller(self):
        rng = random.Random(7)
        for _ in range(300):
            log = random_log(rng)
            self.assertGreaterEqual(fcml_no_paste(log), fcml(log))


class AcceptanceRateTests(SimpleTestCase):

    def test_published_ratio(self):
        log = SessionEventLog()
        for i in range(9):
            accepted_suggestion(log, f"a{i}", 5, ts=i * 1000)
        for i in range(11):
            rejected_suggestion(log, f"r{i}", 800, ts=i * 1000)
        self.assertEqual(acceptance_rate(log), 0.45)

    def test_visibility_rule(self):
        log = SessionEventLog()
        accepted_suggestion(log, "a1", 5)
        before = acceptance_rate(log)

        rejected_suggestion(log, "r1", 500)
        self.assertEqual(acceptance_rate(log), before)

        rejected_suggestion(log, "r2", 800)
        self.assertEqual(acceptance_rate(log), 0.5)

        rejected_suggestion(log, "r3", 750)
        self.assertEqual(acceptance_rate(log), 1 / 3)

    def test_nothing_shown(self):
        self.assertEqual(acceptance_rate(SessionEventLog()), 0)

    def test_avg_chars_per_accept(self):
        log = SessionEventLog()
        accepted_suggestion(log, "a1", 10)
        accepted_suggestion(log, "a2", 30)
        self.assertEqual(avg_chars_per_accept(log), 20)


class TransformMetricsTests(SimpleTestCase):

    def test_acceptance_rate(self):
        log = SessionEventLog()
        proposed_edit(log, "t1", 10, accept=True)
        proposed_edit(log, "t2", 10, accept=False)
        proposed_edit(log, "t3", 300, accept=True)
        log.append(MetricEvent.transform_requested("t4", 0, 100))
        log.append(MetricEvent.transform_failed("t4", 50))
        self.assertEqual(transform_acceptance_rate(log), 2 / 3)
        self.assertEqual(avg_transform_prompt_chars(log), 325)

    def test_large_diff_threshold(self):
        log = SessionEventLog()
        proposed_edit(log, "t1", LARGE_DIFF_CHARS, accept=False)
        proposed_edit(log, "t2", LARGE_DIFF_CHARS + 1, accept=True)
        proposed_edit(log, "t3", 500, accept=False)
        self.assertEqual(transform_acceptance_rate(log, LARGE_DIFF_CHARS), 0.5)
        self.assertEqual(transform_acceptance_rate(log), 1 / 3)

    def test_report(self):
        log = SessionEventLog()
        proposed_edit(log, "t1", 200, accept=True)
        log.append(MetricEvent.transform_requested("t2", 0, 100))
        log.append(MetricEvent.transform_failed("t2", 50))
        report = MetricsReport.from_log(log)
        self.assertEqual(report.transform_acceptance_rate, 1)
        self.assertEqual(report.transform_acceptance_rate_large_diff, 1)
        self.assertEqual(report.counts["transforms"], 2)
        self.assertEqual(report.counts["transforms_failed"], 1)
        self.assertEqual(report.counts["transforms_accepted"], 1)
        self.assertEqual(report.counts["accepted"], 0)
        self.assertNotIn("transform_acceptance_rate", report.zero_denominators)
        self.assertIn("Transform acceptance rate", report.to_table())

    def test_no_edits(self):
        report = MetricsReport.from_log(SessionEventLog())
        self.assertEqual(report.transform_acceptance_rate, 0)
        self.assertIn("transform_acceptance_rate", report.zero_denominators)
        self.assertIn("avg_transform_prompt_chars", report.zero_denominators)


class LatencyTests(SimpleTestCase):

    def test_singleton(self):
        log = SessionEventLog([MetricEvent.request_latency(100, "model")])
        self.assertEqual(latency_percentiles(log), (100, 100))

    def test_nearest_rank(self):
        values = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
        random.Random(3).shuffle(values)
        log = SessionEventLog([MetricEvent.request_latency(v, "model") for v in values])
        self.assertEqual(latency_percentiles(log), (50, 90))

    def test_empty(self):
        with self.assertRaises(EmptyLog):
            latency_percentiles(SessionEventLog())


class CacheHitRateTests(SimpleTestCase):

    def test_ratio(self):
        events = [MetricEvent.request_latency(0, "cache") for _ in range(35)]
        events += [MetricEvent.request_latency(200, "model") for _ in range(65)]
        self.assertEqual(cache_hit_rate(SessionEventLog(events)), 0.35)

    def test_extremes(self):
        model = SessionEventLog([MetricEvent.request_latency(200, "model")] * 4)
        cache = SessionEventLog([MetricEvent.request_latency(0, "cache")] * 4)
        self.assertEqual(cache_hit_rate(model), 0)
        self.assertEqual(cache_hit_rate(cache), 1)
        self.assertEqual(cache_hit_rate(SessionEventLog()), 0)


class MetricsReportTests(SimpleTestCase):

    def test_empty_log(self):
        report = MetricsReport.from_log(SessionEventLog())
        self.assertEqual(report.fcml, 0)
        self.assertEqual(report.latency_p50_ms, 0)
        self.assertTrue(all(v == 0 for v in report.counts.values()))
        self.assertIn("latency", report.zero_denominators)
        self.assertIn("fcml", report.zero_denominators)

    def test_json_is_one_sorted_line(self):
        log = SessionEventLog()
        log.append(MetricEvent.typed(3))
        accepted_suggestion(log, "s1", 3)
        text = MetricsReport.from_log(log).to_json()
        self.assertNotIn("\n", text)
        data = json.loads(text)
        self.assertEqual(list(data), sorted(data))
        self.assertEqual(data["fcml"], 0.5)
        self.assertEqual(data["counts"]["accepted"], 1)

    def test_table(self):
        log = SessionEventLog([MetricEvent.request_latency(120, "model")])
        table = MetricsReport.from_log(log).to_table()
        self.assertIn("Latency p50 (ms)", table)
        self.assertIn("120", table)

    def test_funnel_is_monotone(self):
        rng = random.Random(11)
        for _ in range(300):
            counts = MetricsReport.from_log(random_log(rng)).counts
            self.assertGreaterEqual(counts["shown"], counts["accepted"] + counts["rejected"])
            self.assertGreaterEqual(counts["requests"], counts["shown"])
            self.assertGreaterEqual(counts["rejected"], counts["rejected_visible"])

    def test_short_rejects_do_not_move_acceptance(self):
        rng = random.Random(5)
        for _ in range(100):
            log = random_log(rng)
            before = acceptance_rate(log)
            rejected_suggestion(log, "extra", rng.randint(0, 749), ts=10 ** 6)
            self.assertEqual(acceptance_rate(log), before)


class ReplayRunTests(TestCase):

    def test_record(self):
        log = SessionEventLog()
        log.append(MetricEvent.typed(1))
        accepted_suggestion(log, "s1", 3)
        report = MetricsReport.from_log(log)
        run = ReplayRun.record("forward.jsonl", "ab" * 32, {"MAX_IN_FLIGHT": 2}, report)

        stored = ReplayRun.objects.get(pk=run.pk)
        self.assertEqual(stored.fcml, 0.75)
        self.assertEqual(stored.report["counts"]["shown"], 1)
        self.assertEqual(str(stored), "forward.jsonl (abababab)")
