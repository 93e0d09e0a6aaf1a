import json
import tempfile
from pathlib import Path
from unittest import mock

import requests
from django.test import SimpleTestCase

from codeserve.backends.base import BackendError, ScheduledFailure, UnknownInstruction, load_backend
from codeserve.backends.http import HttpBackend
from codeserve.backends.oracle import OracleBackend
from codeserve.completion.streaks import CompletionRequest
from codeserve.config import ConfigError, EngineConfig
from codeserve.context.packer import SELECTION_START, build_transform_prompt
from codeserve.context.tokens import CharRatioEstimator
from codeserve.edits.script import NoChange, apply_edit, parse_edit_script
from codeserve.session.documents import EditorEvent, EditorSession

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

INSTRUCTION = "use num1 to 3 instead of abc"


def request_at(text, request_id="r1", file_id="main.py"):
    cursor = text.index("|")
    content = text.replace("|", "")
    return CompletionRequest.from_text(request_id, file_id, content, cursor, issued_at=0)


def transform_bundle(instruction, content=BEFORE, selection=None):
    session = EditorSession()
    session.apply_event(EditorEvent.file_open("main.py", 0, content))
    return build_transform_prompt(session.snapshot(), [], "main.py", instruction, selection=selection)


class OracleCompleteTests(SimpleTestCase):

    def setUp(self):
        self.backend = OracleBackend(ground_truth={"main.py": "Build()"}, horizon_chars=6)

    def test_next_chars_of_ground_truth(self):
        self.assertEqual(self.backend.complete(request_at("B|()")), "uild()")

    def test_divergence_returns_empty(self):
        self.assertEqual(self.backend.complete(request_at("X|()")), "")
        self.assertEqual(self.backend.complete(request_at("B|", file_id="other.py")), "")

    def test_scheduled_failure(self):
        backend = OracleBackend(ground_truth={"main.py": "Build()"}, fail_rate=3)
        backend.complete(request_at("B|()", "r1"))
        backend.complete(request_at("B|()", "r2"))
        with self.assertRaises(ScheduledFailure):
            backend.complete(request_at("B|()", "r3"))
        self.assertEqual(backend.complete(request_at("B|()", "r4")), "uild()")

    def test_deterministic(self):
        first = OracleBackend(ground_truth={"main.py": "Build()"}, horizon_chars=3)
        second = OracleBackend(ground_truth={"main.py": "Build()"}, horizon_chars=3)
        self.assertEqual(first.complete(request_at("B|")), second.complete(request_at("B|")))

    def test_horizon_is_capped_by_output_budget(self):
        estimator = CharRatioEstimator(chars_per_token=4)
        backend = OracleBackend(
            ground_truth={"main.py": "x" * 5000},
            horizon_chars=4000,
            estimator=estimator,
            output_budget=128,
        )
        text = backend.complete(request_at("x|"))
        self.assertEqual(len(text), 512)
        self.assertLessEqual(estimator.estimate(text), 128)


class OracleTransformTests(SimpleTestCase):

    def setUp(self):
        self.backend = OracleBackend(transforms={INSTRUCTION: AFTER, "noop": BEFORE})

    def test_scripted_instruction(self):
        text = self.backend.transform(transform_bundle(INSTRUCTION))
        self.assertIn("- " + "    result = abc + num2", text)
        self.assertEqual(apply_edit(parse_edit_script(text), BEFORE), AFTER)

    def test_unscripted_instruction(self):
        with self.assertRaises(UnknownInstruction):
            self.backend.transform(transform_bundle("rename total"))

    def test_identity(self):
        with self.assertRaises(NoChange):
            self.backend.transform(transform_bundle("noop"))

    def test_selection_covering_the_change(self):
        start = BEFORE.index("    result")
        bundle = transform_bundle(INSTRUCTION, selection=(start, start + 10))
        self.assertIn(SELECTION_START + "    result", bundle.text)
        text = self.backend.transform(bundle)
        self.assertEqual(apply_edit(parse_edit_script(text), BEFORE), AFTER)

    def test_selection_elsewhere_changes_nothing(self):
        bundle = transform_bundle(INSTRUCTION, selection=(0, len("import math")))
        with self.assertRaises(NoChange):
            self.backend.transform(bundle)

    def test_only_selected_changes_are_applied(self):
        both = AFTER.replace("import math", "import cmath")
        backend = OracleBackend(transforms={"both": both})
        start = BEFORE.index("abc")
        text = backend.transform(transform_bundle("both", selection=(start, start + 3)))
        self.assertEqual(apply_edit(parse_edit_script(text), BEFORE), AFTER)

        text = backend.transform(transform_bundle("both", selection=(0, 0)))
        self.assertEqual(apply_edit(parse_edit_script(text), BEFORE), BEFORE.replace("math", "cmath"))


class LoadBackendTests(SimpleTestCase):

    def test_oracle_from_fixture(self):
        with tempfile.TemporaryDirectory() as tmp:
            fixture = Path(tmp, "oracle.json")
            fixture.write_text(json.dumps({"ground_truth": {"main.py": "Build()"}}))
            config = EngineConfig(oracle_fixture=str(fixture), oracle_latency_ms=50)
            backend = load_backend(config)
        self.assertIsInstance(backend, OracleBackend)
        self.assertEqual(backend.latency_ms, 50)
        self.assertEqual(backend.complete(request_at("Bu|")), "ild()")

    def test_bad_fixture(self):
        with tempfile.TemporaryDirectory() as tmp:
            fixture = Path(tmp, "oracle.json")
            fixture.write_text(json.dumps({"ground_truth": {"main.py": 3}}))
            with self.assertRaises(ConfigError):
                load_backend(EngineConfig(oracle_fixture=str(fixture)))
            with self.assertRaises(ConfigError):
                load_backend(EngineConfig(oracle_fixture=str(Path(tmp, "missing.json"))))

    def test_http(self):
        config = EngineConfig(model_backend="http", model_endpoint="http://localhost:9/complete")
        self.assertIsInstance(load_backend(config), HttpBackend)


class HttpBackendTests(SimpleTestCase):

    def setUp(self):
        self.backend = HttpBackend("http://model.local/v1", retries=0)

    @mock.patch("codeserve.backends.http.requests.post")
    def test_complete(self, post):
        post.return_value.status_code = 200
        post.return_value.json.return_value = {"text": "uild()"}
        self.assertEqual(self.backend.complete(request_at("B|")), "uild()")
        payload = post.call_args.kwargs["json"]
        self.assertEqual(payload["mode"], "complete")
        self.assertEqual(payload["max_tokens"], 128)

    @mock.patch("codeserve.backends.http.requests.post")
    def test_error_status(self, post):
        post.return_value.status_code = 503
        with self.assertRaises(BackendError):
            self.backend.complete(request_at("B|"))

    @mock.patch("codeserve.backends.http.requests.post")
    def test_connection_error_after_retry(self, post):
        post.side_effect = requests.ConnectionError("refused")
        backend = HttpBackend("http://model.local/v1", retries=1)
        with self.assertRaises(BackendError):
            backend.transform(transform_bundle(INSTRUCTION))
        self.assertEqual(post.call_count, 2)

    @mock.patch("codeserve.backends.http.requests.post")
    def test_transform_sends_the_packed_prompt(self, post):
        post.return_value.status_code = 200
        post.return_value.json.return_value = {"text": "script"}
        start = BEFORE.index("abc")
        bundle = transform_bundle(INSTRUCTION, selection=(start, start + 3))
        self.assertEqual(self.backend.transform(bundle), "script")
        payload = post.call_args.kwargs["json"]
        self.assertEqual(payload["mode"], "transform")
        self.assertEqual(payload["instruction"], INSTRUCTION)
        self.assertIn("<|selection|>abc<|/selection|>", payload["prompt"])
        self.assertTrue(payload["prompt"].endswith("INSTRUCTION\n" + INSTRUCTION))
