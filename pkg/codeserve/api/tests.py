from django.test import TestCase, override_settings

from codeserve.api.models import Key
from codeserve.metrics.models import ReplayRun

BEFORE = "import math\ndef total(num1, num2):\n    result = abc + num2\n    return result\n"
AFTER = "import math\ndef total(num1, num2):\n    result = num1 + num2\n    return result\n"


@override_settings(CODESERVE_API_KEY="")
class EditEndpointTests(TestCase):

    def post(self, name, data):
        return self.client.post(f"/api/v1/{name}/", data, content_type="application/json")

    def test_diff(self):
        response = self.post("diff", {"before": BEFORE, "after": AFTER})
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertEqual(data["counts"]["modified"], 1)
        self.assertEqual(data["decorated_count"], 2)
        modified = [line for line in data["lines"] if line["tag"] == "modified"][0]
        self.assertEqual(modified["removed_spans"], [[13, 16]])
        self.assertIn("= import math", data["script"])

    def test_diff_without_change(self):
        data = self.post("diff", {"before": BEFORE, "after": BEFORE}).json()
        self.assertIsNone(data["script"])
        self.assertEqual(data["decorated_count"], 0)

    def test_patch(self):
        script = self.post("diff", {"before": BEFORE, "after": AFTER}).json()["script"]
        response = self.post("patch", {"script": script, "content": BEFORE})
        self.assertEqual(response.json(), {"content": AFTER, "hunks": 1})

    def test_patch_with_missing_anchor(self):
        script = "@@\n= nothing\n= like\n- this\n+ that\n= here\n"
        response = self.post("patch", {"script": script, "content": BEFORE})
        self.assertEqual(response.status_code, 400)
        self.assertTrue(response.json()["detail"].startswith("AnchorNotFound"))


@override_settings(CODESERVE_API_KEY="")
class MetricsEndpointTests(TestCase):

    def post(self, events):
        return self.client.post("/api/v1/metrics/", {"events": events}, content_type="application/json")

    def test_report(self):
        response = self.post([
            {"kind": "typed", "chars": 513},
            {"kind": "pasted", "chars": 200},
            {"kind": "suggestion_shown", "suggestion_id": "s1", "chars": 287, "ts": 0},
            {"kind": "suggestion_accepted", "suggestion_id": "s1", "ts": 900},
            {"kind": "request_latency", "ms": 120, "served_from": "model"},
        ])
        self.assertEqual(response.status_code, 200)
        data = response.json()
        self.assertEqual(data["fcml"], 0.287)
        self.assertEqual(data["latency_p50_ms"], 120)
        self.assertEqual(data["counts"]["accepted"], 1)

    def test_bad_events(self):
        self.assertEqual(self.post([{"kind": "clicked"}]).status_code, 400)
        response = self.post([{"kind": "suggestion_rejected", "suggestion_id": "x"}])
        self.assertEqual(response.status_code, 400)
        self.assertIn("UnmatchedSuggestion", response.json()["detail"])


@override_settings(CODESERVE_API_KEY="secret")
class AuthTests(TestCase):

    def test_key_required(self):
        self.assertEqual(self.client.get("/api/v1/runs/").status_code, 401)
        response = self.client.get("/api/v1/runs/", HTTP_X_API_KEY="secret")
        self.assertEqual(response.status_code, 200)

    def test_stored_key(self):
        key = Key.objects.create(label="plugin")
        self.assertEqual(self.client.get("/api/v1/runs/", HTTP_X_API_KEY=key.value).status_code, 200)
        key.refresh_from_db()
        self.assertEqual(key.request_count, 1)

        key.active = False
        key.save()
        self.assertEqual(self.client.get("/api/v1/runs/", HTTP_X_API_KEY=key.value).status_code, 401)

    def test_list_runs(self):
        ReplayRun.objects.create(trace_name="a.jsonl", trace_sha256="0" * 64, fcml=0.5)
        ReplayRun.objects.create(trace_name="b.jsonl", trace_sha256="1" * 64)
        response = self.client.get("/api/v1/runs/?trace_name=a.jsonl", HTTP_X_API_KEY="secret")
        data = response.json()
        self.assertEqual(data["count"], 1)
        self.assertEqual(data["items"][0]["fcml"], 0.5)
