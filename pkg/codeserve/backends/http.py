import logging

import requests

from codeserve.backends.base import BackendError, ModelBackend

logger = logging.getLogger(__name__)


class HttpBackend(ModelBackend):
    """Adapter for a real model served over HTTP. Both operations POST JSON
    to MODEL_ENDPOINT and expect {"text": ...} back:

        {"mode": "complete", "prompt": ..., "max_tokens": ...}
        {"mode": "transform", "prompt": ..., "instruction": ..., "max_tokens": ...}
    """

    name = "http"

    def __init__(self, endpoint, timeout_s=10.0, latency_ms=0, estimator=None, output_budget=128, retries=1):
        super().__init__(estimator=estimator, output_budget=output_budget)
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.latency_ms = latency_ms
        self.retries = retries

    @classmethod
    def from_config(cls, config, estimator=None):
        return cls(
            config.model_endpoint,
            timeout_s=config.model_timeout_s,
            latency_ms=config.model_latency_ms,
            estimator=estimator,
            output_budget=config.output_budget_tokens,
        )

    def _post(self, payload):
        retries = self.retries
        while True:
            logger.debug(f"POST {self.endpoint} ({payload['mode']})")
            try:
                response = requests.post(self.endpoint, json=payload, timeout=self.timeout_s)
            except requests.RequestException as e:
                if retries > 0:
                    retries -= 1
                    logger.warning(f"{self.endpoint} | {e}, retries left: {retries}")
                    continue
                raise BackendError(f"{self.endpoint} | request failed: {e}")
            if response.status_code != 200:
                raise BackendError(f"{self.endpoint} | response code: {response.status_code}")
            try:
                text = response.json()["text"]
            except (ValueError, KeyError, TypeError):
                raise BackendError(f"{self.endpoint} | malformed response body")
            if not isinstance(text, str):
                raise BackendError(f"{self.endpoint} | 'text' must be a string")
            return text

    def complete(self, request, bundle=None):
        payload = {
            "mode": "complete",
            "prompt": bundle.text if bundle is not None else request.prefix_window,
            "max_tokens": bundle.output_budget if bundle is not None else self.output_budget,
        }
        return self.cap_output(self._post(payload), bundle)

    def transform(self, bundle):
        payload = {
            "mode": "transform",
            "prompt": bundle.text,
            "instruction": bundle.instruction,
            "max_tokens": bundle.output_budget,
        }
        return self._post(payload)
