import logging

from codeserve.context.tokens import CharRatioEstimator

logger = logging.getLogger(__name__)


class BackendError(Exception):
    pass

class ScheduledFailure(BackendError):
    """The backend was configured to drop this request."""

class UnknownInstruction(BackendError):
    pass


class ModelBackend:
    """Contract for completion/edit models.

    complete() answers a CompletionRequest (with its packed PromptBundle)
    with the text to insert at the cursor, capped at the bundle's output
    budget. transform() answers a transform PromptBundle (whole target file,
    selection and instruction) with an edit script in the anchored text
    format. `latency_ms` is the simulated delay
    the harness applies before a response is delivered.
    """

    name = "base"
    latency_ms = 0

    def __init__(self, estimator=None, output_budget=128):
        self.estimator = estimator or CharRatioEstimator()
        self.output_budget = output_budget

    def __str__(self):
        return f"{self.name} backend"

    def complete(self, request, bundle=None):
        raise NotImplementedError

    def transform(self, bundle):
        raise NotImplementedError

    def cap_output(self, text, bundle=None):
        budget = bundle.output_budget if bundle is not None else self.output_budget
        capped = self.estimator.truncate(text, budget)
        if len(capped) < len(text):
            logger.debug(f"{self} | response cut from {len(text)} to {len(capped)} chars")
        return capped


def load_backend(config, estimator=None):
    """Instantiate the backend named by config.model_backend."""

    if config.model_backend == "oracle":
        from codeserve.backends.oracle import OracleBackend
        return OracleBackend.from_config(config, estimator)
    if config.model_backend == "http":
        from codeserve.backends.http import HttpBackend
        return HttpBackend.from_config(config, estimator)
    raise BackendError(f"unknown model backend: {config.model_backend}")
