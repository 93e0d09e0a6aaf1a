import json
import logging
from pathlib import Path

from codeserve.backends.base import ModelBackend, ScheduledFailure, UnknownInstruction
from codeserve.config import ConfigError
from codeserve.edits.diff import change_blocks, line_diff
from codeserve.edits.script import serialize_edit_script
from codeserve.utils import char_span_to_lines, join_lines, split_lines

logger = logging.getLogger(__name__)


def load_fixture(path):
    """Read an oracle fixture: {"ground_truth": {file: text},
    "transforms": {instruction: after_text}}. Both keys are optional."""

    if not path:
        return {}, {}
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError) as e:
        raise ConfigError(f"{path} | unreadable oracle fixture: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path} | oracle fixture must be a JSON object")

    ground_truth = data.get("ground_truth", {})
    transforms = data.get("transforms", {})
    for name, table in (("ground_truth", ground_truth), ("transforms", transforms)):
        if not isinstance(table, dict) or not all(isinstance(v, str) for v in table.values()):
            raise ConfigError(f"{path} | '{name}' must map names to strings")
    return ground_truth, transforms


def changes_within(before, after, selection):
    """`before` with only those changes towards `after` applied that touch the
    lines of the selected character span. An insertion touches the selection
    when it sits inside it or right after its last line."""

    a, b = split_lines(before), split_lines(after)
    first, last = char_span_to_lines(before, *selection)
    kept, pos = [], 0
    for a_start, a_end, b_start, b_end in change_blocks(line_diff(a, b)):
        if a_end > a_start:
            touches = a_start < last and a_end > first
        else:
            touches = first <= a_start <= last
        kept.extend(a[pos:a_start])
        kept.extend(b[b_start:b_end] if touches else a[a_start:a_end])
        pos = a_end
    kept.extend(a[pos:])
    return join_lines(kept)


class OracleBackend(ModelBackend):
    """Deterministic stand-in for a model that already knows the final
    content of every file. A completion is the next `horizon_chars` of the
    ground truth after the cursor, or "" once the document has diverged
    from it. With fail_rate N every Nth completion raises ScheduledFailure."""

    name = "oracle"

    def __init__(self,
            ground_truth=None,
            transforms=None,
            horizon_chars=64,
            latency_ms=200,
            fail_rate=0,
            estimator=None,
            output_budget=128,
        ):
        super().__init__(estimator=estimator, output_budget=output_budget)
        if horizon_chars <= 0:
            raise ConfigError("ORACLE_HORIZON_CHARS must be greater than 0")
        self.ground_truth = dict(ground_truth or {})
        self.transforms = dict(transforms or {})
        self.horizon_chars = horizon_chars
        self.latency_ms = latency_ms
        self.fail_rate = fail_rate
        self.calls = 0

    @classmethod
    def from_config(cls, config, estimator=None):
        ground_truth, transforms = load_fixture(config.oracle_fixture)
        return cls(
            ground_truth=ground_truth,
            transforms=transforms,
            horizon_chars=config.oracle_horizon_chars,
            latency_ms=config.oracle_latency_ms,
            fail_rate=config.oracle_fail_rate,
            estimator=estimator,
            output_budget=config.output_budget_tokens,
        )

    def complete(self, request, bundle=None):
        self.calls += 1
        if self.fail_rate and self.calls % self.fail_rate == 0:
            raise ScheduledFailure(f"{request.request_id} | scheduled failure (call {self.calls})")

        truth = self.ground_truth.get(request.file_id)
        if truth is None:
            return ""
        start = request.anchor - len(request.prefix_window)
        if start < 0 or truth[start:request.anchor] != request.prefix_window:
            logger.debug(f"{request} | document diverged from ground truth")
            return ""
        return self.cap_output(truth[request.anchor:request.anchor + self.horizon_chars], bundle)

    def transform(self, bundle):
        before = bundle.section(bundle.file_id)
        try:
            after = self.transforms[bundle.instruction]
        except KeyError:
            raise UnknownInstruction(f"no scripted result for instruction: {bundle.instruction!r}")
        if bundle.selection is not None:
            after = changes_within(before, after, bundle.selection)
        return serialize_edit_script(before, after).to_text()
