import logging
from dataclasses import dataclass
from typing import List, Optional

logger = logging.getLogger(__name__)


class MetricsError(Exception):
    pass

class EmptyLog(MetricsError):
    pass

class UnmatchedSuggestion(MetricsError):
    """An accept or reject that does not resolve a shown, unresolved suggestion."""


METRIC_EVENT_KINDS = (
    ("typed", "characters typed by the user"),
    ("pasted", "characters pasted by the user"),
    ("request_issued", "completion requested"),
    ("request_latency", "completion answered"),
    ("request_failed", "model call failed"),
    ("request_cancelled", "completion cancelled"),
    ("suggestion_shown", "suggestion displayed"),
    ("suggestion_accepted", "suggestion accepted"),
    ("suggestion_rejected", "suggestion rejected"),
    ("transform_requested", "transform prompt sent, chars is the prompt length"),
    ("transform_failed", "transform produced no applicable edit"),
    ("transform_shown", "proposed edit displayed, chars is the diff size"),
    ("transform_accepted", "proposed edit applied"),
    ("transform_rejected", "proposed edit dismissed"),
)
KIND_NAMES = {k for k, _ in METRIC_EVENT_KINDS}

# accept/reject kinds and the kind of event they resolve
RESOLVES = {
    "suggestion_accepted": "suggestion_shown",
    "suggestion_rejected": "suggestion_shown",
    "transform_accepted": "transform_shown",
    "transform_rejected": "transform_shown",
}


@dataclass(frozen=True)
class MetricEvent:
    kind: str
    ts: int = 0
    chars: int = 0
    full_file: bool = False
    suggestion_id: Optional[str] = None
    ms: int = 0
    served_from: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KIND_NAMES:
            raise ValueError(f"invalid metric event kind: {self.kind}")

    @classmethod
    def typed(cls, chars, ts=0):
        return cls("typed", ts=ts, chars=chars)

    @classmethod
    def pasted(cls, chars, full_file=False, ts=0):
        return cls("pasted", ts=ts, chars=chars, full_file=full_file)

    @classmethod
    def request_issued(cls, request_id, ts=0):
        return cls("request_issued", ts=ts, suggestion_id=request_id)

    @classmethod
    def request_latency(cls, ms, served_from, ts=0, request_id=None):
        return cls("request_latency", ts=ts, ms=ms, served_from=served_from, suggestion_id=request_id)

    @classmethod
    def request_failed(cls, request_id, ts=0):
        return cls("request_failed", ts=ts, suggestion_id=request_id)

    @classmethod
    def request_cancelled(cls, request_id, ts=0):
        return cls("request_cancelled", ts=ts, suggestion_id=request_id)

    @classmethod
    def shown(cls, suggestion_id, ts, chars):
        return cls("suggestion_shown", ts=ts, chars=chars, suggestion_id=suggestion_id)

    @classmethod
    def accepted(cls, suggestion_id, ts):
        return cls("suggestion_accepted", ts=ts, suggestion_id=suggestion_id)

    @classmethod
    def rejected(cls, suggestion_id, ts):
        return cls("suggestion_rejected", ts=ts, suggestion_id=suggestion_id)

    @classmethod
    def transform_requested(cls, transform_id, ts, prompt_chars):
        return cls("transform_requested", ts=ts, chars=prompt_chars, suggestion_id=transform_id)

    @classmethod
    def transform_failed(cls, transform_id, ts):
        return cls("transform_failed", ts=ts, suggestion_id=transform_id)

    @classmethod
    def transform_shown(cls, transform_id, ts, diff_chars):
        return cls("transform_shown", ts=ts, chars=diff_chars, suggestion_id=transform_id)

    @classmethod
    def transform_accepted(cls, transform_id, ts):
        return cls("transform_accepted", ts=ts, suggestion_id=transform_id)

    @classmethod
    def transform_rejected(cls, transform_id, ts):
        return cls("transform_rejected", ts=ts, suggestion_id=transform_id)


class SessionEventLog:
    """Append-only metric log of one session. Accepts and rejects must refer
    to a suggestion (or proposed edit) that was shown before and is still
    unresolved. Completion suggestions and proposed edits have separate ids."""

    def __init__(self, events=None):
        self.events: List[MetricEvent] = []
        self.shown = {}
        self.transforms = {}
        self.resolved = set()
        for event in events or []:
            self.append(event)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def _shown_table(self, kind):
        return self.shown if kind == "suggestion_shown" else self.transforms

    def append(self, event):
        if event.kind in ("suggestion_shown", "transform_shown"):
            table = self._shown_table(event.kind)
            if event.suggestion_id in table:
                raise UnmatchedSuggestion(f"{event.suggestion_id} | shown twice")
            table[event.suggestion_id] = event
        elif event.kind in RESOLVES:
            shown_kind = RESOLVES[event.kind]
            if event.suggestion_id not in self._shown_table(shown_kind):
                raise UnmatchedSuggestion(f"{event.suggestion_id} | was never shown")
            if (shown_kind, event.suggestion_id) in self.resolved:
                raise UnmatchedSuggestion(f"{event.suggestion_id} | already resolved")
            self.resolved.add((shown_kind, event.suggestion_id))
        self.events.append(event)
        return event

    def of_kind(self, kind):
        return [e for e in self.events if e.kind == kind]

    def is_open(self, suggestion_id, kind="suggestion_shown"):
        return (
            suggestion_id in self._shown_table(kind)
            and (kind, suggestion_id) not in self.resolved
        )
