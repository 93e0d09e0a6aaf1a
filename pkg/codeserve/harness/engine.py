import logging
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Optional

from codeserve.backends.base import BackendError
from codeserve.completion.scheduler import SERVED_FROM_CACHE, DuplicateRequest, StreakScheduler
from codeserve.completion.streaks import CompletionRequest
from codeserve.context.packer import PackingError, pack_for_request, pack_for_transform
from codeserve.edits.diff import render_diff
from codeserve.edits.script import EditScriptError, apply_edit, parse_edit_script
from codeserve.harness.clock import HarnessError
from codeserve.metrics.events import MetricEvent, SessionEventLog
from codeserve.metrics.report import MetricsReport
from codeserve.session.documents import EditorEvent, EditorSession

logger = logging.getLogger(__name__)


class NoFocusedDocument(HarnessError):
    pass

class InvalidAction(HarnessError):
    """An accept or reject that does not match an open suggestion or proposed
    edit, or a request id that is already taken."""


@dataclass(frozen=True)
class Outcome:
    """The single terminal result of a completion request."""

    request_id: str
    status: str
    text: str = ""
    served_from: Optional[str] = None
    error: Optional[Exception] = None


def changed_span(before, after):
    """(offset, removed, added) of the single region where the texts differ,
    after stripping their common prefix and suffix."""
    head = 0
    limit = min(len(before), len(after))
    while head < limit and before[head] == after[head]:
        head += 1
    tail = 0
    while tail < limit - head and before[-1 - tail] == after[-1 - tail]:
        tail += 1
    return head, before[head:len(before) - tail], after[head:len(after) - tail]


@dataclass(frozen=True)
class TransformResult:
    """A proposed edit of one file. `content` is the file as it would be
    after applying `script` to `before`."""

    transform_id: str
    file_id: str
    script: str
    before: str
    content: str
    diff: object

    @property
    def diff_chars(self):
        _, removed, added = changed_span(self.before, self.content)
        return len(removed) + len(added)


class EngineSession:
    """One editor session wired end to end: editor events feed the session
    state, completion requests go through the streak scheduler, dispatched
    requests are packed and sent to the backend through the clock, and
    everything the user sees or does lands in the metric log.

    `clock` is a VirtualClock for replays or an AsyncioClock for serving;
    `on_outcome` is called once per request with its terminal Outcome.
    """

    def __init__(self, config, backend, clock, estimator, on_outcome: Callable[[Outcome], None] = None):
        self.config = config
        self.backend = backend
        self.clock = clock
        self.estimator = estimator
        self.on_outcome = on_outcome

        self.session = EditorSession(edit_history_capacity=config.edit_history_capacity)
        self.scheduler = StreakScheduler.from_config(config, self._dispatch)
        self.log = SessionEventLog()
        self.requests = {}
        self.outcomes = {}
        self.suggestions = {}
        self.transforms = {}
        self._snapshots = {}
        self._request_count = 0

    def __str__(self):
        return f"engine session ({self.backend})"

    ## editor

    def apply(self, event):
        doc = self.session.apply_event(event)
        if event.kind == "insert":
            self.log.append(MetricEvent.typed(len(event.text), event.timestamp))
        elif event.kind == "paste":
            self.log.append(MetricEvent.pasted(len(event.text), event.full_file, event.timestamp))
        return doc

    def _editor_event(self, kind, file_id, **kwargs):
        return self.session.apply_event(EditorEvent(kind, file_id, self.clock.now(), **kwargs))

    ## ids

    def _taken(self, some_id):
        return some_id in self.scheduler.states or some_id in self.transforms or some_id in self.requests

    def next_request_id(self, prefix="r"):
        while True:
            self._request_count += 1
            request_id = f"{prefix}{self._request_count}"
            if not self._taken(request_id):
                return request_id

    ## completion

    def request_completion(self, request_id=None):
        """Submit a completion request at the cursor of the focused document.
        Returns the request id; the outcome arrives through on_outcome. The
        request is packed from the session as it is now, even when it is
        dispatched later."""

        doc = self.session.focused
        if doc is None:
            raise NoFocusedDocument("no document is focused")
        if request_id is not None and request_id in self.transforms:
            raise InvalidAction(f"{request_id} | id already used by a transform")
        if request_id is not None and request_id in self.scheduler.states:
            raise DuplicateRequest(f"request id already used: {request_id}")
        request_id = request_id or self.next_request_id()
        now = self.clock.now()
        request = CompletionRequest.from_document(
            request_id,
            doc,
            issued_at=now,
            prefix_chars=self.config.prefix_window_chars,
            suffix_chars=self.config.suffix_window_chars,
        )

        self.scheduler.evict(now)
        # dispatch may happen inside submit
        self._snapshots[request_id] = self.session.snapshot()
        decision = self.scheduler.submit(request)
        self.requests[request_id] = request
        self.log.append(MetricEvent.request_issued(request_id, now))
        if decision.outcome == SERVED_FROM_CACHE:
            self._deliver(request_id, decision.text, "cache")
        return request_id

    def cancel(self, request_id):
        state = self.scheduler.cancel(request_id)
        if state in ("queued", "in_flight"):
            self.log.append(MetricEvent.request_cancelled(request_id, self.clock.now()))
            self._finish(Outcome(request_id, "cancelled"))
        return state

    def _dispatch(self, request):
        snapshot = self._snapshots.pop(request.request_id, None) or self.session.snapshot()
        try:
            if request.file_id not in self.session.documents:
                raise PackingError(f"{request.file_id} | closed before the request was sent")
            bundle = pack_for_request(snapshot, self.config, self.estimator, file_id=request.file_id)
        except PackingError as e:
            logger.warning(f"{request} | {e}")
            self.clock.call_later(0, partial(self._on_failure, request.request_id, e))
            return
        self.clock.submit(
            partial(self.backend.complete, request, bundle),
            self.backend.latency_ms,
            partial(self._on_response, request.request_id),
            partial(self._on_failure, request.request_id),
        )

    def _on_response(self, request_id, text):
        result = self.scheduler.on_model_response(request_id, text, now=self.clock.now())
        for delivery in result.deliveries:
            self._deliver(delivery.request_id, delivery.text, delivery.served_from)

    def _on_failure(self, request_id, error):
        self.scheduler.on_model_failure(request_id, now=self.clock.now())
        if self.scheduler.states[request_id] == "failed":
            self.log.append(MetricEvent.request_failed(request_id, self.clock.now()))
            self._finish(Outcome(request_id, "error", error=error))

    def _deliver(self, request_id, text, served_from):
        now = self.clock.now()
        latency = now - self.requests[request_id].issued_at
        self.log.append(MetricEvent.request_latency(latency, served_from, now, request_id))
        if text:
            self.log.append(MetricEvent.shown(request_id, now, len(text)))
            self.suggestions[request_id] = text
            self._finish(Outcome(request_id, "suggestion", text, served_from))
        else:
            self._finish(Outcome(request_id, "empty", "", served_from))

    def _finish(self, outcome):
        self._snapshots.pop(outcome.request_id, None)
        self.outcomes[outcome.request_id] = outcome
        logger.debug(f"{outcome.request_id} | {outcome.status} ({outcome.served_from})")
        if self.on_outcome is not None:
            self.on_outcome(outcome)

    ## suggestions and proposed edits

    def _open_suggestion(self, request_id):
        if not self.log.is_open(request_id):
            raise InvalidAction(f"{request_id} | no open suggestion with this id")
        return self.suggestions[request_id]

    def _open_transform(self, transform_id):
        if not self.log.is_open(transform_id, kind="transform_shown"):
            raise InvalidAction(f"{transform_id} | no open proposed edit with this id")
        return self.transforms[transform_id]

    def accept(self, request_id):
        """Accept a shown suggestion or proposed edit. A suggestion's text is
        inserted at the cursor and returned; it does not count as typed. A
        proposed edit is applied and the TransformResult for the new content
        is returned."""
        if request_id in self.transforms:
            return self._accept_transform(request_id)
        text = self._open_suggestion(request_id)
        doc = self.session.focused
        if doc is None:
            raise NoFocusedDocument("no document is focused")
        self.log.append(MetricEvent.accepted(request_id, self.clock.now()))
        self._editor_event("insert", doc.file_id, text=text)
        return text

    def reject(self, request_id):
        if request_id in self.transforms:
            self._open_transform(request_id)
            self.log.append(MetricEvent.transform_rejected(request_id, self.clock.now()))
            return
        self._open_suggestion(request_id)
        self.log.append(MetricEvent.rejected(request_id, self.clock.now()))

    ## transform

    def transform(self, file_id, instruction, selection=None, transform_id=None):
        """Ask the backend to rewrite a file and render the proposed change.
        The document is left untouched until the edit is accepted."""

        if transform_id is not None and self._taken(transform_id):
            raise InvalidAction(f"{transform_id} | id already used")
        transform_id = transform_id or self.next_request_id(prefix="t")
        bundle = pack_for_transform(
            self.session.snapshot(), self.config, self.estimator, file_id, instruction, selection
        )
        before = bundle.section(file_id)
        self.log.append(MetricEvent.transform_requested(transform_id, self.clock.now(), len(bundle.text)))
        try:
            script = self.backend.transform(bundle)
            after = apply_edit(parse_edit_script(script), before)
        except (BackendError, EditScriptError) as e:
            logger.warning(f"{transform_id} | {file_id} | {e.__class__.__name__}: {e}")
            self.log.append(MetricEvent.transform_failed(transform_id, self.clock.now()))
            raise

        result = TransformResult(transform_id, file_id, script, before, after, render_diff(before, after))
        self.transforms[transform_id] = result
        self.log.append(MetricEvent.transform_shown(transform_id, self.clock.now(), result.diff_chars))
        logger.info(f"{transform_id} | {file_id} | proposed edit for {instruction!r}")
        return result

    def _accept_transform(self, transform_id):
        result = self._open_transform(transform_id)
        current = self.session.document(result.file_id).content
        after = result.content
        if current != result.before:
            # edited since the proposal: the anchors decide whether it still applies
            after = apply_edit(parse_edit_script(result.script), current)
        self.log.append(MetricEvent.transform_accepted(transform_id, self.clock.now()))
        self._replace_content(result.file_id, current, after)
        logger.info(f"{transform_id} | {result.file_id} | proposed edit applied")
        return replace(result, before=current, content=after, diff=render_diff(current, after))

    def _replace_content(self, file_id, before, after):
        head, removed, added = changed_span(before, after)
        self._editor_event("cursor_move", file_id, offset=head + len(removed))
        if removed:
            self._editor_event("delete", file_id, count=len(removed))
        if added:
            self._editor_event("insert", file_id, text=added)

    ## trace

    def handle_trace_event(self, event):
        if event.is_editor_event:
            return self.apply(event.to_editor_event(self.clock.now()))
        if event.kind == "request":
            return self.request_completion(event.id)
        if event.kind == "cancel":
            return self.cancel(event.id)
        if event.kind == "accept":
            return self.accept(event.id)
        if event.kind == "reject":
            return self.reject(event.id)
        if event.kind == "transform":
            return self.transform(event.file, event.instruction, event.selection, event.id)
        raise HarnessError(f"unhandled trace kind: {event.kind}")

    def report(self):
        return MetricsReport.from_log(self.log)
