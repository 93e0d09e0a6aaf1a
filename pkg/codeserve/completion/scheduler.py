import logging
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from codeserve.completion.streaks import (
    CompletionRequest,
    StreakEntry,
    try_adapt,
)

logger = logging.getLogger(__name__)


class SchedulerError(Exception):
    pass

class DuplicateRequest(SchedulerError):
    pass

class UnknownRequest(SchedulerError):
    pass

class ResponseForCompletedEntry(SchedulerError):
    pass


SERVED_FROM_CACHE = "served_from_cache"
DISPATCHED = "dispatched"
ENQUEUED = "enqueued"


@dataclass(frozen=True)
class SubmitDecision:
    outcome: str
    text: Optional[str] = None
    entry: Optional[StreakEntry] = None


@dataclass(frozen=True)
class Delivery:
    request_id: str
    text: str
    served_from: str  # "cache" or "model"


@dataclass
class ResponseResult:
    deliveries: List[Delivery] = field(default_factory=list)
    dispatched: List[CompletionRequest] = field(default_factory=list)
    discarded: bool = False


class StreakScheduler:
    """Per-session state machine that answers completion requests from cached
    or in-flight predictions ("streaks") where possible, keeps at most
    max_in_flight model calls running and queues the rest.

    `dispatch` is called with a CompletionRequest whenever a model call must
    start; the caller reports back through on_model_response/on_model_failure.
    Operations are not thread safe: callers serialize them.
    """

    def __init__(self,
            dispatch: Callable[[CompletionRequest], None],
            max_in_flight=2,
            cache_capacity=16,
            cache_ttl_ms=30000,
            prefix_window_chars=4096,
        ):
        self.dispatch = dispatch
        self.max_in_flight = max_in_flight
        self.cache_capacity = cache_capacity
        self.cache_ttl_ms = cache_ttl_ms
        self.prefix_window_chars = prefix_window_chars

        self.in_flight = OrderedDict()
        self.queue = deque()
        self.cache = []
        self.states = {}

    @classmethod
    def from_config(cls, config, dispatch):
        return cls(
            dispatch,
            max_in_flight=config.max_in_flight,
            cache_capacity=config.cache_capacity,
            cache_ttl_ms=config.cache_ttl_ms,
            prefix_window_chars=config.prefix_window_chars,
        )

    def state_of(self, request_id):
        try:
            return self.states[request_id]
        except KeyError:
            raise UnknownRequest(f"unknown request: {request_id}")

    def try_adapt(self, request):
        return try_adapt(self.cache, request, self.prefix_window_chars)

    def submit(self, request):
        if request.request_id in self.states:
            raise DuplicateRequest(f"request id already used: {request.request_id}")

        adaptation = self.try_adapt(request)
        if adaptation is not None:
            self.states[request.request_id] = "served"
            logger.debug(f"{request} | served from {adaptation.entry}")
            return SubmitDecision(SERVED_FROM_CACHE, text=adaptation.text, entry=adaptation.entry)

        if len(self.in_flight) < self.max_in_flight:
            self._start(request, request.issued_at)
            return SubmitDecision(DISPATCHED)

        self.queue.append(request)
        self.states[request.request_id] = "queued"
        logger.debug(f"{request} | enqueued (queue: {len(self.queue)})")
        return SubmitDecision(ENQUEUED)

    def cancel(self, request_id):
        """Cancel a request and return the state it was in. Queued requests
        never reach the model; in-flight ones keep their slot until the model
        answers, and the answer is cached but not delivered."""

        state = self.state_of(request_id)
        if state == "queued":
            self.queue = deque(r for r in self.queue if r.request_id != request_id)
            self.states[request_id] = "cancelled"
            logger.debug(f"{request_id} | cancelled while queued")
        elif state == "in_flight":
            entry = self.in_flight[request_id]
            entry.status = "cancelled"
            entry.cancelled = True
            self.states[request_id] = "cancelled"
            logger.debug(f"{request_id} | cancelled while in flight")
        return state

    def on_model_response(self, request_id, predicted_text, now=None):
        entry = self._finish(request_id)
        entry.complete(predicted_text)
        self._add_to_cache(entry)

        result = ResponseResult()
        if entry.cancelled:
            result.discarded = True
            logger.debug(f"{request_id} | response discarded, request was cancelled")
        else:
            self.states[request_id] = "completed"
            result.deliveries.append(Delivery(request_id, predicted_text, "model"))

        waiting = deque()
        for request in self.queue:
            adaptation = self.try_adapt(request)
            if adaptation is None:
                waiting.append(request)
                continue
            self.states[request.request_id] = "served"
            result.deliveries.append(Delivery(request.request_id, adaptation.text, "cache"))
            logger.debug(f"{request} | answered from {adaptation.entry} while queued")
        self.queue = waiting

        result.dispatched = self._drain_queue(now)
        return result

    def on_model_failure(self, request_id, now=None):
        """The model call for request_id did not produce a prediction."""
        entry = self._finish(request_id)
        if not entry.cancelled:
            self.states[request_id] = "failed"
        logger.info(f"{request_id} | model call failed")
        return ResponseResult(dispatched=self._drain_queue(now))

    def evict(self, now):
        """Drop completed streaks older than the TTL, then the oldest ones
        beyond capacity. Returns the evicted entries."""
        expired = [e for e in self.cache if now - e.created_at > self.cache_ttl_ms]
        self.cache = [e for e in self.cache if now - e.created_at <= self.cache_ttl_ms]
        expired += self._trim_cache()
        if expired:
            logger.debug(f"evicted {len(expired)} streak(s) at {now} ms")
        return expired

    def _start(self, request, now):
        entry = StreakEntry(origin_request=request, created_at=now)
        self.in_flight[request.request_id] = entry
        self.states[request.request_id] = "in_flight"
        logger.debug(f"{request} | dispatched (in flight: {len(self.in_flight)})")
        self.dispatch(request)

    def _finish(self, request_id):
        entry = self.in_flight.pop(request_id, None)
        if entry is None:
            state = self.state_of(request_id)
            raise ResponseForCompletedEntry(f"{request_id} is not waiting for the model (state: {state})")
        return entry

    def _drain_queue(self, now):
        started = []
        while self.queue and len(self.in_flight) < self.max_in_flight:
            request = self.queue.popleft()
            self._start(request, request.issued_at if now is None else now)
            started.append(request)
        return started

    def _add_to_cache(self, entry):
        self.cache.append(entry)
        self.cache.sort(key=lambda e: e.order_key)
        self._trim_cache()

    def _trim_cache(self):
        overflow = len(self.cache) - self.cache_capacity
        if overflow <= 0:
            return []
        dropped, self.cache = self.cache[:overflow], self.cache[overflow:]
        return dropped
