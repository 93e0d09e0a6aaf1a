import asyncio
import logging

from codeserve.backends.base import BackendError, load_backend
from codeserve.completion.scheduler import SchedulerError
from codeserve.context.scopes import PackingError
from codeserve.context.tokens import load_estimator
from codeserve.edits.script import EditScriptError
from codeserve.harness.clock import AsyncioClock, HarnessError, VirtualClock
from codeserve.harness.engine import EngineSession
from codeserve.metrics.events import MetricsError
from codeserve.session.documents import SessionError

logger = logging.getLogger(__name__)


class InvalidTrace(HarnessError):
    """A well-formed trace event that is not valid in the current state."""


## errors that mean the trace asked for something impossible
TRACE_STATE_ERRORS = (
    SessionError,
    SchedulerError,
    MetricsError,
    EditScriptError,
    BackendError,
    PackingError,
    HarnessError,
)


def make_engine(config, clock, backend=None, estimator=None):
    estimator = estimator or load_estimator(config.token_estimator, config.chars_per_token)
    backend = backend or load_backend(config, estimator)
    return EngineSession(config, backend, clock, estimator)


def _handle(engine, event, name):
    try:
        engine.handle_trace_event(event)
    except TRACE_STATE_ERRORS as e:
        raise InvalidTrace(f"{name}: {event} | {e.__class__.__name__}: {e}")


def replay(events, config, backend=None, estimator=None, name="<trace>"):
    """Replay parsed trace events under virtual time and return the engine,
    whose report() is a pure function of (events, config). Timers due at or
    before an event's timestamp fire before the event; pending model calls
    are drained once the trace is exhausted."""

    clock = VirtualClock()
    engine = make_engine(config, clock, backend, estimator)
    for event in events:
        clock.advance_to(event.ts)
        _handle(engine, event, name)
    clock.drain()
    logger.info(f"{name} | replayed {len(events)} event(s), {len(engine.log)} metric event(s)")
    return engine


async def _replay_wall_clock(events, config, backend, estimator, name):
    clock = AsyncioClock(asyncio.get_running_loop())
    engine = make_engine(config, clock, backend, estimator)
    for event in events:
        delay = event.ts - clock.now()
        if delay > 0:
            await asyncio.sleep(delay / 1000)
        _handle(engine, event, name)
    await clock.wait_idle()
    return engine


def replay_wall_clock(events, config, backend=None, estimator=None, name="<trace>"):
    """Same as replay() but sleeping in real time; results vary with timing."""
    engine = asyncio.run(_replay_wall_clock(events, config, backend, estimator, name))
    logger.info(f"{name} | replayed {len(events)} event(s) on the wall clock")
    return engine
