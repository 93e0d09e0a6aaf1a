import heapq
import asyncio
import logging
import itertools
from functools import partial

from codeserve.backends.base import BackendError

logger = logging.getLogger(__name__)


class HarnessError(Exception):
    pass

class ClockError(HarnessError):
    pass


class VirtualClock:
    """Millisecond clock that only moves when told to. Timers are kept in a
    heap of (time, sequence, callback) so that timers due at the same time
    fire in the order they were set."""

    def __init__(self, start=0):
        self.time = start
        self._timers = []
        self._sequence = itertools.count()

    def now(self):
        return self.time

    @property
    def pending(self):
        return len(self._timers)

    def call_at(self, when, callback):
        heapq.heappush(self._timers, (max(when, self.time), next(self._sequence), callback))

    def call_later(self, delay_ms, callback):
        self.call_at(self.time + delay_ms, callback)

    def submit(self, call, delay_ms, on_result, on_error):
        """Run a model call now and deliver its outcome delay_ms later."""
        try:
            result = call()
        except BackendError as e:
            self.call_later(delay_ms, partial(on_error, e))
        else:
            self.call_later(delay_ms, partial(on_result, result))

    def advance_to(self, when):
        """Fire every timer due at or before `when`, then move to `when`."""
        if when < self.time:
            raise ClockError(f"cannot move back from {self.time} ms to {when} ms")
        while self._timers and self._timers[0][0] <= when:
            self._fire()
        self.time = when

    def drain(self):
        while self._timers:
            self._fire()

    def _fire(self):
        when, _, callback = heapq.heappop(self._timers)
        self.time = when
        callback()


class AsyncioClock:
    """Wall-clock counterpart of VirtualClock on a running event loop. Model
    calls run in the default executor so that a slow backend does not block
    the loop."""

    def __init__(self, loop=None):
        self.loop = loop or asyncio.get_event_loop()
        self.started = self.loop.time()
        self._tasks = set()

    def now(self):
        return int((self.loop.time() - self.started) * 1000)

    @property
    def pending(self):
        return len(self._tasks)

    def call_later(self, delay_ms, callback):
        self._track(self._later(delay_ms, callback))

    def submit(self, call, delay_ms, on_result, on_error):
        self._track(self._run(call, delay_ms, on_result, on_error))

    async def wait_idle(self):
        while self._tasks:
            await asyncio.gather(*list(self._tasks))

    def _track(self, coroutine):
        task = self.loop.create_task(coroutine)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)

    async def _later(self, delay_ms, callback):
        await asyncio.sleep(delay_ms / 1000)
        callback()

    async def _run(self, call, delay_ms, on_result, on_error):
        try:
            result = await self.loop.run_in_executor(None, call)
        except Exception as e:
            if not isinstance(e, BackendError):
                logger.exception(e)
            await asyncio.sleep(delay_ms / 1000)
            on_error(e)
            return
        await asyncio.sleep(delay_ms / 1000)
        on_result(result)
