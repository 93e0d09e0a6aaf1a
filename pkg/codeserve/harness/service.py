import sys
import json
import asyncio
import logging

from codeserve.config import ConfigError
from codeserve.harness.clock import AsyncioClock, HarnessError
from codeserve.harness.engine import TransformResult
from codeserve.harness.replay import TRACE_STATE_ERRORS, make_engine
from codeserve.session.documents import EditorEvent

logger = logging.getLogger(__name__)


class ProtocolError(HarnessError):
    pass

class BindError(HarnessError):
    pass


## "edit" message kinds and the EditorEvent kinds they map to
EDIT_KINDS = {
    "insert": "insert",
    "delete": "delete",
    "move": "cursor_move",
    "paste": "paste",
    "close": "file_close",
}

## errors reported to the client; the connection stays open after any of them
CLIENT_ERRORS = TRACE_STATE_ERRORS + (ProtocolError,)


def _field(message, key, expected, default=None, required=True):
    if key not in message:
        if required:
            raise ProtocolError(f"'{message.get('op')}' needs '{key}'")
        return default
    value = message[key]
    if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
        raise ProtocolError(f"'{key}' must be {getattr(expected, '__name__', 'a string or number')}")
    return value


def parse_listen(address):
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"listen address must be host:port, got '{address}'")
    return host or "127.0.0.1", int(port)


class ProtocolSession:
    """Speaks the line-delimited JSON protocol for one EngineSession.

    Every request carries an "id" and an "op"; every request gets exactly
    one response with the same id. "complete" answers as soon as the
    request has a terminal outcome, which may be after later requests were
    answered. `send` receives response dicts.
    """

    def __init__(self, engine, send):
        self.engine = engine
        self.send = send
        self.completions = {}
        engine.on_outcome = self._on_outcome

    def handle_line(self, line):
        line = line.strip()
        if not line:
            return
        message_id = None
        try:
            try:
                message = json.loads(line)
            except ValueError as e:
                raise ProtocolError(f"invalid JSON: {e}")
            if not isinstance(message, dict):
                raise ProtocolError("expected a JSON object")
            message_id = message.get("id")
            if message_id is None or isinstance(message_id, (dict, list, bool)):
                raise ProtocolError("every request needs a string or number 'id'")
            self.handle(message)
        except CLIENT_ERRORS as e:
            self.error(message_id, e)
        except Exception as e:
            logger.exception(e)
            self.error(message_id, e)

    def handle(self, message):
        op = message.get("op")
        handler = getattr(self, f"op_{op}", None) if isinstance(op, str) else None
        if handler is None:
            raise ProtocolError(f"unknown op: {op!r}")
        result = handler(message)
        if result is not None:
            self.reply(message["id"], **result)

    def reply(self, message_id, **fields):
        self.send({"id": message_id, "ok": True, **fields})

    def error(self, message_id, exception):
        logger.debug(f"{message_id} | {exception.__class__.__name__}: {exception}")
        self.send({
            "id": message_id,
            "ok": False,
            "error": {"type": exception.__class__.__name__, "message": str(exception)},
        })

    def _event(self, kind, file_id, **kwargs):
        return EditorEvent(kind, file_id, self.engine.clock.now(), **kwargs)

    ## ops

    def op_open(self, message):
        file_id = _field(message, "file", str)
        content = _field(message, "content", str)
        doc = self.engine.apply(self._event("file_open", file_id, content=content))
        return {"version": doc.version}

    def op_edit(self, message):
        file_id = _field(message, "file", str)
        kind = _field(message, "kind", str)
        if kind not in EDIT_KINDS:
            raise ProtocolError(f"unknown edit kind: {kind!r}")
        event = self._event(
            EDIT_KINDS[kind],
            file_id,
            text=_field(message, "text", str, "", kind in ("insert", "paste")),
            count=_field(message, "count", int, 0, kind == "delete"),
            offset=_field(message, "offset", int, 0, kind == "move"),
            full_file=_field(message, "full_file", bool, False, False),
        )
        doc = self.engine.apply(event)
        if doc is None:
            return {}
        return {"version": doc.version, "cursor": doc.cursor}

    def op_complete(self, message):
        request_id = str(message["id"])
        if request_id in self.completions:
            raise ProtocolError(f"request id already used: {request_id}")
        self.completions[request_id] = message["id"]
        try:
            self.engine.request_completion(request_id)
        except Exception:
            self.completions.pop(request_id, None)
            raise
        return None

    def op_cancel(self, message):
        target = str(_field(message, "target", (str, int)))
        state = self.engine.cancel(target)
        return {"state": state}

    def op_accept(self, message):
        result = self.engine.accept(str(_field(message, "target", (str, int))))
        if isinstance(result, TransformResult):
            return {"content": result.content, "diff": result.diff.to_dict()}
        return {"text": result}

    def op_reject(self, message):
        self.engine.reject(str(_field(message, "target", (str, int))))
        return {}

    def op_transform(self, message):
        file_id = _field(message, "file", str)
        instruction = _field(message, "instruction", str)
        selection = _field(message, "selection", list, None, False)
        result = self.engine.transform(file_id, instruction, selection, str(message["id"]))
        return {
            "target": result.transform_id,
            "content": result.content,
            "script": result.script,
            "diff": result.diff.to_dict(),
        }

    def op_metrics(self, message):
        return {"report": self.engine.report().to_dict()}

    ## outcomes

    def _on_outcome(self, outcome):
        message_id = self.completions.pop(outcome.request_id, outcome.request_id)
        if outcome.status == "error":
            self.error(message_id, outcome.error)
            return
        fields = {"status": outcome.status}
        if outcome.status != "cancelled":
            fields.update(text=outcome.text, served_from=outcome.served_from)
        self.reply(message_id, **fields)


class EngineService:
    """asyncio service running one ProtocolSession per connection, over TCP
    or over standard streams."""

    def __init__(self, config, backend=None):
        self.config = config
        self.backend = backend
        self.connections = 0

    def new_session(self, send):
        clock = AsyncioClock(asyncio.get_running_loop())
        return ProtocolSession(make_engine(self.config, clock, backend=self.backend), send)

    async def run_session(self, reader, send):
        session = self.new_session(send)
        while True:
            raw = await reader.readline()
            if not raw:
                break
            session.handle_line(raw.decode("utf-8", errors="replace"))
        await session.engine.clock.wait_idle()

    async def handle_connection(self, reader, writer):
        self.connections += 1
        peer = writer.get_extra_info("peername")
        logger.info(f"{peer} | connected ({self.connections} open)")

        def send(response):
            writer.write((json.dumps(response) + "\n").encode("utf-8"))

        try:
            await self.run_session(reader, send)
            await writer.drain()
        except ConnectionError as e:
            logger.warning(f"{peer} | {e}")
        finally:
            self.connections -= 1
            writer.close()
            logger.info(f"{peer} | disconnected")

    async def listen(self, address):
        host, port = parse_listen(address)
        try:
            server = await asyncio.start_server(self.handle_connection, host, port)
        except OSError as e:
            raise BindError(f"cannot listen on {host}:{port}: {e}")
        logger.info(f"listening on {host}:{port}")
        async with server:
            await server.serve_forever()

    async def stdio(self, stdin=None, stdout=None):
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        loop = asyncio.get_running_loop()
        reader = asyncio.StreamReader()
        await loop.connect_read_pipe(lambda: asyncio.StreamReaderProtocol(reader), stdin)

        def send(response):
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()

        await self.run_session(reader, send)
