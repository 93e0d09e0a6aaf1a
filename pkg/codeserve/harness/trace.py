import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from codeserve.harness.clock import HarnessError
from codeserve.session.documents import EditorEvent

logger = logging.getLogger(__name__)


class TraceParseError(HarnessError):
    pass


## each trace kind with its required payload fields and their types; every
## line also carries "ts" and "kind"
TRACE_KINDS = {
    "open": {"file": str, "content": str},
    "close": {"file": str},
    "insert": {"file": str, "text": str},
    "delete": {"file": str, "count": int},
    "move": {"file": str, "offset": int},
    "paste": {"file": str, "text": str},
    "request": {},
    "cancel": {"id": str},
    "accept": {"id": str},
    "reject": {"id": str},
    "transform": {"file": str, "instruction": str},
}
OPTIONAL_FIELDS = {
    "paste": {"full_file": bool},
    "request": {"id": str},
    "transform": {"selection": list, "id": str},
}
EDITOR_KINDS = {
    "open": "file_open",
    "close": "file_close",
    "insert": "insert",
    "delete": "delete",
    "move": "cursor_move",
    "paste": "paste",
}


@dataclass(frozen=True)
class TraceEvent:
    ts: int
    kind: str
    file: Optional[str] = None
    content: str = ""
    text: str = ""
    count: int = 0
    offset: int = 0
    full_file: bool = False
    id: Optional[str] = None
    instruction: str = ""
    selection: Optional[Tuple[int, int]] = None
    line: int = 0

    def __str__(self):
        return f"line {self.line} ({self.kind} at {self.ts} ms)"

    @property
    def is_editor_event(self):
        return self.kind in EDITOR_KINDS

    def to_editor_event(self, timestamp=None):
        return EditorEvent(
            EDITOR_KINDS[self.kind],
            self.file,
            self.ts if timestamp is None else timestamp,
            text=self.text,
            count=self.count,
            offset=self.offset,
            content=self.content,
            full_file=self.full_file,
        )


def _check_type(value, expected):
    # bool is an int subclass but never a valid count or offset
    if expected is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, expected)


def parse_event(data, line=0, name="<trace>"):
    where = f"{name}:{line}"
    if not isinstance(data, dict):
        raise TraceParseError(f"{where} | expected a JSON object")
    kind = data.get("kind")
    if kind not in TRACE_KINDS:
        raise TraceParseError(f"{where} | unknown kind: {kind!r}")
    ts = data.get("ts")
    if not _check_type(ts, int) or ts < 0:
        raise TraceParseError(f"{where} | 'ts' must be a non-negative integer")

    required = TRACE_KINDS[kind]
    optional = OPTIONAL_FIELDS.get(kind, {})
    fields = {}
    for key, expected in list(required.items()) + list(optional.items()):
        if key not in data:
            if key in required:
                raise TraceParseError(f"{where} | {kind} needs '{key}'")
            continue
        if not _check_type(data[key], expected):
            raise TraceParseError(f"{where} | '{key}' must be {expected.__name__}")
        fields[key] = data[key]

    unknown = set(data) - set(required) - set(optional) - {"ts", "kind"}
    if unknown:
        raise TraceParseError(f"{where} | unexpected field(s) for {kind}: {', '.join(sorted(unknown))}")

    if "selection" in fields:
        selection = fields["selection"]
        if len(selection) != 2 or not all(_check_type(v, int) for v in selection) or selection[0] > selection[1]:
            raise TraceParseError(f"{where} | 'selection' must be [start, end]")
        fields["selection"] = tuple(selection)

    return TraceEvent(ts=ts, kind=kind, line=line, **fields)


def parse_trace(lines, name="<trace>"):
    """Parse JSON-lines trace text into TraceEvents. Blank lines are skipped;
    timestamps must never decrease."""

    events = []
    last_ts = 0
    for n, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            data = json.loads(raw)
        except ValueError as e:
            raise TraceParseError(f"{name}:{n} | invalid JSON: {e}")
        event = parse_event(data, n, name)
        if event.ts < last_ts:
            raise TraceParseError(f"{name}:{n} | ts {event.ts} is before {last_ts}")
        last_ts = event.ts
        events.append(event)
    logger.debug(f"{name} | parsed {len(events)} event(s)")
    return events


def load_trace(path):
    path = Path(path)
    return parse_trace(path.read_text().splitlines(), name=path.name)
