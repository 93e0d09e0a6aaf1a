import logging
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)


class SessionError(Exception):
    pass

class UnknownFile(SessionError):
    """The event targets a file that is not open in this session."""

class OutOfBounds(SessionError):
    """A delete or cursor move reaches outside the document."""

class OutOfOrderEvent(SessionError):
    """Event timestamps must be non-decreasing within a session."""


EVENT_KINDS = (
    "insert",
    "delete",
    "cursor_move",
    "paste",
    "file_open",
    "file_close",
)


@dataclass(frozen=True)
class EditorEvent:
    """One editor event. Only the payload fields that belong to `kind` are
    meaningful: text (insert, paste), count (delete), offset (cursor_move),
    content (file_open), full_file (paste)."""

    kind: str
    file_id: str
    timestamp: int
    text: str = ""
    count: int = 0
    offset: int = 0
    content: str = ""
    full_file: bool = False

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"invalid event kind: {self.kind}")

    @classmethod
    def insert(cls, file_id, timestamp, text):
        return cls("insert", file_id, timestamp, text=text)

    @classmethod
    def delete(cls, file_id, timestamp, count):
        return cls("delete", file_id, timestamp, count=count)

    @classmethod
    def cursor_move(cls, file_id, timestamp, offset):
        return cls("cursor_move", file_id, timestamp, offset=offset)

    @classmethod
    def paste(cls, file_id, timestamp, text, full_file=False):
        return cls("paste", file_id, timestamp, text=text, full_file=full_file)

    @classmethod
    def file_open(cls, file_id, timestamp, content):
        return cls("file_open", file_id, timestamp, content=content)

    @classmethod
    def file_close(cls, file_id, timestamp):
        return cls("file_close", file_id, timestamp)


@dataclass
class DocumentState:
    file_id: str
    content: str
    cursor: int
    version: int = 1

    def __str__(self):
        return f"{self.file_id} (v{self.version})"

    @property
    def prefix(self):
        return self.content[:self.cursor]

    @property
    def suffix(self):
        return self.content[self.cursor:]


@dataclass(frozen=True)
class EditRecord:
    file_id: str
    start: int
    end: int
    last_touched: int

    @property
    def range(self):
        return (self.start, self.end)

    def sort_key(self):
        """Most recent first, then file, then position."""
        return (-self.last_touched, self.file_id, self.start)


@dataclass(frozen=True)
class SessionSnapshot:
    """Immutable view of a session handed to the context packer."""

    documents: MappingProxyType
    edits: Tuple[EditRecord, ...]
    focused_file: Optional[str]


def _shift_for_insert(pos, at, length):
    return pos if pos <= at else pos + length

def _shift_for_delete(pos, start, length):
    if pos <= start:
        return pos
    if pos < start + length:
        return start
    return pos - length


@dataclass
class EditorSession:
    """Document state for every open file of one editor session plus the
    history of recent edits. Single writer: events must be applied in order."""

    edit_history_capacity: int = 32
    documents: Dict[str, DocumentState] = field(default_factory=dict)
    edits: List[EditRecord] = field(default_factory=list)
    focused_file: Optional[str] = None
    last_timestamp: Optional[int] = None

    def document(self, file_id):
        try:
            return self.documents[file_id]
        except KeyError:
            raise UnknownFile(f"file is not open: {file_id}")

    @property
    def focused(self):
        if self.focused_file is None:
            return None
        return self.documents.get(self.focused_file)

    def apply_event(self, event):
        """Apply one editor event and return the DocumentState it touched
        (None for file_close)."""

        if self.last_timestamp is not None and event.timestamp < self.last_timestamp:
            raise OutOfOrderEvent(
                f"event at {event.timestamp} ms arrived after {self.last_timestamp} ms"
            )

        if event.kind == "file_open":
            doc = self._open(event)
        elif event.kind == "file_close":
            self.document(event.file_id)
            del self.documents[event.file_id]
            self.edits = [e for e in self.edits if e.file_id != event.file_id]
            if self.focused_file == event.file_id:
                self.focused_file = None
            doc = None
        else:
            doc = self.document(event.file_id)
            if event.kind in ("insert", "paste"):
                self._insert(doc, event.text, event.timestamp)
            elif event.kind == "delete":
                self._delete(doc, event.count, event.timestamp)
            elif event.kind == "cursor_move":
                if event.offset < 0 or event.offset > len(doc.content):
                    raise OutOfBounds(
                        f"{doc} | cursor {event.offset} outside 0..{len(doc.content)}"
                    )
                doc.cursor = event.offset
            doc.version += 1
            self.focused_file = doc.file_id

        self.last_timestamp = event.timestamp
        return doc

    def _open(self, event):
        existing = self.documents.get(event.file_id)
        version = existing.version + 1 if existing else 1
        if existing:
            logger.debug(f"{existing} | reopened, dropping its edit history")
            self.edits = [e for e in self.edits if e.file_id != event.file_id]
        doc = DocumentState(
            file_id=event.file_id,
            content=event.content,
            cursor=len(event.content),
            version=version,
        )
        self.documents[event.file_id] = doc
        self.focused_file = event.file_id
        return doc

    def _insert(self, doc, text, timestamp):
        at = doc.cursor
        doc.content = doc.content[:at] + text + doc.content[at:]
        doc.cursor = at + len(text)
        self._record(doc.file_id, at, at + len(text), timestamp,
            lambda pos: _shift_for_insert(pos, at, len(text)))

    def _delete(self, doc, count, timestamp):
        if count < 0 or count > doc.cursor:
            raise OutOfBounds(
                f"{doc} | cannot delete {count} character(s) before cursor {doc.cursor}"
            )
        start = doc.cursor - count
        doc.content = doc.content[:start] + doc.content[doc.cursor:]
        doc.cursor = start
        self._record(doc.file_id, start, start, timestamp,
            lambda pos: _shift_for_delete(pos, start, count))

    def _record(self, file_id, start, end, timestamp, shift):
        """Shift existing records of the file through the edit, add the new
        record and coalesce every touching or overlapping pair."""

        others = [e for e in self.edits if e.file_id != file_id]
        mine = [
            replace(e, start=shift(e.start), end=shift(e.end))
            for e in self.edits if e.file_id == file_id
        ]
        mine.append(EditRecord(file_id, start, end, timestamp))
        mine.sort(key=lambda e: (e.start, e.end))

        merged = [mine[0]]
        for record in mine[1:]:
            last = merged[-1]
            if record.start <= last.end:
                merged[-1] = EditRecord(
                    file_id,
                    last.start,
                    max(last.end, record.end),
                    max(last.last_touched, record.last_touched),
                )
            else:
                merged.append(record)

        self.edits = others + merged
        if len(self.edits) > self.edit_history_capacity:
            self.edits = sorted(self.edits, key=EditRecord.sort_key)[:self.edit_history_capacity]

    def recent_edits(self):
        return sorted(self.edits, key=EditRecord.sort_key)

    def snapshot(self):
        docs = {k: replace(v) for k, v in self.documents.items()}
        return SessionSnapshot(
            documents=MappingProxyType(docs),
            edits=tuple(self.recent_edits()),
            focused_file=self.focused_file,
        )
