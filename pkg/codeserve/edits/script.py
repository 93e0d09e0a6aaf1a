import logging
from dataclasses import dataclass, field
from typing import List, Tuple

from codeserve.edits.diff import UNCHANGED, line_diff
from codeserve.utils import join_lines, split_lines

logger = logging.getLogger(__name__)

HUNK_HEADER = "@@"
ANCHOR_PREFIX = "= "
REMOVED_PREFIX = "- "
ADDED_PREFIX = "+ "

BOF = "<BOF>"
EOF = "<EOF>"
SENTINELS = (BOF, EOF)

# unchanged lines needed between two changes for them to become separate hunks
MIN_HUNK_GAP = 2


class EditScriptError(Exception):
    pass

class ScriptSyntaxError(EditScriptError):
    pass

class EmptyScript(EditScriptError):
    pass

class AnchorNotFound(EditScriptError):
    pass

class AmbiguousAnchor(EditScriptError):
    pass

class OverlappingHunks(EditScriptError):
    pass

class NoChange(EditScriptError):
    pass


@dataclass(frozen=True)
class Hunk:
    anchor_pre2: str
    anchor_pre1: str
    anchor_post: str
    removed: Tuple[str, ...] = ()
    added: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.removed and not self.added:
            raise ScriptSyntaxError("hunk removes and adds nothing")

    def to_lines(self):
        lines = [HUNK_HEADER, ANCHOR_PREFIX + self.anchor_pre2, ANCHOR_PREFIX + self.anchor_pre1]
        lines += [REMOVED_PREFIX + line for line in self.removed]
        lines += [ADDED_PREFIX + line for line in self.added]
        lines.append(ANCHOR_PREFIX + self.anchor_post)
        return lines


@dataclass(frozen=True)
class EditScript:
    hunks: Tuple[Hunk, ...] = field(default=())

    def __len__(self):
        return len(self.hunks)

    def to_text(self):
        lines = []
        for hunk in self.hunks:
            lines += hunk.to_lines()
        return "\n".join(lines) + "\n"


## ----------------------------------------------------------------------------
## text format

def _payload(line, prefix, number):
    if line.startswith(prefix):
        return line[len(prefix):]
    # a marker without its space stands for an empty line
    if line == prefix.rstrip():
        return ""
    raise ScriptSyntaxError(f"line {number}: expected '{prefix.strip()}' line, got '{line}'")


def parse_edit_script(text):
    """Parse the textual edit script format:

        @@
        = <line before the line before the change, or <BOF>>
        = <line before the change, or <BOF>>
        - <removed line>            (zero or more)
        + <added line>              (zero or more)
        = <line after the change, or <EOF>>

    repeated once per hunk. A single trailing newline is allowed.
    """

    lines = split_lines(text)
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not any(line.strip() for line in lines):
        raise EmptyScript("edit script has no hunks")

    hunks = []
    n = 0
    while n < len(lines):
        if lines[n] != HUNK_HEADER:
            raise ScriptSyntaxError(f"line {n + 1}: expected '{HUNK_HEADER}', got '{lines[n]}'")
        n += 1
        anchors = []
        for _ in range(2):
            if n >= len(lines):
                raise ScriptSyntaxError(f"line {n + 1}: hunk ends before its anchors")
            anchors.append(_payload(lines[n], ANCHOR_PREFIX, n + 1))
            n += 1

        removed, added = [], []
        while n < len(lines) and lines[n][:1] == "-":
            removed.append(_payload(lines[n], REMOVED_PREFIX, n + 1))
            n += 1
        while n < len(lines) and lines[n][:1] == "+":
            added.append(_payload(lines[n], ADDED_PREFIX, n + 1))
            n += 1

        if n >= len(lines):
            raise ScriptSyntaxError(f"line {n + 1}: hunk has no trailing anchor")
        post = _payload(lines[n], ANCHOR_PREFIX, n + 1)
        n += 1

        if not removed and not added:
            raise ScriptSyntaxError(f"line {n}: hunk removes and adds nothing")
        hunks.append(Hunk(anchors[0], anchors[1], post, tuple(removed), tuple(added)))

    return EditScript(tuple(hunks))


## ----------------------------------------------------------------------------
## location and application

class _Sentinel:
    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name

_BOF = _Sentinel(BOF)
_EOF = _Sentinel(EOF)

def _token(anchor):
    return {BOF: _BOF, EOF: _EOF}.get(anchor, anchor)


def _matches(hunk, extended):
    """Every position p of anchor_pre1 in `extended` at which the whole hunk
    (anchors and removed lines) matches."""
    pre2, pre1, post = _token(hunk.anchor_pre2), _token(hunk.anchor_pre1), _token(hunk.anchor_post)
    size = len(hunk.removed)
    found = []
    for p in range(1, len(extended) - size - 1):
        if (
            extended[p] == pre1
            and extended[p - 1] == pre2
            and extended[p + size + 1] == post
            and tuple(extended[p + 1:p + 1 + size]) == hunk.removed
        ):
            found.append(p)
    return found


def locate_anchors(script, content):
    """Line index at which each hunk's removed region starts (for a pure
    insertion: the line the added lines go in front of)."""

    lines = split_lines(content)
    extended = [_BOF, _BOF] + lines + [_EOF]
    positions = []
    for number, hunk in enumerate(script.hunks, start=1):
        found = _matches(hunk, extended)
        if not found:
            raise AnchorNotFound(f"hunk {number}: anchors not found")
        if len(found) > 1:
            raise AmbiguousAnchor(
                f"hunk {number}: anchors match at lines {', '.join(str(p - 1) for p in found)}"
            )
        positions.append(found[0] - 1)

    previous_end = None
    for number, (start, hunk) in enumerate(zip(positions, script.hunks), start=1):
        # the leading anchors must not fall inside the previous hunk's region
        if previous_end is not None and start - MIN_HUNK_GAP < previous_end:
            raise OverlappingHunks(f"hunk {number} overlaps or precedes hunk {number - 1}")
        previous_end = start + len(hunk.removed)
    return positions


def apply_edit(script, content):
    positions = locate_anchors(script, content)
    lines = split_lines(content)
    for start, hunk in reversed(list(zip(positions, script.hunks))):
        lines[start:start + len(hunk.removed)] = list(hunk.added)
    logger.debug(f"applied {len(script)} hunk(s)")
    return join_lines(lines)


## ----------------------------------------------------------------------------
## generation

def _change_runs(before_lines, after_lines):
    """(a_start, a_end, b_start, b_end) of every change, with changes closer
    than MIN_HUNK_GAP unchanged lines merged."""
    runs = []
    for run in line_diff(before_lines, after_lines):
        if run.tag == UNCHANGED:
            continue
        if runs and run.a_start - runs[-1][1] < MIN_HUNK_GAP:
            a_start, _, b_start, _ = runs[-1]
            runs[-1] = (a_start, run.a_end, b_start, run.b_end)
        else:
            runs.append((run.a_start, run.a_end, run.b_start, run.b_end))
    return runs


def _anchor(lines, index):
    if index < 0:
        return BOF
    if index >= len(lines):
        return EOF
    return lines[index]


def whole_file_script(before_lines, after_lines):
    return EditScript((Hunk(BOF, BOF, EOF, tuple(before_lines), tuple(after_lines)),))


def serialize_edit_script(before, after):
    """Edit script turning `before` into `after`: one hunk per change, each
    anchored by the two unchanged lines before it and the one after it. Falls
    back to a single whole-file hunk when the anchors would not be unique."""

    if before == after:
        raise NoChange("before and after are identical")

    a, b = split_lines(before), split_lines(after)
    hunks: List[Hunk] = []
    for a_start, a_end, b_start, b_end in _change_runs(a, b):
        hunks.append(Hunk(
            anchor_pre2=_anchor(a, a_start - 2),
            anchor_pre1=_anchor(a, a_start - 1),
            anchor_post=_anchor(a, a_end),
            removed=tuple(a[a_start:a_end]),
            added=tuple(b[b_start:b_end]),
        ))
    script = EditScript(tuple(hunks))

    real_anchors = [
        line
        for start, end, _, _ in _change_runs(a, b)
        for line in a[max(0, start - 2):start] + a[end:end + 1]
    ]
    if any(line in SENTINELS for line in real_anchors):
        logger.debug("anchor text collides with a sentinel, using a whole-file hunk")
        return whole_file_script(a, b)

    try:
        locate_anchors(script, before)
    except EditScriptError as e:
        logger.debug(f"{e}; using a whole-file hunk")
        return whole_file_script(a, b)
    return script
