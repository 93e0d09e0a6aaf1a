import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from codeserve.context.words import split_tokens
from codeserve.utils import split_lines

logger = logging.getLogger(__name__)

UNCHANGED = "unchanged"
ADDED = "added"
REMOVED = "removed"
MODIFIED = "modified"
MOVED_FROM = "moved_from"
MOVED_TO = "moved_to"

TEXT_PREFIX = {
    UNCHANGED: "  ",
    REMOVED: "- ",
    ADDED: "+ ",
    MODIFIED: "~ ",
    MOVED_FROM: "< ",
    MOVED_TO: "> ",
}

# lines with fewer non-whitespace characters are never tagged as moved
MOVE_MIN_CHARS = 3


class Myers:
    """Shortest edit script between two sequences (greedy O((N+M)D) variant).
    Yields ("eql" | "del" | "ins", a_index, b_index) in sequence order."""

    def __init__(self, a, b):
        self.a = a
        self.b = b

    @classmethod
    def diff(cls, a, b):
        return cls(a, b)._diff()

    def _diff(self):
        edits = []
        for prev_x, prev_y, x, y in self._backtrack():
            if x == prev_x:
                edits.append(("ins", None, prev_y))
            elif y == prev_y:
                edits.append(("del", prev_x, None))
            else:
                edits.append(("eql", prev_x, prev_y))
        edits.reverse()
        return edits

    def _backtrack(self):
        trace = self._shortest_edit()
        x, y = len(self.a), len(self.b)

        for d in range(len(trace) - 1, -1, -1):
            v = trace[d]
            k = x - y

            if k == -d or (k != d and v.get(k - 1, 0) < v.get(k + 1, 0)):
                prev_k = k + 1
            else:
                prev_k = k - 1

            prev_x = v.get(prev_k, 0)
            prev_y = prev_x - prev_k

            while x > prev_x and y > prev_y:
                yield x - 1, y - 1, x, y
                x -= 1
                y -= 1

            if d > 0:
                yield prev_x, prev_y, x, y

            x, y = prev_x, prev_y

    def _shortest_edit(self):
        n, m = len(self.a), len(self.b)
        v = {1: 0}
        trace = []

        for d in range(n + m + 1):
            trace.append(v.copy())

            for k in range(-d, d + 1, 2):
                if k == -d or (k != d and v.get(k - 1, 0) < v.get(k + 1, 0)):
                    x = v.get(k + 1, 0)
                else:
                    x = v.get(k - 1, 0) + 1

                y = x - k

                while x < n and y < m and self.a[x] == self.b[y]:
                    x += 1
                    y += 1

                v[k] = x

                if x >= n and y >= m:
                    return trace

        return trace


@dataclass(frozen=True)
class DiffRun:
    tag: str
    a_start: int
    a_end: int
    b_start: int
    b_end: int


def line_diff(before_lines, after_lines):
    """Minimal line diff as runs of unchanged, removed and added lines. Inside
    one change the removed run comes before the added run."""

    runs = []
    pending = None

    def flush():
        nonlocal pending
        if pending is None:
            return
        a_start, a_end, b_start, b_end = pending
        if a_end > a_start:
            runs.append(DiffRun(REMOVED, a_start, a_end, b_start, b_start))
        if b_end > b_start:
            runs.append(DiffRun(ADDED, a_end, a_end, b_start, b_end))
        pending = None

    a_pos = b_pos = 0
    for op, a_index, b_index in Myers.diff(before_lines, after_lines):
        if op == "eql":
            flush()
            if runs and runs[-1].tag == UNCHANGED:
                last = runs[-1]
                runs[-1] = DiffRun(UNCHANGED, last.a_start, a_index + 1, last.b_start, b_index + 1)
            else:
                runs.append(DiffRun(UNCHANGED, a_index, a_index + 1, b_index, b_index + 1))
            a_pos, b_pos = a_index + 1, b_index + 1
            continue
        if pending is None:
            pending = [a_pos, a_pos, b_pos, b_pos]
        if op == "del":
            pending[1] = a_pos = a_index + 1
        else:
            pending[3] = b_pos = b_index + 1
    flush()
    return runs


def change_blocks(runs):
    """Group the runs between unchanged ones into (a_start, a_end, b_start, b_end)."""
    blocks = []
    for run in runs:
        if run.tag == UNCHANGED:
            continue
        if blocks and blocks[-1][1] == run.a_start and blocks[-1][3] == run.b_start:
            blocks[-1] = (blocks[-1][0], run.a_end, blocks[-1][2], run.b_end)
        else:
            blocks.append((run.a_start, run.a_end, run.b_start, run.b_end))
    return blocks


def _normalized(line):
    return line.rstrip()

def is_trivial(line):
    text = _normalized(line)
    return len("".join(text.split())) < MOVE_MIN_CHARS


def detect_moves(removed, added):
    """Pair removed and added lines with identical content as moves.

    `removed` and `added` map line indices (in the before and after file) to
    line text. Runs of consecutive lines are paired longest first; ties go to
    the earliest removed line, then to the earliest target. Trivial lines
    (blank or under MOVE_MIN_CHARS non-whitespace characters) never move.
    Returns (before_index, after_index) pairs in before order.
    """

    free_a = {i: _normalized(t) for i, t in removed.items() if not is_trivial(t)}
    free_b = {j: _normalized(t) for j, t in added.items() if not is_trivial(t)}
    pairs = []

    while True:
        best = None
        for i in sorted(free_a):
            for j in sorted(free_b):
                if free_a[i] != free_b[j]:
                    continue
                length = 1
                while (
                    i + length in free_a
                    and j + length in free_b
                    and free_a[i + length] == free_b[j + length]
                ):
                    length += 1
                if best is None or length > best[0]:
                    best = (length, i, j)
        if best is None:
            break
        length, i, j = best
        for k in range(length):
            pairs.append((i + k, j + k))
            del free_a[i + k]
            del free_b[j + k]

    pairs.sort()
    if pairs:
        logger.debug(f"paired {len(pairs)} moved line(s)")
    return pairs


def word_diff(old, new):
    """Token-level diff of two lines: list of (tag, text) pieces, tag one of
    unchanged/removed/added."""
    a, b = split_tokens(old), split_tokens(new)
    pieces = []
    for op, i, j in Myers.diff(a, b):
        if op == "ins":
            tag, text = ADDED, b[j]
        elif op == "del":
            tag, text = REMOVED, a[i]
        else:
            tag, text = UNCHANGED, a[i]
        if pieces and pieces[-1][0] == tag:
            pieces[-1] = (tag, pieces[-1][1] + text)
        else:
            pieces.append((tag, text))
    return pieces


@dataclass(frozen=True)
class DiffLine:
    text: str
    tag: str
    before_line: Optional[int] = None
    after_line: Optional[int] = None
    old_text: Optional[str] = None
    pieces: Tuple[Tuple[str, str], ...] = ()

    @property
    def removed_spans(self):
        return _spans(self.pieces, REMOVED)

    @property
    def added_spans(self):
        return _spans(self.pieces, ADDED)

    @property
    def decorated(self):
        return self.tag != UNCHANGED

    def to_text(self):
        if self.tag != MODIFIED:
            return TEXT_PREFIX[self.tag] + self.text
        marked = []
        for tag, text in self.pieces:
            if tag == REMOVED:
                marked.append(f"[-{text}-]")
            elif tag == ADDED:
                marked.append(f"{{+{text}+}}")
            else:
                marked.append(text)
        return TEXT_PREFIX[MODIFIED] + "".join(marked)

    def to_dict(self):
        out = {
            "text": self.text,
            "tag": self.tag,
            "before_line": self.before_line,
            "after_line": self.after_line,
        }
        if self.tag == MODIFIED:
            out["old_text"] = self.old_text
            out["removed_spans"] = [list(s) for s in self.removed_spans]
            out["added_spans"] = [list(s) for s in self.added_spans]
        return out


def _spans(pieces, wanted):
    """Character spans of `wanted` pieces, measured in the line they belong to
    (the old line for removed pieces, the new one for added)."""
    spans, pos = [], 0
    for tag, text in pieces:
        if tag not in (UNCHANGED, wanted):
            continue
        if tag == wanted and spans and spans[-1][1] == pos:
            spans[-1] = (spans[-1][0], pos + len(text))
        elif tag == wanted:
            spans.append((pos, pos + len(text)))
        pos += len(text)
    return spans


@dataclass
class RenderedDiff:
    decorated_lines: List[DiffLine] = field(default_factory=list)

    @property
    def decorated_count(self):
        """Decorated lines, a modified line counting as one removed plus one
        added line."""
        return sum(
            2 if line.tag == MODIFIED else 1
            for line in self.decorated_lines if line.decorated
        )

    @property
    def highlighted_words(self):
        count = 0
        for line in self.decorated_lines:
            for tag, text in line.pieces:
                if tag != UNCHANGED:
                    count += sum(1 for token in split_tokens(text) if token.strip())
        return count

    def counts(self):
        out = {tag: 0 for tag in TEXT_PREFIX}
        for line in self.decorated_lines:
            out[line.tag] += 1
        return out

    def to_text(self):
        return "\n".join(line.to_text() for line in self.decorated_lines)

    def to_dict(self):
        return {
            "lines": [line.to_dict() for line in self.decorated_lines],
            "decorated_count": self.decorated_count,
            "highlighted_words": self.highlighted_words,
            "counts": self.counts(),
        }


def _render_lines(content):
    return [] if content == "" else split_lines(content)


def render_diff(before, after):
    """Line diff with moved lines tagged and single-line replacements shown as
    modified lines with word-level highlights."""

    a, b = _render_lines(before), _render_lines(after)
    runs = line_diff(a, b)

    removed = {i: a[i] for r in runs if r.tag == REMOVED for i in range(r.a_start, r.a_end)}
    added = {j: b[j] for r in runs if r.tag == ADDED for j in range(r.b_start, r.b_end)}
    moves = detect_moves(removed, added)
    moved_to = dict(moves)
    moved_from = {j: i for i, j in moves}

    rendered = RenderedDiff()
    out = rendered.decorated_lines
    for run in runs:
        if run.tag != UNCHANGED:
            continue
        for k in range(run.a_end - run.a_start):
            i, j = run.a_start + k, run.b_start + k
            out.append(DiffLine(a[i], UNCHANGED, before_line=i, after_line=j))

    # change blocks slot in before the unchanged line that follows them
    for a_start, a_end, b_start, b_end in reversed(change_blocks(runs)):
        at = next(
            (n for n, line in enumerate(out) if line.tag == UNCHANGED and line.before_line >= a_end),
            len(out),
        )
        out[at:at] = _render_block(a, b, a_start, a_end, b_start, b_end, moved_to, moved_from)
    return rendered


def _render_block(a, b, a_start, a_end, b_start, b_end, moved_to, moved_from):
    free_a = [i for i in range(a_start, a_end) if i not in moved_to]
    free_b = [j for j in range(b_start, b_end) if j not in moved_from]
    if len(free_a) == 1 and len(free_b) == 1 and a_end - a_start == 1 and b_end - b_start == 1:
        i, j = free_a[0], free_b[0]
        return [DiffLine(
            b[j], MODIFIED, before_line=i, after_line=j,
            old_text=a[i], pieces=tuple(word_diff(a[i], b[j])),
        )]

    lines = []
    for i in range(a_start, a_end):
        if i in moved_to:
            lines.append(DiffLine(a[i], MOVED_FROM, before_line=i, after_line=moved_to[i]))
        else:
            lines.append(DiffLine(a[i], REMOVED, before_line=i))
    for j in range(b_start, b_end):
        if j in moved_from:
            lines.append(DiffLine(b[j], MOVED_TO, before_line=moved_from[j], after_line=j))
        else:
            lines.append(DiffLine(b[j], ADDED, after_line=j))
    return lines
