import logging
from dataclasses import dataclass
from typing import List, Tuple

from pygments.lexers import get_lexer_for_filename
from pygments.token import Comment, String
from pygments.util import ClassNotFound

from codeserve.utils import line_starts, line_of_offset, split_lines

logger = logging.getLogger(__name__)

PRUNE_MARKER = "…"

# lexer aliases of languages whose blocks are delimited by indentation
INDENT_ALIASES = {
    "python", "py", "python2", "py2", "cython", "yaml", "coffeescript",
    "coffee", "nim", "nimrod", "haskell", "hs", "sass", "pug", "jade",
}


class PackingError(Exception):
    pass

class MalformedRange(PackingError):
    pass


@dataclass(frozen=True)
class ScopeChain:
    """Header lines of the scopes enclosing one line, outermost first."""

    lines: Tuple[int, ...]
    headers: Tuple[str, ...]


def _indent_of(line):
    return len(line) - len(line.lstrip())

def _find_lexer(file_id, content):
    try:
        return get_lexer_for_filename(file_id or "", content, stripnl=False, ensurenl=False)
    except ClassNotFound:
        return None

def _brace_positions(content, lexer):
    """(offset, char) of every brace outside strings and comments. Without a
    lexer every brace counts."""
    if lexer is None:
        return [(n, c) for n, c in enumerate(content) if c in "{}"]
    out = []
    for offset, token, value in lexer.get_tokens_unprocessed(content):
        if token in Comment or token in String:
            continue
        for n, c in enumerate(value):
            if c in "{}":
                out.append((offset + n, c))
    return out


class ScopeIndex:
    """Enclosing-scope lookup for one file, computed once and reused for every
    rendering of that file.

    Brace languages: a scope runs from the line holding "{" to the line holding
    the matching "}", its header being the "{" line (or the previous non-blank
    line when the brace sits alone). Otherwise scopes come from indentation:
    the header of a line is the nearest previous line with smaller indent.
    """

    def __init__(self, content, file_id=None):
        self.content = content
        self.lines = split_lines(content)
        self.file_id = file_id

        lexer = _find_lexer(file_id, content)
        if lexer is not None and INDENT_ALIASES & set(lexer.aliases):
            self.style = "indent"
            braces = []
        else:
            braces = _brace_positions(content, lexer)
            self.style = "brace" if braces else "indent"

        if self.style == "brace":
            self._headers = self._brace_headers(braces)
        else:
            self._headers = self._indent_headers()
        logger.debug(f"{file_id} | {self.style} scopes over {len(self.lines)} lines")

    def _header_for_open(self, line_no):
        if self.lines[line_no].strip() not in ("{", ""):
            return line_no
        for k in range(line_no - 1, -1, -1):
            if self.lines[k].strip():
                return k
        return line_no

    def _brace_headers(self, braces):
        starts = line_starts(self.content)
        last_line = len(self.lines) - 1
        stack, scopes = [], []
        for offset, char in braces:
            line_no = line_of_offset(starts, offset)
            if char == "{":
                stack.append(line_no)
            elif stack:
                scopes.append((stack.pop(), line_no))
        # unclosed scopes run to the end of the file
        scopes.extend((open_line, last_line) for open_line in stack)
        scopes.sort()

        headers = [[] for _ in self.lines]
        for open_line, close_line in scopes:
            header = self._header_for_open(open_line)
            for n in range(open_line + 1, close_line + 1):
                if header != n and header not in headers[n]:
                    headers[n].append(header)
        return [tuple(h) for h in headers]

    def _indent_headers(self):
        effective = [None] * len(self.lines)
        following = 0
        for n in range(len(self.lines) - 1, -1, -1):
            if self.lines[n].strip():
                following = _indent_of(self.lines[n])
                effective[n] = following
            else:
                # blank lines belong to the block that follows them
                effective[n] = following

        headers = []
        for n in range(len(self.lines)):
            chain = []
            indent = effective[n]
            for k in range(n - 1, -1, -1):
                if indent == 0:
                    break
                if self.lines[k].strip() and effective[k] < indent:
                    chain.append(k)
                    indent = effective[k]
            headers.append(tuple(reversed(chain)))
        return headers

    def chain(self, line_no):
        lines = self._headers[line_no]
        return ScopeChain(lines=lines, headers=tuple(self.lines[k] for k in lines))

    def validate(self, ranges):
        for first, last in ranges:
            if first < 0 or last > len(self.lines) or first >= last:
                raise MalformedRange(
                    f"{self.file_id} | line range {first}..{last} outside 0..{len(self.lines)}"
                )

    def kept_lines(self, ranges):
        keep = set()
        for first, last in ranges:
            for n in range(first, last):
                keep.add(n)
                keep.update(self._headers[n])
        return keep

    def render(self, ranges):
        """Render the given half-open line ranges with every enclosing scope
        header, replacing each maximal omitted region with one marker line."""
        self.validate(ranges)
        keep = self.kept_lines(ranges)
        out: List[str] = []
        for n, line in enumerate(self.lines):
            if n in keep:
                out.append(line)
            elif not out or out[-1] is not PRUNE_MARKER:
                out.append(PRUNE_MARKER)
        return "\n".join(out)


def render_with_scopes(content, ranges, file_id=None):
    return ScopeIndex(content, file_id=file_id).render(ranges)
