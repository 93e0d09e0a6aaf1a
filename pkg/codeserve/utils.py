import bisect
import logging

logger = logging.getLogger(__name__)

## Content is always handled as a list of lines split on "\n" exactly, so a
## trailing newline shows up as an empty last line and join(split(x)) == x.

def split_lines(content):
    return content.split("\n")

def join_lines(lines):
    return "\n".join(lines)

def line_starts(content):
    """Character offset at which every line of `content` begins."""
    starts = [0]
    for n, char in enumerate(content):
        if char == "\n":
            starts.append(n + 1)
    return starts

def line_of_offset(starts, offset):
    """Index of the line containing character `offset`, given line_starts()."""
    return bisect.bisect_right(starts, offset) - 1

def char_span_to_lines(content, start, end, starts=None):
    """Convert a character span into a half-open span of line indices. A zero
    width span still covers the line it sits on."""
    if starts is None:
        starts = line_starts(content)
    first = line_of_offset(starts, start)
    last = line_of_offset(starts, max(start, end - 1)) if end > start else first
    return first, last + 1

def lines_to_char_span(content, first, last, starts=None):
    """Inverse of char_span_to_lines: the character span of lines [first, last)."""
    if starts is None:
        starts = line_starts(content)
    start = starts[first]
    if last < len(starts):
        end = starts[last] - 1
    else:
        end = len(content)
    return start, max(start, end)
