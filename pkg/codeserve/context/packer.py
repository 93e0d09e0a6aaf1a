import logging
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Mapping, Optional, Tuple

from codeserve.context.scopes import MalformedRange, PackingError, ScopeIndex
from codeserve.context.tokens import CharRatioEstimator
from codeserve.context.words import word_set
from codeserve.utils import (
    char_span_to_lines,
    line_of_offset,
    line_starts,
    lines_to_char_span,
    split_lines,
)

logger = logging.getLogger(__name__)

CURSOR_MARKER = "<|cursor|>"
SELECTION_START = "<|selection|>"
SELECTION_END = "<|/selection|>"
SECTION_HEADER = "FILE {}"
FOCUS_HEADER = "SELECTION {}"
INSTRUCTION_HEADER = "INSTRUCTION"

RECENT_EDIT = "recent_edit"
LEXICAL_MATCH = "lexical_match"


class CursorSectionOverBudget(PackingError):
    pass


@dataclass(frozen=True)
class Snippet:
    file_id: str
    start: int
    end: int
    kind: str
    score: int

    def __str__(self):
        return f"{self.kind} {self.file_id}[{self.start}:{self.end}] score={self.score}"

    @property
    def range(self):
        return (self.start, self.end)

    @property
    def rank_key(self):
        return (0 if self.kind == RECENT_EDIT else 1, -self.score, self.file_id, self.start)

    def overlaps(self, other):
        return (
            self.file_id == other.file_id
            and self.start <= other.end
            and other.start <= self.end
        )

    @classmethod
    def from_edit(cls, record, content=None, context_lines=0):
        """Snippet for an EditRecord: the lines it touches plus context_lines
        on either side, or the bare record range without file content."""
        if content is None:
            return cls(record.file_id, record.start, record.end, RECENT_EDIT, record.last_touched)
        starts = line_starts(content)
        first, last = char_span_to_lines(content, record.start, record.end, starts)
        first = max(0, first - context_lines)
        last = min(len(starts), last + context_lines)
        start, end = lines_to_char_span(content, first, last, starts)
        return cls(record.file_id, start, end, RECENT_EDIT, record.last_touched)


@dataclass(frozen=True)
class PromptBundle:
    """A packed prompt. For completions `cursor_section` is the marked window
    around the cursor. For transforms (`instruction` set) it is the whole
    target file and `focus` repeats the selected region between selection
    markers."""

    rendered_sections: Tuple[Tuple[str, str], ...]
    cursor_section: str
    token_estimate: int
    budget: int = 8192
    output_budget: int = 128
    file_id: Optional[str] = None
    snippets: Tuple[Snippet, ...] = field(default=())
    focus: str = ""
    instruction: Optional[str] = None
    selection: Optional[Tuple[int, int]] = None

    @property
    def text(self):
        if self.instruction is not None:
            return render_transform_prompt(
                self.rendered_sections, self.file_id, self.cursor_section, self.focus, self.instruction
            )
        return render_prompt(self.rendered_sections, self.file_id, self.cursor_section)

    def section(self, file_id):
        if file_id == self.file_id:
            return self.cursor_section
        return dict(self.rendered_sections).get(file_id)


def render_prompt(sections, cursor_file, cursor_section):
    parts = [SECTION_HEADER.format(file_id) + "\n" + body for file_id, body in sections]
    parts.append(SECTION_HEADER.format(cursor_file) + "\n" + cursor_section)
    return "\n".join(parts)

def render_transform_prompt(sections, target, content, focus, instruction):
    parts = [SECTION_HEADER.format(file_id) + "\n" + body for file_id, body in sections]
    parts.append(SECTION_HEADER.format(target) + "\n" + content)
    parts.append(FOCUS_HEADER.format(target) + "\n" + focus)
    parts.append(INSTRUCTION_HEADER + "\n" + instruction)
    return "\n".join(parts)


def _windows(line_count, window_lines, stride_lines):
    first = 0
    while True:
        last = min(first + window_lines, line_count)
        yield first, last
        if last >= line_count:
            return
        first += stride_lines


def scan_matches(open_files: Mapping[str, str], cursor_context, window_lines=30, stride_lines=10, cursor=None):
    """Score sliding windows of every open file by the number of distinct
    words they share with `cursor_context`.

    `cursor` is an optional (file_id, offset); the window holding it is left
    out. Overlapping windows of one file are merged, keeping the best score.
    Returns lexical_match snippets, best first.
    """

    wanted = word_set(cursor_context)
    if not wanted:
        return []

    found = []
    for file_id in sorted(open_files):
        content = open_files[file_id]
        starts = line_starts(content)
        lines = split_lines(content)
        cursor_line = None
        if cursor is not None and cursor[0] == file_id:
            cursor_line = line_of_offset(starts, cursor[1])

        scored = []
        for first, last in _windows(len(lines), window_lines, stride_lines):
            if cursor_line is not None and first <= cursor_line < last:
                continue
            score = len(word_set("\n".join(lines[first:last])) & wanted)
            if score:
                scored.append([first, last, score])

        merged = []
        for window in scored:
            if merged and window[0] < merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], window[1])
                merged[-1][2] = max(merged[-1][2], window[2])
            else:
                merged.append(window)

        for first, last, score in merged:
            start, end = lines_to_char_span(content, first, last, starts)
            found.append(Snippet(file_id, start, end, LEXICAL_MATCH, score))

    found.sort(key=lambda s: s.rank_key)
    logger.debug(f"{len(found)} lexical match(es) over {len(open_files)} file(s)")
    return found


def rank_snippets(edits, matches, contents: Optional[Mapping[str, str]] = None, context_lines=0):
    """Edit snippets first (most recent first), then matches (best first).
    Matches that overlap an edit snippet are dropped."""

    edit_snippets = []
    for record in edits:
        if isinstance(record, Snippet):
            edit_snippets.append(record)
            continue
        content = None if contents is None else contents.get(record.file_id)
        edit_snippets.append(Snippet.from_edit(record, content, context_lines))

    kept = [m for m in matches if not any(m.overlaps(e) for e in edit_snippets)]
    if len(kept) < len(matches):
        logger.debug(f"dropped {len(matches) - len(kept)} match(es) covered by edits")
    return sorted(edit_snippets, key=lambda s: s.rank_key) + sorted(kept, key=lambda s: s.rank_key)


def text_around_cursor(document, context_lines=10):
    """Text of the lines around the document cursor."""
    lines = split_lines(document.content)
    cursor_line = line_of_offset(line_starts(document.content), document.cursor)
    first = max(0, cursor_line - context_lines)
    return "\n".join(lines[first:cursor_line + context_lines + 1])


def render_cursor_section(document, context_lines=10):
    marked = document.content[:document.cursor] + CURSOR_MARKER + document.content[document.cursor:]
    index = ScopeIndex(marked, file_id=document.file_id)
    cursor_line = line_of_offset(line_starts(marked), document.cursor)
    first = max(0, cursor_line - context_lines)
    last = min(len(index.lines), cursor_line + context_lines + 1)
    return index.render([(first, last)])


def validate_selection(selection, length):
    """Return `selection` as a (start, end) span of a text of `length`
    characters, or raise MalformedRange."""
    try:
        start, end = selection
    except (TypeError, ValueError):
        raise MalformedRange(f"selection must be [start, end], got {selection!r}")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (start, end)):
        raise MalformedRange(f"selection offsets must be integers, got {selection!r}")
    if not 0 <= start <= end <= length:
        raise MalformedRange(f"selection {start}:{end} outside 0:{length}")
    return start, end


def render_selection_section(document, selection=None, context_lines=10):
    """Lines around the selection with the selected text wrapped in selection
    markers. Without a selection this is the cursor section."""
    if selection is None:
        return render_cursor_section(document, context_lines)
    start, end = validate_selection(selection, len(document.content))
    content = document.content
    marked = content[:start] + SELECTION_START + content[start:end] + SELECTION_END + content[end:]
    index = ScopeIndex(marked, file_id=document.file_id)
    first, last = char_span_to_lines(marked, start, end + len(SELECTION_START) + len(SELECTION_END))
    first = max(0, first - context_lines)
    last = min(len(index.lines), last + context_lines)
    return index.render([(first, last)])


class _FileSection:

    def __init__(self, content, file_id):
        self.content = content
        self.starts = line_starts(content)
        self.index = ScopeIndex(content, file_id=file_id)
        self.ranges = []

    def with_snippet(self, snippet):
        span = char_span_to_lines(self.content, snippet.start, snippet.end, self.starts)
        return self.ranges + [span]

    def render(self, ranges):
        return self.index.render(sorted(ranges))


def _pack_snippets(snapshot, ranked, budget, estimator, render, estimate, skip=()):
    """Add ranked snippets to the prompt produced by `render(sections)`,
    strictly in rank order, until the next one would overflow `budget`.
    Returns (rendered sections, included snippets, estimate)."""

    sections, rendered, included = {}, {}, []
    for snippet in ranked:
        source = snapshot.documents.get(snippet.file_id)
        if source is None or snippet.file_id in skip:
            logger.debug(f"{snippet} | file not open or already whole, skipped")
            continue
        section = sections.get(snippet.file_id) or _FileSection(source.content, snippet.file_id)
        ranges = section.with_snippet(snippet)
        candidate = dict(rendered)
        candidate[snippet.file_id] = section.render(ranges)
        cost = estimator.estimate(render(candidate.items()))
        if cost > budget:
            logger.debug(f"{snippet} | needs {cost} tokens, budget is {budget}; packing stops")
            break
        section.ranges = ranges
        sections[snippet.file_id] = section
        rendered = candidate
        included.append(snippet)
        estimate = cost
    return rendered, included, estimate


def build_prompt(snapshot, ranked, budget=8192, estimator=None, cursor_context_lines=10, output_budget=128):
    """Pack the cursor section and then as many ranked snippets as fit into
    `budget` estimated tokens. Snippets are taken strictly in rank order and
    packing stops at the first one that would overflow the budget."""

    estimator = estimator or CharRatioEstimator()
    document = snapshot.documents.get(snapshot.focused_file) if snapshot.focused_file else None
    if document is None:
        raise PackingError("no focused document to complete in")

    cursor_section = render_cursor_section(document, cursor_context_lines)
    render = partial(render_prompt, cursor_file=document.file_id, cursor_section=cursor_section)
    estimate = estimator.estimate(render([]))
    if estimate > budget:
        raise CursorSectionOverBudget(
            f"{document} | cursor section needs {estimate} tokens, budget is {budget}"
        )

    rendered, included, estimate = _pack_snippets(snapshot, ranked, budget, estimator, render, estimate)
    logger.debug(f"{document} | packed {len(included)} of {len(ranked)} snippet(s), {estimate} tokens")
    return PromptBundle(
        rendered_sections=tuple(rendered.items()),
        cursor_section=cursor_section,
        token_estimate=estimate,
        budget=budget,
        output_budget=output_budget,
        file_id=document.file_id,
        snippets=tuple(included),
    )


def build_transform_prompt(snapshot, ranked, file_id, instruction, selection=None, budget=8192, estimator=None, context_lines=10):
    """Pack a transform prompt: snippets from other files, the whole target
    file, its selection (or cursor) region and the instruction. The target
    file is required; snippets only fill the remaining budget. The edit
    script that comes back may be as long as the budget."""

    estimator = estimator or CharRatioEstimator()
    document = snapshot.documents.get(file_id)
    if document is None:
        raise PackingError(f"{file_id} | no open document to transform")
    if selection is not None:
        selection = validate_selection(selection, len(document.content))

    focus = render_selection_section(document, selection, context_lines)
    render = partial(
        render_transform_prompt,
        target=file_id,
        content=document.content,
        focus=focus,
        instruction=instruction,
    )
    estimate = estimator.estimate(render([]))
    if estimate > budget:
        raise CursorSectionOverBudget(
            f"{document} | file and instruction need {estimate} tokens, budget is {budget}"
        )

    rendered, included, estimate = _pack_snippets(
        snapshot, ranked, budget, estimator, render, estimate, skip={file_id}
    )
    logger.debug(f"{document} | transform prompt with {len(included)} snippet(s), {estimate} tokens")
    return PromptBundle(
        rendered_sections=tuple(rendered.items()),
        cursor_section=document.content,
        token_estimate=estimate,
        budget=budget,
        output_budget=budget,
        file_id=file_id,
        snippets=tuple(included),
        focus=focus,
        instruction=instruction,
        selection=selection,
    )


def _rank_for(snapshot, config, document, cursor_context):
    contents = {k: d.content for k, d in snapshot.documents.items()}
    matches = scan_matches(
        contents,
        cursor_context,
        window_lines=config.match_window_lines,
        stride_lines=config.match_stride_lines,
        cursor=(document.file_id, document.cursor),
    )
    return rank_snippets(snapshot.edits, matches, contents, config.edit_context_lines)


def pack_for_request(snapshot, config, estimator, file_id=None):
    """Scan, rank and pack with the engine config for `file_id` as it is in
    `snapshot`, the focused document by default."""
    file_id = file_id or snapshot.focused_file
    document = snapshot.documents.get(file_id) if file_id else None
    if document is None:
        raise PackingError(f"{file_id} | no open document to complete in")
    snapshot = replace(snapshot, focused_file=file_id)
    around = text_around_cursor(document, config.cursor_context_lines)
    return build_prompt(
        snapshot,
        _rank_for(snapshot, config, document, around),
        budget=config.prompt_budget_tokens,
        estimator=estimator,
        cursor_context_lines=config.cursor_context_lines,
        output_budget=config.output_budget_tokens,
    )


def pack_for_transform(snapshot, config, estimator, file_id, instruction, selection=None):
    document = snapshot.documents.get(file_id)
    if document is None:
        raise PackingError(f"{file_id} | no open document to transform")
    around = instruction + "\n" + text_around_cursor(document, config.cursor_context_lines)
    return build_transform_prompt(
        snapshot,
        _rank_for(snapshot, config, document, around),
        file_id,
        instruction,
        selection=selection,
        budget=config.prompt_budget_tokens,
        estimator=estimator,
        context_lines=config.cursor_context_lines,
    )
