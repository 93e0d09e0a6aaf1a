import random

from django.test import SimpleTestCase

from codeserve.config import EngineConfig
from codeserve.context.packer import (
    CURSOR_MARKER,
    LEXICAL_MATCH,
    RECENT_EDIT,
    SELECTION_END,
    SELECTION_START,
    CursorSectionOverBudget,
    Snippet,
    build_prompt,
    build_transform_prompt,
    pack_for_request,
    pack_for_transform,
    rank_snippets,
    scan_matches,
    text_around_cursor,
)
from codeserve.context.scopes import (
    PRUNE_MARKER,
    MalformedRange,
    PackingError,
    ScopeIndex,
    render_with_scopes,
)
from codeserve.context.tokens import CharRatioEstimator, load_estimator
from codeserve.context.words import split_tokens, split_words, word_set
from codeserve.session.documents import EditorEvent, EditorSession, EditRecord
from codeserve.utils import lines_to_char_span

ACCOUNT_PY = "\n".join([
    "class Account:",
    "    rate = 1",
    "",
    "    def balance(self):",
    "        total = 0",
    "        for x in self.items:",
    "            total += x",
    "        return total",
    "",
])

CALC_C = "\n".join(
    ["int compute(int n) {", "    int a = 0;"]
    + ["    a += 1;"] * 50
    + ["    return a;", "}", ""]
)

VOCAB = ["alpha", "beta", "gamma", "delta", "annual", "balance", "rate", "total", "x", "y"]


def open_session(files, focused=None, cursor=None):
    session = EditorSession()
    for file_id, content in files.items():
        session.apply_event(EditorEvent.file_open(file_id, 0, content))
    if focused is not None:
        session.apply_event(EditorEvent.cursor_move(focused, 0, cursor))
    return session


class SplitWordsTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(split_words("ComputeAnnualBalance"), ["compute", "annual", "balance"])
        self.assertEqual(split_words("annual_balance"), ["annual", "balance"])
        self.assertEqual(split_words(""), [])

    def test_acronyms_and_digits(self):
        self.assertEqual(split_words("HTTPServer2go"), ["http", "server", "2", "go"])
        self.assertEqual(split_words("x.y->z"), ["x", "y", "z"])

    def test_non_ascii_letters(self):
        self.assertEqual(split_words("größe_berechnen"), ["größe", "berechnen"])
        self.assertEqual(split_words("ÄpfelZählen"), ["äpfel", "zählen"])
        self.assertEqual(split_tokens("größe = 1"), ["größe", " ", "=", " ", "1"])

    def test_rejoining_is_stable(self):
        rng = random.Random(5)
        alphabet = "aB_9 .Cd"
        for _ in range(300):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 16)))
            words = split_words(text)
            self.assertEqual(split_words("_".join(words)), words)

    def test_tokens_concatenate_back(self):
        for line in ["    total += x  # sum", "fooBar(baz_qux, 10)", "naïve = 1", ""]:
            self.assertEqual("".join(split_tokens(line)), line)


class TokenEstimatorTests(SimpleTestCase):

    def test_four_chars_per_token(self):
        estimator = CharRatioEstimator()
        self.assertEqual(estimator.estimate(""), 0)
        self.assertEqual(estimator.estimate("abcd"), 1)
        self.assertEqual(estimator.estimate("abcde"), 2)

    def test_truncate(self):
        estimator = CharRatioEstimator()
        self.assertEqual(estimator.truncate("a" * 20, 3), "a" * 12)
        self.assertEqual(estimator.truncate("abc", 3), "abc")

    def test_load_by_dotted_path(self):
        estimator = load_estimator("codeserve.context.tokens.CharRatioEstimator", 2)
        self.assertEqual(estimator.estimate("abcd"), 2)


class ScanMatchesTests(SimpleTestCase):

    def test_word_association(self):
        matches = scan_matches({"b.py": "annual_balance = 0"}, "ComputeAnnualBalance(")
        self.assertEqual(len(matches), 1)
        self.assertEqual(matches[0].score, 2)
        self.assertEqual(matches[0].kind, LEXICAL_MATCH)
        self.assertEqual(matches[0].range, (0, 18))

    def test_no_shared_words(self):
        self.assertEqual(scan_matches({"b.py": "gamma delta"}, "alpha beta"), [])
        self.assertEqual(scan_matches({"b.py": "gamma delta"}, ""), [])

    def test_disjoint_windows_ordered_by_score(self):
        content = "\n".join(["alpha", "zzz", "alpha beta gamma"])
        matches = scan_matches({"b": content}, "alpha beta gamma", window_lines=1, stride_lines=1)
        self.assertEqual([m.score for m in matches], [3, 1])
        self.assertEqual(content[matches[0].start:matches[0].end], "alpha beta gamma")

    def test_overlapping_windows_merge(self):
        content = "\n".join(["alpha"] * 5)
        matches = scan_matches({"b": content}, "alpha", window_lines=2, stride_lines=1)
        self.assertEqual(len(matches), 1)
        self.assertEqual(matches[0].range, (0, len(content)))

    def test_cursor_window_excluded(self):
        content = "\n".join(["alpha", "beta", "alpha"])
        matches = scan_matches(
            {"a": content}, "alpha", window_lines=1, stride_lines=1, cursor=("a", 7)
        )
        self.assertEqual([m.start for m in matches], [0, 11])
        matches = scan_matches(
            {"a": content}, "alpha", window_lines=1, stride_lines=1, cursor=("a", 0)
        )
        self.assertEqual([m.start for m in matches], [11])

    def test_matches_brute_force_when_windows_do_not_overlap(self):
        rng = random.Random(17)
        for _ in range(200):
            window = rng.randint(1, 4)
            files = {}
            for file_id in ["a", "b", "c"][:rng.randint(1, 3)]:
                lines = [
                    " ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 3)))
                    for _ in range(rng.randint(1, 12))
                ]
                files[file_id] = "\n".join(lines)
            context = " ".join(rng.sample(VOCAB, 3))

            expected = []
            for file_id, content in files.items():
                lines = content.split("\n")
                for first in range(0, len(lines), window):
                    last = min(first + window, len(lines))
                    score = len(word_set("\n".join(lines[first:last])) & word_set(context))
                    if score:
                        start, end = lines_to_char_span(content, first, last)
                        expected.append((-score, file_id, start, end))
            expected.sort()

            matches = scan_matches(files, context, window_lines=window, stride_lines=window)
            self.assertEqual([(-m.score, m.file_id, m.start, m.end) for m in matches], expected)
            for m in matches:
                self.assertTrue(word_set(files[m.file_id][m.start:m.end]) & word_set(context))


class RankSnippetsTests(SimpleTestCase):

    def test_edits_always_first(self):
        edit = EditRecord("a", 0, 1, 5)
        match = Snippet("b", 0, 10, LEXICAL_MATCH, 10)
        ranked = rank_snippets([edit], [match])
        self.assertEqual([s.kind for s in ranked], [RECENT_EDIT, LEXICAL_MATCH])
        self.assertEqual(ranked[0].score, 5)

    def test_matches_by_score(self):
        low = Snippet("a", 0, 1, LEXICAL_MATCH, 1)
        high = Snippet("a", 5, 9, LEXICAL_MATCH, 4)
        self.assertEqual(rank_snippets([], [low, high]), [high, low])

    def test_ties_by_file_then_start(self):
        in_b = Snippet("b", 0, 3, LEXICAL_MATCH, 2)
        in_a = Snippet("a", 8, 9, LEXICAL_MATCH, 2)
        also_a = Snippet("a", 2, 3, LEXICAL_MATCH, 2)
        self.assertEqual(rank_snippets([], [in_b, in_a, also_a]), [also_a, in_a, in_b])

    def test_edits_by_recency(self):
        ranked = rank_snippets([EditRecord("a", 0, 1, 5), EditRecord("b", 0, 1, 9)], [])
        self.assertEqual([s.file_id for s in ranked], ["b", "a"])

    def test_edit_context_lines(self):
        content = "\n".join(f"line{n}" for n in range(10))
        start = content.index("line5")
        snippet = Snippet.from_edit(EditRecord("a", start, start + 1, 1), content, 3)
        self.assertEqual(content[snippet.start:snippet.end], "\n".join(f"line{n}" for n in range(2, 9)))

    def test_match_covered_by_edit_is_dropped(self):
        content = "\n".join(f"line{n}" for n in range(10))
        start = content.index("line5")
        covered = Snippet("a", start, start + 5, LEXICAL_MATCH, 3)
        elsewhere = Snippet("b", start, start + 5, LEXICAL_MATCH, 3)
        ranked = rank_snippets([EditRecord("a", start, start, 1)], [covered, elsewhere], {"a": content}, 3)
        self.assertEqual([s.kind for s in ranked], [RECENT_EDIT, LEXICAL_MATCH])
        self.assertEqual(ranked[1], elsewhere)


class RenderWithScopesTests(SimpleTestCase):

    def test_method_inside_class(self):
        rendered = render_with_scopes(ACCOUNT_PY, [(4, 6)], "account.py")
        self.assertEqual(rendered.split("\n"), [
            "class Account:",
            PRUNE_MARKER,
            "    def balance(self):",
            "        total = 0",
            "        for x in self.items:",
            PRUNE_MARKER,
        ])

    def test_whole_file_is_verbatim(self):
        lines = ACCOUNT_PY.split("\n")
        self.assertEqual(render_with_scopes(ACCOUNT_PY, [(0, len(lines))], "account.py"), ACCOUNT_PY)

    def test_two_snippets_share_one_signature(self):
        rendered = render_with_scopes(CALC_C, [(1, 2), (52, 53)], "calc.c")
        self.assertEqual(rendered.split("\n"), [
            "int compute(int n) {",
            "    int a = 0;",
            PRUNE_MARKER,
            "    return a;",
            PRUNE_MARKER,
        ])

    def test_braces_in_strings_are_ignored(self):
        content = 'const s = "{";\nfunction f() {\n  return s;\n}\n'
        index = ScopeIndex(content, "f.js")
        self.assertEqual(index.style, "brace")
        self.assertEqual(index.chain(2).lines, (1,))
        self.assertEqual(index.chain(2).headers, ("function f() {",))

    def test_lone_brace_uses_previous_line(self):
        index = ScopeIndex("int f()\n{\n  return 1;\n}\n", "f.c")
        self.assertEqual(index.chain(2).lines, (0,))

    def test_malformed_ranges(self):
        for bad in [(3, 2), (0, 100), (-1, 1), (2, 2)]:
            with self.assertRaises(MalformedRange):
                render_with_scopes(ACCOUNT_PY, [bad], "account.py")

    def test_output_is_subsequence_with_one_marker_per_gap(self):
        rng = random.Random(23)
        for n in range(500):
            file_id, lines, chains = (brace_fixture if n % 2 else indent_fixture)(rng)
            content = "\n".join(lines)
            ranges = []
            for _ in range(rng.randint(1, 3)):
                first = rng.randrange(len(lines))
                ranges.append((first, rng.randint(first + 1, len(lines))))

            index = ScopeIndex(content, file_id)
            if chains is not None:
                if "{" in content:
                    self.assertEqual(index.style, "brace")
                self.assertEqual([index.chain(k).lines for k in range(len(lines))], chains)
            out = index.render(ranges).split("\n")
            position = {line: k for k, line in enumerate(lines)}
            kept = sorted(position[line] for line in out if line != PRUNE_MARKER)

            expected = []
            for k, line in enumerate(lines):
                if k in kept:
                    expected.append(line)
                elif not expected or expected[-1] != PRUNE_MARKER:
                    expected.append(PRUNE_MARKER)
            self.assertEqual(out, expected)

            for first, last in ranges:
                for k in range(first, last):
                    self.assertIn(k, kept)
                    for header in index.chain(k).lines:
                        self.assertIn(header, kept)


def indent_fixture(rng):
    indent, lines = 0, []
    for n in range(rng.randint(1, 25)):
        indent = max(0, indent + rng.choice([-4, 0, 0, 4]))
        lines.append(" " * indent + f"line{n}")
    return "fixture.py", lines, None


def brace_fixture(rng):
    """Nested C blocks with unique lines, plus the expected scope chain
    (header line numbers, outermost first) of every line."""
    lines, chains, open_blocks = [], [], []
    for n in range(rng.randint(1, 25)):
        pad = "    " * len(open_blocks)
        choice = rng.random()
        if choice < 0.3:
            chains.append(tuple(open_blocks))
            lines.append(f"{pad}void block{n}() {{")
            open_blocks.append(len(lines) - 1)
        elif choice < 0.5 and open_blocks:
            chains.append(tuple(open_blocks))
            open_blocks.pop()
            lines.append("    " * len(open_blocks) + f"}} // end {n}")
        else:
            chains.append(tuple(open_blocks))
            lines.append(f"{pad}stmt{n}();")
    closing = len(lines)
    while open_blocks:
        chains.append(tuple(open_blocks))
        open_blocks.pop()
        lines.append("    " * len(open_blocks) + f"}} // end {closing + len(open_blocks)}")
    return "fixture.c", lines, chains


class BuildPromptTests(SimpleTestCase):

    def setUp(self):
        other = "\n".join(f"section{n} alpha value{n}" for n in range(60))
        self.files = {"other.txt": other, "main.py": "def f():\n    return alpha\n"}
        self.session = open_session(self.files, focused="main.py", cursor=19)
        self.ranked = [
            Snippet("other.txt", *lines_to_char_span(other, first, first + 3), LEXICAL_MATCH, 3 - n)
            for n, first in enumerate([0, 20, 40])
        ]

    def build(self, budget, ranked=None):
        return build_prompt(self.session.snapshot(), self.ranked if ranked is None else ranked, budget=budget)

    def test_cursor_section_only(self):
        bundle = self.build(8192, ranked=[])
        self.assertEqual(bundle.rendered_sections, ())
        self.assertEqual(bundle.cursor_section.count(CURSOR_MARKER), 1)
        self.assertEqual(bundle.text, "FILE main.py\n" + bundle.cursor_section)
        self.assertEqual(bundle.token_estimate, CharRatioEstimator().estimate(bundle.text))
        self.assertEqual(bundle.output_budget, 128)

    def test_cursor_marker_position(self):
        bundle = self.build(8192, ranked=[])
        self.assertIn("    return" + CURSOR_MARKER + " alpha", bundle.cursor_section)

    def test_everything_fits(self):
        bundle = self.build(8192)
        self.assertEqual(bundle.snippets, tuple(self.ranked))
        self.assertEqual([f for f, _ in bundle.rendered_sections], ["other.txt"])
        self.assertTrue(bundle.text.startswith("FILE other.txt\nsection0 alpha value0"))

    def test_top_two_of_three(self):
        two = self.build(8192, ranked=self.ranked[:2]).token_estimate
        three = self.build(8192).token_estimate
        self.assertLess(two, three)
        bundle = self.build(two)
        self.assertEqual(bundle.snippets, tuple(self.ranked[:2]))
        self.assertEqual(bundle.token_estimate, two)

    def test_cursor_section_over_budget(self):
        with self.assertRaises(CursorSectionOverBudget):
            self.build(3)

    def test_budget_respected_and_packing_monotone(self):
        rng = random.Random(31)
        full = self.build(8192).token_estimate
        minimum = self.build(8192, ranked=[]).token_estimate
        previous = ()
        for budget in sorted(rng.randint(minimum, full + 10) for _ in range(40)):
            bundle = self.build(budget)
            self.assertLessEqual(bundle.token_estimate, budget)
            self.assertEqual(bundle.snippets[:len(previous)], previous)
            previous = bundle.snippets

    def test_pack_for_request(self):
        session = open_session(self.files, focused="main.py", cursor=19)
        session.apply_event(EditorEvent.insert("main.py", 1, " + 1"))
        config = EngineConfig(match_window_lines=5, match_stride_lines=5)
        bundle = pack_for_request(session.snapshot(), config, CharRatioEstimator())
        self.assertEqual(bundle.snippets[0].kind, RECENT_EDIT)
        context = word_set(text_around_cursor(session.document("main.py"), config.cursor_context_lines))
        for snippet in bundle.snippets[1:]:
            self.assertEqual(snippet.kind, LEXICAL_MATCH)
            text = self.files[snippet.file_id][snippet.start:snippet.end]
            self.assertTrue(word_set(text) & context)
        self.assertLessEqual(bundle.token_estimate, config.prompt_budget_tokens)

    def test_pack_for_an_unfocused_file(self):
        snapshot = self.session.snapshot()
        bundle = pack_for_request(snapshot, EngineConfig(), CharRatioEstimator(), file_id="other.txt")
        self.assertEqual(bundle.file_id, "other.txt")
        self.assertTrue(bundle.cursor_section.endswith("value59" + CURSOR_MARKER))
        self.assertEqual(bundle.section("other.txt"), bundle.cursor_section)
        with self.assertRaises(PackingError):
            pack_for_request(snapshot, EngineConfig(), CharRatioEstimator(), file_id="gone.py")


class TransformPromptTests(SimpleTestCase):

    def setUp(self):
        self.files = {"account.py": ACCOUNT_PY, "notes.txt": "balance total rate\nunrelated\n"}
        self.session = open_session(self.files, focused="account.py", cursor=0)

    def build(self, selection=None, ranked=(), budget=8192):
        return build_transform_prompt(
            self.session.snapshot(), list(ranked), "account.py", "rename total", selection=selection, budget=budget
        )

    def test_layout(self):
        start = ACCOUNT_PY.index("total = 0")
        bundle = self.build(selection=(start, start + 5))
        self.assertEqual(bundle.section("account.py"), ACCOUNT_PY)
        self.assertEqual(bundle.selection, (start, start + 5))
        self.assertIn(SELECTION_START + "total" + SELECTION_END + " = 0", bundle.focus)
        self.assertTrue(bundle.text.startswith("FILE account.py\n" + ACCOUNT_PY + "\nSELECTION account.py\n"))
        self.assertTrue(bundle.text.endswith("\nINSTRUCTION\nrename total"))
        self.assertEqual(bundle.token_estimate, CharRatioEstimator().estimate(bundle.text))

    def test_without_selection_the_cursor_is_marked(self):
        bundle = self.build()
        self.assertIn(CURSOR_MARKER + "class Account:", bundle.focus)
        self.assertNotIn(SELECTION_START, bundle.text)

    def test_context_comes_from_other_files(self):
        notes = Snippet("notes.txt", 0, 18, LEXICAL_MATCH, 3)
        ranked = [Snippet("account.py", 0, 14, LEXICAL_MATCH, 5), notes]
        bundle = self.build(ranked=ranked)
        self.assertEqual(bundle.snippets, (notes,))
        self.assertEqual([f for f, _ in bundle.rendered_sections], ["notes.txt"])
        self.assertTrue(bundle.text.startswith("FILE notes.txt\nbalance total rate"))

    def test_malformed_selection(self):
        for bad in [(5, 2), (0, 10 ** 4), (-1, 2), (True, 3), ("a", 1), (1,)]:
            with self.assertRaises(MalformedRange, msg=repr(bad)):
                self.build(selection=bad)

    def test_whole_file_over_budget(self):
        with self.assertRaises(CursorSectionOverBudget):
            self.build(budget=10)

    def test_pack_for_transform(self):
        config = EngineConfig(match_window_lines=1, match_stride_lines=1)
        snapshot = self.session.snapshot()
        bundle = pack_for_transform(snapshot, config, CharRatioEstimator(), "account.py", "use the annual rate")
        self.assertEqual(bundle.instruction, "use the annual rate")
        self.assertEqual(bundle.output_budget, config.prompt_budget_tokens)
        self.assertEqual([s.file_id for s in bundle.snippets], ["notes.txt"])
        with self.assertRaises(PackingError):
            pack_for_transform(snapshot, config, CharRatioEstimator(), "gone.py", "anything")
