import json
import random
import itertools
import tempfile
from collections import Counter
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from codeserve.edits.diff import (
    ADDED,
    MODIFIED,
    MOVED_FROM,
    MOVED_TO,
    REMOVED,
    UNCHANGED,
    detect_moves,
    line_diff,
    render_diff,
)
from codeserve.edits.script import (
    BOF,
    EOF,
    AmbiguousAnchor,
    AnchorNotFound,
    EditScript,
    EmptyScript,
    Hunk,
    NoChange,
    OverlappingHunks,
    ScriptSyntaxError,
    apply_edit,
    locate_anchors,
    parse_edit_script,
    serialize_edit_script,
)

TOTAL_BEFORE = "\n".join([
    "import math",
    "def total(num1, num2):",
    "    result = abc + num2",
    "    return result",
    "",
])

SINGLE_HUNK = "\n".join([
    "@@",
    "= import math",
    "= def total(num1, num2):",
    "-     result = abc + num2",
    "+     result = num1 + num2",
    "=     return result",
    "",
])


def lcs_length(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            table[i + 1][j + 1] = table[i][j] + 1 if x == y else max(table[i][j + 1], table[i + 1][j])
    return table[-1][-1]


def mutate(rng, lines, alphabet):
    out = list(lines)
    for _ in range(rng.randint(1, 4)):
        choice = rng.random()
        if choice < 0.35 and out:
            del out[rng.randrange(len(out))]
        elif choice < 0.7:
            out.insert(rng.randint(0, len(out)), rng.choice(alphabet))
        elif out:
            out[rng.randrange(len(out))] = rng.choice(alphabet)
    return out


class ParseEditScriptTests(SimpleTestCase):

    def test_single_hunk(self):
        script = parse_edit_script(SINGLE_HUNK)
        self.assertEqual(len(script), 1)
        hunk = script.hunks[0]
        self.assertEqual(hunk.anchor_pre2, "import math")
        self.assertEqual(hunk.anchor_post, "    return result")
        self.assertEqual(hunk.removed, ("    result = abc + num2",))
        self.assertEqual(hunk.added, ("    result = num1 + num2",))
        self.assertEqual(script.to_text(), SINGLE_HUNK)

    def test_missing_anchor(self):
        with self.assertRaises(ScriptSyntaxError):
            parse_edit_script("@@\n= a\n- x\n+ y\n= b\n")

    def test_missing_trailing_anchor(self):
        with self.assertRaises(ScriptSyntaxError):
            parse_edit_script("@@\n= a\n= b\n- x\n")

    def test_bad_header_and_empty_hunk(self):
        with self.assertRaises(ScriptSyntaxError):
            parse_edit_script("hello\n")
        with self.assertRaises(ScriptSyntaxError):
            parse_edit_script("@@\n= a\n= b\n= c\n")

    def test_empty_script(self):
        for text in ["", "\n", "  \n\n"]:
            with self.assertRaises(EmptyScript):
                parse_edit_script(text)

    def test_two_hunks(self):
        before = "\n".join(f"line{n}" for n in range(20))
        after = before.replace("line3", "LINE3").replace("line15", "LINE15")
        script = serialize_edit_script(before, after)
        self.assertEqual(len(script), 2)
        parsed = parse_edit_script(script.to_text())
        self.assertEqual(parsed, script)
        self.assertLess(locate_anchors(parsed, before)[0], locate_anchors(parsed, before)[1])

    def test_sentinels_and_empty_lines(self):
        script = EditScript((Hunk(BOF, BOF, "", (), ("",)),))
        self.assertEqual(parse_edit_script(script.to_text()), script)
        self.assertEqual(parse_edit_script("@@\n= <BOF>\n= <BOF>\n+\n=\n"), script)


class LocateAnchorsTests(SimpleTestCase):

    def test_unique_match(self):
        self.assertEqual(locate_anchors(parse_edit_script(SINGLE_HUNK), TOTAL_BEFORE), [2])

    def test_anchors_absent(self):
        with self.assertRaises(AnchorNotFound):
            locate_anchors(parse_edit_script(SINGLE_HUNK), "import os\nprint(1)\n")

    def test_duplicated_region_is_ambiguous(self):
        content = TOTAL_BEFORE + "\n".join(TOTAL_BEFORE.split("\n")[:4]) + "\n"
        with self.assertRaises(AmbiguousAnchor):
            locate_anchors(parse_edit_script(SINGLE_HUNK), content)

    def test_overlapping_hunks(self):
        script = EditScript((
            Hunk("a", "b", "d", ("c",), ("C",)),
            Hunk("b", "c", "e", ("d",), ("D",)),
        ))
        with self.assertRaises(OverlappingHunks):
            locate_anchors(script, "a\nb\nc\nd\ne")
        with self.assertRaises(OverlappingHunks):
            locate_anchors(EditScript(tuple(reversed(script.hunks))), "a\nb\nc\nd\ne")

    def test_injected_duplicate_flips_to_ambiguous(self):
        before = [f"line{n}" for n in range(12)]
        after = list(before)
        after[5] = "changed"
        script = serialize_edit_script("\n".join(before), "\n".join(after))
        self.assertEqual(locate_anchors(script, "\n".join(before)), [5])
        region = before[3:7]
        for k in list(range(0, 4)) + list(range(7, 13)):
            injected = before[:k] + region + before[k:]
            with self.assertRaises(AmbiguousAnchor):
                locate_anchors(script, "\n".join(injected))


class ApplyEditTests(SimpleTestCase):

    def test_replace_one_line(self):
        result = apply_edit(parse_edit_script(SINGLE_HUNK), TOTAL_BEFORE)
        self.assertEqual(result, TOTAL_BEFORE.replace("abc", "num1"))

    def test_pure_insertion(self):
        script = EditScript((Hunk(BOF, "a", "b", (), ("x",)),))
        self.assertEqual(apply_edit(script, "a\nb"), "a\nx\nb")

    def test_whole_file_hunk(self):
        script = EditScript((Hunk(BOF, BOF, EOF, ("",), ("new", "")),))
        self.assertEqual(apply_edit(script, ""), "new\n")

    def test_round_trip(self):
        rng = random.Random(41)
        alphabet = ["a", "b", "c", "{", "}", "", "x = 1", "<EOF>"]
        for _ in range(1000):
            before = [rng.choice(alphabet) for _ in range(rng.randint(0, 40))]
            after = mutate(rng, before, alphabet)
            if after == before:
                continue
            before_text, after_text = "\n".join(before), "\n".join(after)
            if before_text == after_text:
                continue
            script = serialize_edit_script(before_text, after_text)
            self.assertEqual(parse_edit_script(script.to_text()), script)
            self.assertEqual(apply_edit(script, before_text), after_text)

    def test_lines_outside_hunks_are_untouched(self):
        rng = random.Random(43)
        for _ in range(200):
            before = [f"line{n}" for n in range(rng.randint(1, 30))]
            after = mutate(rng, before, ["new", "other"])
            if after == before:
                continue
            script = serialize_edit_script("\n".join(before), "\n".join(after))
            positions = locate_anchors(script, "\n".join(before))
            result = apply_edit(script, "\n".join(before)).split("\n")
            shift, previous_end = 0, 0
            for start, hunk in zip(positions, script.hunks):
                self.assertEqual(result[previous_end + shift:start + shift], before[previous_end:start])
                shift += len(hunk.added) - len(hunk.removed)
                previous_end = start + len(hunk.removed)
            self.assertEqual(result[previous_end + shift:], before[previous_end:])

    def test_serialize_anchors(self):
        before = "\n".join(f"line{n}" for n in range(10))
        script = serialize_edit_script(before, before.replace("line5", "five"))
        hunk = script.hunks[0]
        self.assertEqual((hunk.anchor_pre2, hunk.anchor_pre1, hunk.anchor_post), ("line3", "line4", "line6"))

        script = serialize_edit_script(before, before.replace("line0", "zero"))
        hunk = script.hunks[0]
        self.assertEqual((hunk.anchor_pre2, hunk.anchor_pre1), (BOF, BOF))

    def test_ambiguous_anchors_fall_back_to_whole_file(self):
        before = "a\nb\nc\nd\na\nb\nc\nd"
        after = "a\nb\nC\nd\na\nb\nc\nd"
        script = serialize_edit_script(before, after)
        self.assertEqual(len(script), 1)
        self.assertEqual(script.hunks[0].anchor_pre1, BOF)
        self.assertEqual(script.hunks[0].anchor_post, EOF)
        self.assertEqual(apply_edit(script, before), after)

    def test_no_change(self):
        with self.assertRaises(NoChange):
            serialize_edit_script("same", "same")


class LineDiffTests(SimpleTestCase):

    def test_identical(self):
        self.assertEqual([r.tag for r in line_diff(["a", "b"], ["a", "b"])], [UNCHANGED])
        rendered = render_diff("a\nb", "a\nb")
        self.assertEqual(rendered.decorated_count, 0)
        self.assertTrue(all(line.tag == UNCHANGED for line in rendered.decorated_lines))

    def test_one_inserted_line(self):
        rendered = render_diff("a\nb", "a\nnew\nb")
        self.assertEqual([line.tag for line in rendered.decorated_lines], [UNCHANGED, ADDED, UNCHANGED])
        self.assertEqual(rendered.decorated_count, 1)

    def test_empty_before(self):
        rendered = render_diff("", "one\ntwo")
        self.assertEqual([line.tag for line in rendered.decorated_lines], [ADDED, ADDED])

    def test_decorated_count_is_minimal(self):
        symbols = ["alpha()", "beta()", "gamma()"]
        sequences = [list(s) for n in range(5) for s in itertools.product(symbols, repeat=n)]
        for a in sequences:
            for b in sequences:
                rendered = render_diff("\n".join(a), "\n".join(b))
                self.assertEqual(rendered.decorated_count, len(a) + len(b) - 2 * lcs_length(a, b))

    def test_decorated_count_is_minimal_on_longer_inputs(self):
        rng = random.Random(47)
        symbols = ["a", "b", "c"]
        for _ in range(3000):
            a = [rng.choice(symbols) for _ in range(rng.randint(0, 8))]
            b = [rng.choice(symbols) for _ in range(rng.randint(0, 8))]
            rendered = render_diff("\n".join(a), "\n".join(b))
            self.assertEqual(rendered.decorated_count, len(a) + len(b) - 2 * lcs_length(a, b))


class MoveTests(SimpleTestCase):

    def test_block_moved_to_bottom(self):
        block = ["def moved():", "    value = compute()", "    return value"]
        rest = ["first = 1", "second = 2", "third = 3", "fourth = 4"]
        rendered = render_diff("\n".join(block + rest), "\n".join(rest + block))
        counts = rendered.counts()
        self.assertEqual(counts[MOVED_FROM], 3)
        self.assertEqual(counts[MOVED_TO], 3)
        self.assertEqual(counts[ADDED], 0)
        self.assertEqual(counts[REMOVED], 0)

        sources = {(l.before_line, l.after_line) for l in rendered.decorated_lines if l.tag == MOVED_FROM}
        targets = {(l.before_line, l.after_line) for l in rendered.decorated_lines if l.tag == MOVED_TO}
        self.assertEqual(sources, targets)

    def test_trivial_lines_do_not_move(self):
        self.assertEqual(detect_moves({1: "}"}, {2: "}"}), [])
        self.assertEqual(detect_moves({1: "   "}, {2: "   "}), [])
        self.assertEqual(detect_moves({0: "  foo();"}, {3: "  foo();   "}), [(0, 3)])

    def test_earliest_target_wins(self):
        removed = {2: "call_a()", 3: "call_b()"}
        added = {0: "call_a()", 1: "call_b()", 5: "call_a()", 6: "call_b()"}
        self.assertEqual(detect_moves(removed, added), [(2, 0), (3, 1)])

    def test_longest_run_first(self):
        removed = {0: "aaa", 1: "bbb", 5: "bbb"}
        added = {10: "bbb", 20: "aaa", 21: "bbb"}
        self.assertEqual(detect_moves(removed, added), [(0, 20), (1, 21), (5, 10)])

    def test_moves_are_conserved(self):
        rng = random.Random(53)
        alphabet = ["foo()", "bar()", "baz()", "}", ""]
        for _ in range(300):
            before = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
            after = before[:]
            rng.shuffle(after)
            rendered = render_diff("\n".join(before), "\n".join(after))
            sources = Counter(l.text.rstrip() for l in rendered.decorated_lines if l.tag == MOVED_FROM)
            targets = Counter(l.text.rstrip() for l in rendered.decorated_lines if l.tag == MOVED_TO)
            self.assertEqual(sources, targets)


class RenderDiffTests(SimpleTestCase):

    def test_one_word_changed(self):
        rendered = render_diff("x = 1\ntotal = compute(abc, 3)", "x = 1\ntotal = compute(num1, 3)")
        modified = [line for line in rendered.decorated_lines if line.decorated]
        self.assertEqual(len(modified), 1)
        line = modified[0]
        self.assertEqual(line.tag, MODIFIED)
        self.assertEqual(line.old_text, "total = compute(abc, 3)")
        self.assertEqual(line.text, "total = compute(num1, 3)")
        self.assertEqual(line.removed_spans, [(16, 19)])
        self.assertEqual(line.added_spans, [(16, 20)])
        self.assertEqual(rendered.decorated_count, 2)
        self.assertEqual(rendered.highlighted_words, 3)

    def test_pure_move_has_only_move_tags(self):
        rendered = render_diff("keep = 0\nmove_me()\nstay = 1\nstay = 2", "keep = 0\nstay = 1\nstay = 2\nmove_me()")
        tags = {line.tag for line in rendered.decorated_lines}
        self.assertEqual(tags, {UNCHANGED, MOVED_FROM, MOVED_TO})

    def test_text_and_json_output(self):
        rendered = render_diff("a\nb", "a\nc")
        self.assertEqual(rendered.to_text(), "  a\n~ [-b-]{+c+}")
        data = rendered.to_dict()
        self.assertEqual(data["decorated_count"], 2)
        self.assertEqual(data["lines"][1]["removed_spans"], [[0, 1]])


class EditCommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text)
        return str(path)

    def test_diff_text(self):
        out = StringIO()
        call_command("diff", self.write("a.txt", "a\nb\n"), self.write("b.txt", "a\nc\n"), "--stats", stdout=out)
        self.assertIn("~ [-b-]{+c+}", out.getvalue())
        self.assertIn("decorated lines: 2", out.getvalue())

    def test_diff_json(self):
        out = StringIO()
        call_command("diff", self.write("a.txt", "a\n"), self.write("b.txt", "a\nz\n"), "--format", "json", stdout=out)
        self.assertEqual(json.loads(out.getvalue())["counts"][ADDED], 1)

    def test_script_then_patch_in_place(self):
        before = self.write("before.py", TOTAL_BEFORE)
        after = self.write("after.py", TOTAL_BEFORE.replace("abc", "num1"))
        out = StringIO()
        call_command("diff", before, after, "--format", "script", stdout=out)
        script = self.write("change.edit", out.getvalue())

        call_command("patch", script, before, "--in-place", stdout=StringIO())
        self.assertEqual(Path(before).read_text(), Path(after).read_text())

    def test_patch_to_stdout(self):
        out = StringIO()
        call_command("patch", self.write("s.edit", SINGLE_HUNK), self.write("t.py", TOTAL_BEFORE), stdout=out)
        self.assertEqual(out.getvalue(), TOTAL_BEFORE.replace("abc", "num1"))

    def test_input_errors_exit_with_2(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("patch", self.write("s.edit", "@@\nbad\n"), self.write("t.py", "x"))
        self.assertEqual(ctx.exception.returncode, 2)
        with self.assertRaises(CommandError) as ctx:
            call_command("diff", str(self.dir / "missing"), str(self.dir / "other"))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_usage_errors_exit_with_1(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("diff", "only-one-path")
        self.assertEqual(ctx.exception.returncode, 1)
