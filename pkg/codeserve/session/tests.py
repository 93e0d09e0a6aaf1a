import random

from django.test import SimpleTestCase

from codeserve.session.documents import (
    EditorEvent,
    EditorSession,
    EditRecord,
    OutOfBounds,
    OutOfOrderEvent,
    UnknownFile,
)


def random_events(rng, count=60):
    events = [EditorEvent.file_open("a", 0, "hello\nworld\n"), EditorEvent.file_open("b", 0, "")]
    ts = 0
    for _ in range(count):
        ts += rng.randint(0, 20)
        file_id = rng.choice(["a", "b"])
        kind = rng.choice(["insert", "insert", "delete", "move", "paste"])
        if kind == "insert":
            events.append(EditorEvent.insert(file_id, ts, rng.choice(["x", "yz", "\n", "abc"])))
        elif kind == "paste":
            events.append(EditorEvent.paste(file_id, ts, "pasted\ntext", full_file=rng.random() < 0.2))
        elif kind == "delete":
            events.append(EditorEvent.delete(file_id, ts, rng.randint(0, 2)))
        else:
            events.append(EditorEvent.cursor_move(file_id, ts, rng.randint(0, 4)))
    return events


def replay(events, capacity=32):
    session = EditorSession(edit_history_capacity=capacity)
    for event in events:
        try:
            session.apply_event(event)
        except OutOfBounds:
            pass
    return session


class ApplyEventTests(SimpleTestCase):

    def test_single_insertion(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, "ab"))
        doc = session.apply_event(EditorEvent.insert("a", 5, "c"))
        self.assertEqual(doc.content, "abc")
        self.assertEqual(doc.cursor, 3)
        self.assertEqual(session.recent_edits(), [EditRecord("a", 2, 3, 5)])

    def test_adjacent_inserts_coalesce(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, ""))
        session.apply_event(EditorEvent.insert("a", 1, "x"))
        session.apply_event(EditorEvent.insert("a", 2, "y"))
        self.assertEqual(session.recent_edits(), [EditRecord("a", 0, 2, 2)])

    def test_delete_beyond_content(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, "abc"))
        with self.assertRaises(OutOfBounds):
            session.apply_event(EditorEvent.delete("a", 1, 5))

    def test_cursor_move_beyond_content(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, "abc"))
        with self.assertRaises(OutOfBounds):
            session.apply_event(EditorEvent.cursor_move("a", 1, 4))

    def test_unknown_and_closed_files(self):
        session = EditorSession()
        with self.assertRaises(UnknownFile):
            session.apply_event(EditorEvent.insert("nope", 0, "x"))
        session.apply_event(EditorEvent.file_open("a", 0, "abc"))
        session.apply_event(EditorEvent.insert("a", 1, "d"))
        session.apply_event(EditorEvent.file_close("a", 2))
        self.assertEqual(session.recent_edits(), [])
        with self.assertRaises(UnknownFile):
            session.apply_event(EditorEvent.insert("a", 3, "x"))

    def test_backspace_shrinks_record(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, "0123"))
        session.apply_event(EditorEvent.insert("a", 1, "abc"))
        doc = session.apply_event(EditorEvent.delete("a", 2, 2))
        self.assertEqual(doc.content, "0123a")
        self.assertEqual(session.recent_edits(), [EditRecord("a", 4, 5, 2)])

    def test_version_strictly_increases(self):
        session = EditorSession()
        versions = [session.apply_event(EditorEvent.file_open("a", 0, "")).version]
        for ts, event in enumerate([
            EditorEvent.insert("a", 1, "x"),
            EditorEvent.cursor_move("a", 2, 0),
            EditorEvent.paste("a", 3, "yy"),
            EditorEvent.delete("a", 4, 1),
        ]):
            versions.append(session.apply_event(event).version)
        self.assertEqual(versions, sorted(set(versions)))

    def test_timestamps_must_not_go_back(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 10, ""))
        with self.assertRaises(OutOfOrderEvent):
            session.apply_event(EditorEvent.insert("a", 9, "x"))


class RecentEditsTests(SimpleTestCase):

    def test_recency_order(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("a", 0, ""))
        session.apply_event(EditorEvent.file_open("b", 0, ""))
        session.apply_event(EditorEvent.insert("a", 10, "x"))
        session.apply_event(EditorEvent.insert("b", 20, "y"))
        self.assertEqual([e.file_id for e in session.recent_edits()], ["b", "a"])

    def test_no_edits(self):
        self.assertEqual(EditorSession().recent_edits(), [])

    def test_equal_timestamps_break_on_file_id(self):
        session = EditorSession()
        session.apply_event(EditorEvent.file_open("b", 0, ""))
        session.apply_event(EditorEvent.file_open("a", 0, ""))
        session.apply_event(EditorEvent.insert("b", 10, "x"))
        session.apply_event(EditorEvent.insert("a", 10, "y"))
        self.assertEqual([e.file_id for e in session.recent_edits()], ["a", "b"])

    def test_history_capacity(self):
        session = EditorSession(edit_history_capacity=2)
        session.apply_event(EditorEvent.file_open("a", 0, "0123456789"))
        for ts, offset in enumerate([0, 4, 8], start=1):
            session.apply_event(EditorEvent.cursor_move("a", ts, offset))
            session.apply_event(EditorEvent.insert("a", ts, "x"))
        edits = session.recent_edits()
        self.assertEqual(len(edits), 2)
        self.assertEqual([e.last_touched for e in edits], [3, 2])


class SessionPropertyTests(SimpleTestCase):

    def test_replay_is_deterministic(self):
        rng = random.Random(7)
        for _ in range(50):
            events = random_events(rng)
            first, second = replay(events), replay(events)
            self.assertEqual(
                {k: (d.content, d.cursor, d.version) for k, d in first.documents.items()},
                {k: (d.content, d.cursor, d.version) for k, d in second.documents.items()},
            )
            self.assertEqual(first.recent_edits(), second.recent_edits())

    def test_records_never_touch(self):
        rng = random.Random(11)
        for _ in range(100):
            session = replay(random_events(rng))
            for file_id in session.documents:
                spans = sorted(e.range for e in session.edits if e.file_id == file_id)
                for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
                    self.assertLess(e1, s2)
                for s, e in spans:
                    self.assertLessEqual(0, s)
                    self.assertLessEqual(s, e)
                    self.assertLessEqual(e, len(session.documents[file_id].content))

    def test_length_accounting(self):
        rng = random.Random(3)
        for _ in range(50):
            session = EditorSession()
            session.apply_event(EditorEvent.file_open("a", 0, "seed"))
            expected = 4
            for ts in range(1, 40):
                if rng.random() < 0.6:
                    text = "ab" * rng.randint(0, 2)
                    session.apply_event(EditorEvent.insert("a", ts, text))
                    expected += len(text)
                else:
                    count = rng.randint(0, 3)
                    try:
                        session.apply_event(EditorEvent.delete("a", ts, count))
                        expected -= count
                    except OutOfBounds:
                        pass
            self.assertEqual(len(session.document("a").content), expected)
