import re
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

logger = logging.getLogger(__name__)

# identifier characters directly before the cursor form the "fragment" that a
# streak is anchored in front of
FRAGMENT_RE = re.compile(r"\w*\Z")


def _sha256(text):
    return hashlib.sha256(text.encode("utf-8"))


@dataclass(frozen=True)
class CompletionRequest:
    """A completion request at `anchor` in one file. The windows bound what the
    model and the oracle see; the digests cover the whole document so that an
    edit anywhere outside the typed text breaks adaptation. `head` is the
    running hash of the text before the identifier fragment, extended by the
    predicted text when a later request is checked against this one."""

    request_id: str
    file_id: str
    anchor: int
    prefix_window: str
    suffix_window: str
    issued_at: int
    prefix_digest: str = ""
    suffix_digest: str = ""
    head: object = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"{self.request_id} ({self.file_id}@{self.anchor})"

    @classmethod
    def from_text(cls, request_id, file_id, content, cursor, issued_at, prefix_chars=4096, suffix_chars=1024):
        prefix_window = content[max(0, cursor - prefix_chars):cursor]
        fragment = FRAGMENT_RE.search(prefix_window).group(0)
        head = _sha256(content[:cursor - len(fragment)])
        prefix = head.copy()
        prefix.update(fragment.encode("utf-8"))
        return cls(
            request_id=request_id,
            file_id=file_id,
            anchor=cursor,
            prefix_window=prefix_window,
            suffix_window=content[cursor:cursor + suffix_chars],
            issued_at=issued_at,
            prefix_digest=prefix.hexdigest(),
            suffix_digest=_sha256(content[cursor:]).hexdigest(),
            head=head,
        )

    @classmethod
    def from_document(cls, request_id, document, issued_at, prefix_chars, suffix_chars):
        """Build a request from the document's current cursor, keeping at most
        prefix_chars before and suffix_chars after it."""
        return cls.from_text(
            request_id,
            document.file_id,
            document.content,
            document.cursor,
            issued_at,
            prefix_chars,
            suffix_chars,
        )

    @property
    def fragment(self):
        return FRAGMENT_RE.search(self.prefix_window).group(0)

    def head_digest_with(self, text):
        """Digest of the text before the fragment followed by `text`."""
        extended = self.head.copy()
        extended.update(text.encode("utf-8"))
        return extended.hexdigest()


@dataclass
class StreakEntry:
    """A model prediction, pending or finished. Once completed, the streak is
    anchored in front of the identifier fragment the origin request was made
    in, and predicted_text starts with that fragment: a response "uild" to a
    request at "B|" becomes the streak "Build" anchored before the "B"."""

    origin_request: CompletionRequest
    created_at: int
    status: str = "in_flight"
    predicted_text: str = ""
    response_text: str = ""
    anchor: Optional[int] = None
    cancelled: bool = False

    def __str__(self):
        return f"streak {self.request_id} [{self.status}]"

    @property
    def request_id(self):
        return self.origin_request.request_id

    @property
    def order_key(self):
        return (self.created_at, self.request_id)

    @property
    def adaptable(self):
        return self.status == "completed" and bool(self.response_text)

    def complete(self, response_text):
        fragment = self.origin_request.fragment
        self.response_text = response_text
        self.predicted_text = fragment + response_text if response_text else ""
        self.anchor = self.origin_request.anchor - len(fragment)
        self.status = "completed"

    def adapt(self, request, prefix_window_chars):
        """Return the remainder of this streak for `request`, or None unless the
        document is the origin document with a strict prefix of the prediction
        typed at the streak anchor and nothing else changed."""

        if not self.adaptable:
            return None
        origin = self.origin_request
        if request.file_id != origin.file_id or request.anchor < origin.anchor:
            return None

        typed_len = request.anchor - self.anchor
        if typed_len >= len(self.predicted_text):
            return None

        if request.suffix_window != origin.suffix_window:
            return None

        base = origin.prefix_window[:len(origin.prefix_window) - len(origin.fragment)]
        expected = base + self.predicted_text[:typed_len]
        prefix = request.prefix_window
        if not expected.endswith(prefix):
            return None
        # a shorter prefix is only fine when the window was saturated
        if len(prefix) != len(expected) and len(prefix) < prefix_window_chars:
            return None

        # the windows are bounded, the digests cover the rest of the document
        if request.suffix_digest != origin.suffix_digest:
            return None
        if request.prefix_digest != origin.head_digest_with(self.predicted_text[:typed_len]):
            return None

        return self.predicted_text[typed_len:]


@dataclass(frozen=True)
class Adaptation:
    text: str
    entry: StreakEntry


def try_adapt(cache: Iterable[StreakEntry], request, prefix_window_chars):
    """Adapt the oldest matching completed streak to `request`. Picking the
    oldest keeps consecutive suggestions stable while the user types."""

    best = None
    for entry in cache:
        text = entry.adapt(request, prefix_window_chars)
        if text is None:
            continue
        if best is None or entry.order_key < best.entry.order_key:
            best = Adaptation(text=text, entry=entry)
    return best
