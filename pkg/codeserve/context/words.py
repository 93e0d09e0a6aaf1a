import re

# any letter except an ascii capital; non-ascii capitals are treated as
# lowercase since re has no unicode case classes
LOWER = r"[^\W\d_A-Z]"

# camelCase humps, ALLCAPS runs (keeping the last capital for the next word),
# lowercase runs and digit runs. everything else separates words.
WORD_RE = re.compile(rf"[A-Z]+(?=[A-Z]{LOWER})|[A-Z]?{LOWER}+|[A-Z]+|\d+")

# the same boundaries, but keeping case, punctuation and whitespace as tokens
# of their own; used for intraline diff highlights
TOKEN_RE = re.compile(rf"[A-Z]+(?=[A-Z]{LOWER})|[A-Z]?{LOWER}+|[A-Z]+|\d+|\s+|_|[^\w\s]")


def split_words(text):
    """Split identifiers (or any text) into lowercase words, so that
    ComputeAnnualBalance and annual_balance share "annual" and "balance"."""
    return [w.lower() for w in WORD_RE.findall(text)]

def word_set(text):
    return set(split_words(text))

def split_tokens(line):
    """Case-preserving tokens that concatenate back to `line`. Characters the
    pattern does not cover become tokens of their own."""
    out, pos = [], 0
    for match in TOKEN_RE.finditer(line):
        if match.start() > pos:
            out.append(line[pos:match.start()])
        out.append(match.group(0))
        pos = match.end()
    if pos < len(line):
        out.append(line[pos:])
    return out
