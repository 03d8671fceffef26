"""Rule-based clause splitting and tokenization."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import DomainError

TOKEN_RE = re.compile(r"\w+|[^\w\s]")
SENTENCE_END = frozenset(".!?。！？")
CLAUSE_BREAK = frozenset(",;，；、")
DEFAULT_CONNECTIVES = ("but", "and", "although", "while", "because")
MIN_CLAUSE_WORDS = 2


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation, keeping punctuation."""
    return [m.group(0).lower() for m in TOKEN_RE.finditer(text)]


def _token_spans(text):
    return [(m.group(0).lower(), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


def _is_word(tok):
    return tok[0].isalnum() or tok[0] == "_"


@dataclass
class ClauseSpan:
    tokens: list[str]
    start: int
    end: int


@dataclass
class Clause:
    tokens: list[str]
    ids: list[int] = field(default_factory=list)
    span: tuple[int, int] | None = None

    def __len__(self):
        return len(self.tokens)


def split_clauses(text: str, connectives=DEFAULT_CONNECTIVES,
                  min_words: int = MIN_CLAUSE_WORDS) -> list[ClauseSpan]:
    """Split ``text`` into clause-sized fragments.

    Breaks after sentence terminators and commas/semicolons, and before any
    connective word.  A fragment with fewer than ``min_words`` word tokens is
    merged into the preceding fragment of the same sentence, or into the next
    one when it opens a sentence (``"Besides, the price ..."`` stays whole).
    """
    if not text or not text.strip():
        raise DomainError("cannot segment empty text")
    toks = _token_spans(text)
    if not toks:
        raise DomainError("text contains no tokens")
    connectives = {c.lower() for c in connectives}

    # (fragment tokens, sentence index)
    frags: list[tuple[list, int]] = []
    cur: list = []
    sent = 0
    for tok in toks:
        word = tok[0]
        if word in connectives and cur and any(_is_word(t[0]) for t in cur):
            frags.append((cur, sent))
            cur = []
        cur.append(tok)
        if word in SENTENCE_END:
            frags.append((cur, sent))
            cur = []
            sent += 1
        elif word in CLAUSE_BREAK:
            frags.append((cur, sent))
            cur = []
    if cur:
        frags.append((cur, sent))

    def n_words(frag):
        return sum(1 for t in frag if _is_word(t[0]))

    merged: list[tuple[list, int]] = []
    carry: list = []
    for frag, s in frags:
        frag = carry + frag
        carry = []
        if n_words(frag) >= min_words:
            merged.append((frag, s))
        elif merged and merged[-1][1] == s:
            merged[-1] = (merged[-1][0] + frag, s)
        else:
            carry = frag
    if carry:
        if merged:
            merged[-1] = (merged[-1][0] + carry, merged[-1][1])
        else:
            merged.append((carry, 0))

    return [ClauseSpan([t[0] for t in frag], frag[0][1], frag[-1][2]) for frag, _ in merged]


def clauses_from_tokens(token_lists) -> list[Clause]:
    """Wrap pre-segmented clauses, assigning spans over the space-joined text."""
    out = []
    pos = 0
    for toks in token_lists:
        text = " ".join(toks)
        out.append(Clause(list(toks), span=(pos, pos + len(text))))
        pos += len(text) + 1
    return out


def segment(text: str, connectives=DEFAULT_CONNECTIVES) -> list[Clause]:
    return [Clause(c.tokens, span=(c.start, c.end)) for c in split_clauses(text, connectives)]
