"""Vocabulary, word-embedding table, and keyword-averaged aspect vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError
from . import numeric as nm

UNK = "<unk>"


class Vocab:
    """Token -> dense integer id.  Id 0 is always the unknown token."""

    def __init__(self, tokens=()):
        self.itos: list[str] = [UNK]
        self.stoi: dict[str, int] = {UNK: 0}
        for tok in tokens:
            self.add(tok)

    unk_id = 0

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = len(self.itos)
            self.stoi[token] = idx
            self.itos.append(token)
        return idx

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, 0)

    def ids(self, tokens) -> list[int]:
        return [self.stoi.get(t, 0) for t in tokens]

    @classmethod
    def build(cls, token_stream) -> "Vocab":
        """Ids assigned in order of first occurrence."""
        vocab = cls()
        for tok in token_stream:
            vocab.add(tok)
        return vocab


def random_table(n_rows: int, d: int, rng: np.random.Generator, scale: float = 0.1,
                 dtype=np.float64) -> np.ndarray:
    return rng.uniform(-scale, scale, size=(n_rows, d)).astype(dtype, copy=False)


def lookup(table, token_id: int):
    """Embedding row for ``token_id``; traced when ``table`` is a tape node."""
    return nm.lookup(table, token_id)


def aspect_embedding(table, keyword_ids) -> np.ndarray:
    """Arithmetic mean of the keywords' embedding rows."""
    keyword_ids = list(keyword_ids)
    if not keyword_ids:
        raise DomainError("aspect needs at least one keyword")
    tv = nm.value(table)
    n = tv.shape[0]
    for k in keyword_ids:
        if not 0 <= k < n:
            raise DomainError(f"keyword id {k} outside table of {n} rows")
    return tv[keyword_ids].sum(axis=0) / len(keyword_ids)


@dataclass
class AspectSpec:
    name: str
    keywords: list[str]

    def __post_init__(self):
        if not self.keywords:
            raise DomainError(f"aspect {self.name!r} has no keywords")


def load_embeddings(path, vocab: Vocab, d: int, rng: np.random.Generator,
                    scale: float = 0.1, dtype=np.float64) -> tuple[np.ndarray, int]:
    """Build a ``|V| x d`` table, taking rows from a ``token v1 ... vd`` text file.

    Rows not covered by the file are drawn from U(-scale, scale).  Returns the
    table and the number of vocabulary rows that came from the file.
    """
    table = random_table(len(vocab), d, rng, scale, dtype)
    found = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) - 1 != d:
                raise FormatError(f"expected {d} values, got {len(parts) - 1}", line=lineno)
            try:
                row = np.array([float(p) for p in parts[1:]], dtype=dtype)
            except ValueError as exc:
                raise FormatError(str(exc), line=lineno) from exc
            idx = vocab.stoi.get(parts[0])
            if idx is not None:
                found.add(idx)
                table[idx] = row
    return table, len(found)
