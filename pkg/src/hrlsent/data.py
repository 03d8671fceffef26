"""Corpus records, the JSON-lines corpus format, splitting, and synthetic corpora.

Corpus file (UTF-8, one JSON object per line)::

    {"type": "header", "format": "hrlsent-corpus", "version": 1,
     "aspects_file": "aspects.txt", "num_classes": 5, "split_seed": 0}
    {"id": "d1", "clauses": [["good", "location"], ["bad", "room"]],
     "aspects": [{"name": "room", "rating": 2,
                  "gold_clause_mask": [0, 1], "gold_word_masks": [[0, 0], [1, 0]]}]}
    {"id": "d2", "text": "Great staff, tiny room.", "aspects": [...]}

Aspects file: one aspect per line, the name followed by its keywords.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError
from .segmentation import Clause, clauses_from_tokens, segment

FORMAT_NAME = "hrlsent-corpus"
FORMAT_VERSION = 1
SPLITS = ("train", "dev", "test")


@dataclass
class AspectQuery:
    aspect: str
    rating: int
    gold_clause_mask: list[int] | None = None
    gold_word_masks: list[list[int]] | None = None


@dataclass
class Document:
    id: str
    clauses: list[Clause]
    queries: list[AspectQuery]
    text: str | None = None

    def __post_init__(self):
        if not self.clauses:
            raise DomainError(f"document {self.id!r} has no clauses")
        for q in self.queries:
            if q.gold_clause_mask is not None and len(q.gold_clause_mask) != len(self.clauses):
                raise DomainError(f"document {self.id!r}: clause mask length mismatch")
            if q.gold_word_masks is not None:
                if len(q.gold_word_masks) != len(self.clauses) or any(
                        len(m) != len(c) for m, c in zip(q.gold_word_masks, self.clauses)):
                    raise DomainError(f"document {self.id!r}: word mask shape mismatch")

    @property
    def n(self):
        return len(self.clauses)

    def query(self, aspect: str) -> AspectQuery:
        for q in self.queries:
            if q.aspect == aspect:
                return q
        raise DomainError(f"document {self.id!r} has no query for aspect {aspect!r}")


@dataclass
class Corpus:
    documents: list[Document]
    aspects: dict[str, list[str]]
    num_classes: int = 5
    split_seed: int = 0
    splits: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.splits:
            self.splits = split_indices(len(self.documents), self.split_seed)

    def split(self, name: str) -> list[Document]:
        if name not in SPLITS:
            raise DomainError(f"unknown split {name!r}")
        return [self.documents[i] for i in self.splits[name]]

    def by_id(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise DomainError(f"no document with id {doc_id!r}")


def split_indices(n: int, seed: int = 0) -> dict[str, list[int]]:
    """8:1:1 partition by count; remainders go to train."""
    perm = np.random.default_rng(seed).permutation(n)
    n_eval = n // 10
    test = sorted(int(i) for i in perm[:n_eval])
    dev = sorted(int(i) for i in perm[n_eval:2 * n_eval])
    train = sorted(int(i) for i in perm[2 * n_eval:])
    return {"train": train, "dev": dev, "test": test}


# ----------------------------------------------------------------------- I/O


def load_aspects(path) -> dict[str, list[str]]:
    aspects: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise FormatError(f"aspect {parts[0]!r} has no keywords", line=lineno)
            if parts[0] in aspects:
                raise FormatError(f"duplicate aspect {parts[0]!r}", line=lineno)
            aspects[parts[0]] = [k.lower() for k in parts[1:]]
    if not aspects:
        raise FormatError("aspects file is empty")
    return aspects


def write_aspects(aspects: dict[str, list[str]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, kws in aspects.items():
            fh.write(" ".join([name, *kws]) + "\n")


def _mask(value, lineno, fieldname, nested=False):
    try:
        if nested:
            return [[int(bool(int(b))) for b in row] for row in value]
        return [int(bool(int(b))) for b in value]
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid mask: {exc}", line=lineno, field=fieldname) from exc


def _parse_document(rec, lineno, aspects, num_classes) -> Document:
    if not isinstance(rec, dict):
        raise FormatError("record is not an object", line=lineno)
    if "id" not in rec:
        raise FormatError("missing document id", line=lineno, field="id")
    doc_id = str(rec["id"])
    text = rec.get("text")
    if "clauses" in rec:
        raw = rec["clauses"]
        if (not isinstance(raw, list) or not raw
                or not all(isinstance(c, list) and c and all(isinstance(t, str) for t in c) for c in raw)):
            raise FormatError("clauses must be a non-empty list of non-empty token lists",
                              line=lineno, field="clauses")
        clauses = clauses_from_tokens([[t.lower() for t in c] for c in raw])
    elif isinstance(text, str):
        try:
            clauses = segment(text)
        except DomainError as exc:
            raise FormatError(str(exc), line=lineno, field="text") from exc
    else:
        raise FormatError("record needs 'clauses' or 'text'", line=lineno, field="clauses")

    raw_aspects = rec.get("aspects")
    if not isinstance(raw_aspects, list) or not raw_aspects:
        raise FormatError("aspects must be a non-empty list", line=lineno, field="aspects")
    queries = []
    for a in raw_aspects:
        if not isinstance(a, dict) or "name" not in a or "rating" not in a:
            raise FormatError("aspect entries need 'name' and 'rating'", line=lineno, field="aspects")
        name = a["name"]
        if name not in aspects:
            raise FormatError(f"unknown aspect {name!r}", line=lineno, field="aspects")
        rating = a["rating"]
        if not isinstance(rating, int) or isinstance(rating, bool) or not 1 <= rating <= num_classes:
            raise FormatError(f"rating {rating!r} outside [1, {num_classes}]", line=lineno,
                              field="rating")
        cm = a.get("gold_clause_mask")
        wm = a.get("gold_word_masks")
        queries.append(AspectQuery(
            name, rating,
            None if cm is None else _mask(cm, lineno, "gold_clause_mask"),
            None if wm is None else _mask(wm, lineno, "gold_word_masks", nested=True)))
    try:
        return Document(doc_id, clauses, queries, text)
    except DomainError as exc:
        raise FormatError(str(exc), line=lineno, field="gold_word_masks") from exc


def load_corpus(path, aspects_path=None) -> Corpus:
    """Read and validate a corpus file (see module docstring for the format)."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not records:
        raise FormatError("empty corpus")
    lineno, header = records[0]
    if not isinstance(header, dict) or header.get("type") != "header":
        raise FormatError("first record must be the header", line=lineno, field="type")
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise FormatError("unsupported corpus format or version", line=lineno, field="version")
    num_classes = header.get("num_classes", 5)
    if not isinstance(num_classes, int) or num_classes < 2:
        raise FormatError("num_classes must be an integer >= 2", line=lineno, field="num_classes")
    if aspects_path is None:
        if "aspects_file" not in header:
            raise FormatError("header lacks aspects_file", line=lineno, field="aspects_file")
        aspects_path = os.path.join(os.path.dirname(os.path.abspath(path)), header["aspects_file"])
    aspects = load_aspects(aspects_path)
    docs = [_parse_document(rec, ln, aspects, num_classes) for ln, rec in records[1:]]
    if not docs:
        raise FormatError("empty corpus")
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise FormatError(f"duplicate document id {doc.id!r}", field="id")
        seen.add(doc.id)
    return Corpus(docs, aspects, num_classes, int(header.get("split_seed", 0)))


def document_record(doc: Document) -> dict:
    rec = {"id": doc.id, "clauses": [c.tokens for c in doc.clauses]}
    if doc.text is not None:
        rec["text"] = doc.text
    rec["aspects"] = []
    for q in doc.queries:
        entry = {"name": q.aspect, "rating": q.rating}
        if q.gold_clause_mask is not None:
            entry["gold_clause_mask"] = q.gold_clause_mask
        if q.gold_word_masks is not None:
            entry["gold_word_masks"] = q.gold_word_masks
        rec["aspects"].append(entry)
    return rec


def write_corpus(corpus: Corpus, path, aspects_filename: str = "aspects.txt") -> None:
    """Write ``path`` plus the aspects file next to it."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    write_aspects(corpus.aspects, os.path.join(folder, aspects_filename))
    header = {"type": "header", "format": FORMAT_NAME, "version": FORMAT_VERSION,
              "aspects_file": aspects_filename, "num_classes": corpus.num_classes,
              "split_seed": corpus.split_seed}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for doc in corpus.documents:
            fh.write(json.dumps(document_record(doc), sort_keys=True) + "\n")


# ------------------------------------------------------------------ synthetic

FILLERS = (
    "the", "a", "we", "it", "this", "was", "were", "our", "they", "there", "had", "on",
    "for", "with", "at", "of", "in", "trip", "stay", "night", "day", "week", "time",
    "my", "us", "then", "also", "just", "really", "quite", "again", "during", "after",
    "before", "everything", "overall", "place", "visit", "family", "friend",
)

DEFAULT_ASPECTS = {
    "location": {
        "keywords": ["location", "area", "neighborhood"],
        "sentiment": {1: ["remote", "dangerous"], 2: ["inconvenient", "isolated"],
                      3: ["decent", "reachable"], 4: ["convenient", "handy"],
                      5: ["central", "perfect"]},
    },
    "room": {
        "keywords": ["room", "bed", "bathroom"],
        "sentiment": {1: ["filthy", "broken"], 2: ["cramped", "uncomfortable"],
                      3: ["ordinary", "adequate"], 4: ["cozy", "comfortable"],
                      5: ["spacious", "luxurious"]},
    },
    "service": {
        "keywords": ["service", "staff", "reception"],
        "sentiment": {1: ["rude", "hostile"], 2: ["slow", "careless"],
                      3: ["average", "polite"], 4: ["helpful", "friendly"],
                      5: ["outstanding", "attentive"]},
    },
    "value": {
        "keywords": ["value", "price", "cost"],
        "sentiment": {1: ["overpriced", "ripoff"], 2: ["pricey", "steep"],
                      3: ["fair", "reasonable"], 4: ["affordable", "cheap"],
                      5: ["bargain", "unbeatable"]},
    },
}


@dataclass
class SyntheticSpec:
    num_docs: int = 200
    num_classes: int = 5
    aspects: dict = field(default_factory=lambda: {k: DEFAULT_ASPECTS[k]
                                                   for k in ("location", "room", "service")})
    distractor_aspects: dict = field(default_factory=lambda: {"value": DEFAULT_ASPECTS["value"]})
    queries_per_doc: tuple[int, int] = (1, 3)
    clauses_per_doc: tuple[int, int] = (2, 6)
    words_per_clause: tuple[int, int] = (3, 6)
    noise_clause_ratio: float = 0.5
    noise_word_ratio: float = 0.5
    fillers: tuple[str, ...] = FILLERS
    split_seed: int = 0
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"unknown synthetic spec key(s): {', '.join(unknown)}")
        data = dict(data)
        for key in ("queries_per_doc", "clauses_per_doc", "words_per_clause"):
            if key in data:
                data[key] = tuple(data[key])
        if "fillers" in data:
            data["fillers"] = tuple(data["fillers"])
        return cls(**data)

    def lexicon(self, name: str) -> dict[int, list[str]]:
        spec = self.aspects.get(name) or self.distractor_aspects[name]
        sent = {int(k): list(v) for k, v in spec.get("sentiment", {}).items()}
        for r in range(1, self.num_classes + 1):
            if not sent.get(r):
                sent[r] = [f"{name}_r{r}"]
        return sent

    def validate(self):
        lo, hi = self.clauses_per_doc
        if hi < 1 or lo > hi or lo < 1:
            raise DomainError("clauses_per_doc must allow at least one clause")
        if self.num_docs < 1:
            raise DomainError("num_docs must be positive")
        qlo, qhi = self.queries_per_doc
        if qlo < 1 or qlo > qhi or qhi > len(self.aspects):
            raise DomainError("queries_per_doc must lie within [1, number of aspects]")
        if not 0.0 <= self.noise_clause_ratio < 1.0 or not 0.0 <= self.noise_word_ratio < 1.0:
            raise DomainError("noise ratios must lie in [0, 1)")
        wlo, whi = self.words_per_clause
        if wlo < 1 or wlo > whi:
            raise DomainError("words_per_clause must allow at least one word")
        if not self.fillers:
            raise DomainError("need at least one filler word")
        for name, spec in {**self.aspects, **self.distractor_aspects}.items():
            if not spec.get("keywords"):
                raise DomainError(f"aspect {name!r} has no keywords")
        return self


def _n_fillers(rng, ratio):
    # Expected filler share of a two-content-word clause equals ``ratio``.
    if ratio <= 0:
        return 0
    target = 2 * ratio / (1 - ratio)
    base = int(target) + int(rng.random() < target - int(target))
    return max(0, base + int(rng.integers(-1, 2)))


def _aspect_clause(rng, spec, name, rating, fillers):
    kw = str(rng.choice((spec.aspects.get(name) or spec.distractor_aspects[name])["keywords"]))
    sent = str(rng.choice(spec.lexicon(name)[rating]))
    words = [kw, sent] + [str(rng.choice(fillers)) for _ in range(_n_fillers(rng, spec.noise_word_ratio))]
    order = rng.permutation(len(words))
    tokens = [words[k] for k in order]
    gold = [1 if k == 1 else 0 for k in order]
    return tokens, gold


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Documents with planted aspect clauses and sentiment words.

    Each queried aspect gets exactly one clause made of one of its keywords,
    one sentiment word for the gold rating, and filler words.  The remaining
    clauses are noise: either about an unqueried aspect (with a random rating)
    or pure filler.  Their count makes the noise share of the document's
    clauses match ``noise_clause_ratio``, clamped to ``clauses_per_doc``.
    The gold word mask marks the sentiment word only.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    fillers = list(spec.fillers)
    names = list(spec.aspects)
    docs = []
    r = spec.noise_clause_ratio
    for doc_no in range(spec.num_docs):
        q_lo, q_hi = spec.queries_per_doc
        c_lo, c_hi = spec.clauses_per_doc
        n_queries = int(rng.integers(q_lo, q_hi + 1))
        queried = [names[k] for k in sorted(rng.choice(len(names), n_queries, replace=False))]
        n_noise = int(round(n_queries * r / (1.0 - r)))
        if n_noise:
            n_noise = max(min(n_queries + n_noise, c_hi) - n_queries, 0)
            n_noise = max(n_noise, c_lo - n_queries)
        owners = list(queried)
        ratings = {a: int(rng.integers(1, spec.num_classes + 1)) for a in queried}

        others = [a for a in names if a not in queried] + list(spec.distractor_aspects)
        built = []  # (tokens, owner aspect or None, word gold)
        for a in owners:
            toks, gold = _aspect_clause(rng, spec, a, ratings[a], fillers)
            built.append((toks, a, gold))
        for _ in range(n_noise):
            if others and rng.random() < 0.5:
                a = others[int(rng.integers(len(others)))]
                toks, _ = _aspect_clause(rng, spec, a, int(rng.integers(1, spec.num_classes + 1)),
                                         fillers)
            else:
                w_lo, w_hi = spec.words_per_clause
                toks = [str(rng.choice(fillers)) for _ in range(int(rng.integers(w_lo, w_hi + 1)))]
            built.append((toks, None, [0] * len(toks)))
        order = rng.permutation(len(built))
        built = [built[k] for k in order]

        clauses = clauses_from_tokens([b[0] for b in built])
        queries = []
        for a in queried:
            cmask = [int(b[1] == a) for b in built]
            wmask = [list(b[2]) if b[1] == a else [0] * len(b[0]) for b in built]
            queries.append(AspectQuery(a, ratings[a], cmask, wmask))
        docs.append(Document(f"syn-{doc_no:05d}", clauses, queries))
    aspects = {a: list(s["keywords"]) for a, s in spec.aspects.items()}
    return Corpus(docs, aspects, spec.num_classes, spec.split_seed)


def lexicon_oracle(spec: SyntheticSpec, doc: Document, aspect: str) -> int | None:
    """Rating read off the planted sentiment word of ``aspect``'s clause."""
    keywords = set(spec.aspects[aspect]["keywords"])
    lex = {w: r for r, words in spec.lexicon(aspect).items() for w in words}
    for clause in doc.clauses:
        if keywords & set(clause.tokens):
            for tok in clause.tokens:
                if tok in lex:
                    return lex[tok]
    return None
