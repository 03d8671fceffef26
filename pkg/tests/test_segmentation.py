import pytest
from hypothesis import given, strategies as st

from hrlsent.errors import DomainError
from hrlsent.segmentation import clauses_from_tokens, segment, split_clauses, tokenize

REVIEW = ("This hotel is close to railway station and very convenient to eat around "
          "but room of Hilton is a little uncomfortable. I'm often nitpicking for room "
          "decoration. Besides, the price is very expensive although the staff service "
          "is professional.")

REVIEW_CLAUSES = [
    "this hotel is close to railway station",
    "and very convenient to eat around",
    "but room of hilton is a little uncomfortable .",
    "i ' m often nitpicking for room decoration .",
    "besides , the price is very expensive",
    "although the staff service is professional .",
]


def test_comma_split():
    assert [c.tokens for c in split_clauses("good location, bad room.")] == [
        ["good", "location", ","], ["bad", "room", "."]]


def test_single_exclamation():
    assert len(split_clauses("great!")) == 1


def test_hotel_review_gives_six_clauses():
    got = [" ".join(c.tokens) for c in split_clauses(REVIEW)]
    assert got == REVIEW_CLAUSES


def test_custom_connectives():
    text = "the bed was soft yet the room was loud"
    assert len(split_clauses(text)) == 1
    assert len(split_clauses(text, connectives=("yet",))) == 2


def test_blank_text_is_rejected():
    for text in ("", "   \n\t"):
        with pytest.raises(DomainError):
            split_clauses(text)


def test_tokenize_examples():
    assert tokenize("Very Convenient") == ["very", "convenient"]
    assert tokenize("don't") == ["don", "'", "t"]
    assert tokenize("") == []


def test_spans_are_ordered_and_cover_the_tokens():
    spans = split_clauses(REVIEW)
    for a, b in zip(spans, spans[1:]):
        assert a.end <= b.start
    for c in spans:
        assert tokenize(REVIEW[c.start:c.end]) == c.tokens


def test_presegmented_input_is_kept_verbatim():
    toks = [["the", "room", "was", "ok"], ["great"]]
    clauses = clauses_from_tokens(toks)
    assert [c.tokens for c in clauses] == toks
    assert clauses[0].span == (0, 15) and clauses[1].span == (16, 21)


_WORDS = st.sampled_from(["room", "staff", "good", "bad", "the", "was", "and", "but",
                          "although", ",", ".", "!", ";", "very", "I'm", "price"])


@given(st.lists(_WORDS, min_size=1, max_size=40))
def test_segmentation_reconstructs_the_token_sequence(words):
    text = " ".join(words)
    if not tokenize(text):
        return
    flat = [t for c in split_clauses(text) for t in c.tokens]
    assert flat == tokenize(text)


@given(st.lists(_WORDS, min_size=1, max_size=40))
def test_segmentation_is_idempotent_per_clause(words):
    text = " ".join(words)
    for c in segment(text):
        again = segment(text[c.span[0]:c.span[1]])
        assert len(again) == 1 and again[0].tokens == c.tokens
