import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrlsent import numeric as nm
from hrlsent.embeddings import (AspectSpec, Vocab, aspect_embedding, load_embeddings, lookup,
                                random_table)
from hrlsent.errors import DomainError, FormatError
from hrlsent.trainer import adam_step, AdamState


def test_vocab_ids_are_dense_and_unknown_is_zero():
    v = Vocab.build(["b", "a", "b", "c"])
    assert v.itos == ["<unk>", "b", "a", "c"]
    assert v.ids(["a", "zzz"]) == [2, 0]
    assert sorted(v.stoi.values()) == list(range(len(v)))


def test_lookup_unknown_and_repeat(rng):
    table = random_table(5, 4, rng)
    v = Vocab(["x"])
    assert np.array_equal(lookup(table, v.id("never-seen")), table[0])
    assert np.array_equal(lookup(table, 3), lookup(table, 3))
    with pytest.raises(DomainError):
        lookup(table, 5)


def test_one_step_changes_only_the_looked_up_row(rng):
    table = random_table(6, 3, rng)
    before = table.copy()
    tape = nm.Tape()
    P = tape.bind({"emb": table})
    loss = nm.sumsq(nm.lookup(P["emb"], 4))
    grads = {"emb": nm.backward(tape, loss)["emb"]}
    adam_step({"emb": table}, grads, AdamState(lr=0.1))
    changed = np.any(table != before, axis=1)
    assert changed.tolist() == [False, False, False, False, True, False]


def test_aspect_embedding_examples(rng):
    table = random_table(4, 5, rng)
    assert np.array_equal(aspect_embedding(table, [2]), table[2])
    table[3] = -table[1]
    assert np.array_equal(aspect_embedding(table, [1, 3]), np.zeros(5))
    t = rng.normal(size=(6, 4))
    assert np.allclose(aspect_embedding(t, [0, 2, 5]), (t[0] + t[2] + t[5]) / 3, atol=1e-12)
    with pytest.raises(DomainError):
        aspect_embedding(table, [])
    with pytest.raises(DomainError):
        AspectSpec("room", [])


@given(st.permutations([0, 1, 2, 3, 4]))
def test_aspect_embedding_permutation_invariant(order):
    t = np.random.default_rng(5).normal(size=(5, 3))
    assert np.allclose(aspect_embedding(t, order), aspect_embedding(t, range(5)), atol=1e-15)


def test_random_init_reproducible():
    a = random_table(7, 3, np.random.default_rng(9))
    b = random_table(7, 3, np.random.default_rng(9))
    assert a.tobytes() == b.tobytes()
    assert np.all(np.abs(a) <= 0.1)


def test_load_embeddings(tmp_path):
    v = Vocab(["good", "bad"])
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    t1, n1 = load_embeddings(empty, v, 4, np.random.default_rng(0))
    t2, _ = load_embeddings(empty, v, 4, np.random.default_rng(0))
    assert n1 == 0 and t1.tobytes() == t2.tobytes()

    full = tmp_path / "full.txt"
    full.write_text("<unk> 0 0 0 0\ngood 1 2 3 4\nbad -1 -2 -3 -4\nextra 9 9 9 9\n")
    t, n = load_embeddings(full, v, 4, np.random.default_rng(0))
    assert n == 3 and t[1].tolist() == [1, 2, 3, 4] and t[0].tolist() == [0, 0, 0, 0]

    bad = tmp_path / "bad.txt"
    bad.write_text("good 1 2 3 4\nbad 1 2 3\n")
    with pytest.raises(FormatError, match="line 2"):
        load_embeddings(bad, v, 4, np.random.default_rng(0))
