import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hrlsent import predictor as pr
from hrlsent.errors import DomainError, ShapeError


def _zero_decoder(d=2, C=5):
    return pr.DecoderParams(np.zeros((C, 2 * d)), np.zeros(C), np.zeros((C, d)), np.zeros(C))


def test_document_representation_order(rng):
    assert not pr.document_representation(np.zeros(3), np.zeros(3)).any()
    assert pr.document_representation(np.array([3.0]), np.array([7.0])).tolist() == [3.0, 7.0]
    a, b = rng.normal(size=4), rng.normal(size=4)
    z = pr.document_representation(a, b)
    assert np.array_equal(z[:4], a) and np.array_equal(z[4:], b)
    with pytest.raises(ShapeError):
        pr.document_representation(np.zeros(2), np.zeros(3))


def test_predict_examples(rng):
    dist, rating = pr.predict(np.ones(4), _zero_decoder())
    assert np.allclose(dist, 0.2, atol=1e-15) and rating == 1
    dec = _zero_decoder()
    dec.b[2] = 10.0
    dist, rating = pr.predict(rng.normal(size=4), dec)
    assert rating == 3 and dist[2] > 0.999
    with pytest.raises(ShapeError):
        pr.predict(np.ones(3), dec)


@given(st.integers(0, 2**31 - 1), st.integers(2, 9))
def test_predict_distribution_normalised(seed, C):
    r = np.random.default_rng(seed)
    dec = pr.DecoderParams.init(3, C, r)
    dec.W *= 50
    dist, _ = pr.predict(r.normal(size=6), dec)
    assert abs(dist.sum() - 1.0) <= 1e-9


@given(st.integers(0, 2**31 - 1), st.floats(-100, 100))
def test_predict_shift_invariant(seed, shift):
    r = np.random.default_rng(seed)
    dec = pr.DecoderParams.init(3, 5, r)
    z = r.normal(size=6)
    base, _ = pr.predict(z, dec)
    dec.b = dec.b + shift
    moved, _ = pr.predict(z, dec)
    assert np.allclose(base, moved, atol=1e-12)


def test_delay_prob_examples(rng):
    dec = _zero_decoder()
    for y in range(1, 6):
        assert pr.delay_prob(np.ones(4), y, dec) == pytest.approx(0.2, abs=1e-15)
    dec.b[0] = 1000.0
    floored = pr.delay_prob(np.ones(4), 2, dec)
    assert floored == 1e-12 and math.isfinite(math.log(floored))
    with pytest.raises(DomainError):
        pr.delay_prob(np.ones(4), 6, dec)
    with pytest.raises(DomainError):
        pr.delay_prob(np.ones(4), 0, dec)


def test_delay_prob_matches_softmax_oracle(rng):
    dec = pr.DecoderParams.init(3, 4, rng)
    for head, x in (("final", rng.normal(size=6)), ("clause", rng.normal(size=3))):
        W, b = (dec.W, dec.b) if head == "final" else (dec.head_W, dec.head_b)
        m = W @ x + b
        oracle = np.exp(m) / np.exp(m).sum()
        for y in range(1, 5):
            assert abs(pr.delay_prob(x, y, dec, head) - oracle[y - 1]) <= 1e-12
    dist, _ = pr.predict(np.ones(6), dec)
    assert pr.delay_prob(np.ones(6), 3, dec) == dist[2]


def test_fallback_rating():
    a = pr.fallback_random_rating(np.random.default_rng(1), 5)
    assert a == pr.fallback_random_rating(np.random.default_rng(1), 5)
    r = np.random.default_rng(0)
    assert {pr.fallback_random_rating(r, 2) for _ in range(200)} == {1, 2}
    n = 10_000
    counts = np.bincount([pr.fallback_random_rating(r, 5) for _ in range(n)], minlength=6)[1:]
    sigma = math.sqrt(0.2 * 0.8 / n)
    assert np.all(np.abs(counts / n - 0.2) <= 3 * sigma)
    with pytest.raises(DomainError):
        pr.DecoderParams.init(2, 1, r)
