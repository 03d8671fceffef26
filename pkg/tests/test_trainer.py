import math

import numpy as np
import pytest

from hrlsent import high_policy as hp
from hrlsent import low_policy as lp
from hrlsent import predictor as pr
from hrlsent import trainer as trainer_mod
from hrlsent.errors import DomainError, ShapeError, StateError
from hrlsent.model import POLICY_H, POLICY_L, THETA
from hrlsent.trainer import (AdamState, adam_step, clip_by_norm, policy_gradient_high,
                             policy_gradient_low, sgd_step)

from conftest import rel_err
from oracles import (bandit_gradient, bandit_success_prob, bandit_trainer, bandit_update, doc,
                     enumerate_trajectories, ready, separable_corpus, toy_trainer)


# ------------------------------------------------------------------ optimizers


def test_sgd_zero_gradient_and_ascent():
    p = {"x": np.array([1.0])}
    sgd_step(p, {"x": np.zeros(1)}, 0.1)
    assert p["x"][0] == 1.0
    prev = 1.0
    for _ in range(20):
        sgd_step(p, {"x": -2.0 * p["x"]}, 0.1)  # ascent on -x^2
        assert abs(p["x"][0]) < prev
        prev = abs(p["x"][0])
    with pytest.raises(ShapeError):
        sgd_step(p, {"x": np.zeros(2)}, 0.1)


def test_adam_first_step_closed_form(rng):
    w = rng.normal(size=5)
    g = rng.normal(size=5)
    p = {"w": w.copy()}
    st = AdamState(lr=0.012)
    adam_step(p, {"w": g}, st)
    # bias-corrected moments are g and g^2 after one step
    assert np.allclose(p["w"], w - 0.012 * g / (np.abs(g) + 1e-8), atol=1e-15)
    q = {"w": w.copy()}
    adam_step(q, {"w": np.zeros(5)}, AdamState())
    assert np.array_equal(q["w"], w)
    with pytest.raises(ShapeError):
        adam_step(q, {"w": np.zeros(4)}, AdamState())


def test_clip_by_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_by_norm(g, 1.0) == 5.0
    assert math.isclose(math.hypot(g["a"][0], g["b"][0]), 1.0)
    g = {"a": np.array([0.3])}
    clip_by_norm(g, 5.0)
    assert g["a"][0] == 0.3


# ---------------------------------------------------------------- pretraining


def test_one_document_is_one_optimizer_step():
    docs = [doc("a", [["the", "room", "was", "good"]])]
    tr = toy_trainer(docs, d=4)
    tr.pretrain_low(docs, 1)
    tr.pretrain_high(docs, 1)
    assert tr.optimizer_steps["pretrain_low"] == 1 == tr.optimizer_steps["pretrain_high"]


def test_empty_corpus_is_rejected():
    docs = [doc("a", [["room", "ok"]])]
    tr = toy_trainer(docs, d=4)
    with pytest.raises(DomainError):
        tr.pretrain_low([], 1)
    with pytest.raises(StateError):
        tr.pretrain_high(docs, 1)


def test_pretraining_is_deterministic():
    docs = separable_corpus(12)
    snaps = []
    for _ in range(2):
        tr = toy_trainer(docs, d=4, seed=3, batch_size=4)
        tr.pretrain_low(docs, 2)
        tr.pretrain_high(docs, 2)
        snaps.append(tr.snapshot())
    for k in THETA:
        assert snaps[0][k].tobytes() == snaps[1][k].tobytes(), k


def test_separable_corpus_is_learned_by_both_stages():
    docs = separable_corpus(320)
    tr = toy_trainer(docs, d=8)
    m = tr.model
    logs = tr.pretrain_low(docs, 10)
    assert logs[0].loss >= logs[1].loss >= logs[2].loss
    acc = np.mean([np.argmax(pr.head_distribution(m.word_state_all(d).h, m.decoder, "clause")) + 1
                   == d.queries[0].rating for d in docs])
    assert acc >= 0.95
    tr.pretrain_high(docs, 10)
    preds = [m.rollout(d, "room", None, None, forced_options=[1] * d.n,
                       forced_actions=[np.ones(len(c)) for c in d.clauses]).predicted
             for d in docs]
    assert np.mean([p == d.queries[0].rating for p, d in zip(preds, docs)]) >= 0.95


def test_keyword_rows_stay_fixed_in_pretraining():
    docs = separable_corpus(16)
    tr = toy_trainer(docs, d=4, batch_size=8)
    rows = tr.model.keyword_rows()
    before = tr.model.params["emb"][rows].copy()
    tr.pretrain_low(docs, 2)
    assert np.array_equal(tr.model.params["emb"][rows], before)
    assert np.array_equal(tr.model.aspect_vector("room"), before[0])


# ------------------------------------------------------------------- baselines


def _small_ready(seed=0, **cfg):
    d = doc("x", [["the", "room"], ["staff", "rude"], ["room", "ok"]], "room", 2)
    return ready(toy_trainer([d], d=3, seed=seed, **cfg)), d


def test_single_sample_baseline_is_that_trajectory(rng):
    tr, d = _small_ready()
    tr.rng = np.random.default_rng(11)
    b = tr.estimate_baseline(d, "room", 2, m=1)
    ro = tr.model.rollout(d, "room", 2, np.random.default_rng(11), assign_fallback=False)
    assert np.array_equal(b, ro.rewards)


def test_saturated_policy_has_constant_baseline():
    tr, d = _small_ready()
    for name in ("pol_h", "pol_l"):
        tr.model.params[name + ".W"][:] = 0.0
        tr.model.params[name + ".b"][:] = 50.0
    bs = [tr.estimate_baseline(d, "room", 2) for _ in range(5)]
    assert np.var(np.array(bs), axis=0).max() == 0.0


def test_baseline_mean_matches_enumeration():
    tr, d = _small_ready(seed=2)
    exact = np.zeros(d.n)
    sq = np.zeros(d.n)
    total = 0.0
    for p, ro in enumerate_trajectories(tr.model, d, "room", 2):
        exact += p * np.array(ro.rewards)
        sq += p * np.array(ro.rewards) ** 2
        total += p
    assert abs(total - 1.0) < 1e-12
    sigma = np.sqrt(sq - exact ** 2)
    est = tr.estimate_baseline(d, "room", 2, m=1000)
    assert np.all(np.abs(est - exact) <= 3 * sigma / math.sqrt(1000))


def test_scalar_baseline_mode():
    tr, d = _small_ready(baseline_mode="trajectory")
    assert isinstance(tr.estimate_baseline(d, "room", 2, m=2), float)
    with pytest.raises(DomainError):
        tr.estimate_baseline(d, "room", 2, m=0)


# ------------------------------------------------------------ policy gradients


def test_zero_advantage_gives_zero_gradient():
    tr, d = _small_ready()
    ro = tr.model.rollout(d, "room", 2, np.random.default_rng(0), forced_options=[1, 1, 1])
    g = policy_gradient_high(ro, np.array(ro.rewards))
    assert not g["pol_h.W"].any() and not g["pol_h.b"].any()
    low = ro.high.low[0]
    g = policy_gradient_low(low, low.step_reward)
    assert not g["pol_l.W"].any() and not g["pol_l.b"].any()


def test_saturated_score_vanishes():
    tr, d = _small_ready()
    tr.model.params["pol_h.b"][:] = 40.0
    tr.model.params["pol_l.b"][:] = 40.0
    ro = tr.model.rollout(d, "room", 2, np.random.default_rng(0))
    assert ro.clause_mask == [1, 1, 1]
    assert np.abs(policy_gradient_high(ro, 0.0)["pol_h.W"]).max() < 1e-12
    assert np.abs(policy_gradient_low(ro.high.low[0], 0.0)["pol_l.W"]).max() < 1e-12


def _fd(f, arr, h=1e-6):
    g = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + h
        up = f()
        arr[idx] = old - h
        down = f()
        arr[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def test_high_score_matches_fd_of_log_prob(rng):
    tr, _ = _small_ready()
    d1 = doc("one", [["room", "was", "ok"]], "room", 1)
    model = tr.model
    cfg = model.config
    for option in (0, 1):
        ro = model.rollout(d1, "room", 1, None, forced_options=[option],
                           forced_actions=[np.ones(3)], assign_fallback=False)
        st = ro.high.steps[0]
        R = 1.7
        for s in ro.high.steps:
            s.reward = R
        g = policy_gradient_high(ro, 0.0)
        e_i = model.clause_embeddings(d1)[0]
        params = hp.HighPolicyParams(model.params["pol_h.W"], model.params["pol_h.b"])

        def logp():
            p = hp.option_prob(st.state, params, cfg.high_features, e_i)
            return R * math.log(p if option else 1.0 - p)

        assert rel_err(g["pol_h.W"], _fd(logp, params.W)) < 1e-5
        assert rel_err(g["pol_h.b"], _fd(logp, params.b)) < 1e-5


def test_low_score_matches_fd_of_log_prob():
    tr, d = _small_ready()
    model = tr.model
    ro = model.rollout(d, "room", 2, np.random.default_rng(4), forced_options=[1, 0, 0],
                       forced_actions=[np.array([1, 0]), None, None])
    low = ro.high.low[0]
    params = lp.LowPolicyParams(model.params["pol_l.W"], model.params["pol_l.b"])
    adv = low.step_reward - 0.3

    def logp():
        return adv * sum(math.log(lp.action_prob(s, params) if a else 1 - lp.action_prob(s, params))
                         for s, a in zip(low.states, low.actions))

    g = policy_gradient_low(low, 0.3)
    assert rel_err(g["pol_l.W"], _fd(logp, params.W)) < 1e-5
    assert rel_err(g["pol_l.b"], _fd(logp, params.b)) < 1e-5


def test_baseline_keeps_the_gradient_unbiased():
    tr, d = _small_ready(seed=5)
    acc = {"pol_h.W": 0.0, "pol_h.b": 0.0}
    b = 0.77
    for p, ro in enumerate_trajectories(tr.model, d, "room", 2):
        for st in ro.high.steps:
            st.reward = b
        g = policy_gradient_high(ro, 0.0)
        for k in acc:
            acc[k] = acc[k] + p * g[k]
    for k in acc:
        assert np.abs(acc[k]).max() <= 1e-10


# ------------------------------------------------------------- policy training


def test_policy_training_requires_pretraining():
    docs = [doc("a", [["room", "ok"]])]
    tr = toy_trainer(docs, d=3)
    with pytest.raises(StateError):
        tr.train_policies(docs, 1)
    snap = tr.snapshot(THETA + POLICY_H + POLICY_L)
    for k, v in snap.items():
        assert v.tobytes() == tr.model.params[k].tobytes()


def test_all_skipped_document_updates_only_the_clause_policy(monkeypatch):
    tr, d = _small_ready()
    tr.model.params["pol_h.W"][:] = 0.0
    tr.model.params["pol_h.b"][:] = -60.0
    calls = []
    real = trainer_mod.sgd_step

    def spy(params, grads, lr, ascent=True):
        calls.append(tuple(sorted(grads)))
        real(params, grads, lr, ascent)

    monkeypatch.setattr(trainer_mod, "sgd_step", spy)
    ro = tr.policy_update(d, d.queries[0])
    assert ro.clause_mask == [0, 0, 0]
    assert calls == [("pol_h.W", "pol_h.b")]


def test_policy_training_is_deterministic_and_keeps_theta_frozen():
    docs = separable_corpus(6)
    runs = []
    for _ in range(2):
        tr = ready(toy_trainer(docs, d=3, seed=9))
        before = tr.snapshot(THETA)
        tr.train_policies(docs, 2)
        after = tr.snapshot(THETA)
        for k in THETA:
            assert before[k].tobytes() == after[k].tobytes(), k
        runs.append(tr.snapshot(POLICY_H + POLICY_L))
    for k in runs[0]:
        assert runs[0][k].tobytes() == runs[1][k].tobytes()
    high, low = tr.reward_curves()
    assert len(high) == 2 and all(math.isfinite(x) for x in high)


def test_bandit_toy_learns_the_single_clause_pattern():
    tr, d = bandit_trainer(seed=0)
    start = bandit_success_prob(tr, d)
    for k in range(500):
        bandit_update(tr, d)
        if bandit_success_prob(tr, d) > 0.9:
            break
    assert start < 0.5 and bandit_success_prob(tr, d) > 0.9


def test_bandit_baseline_does_not_raise_gradient_variance():
    # measured at the initial policy; batches of 20 gradients, 100 batches
    tr, d = bandit_trainer(seed=0)

    def batch_var(m):
        g = [np.concatenate([x["pol_h.W"].ravel(), x["pol_h.b"]])
             for x in (bandit_gradient(tr, d, m) for _ in range(20))]
        return np.array(g).var(axis=0).sum()

    with_b = np.mean([batch_var(5) for _ in range(100)])
    without = np.mean([batch_var(0) for _ in range(100)])
    assert with_b <= without
