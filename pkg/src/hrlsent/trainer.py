"""Training schedule: two select-all pretraining stages, then policy training.

Pretraining minimises cross-entropy plus an L2 penalty with Adam.  Policy
training freezes every encoder parameter and updates the two logistic policies
with REINFORCE, using sampled-trajectory baselines: the word policy after each
selected clause, the clause policy after each document.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numeric as nm
from .config import Config
from .data import Corpus, Document
from .embeddings import Vocab
from .errors import DomainError, NumericError, ShapeError, StateError
from .model import HIGH_THETA, LOW_THETA, POLICY_H, POLICY_L, THETA, HRLModel, Rollout

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ optimizers


@dataclass
class AdamState:
    lr: float = 0.012
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """In-place Adam update of every parameter named in ``grads``."""
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient {g.shape} does not match parameter {name} {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def sgd_step(params: dict, grads: dict, lr: float, ascent: bool = True) -> None:
    """In-place SGD; ``ascent`` adds the gradient (objectives are maximised)."""
    sign = 1.0 if ascent else -1.0
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient {g.shape} does not match parameter {name} {p.shape}")
        p += sign * lr * g


def clip_by_norm(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        k = max_norm / norm
        for g in grads.values():
            g *= k
    return norm


# ------------------------------------------------------------ policy gradients


def policy_gradient_high(rollout: Rollout, baseline) -> dict:
    """``sum_i (r_i - b_i) * grad log pi(o_i | s_i)`` for the logistic clause policy."""
    steps = rollout.high.steps
    F = steps[0].features.shape[0] if steps else 0
    gW = np.zeros((1, F))
    gb = np.zeros(1)
    for i, st in enumerate(steps):
        b = baseline[i] if np.ndim(baseline) else baseline
        coef = (st.reward - b) * (st.option - st.prob)
        gW[0] += coef * st.features
        gb[0] += coef
    return {"pol_h.W": gW, "pol_h.b": gb}


def policy_gradient_low(low, baseline: float) -> dict:
    """``sum_j (r_j - b) * grad log pi(a_j | s_j)`` for the logistic word policy."""
    adv = low.step_reward - baseline
    coef = adv * (low.actions.astype(low.probs.dtype) - low.probs)
    return {"pol_l.W": (coef @ low.states)[None, :], "pol_l.b": np.array([coef.sum()])}


# ---------------------------------------------------------------------- trainer


@dataclass
class EpochLog:
    stage: str
    epoch: int
    loss: float | None = None
    high_reward: float | None = None
    low_reward: float | None = None
    steps: int = 0


class Trainer:
    def __init__(self, model: HRLModel, rng: np.random.Generator | None = None,
                 reward_fn=None):
        """``reward_fn(rollout) -> per-step rewards`` replaces the clause-level
        reward during policy training (used for toy problems); ``None`` keeps
        the model's own reward."""
        self.model = model
        self.reward_fn = reward_fn
        self.config: Config = model.config
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.history: list[EpochLog] = []
        self.epochs = {"pretrain_low": 0, "pretrain_high": 0, "policy": 0, "finetune": 0}
        self.optimizer_steps = {"pretrain_low": 0, "pretrain_high": 0, "finetune": 0}

    @classmethod
    def from_corpus(cls, corpus: Corpus, config: Config) -> "Trainer":
        """Fresh model with a vocabulary built from the training split."""
        config = config.validate()
        if config.num_classes != corpus.num_classes:
            raise ShapeError(f"config has {config.num_classes} classes, corpus "
                             f"{corpus.num_classes}")
        rng = np.random.default_rng(config.seed)
        vocab = Vocab.build(
            [kw for kws in corpus.aspects.values() for kw in kws]
            + [t for doc in corpus.split("train") for c in doc.clauses for t in c.tokens])
        return cls(HRLModel(config, vocab, corpus.aspects, rng), rng)

    # --------------------------------------------------------- pretraining

    def _pretrain(self, docs, stage, names, loss_fn, epochs, lr=None):
        docs = [d for d in docs if d.queries]
        if not docs:
            raise DomainError("empty corpus")
        cfg = self.config
        model = self.model
        opt = AdamState(lr if lr is not None else cfg.adam_lr, cfg.adam_beta1, cfg.adam_beta2,
                        cfg.adam_eps)
        logs = []
        for _ in range(epochs):
            order = self.rng.permutation(len(docs))
            total, count = 0.0, 0
            for start in range(0, len(order), cfg.batch_size):
                batch = [docs[k] for k in order[start:start + cfg.batch_size]]
                grads = {n: np.zeros_like(model.params[n]) for n in names}
                n_q = 0
                for doc in batch:
                    tape = nm.Tape()
                    P = tape.bind(model.params, names)
                    loss = loss_fn(P, doc, doc.queries, self.rng if cfg.dropout > 0 else None)
                    store = nm.backward(tape, loss)
                    for n in names:
                        grads[n] += store[n]
                    total += float(loss.value)
                    n_q += len(doc.queries)
                if not math.isfinite(total):
                    raise NumericError(f"non-finite loss during {stage}")
                for n in names:
                    grads[n] /= n_q
                    grads[n] += cfg.l2 * model.params[n]
                if "emb" in grads and not cfg.aspect_trainable:
                    grads["emb"][model.keyword_rows()] = 0.0
                adam_step(model.params, grads, opt)
                self.optimizer_steps[stage] += 1
                count += n_q
            self.epochs[stage] += 1
            entry = EpochLog(stage, self.epochs[stage], loss=total / count,
                             steps=self.optimizer_steps[stage])
            log.info("%s epoch %d loss %.4f", stage, entry.epoch, entry.loss)
            self.history.append(entry)
            logs.append(entry)
        return logs

    def pretrain_low(self, docs, epochs=None):
        """Word encoder and clause head, every word selected."""
        logs = self._pretrain(docs, "pretrain_low", LOW_THETA, self.model.low_pretrain_loss,
                              self.config.pretrain_epochs if epochs is None else epochs)
        self.model.invalidate_cache()
        if self.config.aspect_trainable:
            self.model.refresh_aspect_vectors()
        self.model.stages["pretrain_low"] = True
        return logs

    def pretrain_high(self, docs, epochs=None):
        """Clause encoder and final decoder, every clause selected."""
        if not self.model.stages["pretrain_low"]:
            raise StateError("pretrain_high requires pretrain_low first")
        logs = self._pretrain(docs, "pretrain_high", HIGH_THETA, self.model.high_pretrain_loss,
                              self.config.pretrain_epochs if epochs is None else epochs)
        self.model.stages["pretrain_high"] = True
        return logs

    # ------------------------------------------------------------ baselines

    def estimate_baseline(self, doc: Document, aspect: str, gold: int, m: int | None = None):
        """Mean clause-level reward of ``m`` fresh trajectories.

        Returns per-step means in ``per_step`` mode, else the mean first-step
        reward as a scalar.
        """
        m = self.config.baseline_samples if m is None else m
        if m < 1:
            raise DomainError("baseline needs at least one sample")
        rows = [self._rewards(self.model.rollout(doc, aspect, gold, self.rng,
                                                 assign_fallback=False))
                for _ in range(m)]
        means = np.mean(np.array(rows), axis=0)
        if self.config.baseline_mode == "per_step":
            return means
        return float(means[0])

    def estimate_low_baseline(self, X, incoming, gold: int, m: int | None = None) -> float:
        m = self.config.baseline_samples if m is None else m
        if m < 1:
            raise DomainError("baseline needs at least one sample")
        return float(np.mean([self.model.sample_clause(X, incoming, gold, self.rng).step_reward
                              for _ in range(m)]))

    def _rewards(self, ro: Rollout) -> list[float]:
        if self.reward_fn is not None:
            ro.rewards = [float(r) for r in self.reward_fn(ro)]
            for st, r in zip(ro.high.steps, ro.rewards):
                st.reward = r
        return ro.rewards

    # ------------------------------------------------------- policy training

    def _check_ready(self):
        if not (self.model.stages["pretrain_low"] and self.model.stages["pretrain_high"]):
            raise StateError("policy training requires both pretraining stages first")

    def policy_update(self, doc: Document, query, stats=None) -> Rollout:
        """One document/aspect pass: sample, update the word policy per selected
        clause, then update the clause policy."""
        cfg = self.config
        model = self.model
        m = cfg.baseline_samples

        def on_clause(i, low, incoming, X):
            b = self.estimate_low_baseline(X, incoming, query.rating) if m else 0.0
            g = policy_gradient_low(low, b)
            clip_by_norm(g, cfg.grad_clip)
            sgd_step(model.params, g, cfg.sgd_lr)
            if stats is not None:
                stats["low"].append(low.step_reward)

        ro = model.rollout(doc, query.aspect, query.rating, self.rng, on_clause=on_clause,
                           assign_fallback=False)
        self._rewards(ro)
        b = self.estimate_baseline(doc, query.aspect, query.rating) if m else 0.0
        g = policy_gradient_high(ro, b)
        clip_by_norm(g, cfg.grad_clip)
        sgd_step(model.params, g, cfg.sgd_lr)
        if stats is not None:
            stats["high"].append(ro.rewards[0])
        return ro

    def train_policies(self, docs, epochs=None):
        """Policy-gradient training with every encoder parameter frozen."""
        self._check_ready()
        docs = list(docs)
        if not docs:
            raise DomainError("empty corpus")
        epochs = self.config.policy_epochs if epochs is None else epochs
        logs = []
        for _ in range(epochs):
            stats = {"high": [], "low": []}
            order = self.rng.permutation(len(docs))
            for k in order:
                doc = docs[k]
                for q in doc.queries:
                    self.policy_update(doc, q, stats)
            self.epochs["policy"] += 1
            entry = EpochLog("policy", self.epochs["policy"],
                             high_reward=float(np.mean(stats["high"])) if stats["high"] else None,
                             low_reward=float(np.mean(stats["low"])) if stats["low"] else None)
            log.info("policy epoch %d high %.4f low %s", entry.epoch, entry.high_reward,
                     entry.low_reward)
            self.history.append(entry)
            logs.append(entry)
            if self.config.finetune:
                self.finetune_encoders(docs)
        self.model.stages["policy"] = True
        return logs

    def finetune_encoders(self, docs, epochs: int = 1):
        """Optional: one Adam pass over every encoder parameter on policy selections."""
        model = self.model
        names = THETA

        def loss_fn(P, doc, queries, _rng):
            terms = []
            for q in queries:
                ro = model.rollout(doc, q.aspect, None, self.rng, assign_fallback=False)
                if any(ro.clause_mask):
                    terms.append(model.selected_loss(P, doc, q, ro))
            return nm.addn(*terms) if terms else None

        def safe_loss(P, doc, queries, rng):
            loss = loss_fn(P, doc, queries, rng)
            if loss is None:
                loss = nm.scale(nm.total(nm.take(P["dec.b"], 0, 1)), 0.0)
            return loss

        logs = self._pretrain(docs, "finetune", names, safe_loss, epochs)
        model.invalidate_cache()
        return logs

    # ------------------------------------------------------------ helpers

    def reward_curves(self):
        """Per-epoch mean clause-level and word-level rewards from policy training."""
        pol = [e for e in self.history if e.stage == "policy"]
        return ([e.high_reward for e in pol], [e.low_reward for e in pol])

    def fit(self, corpus: Corpus):
        train = corpus.split("train")
        self.pretrain_low(train)
        self.pretrain_high(train)
        self.train_policies(train)
        return self.history

    def snapshot(self, names=THETA) -> dict:
        return {n: self.model.params[n].copy() for n in names}


__all__ = [
    "AdamState", "adam_step", "sgd_step", "clip_by_norm", "policy_gradient_high",
    "policy_gradient_low", "Trainer", "EpochLog", "POLICY_H", "POLICY_L",
]
