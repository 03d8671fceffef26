"""Parameter container and forward passes for the hierarchical selector.

Parameter groups:

* encoder ``theta``: word embeddings, both LSTMs, the final decoder and the
  clause head (names in :data:`THETA`),
* clause policy ``pol_h.*`` and word policy ``pol_l.*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import high_policy as hp
from . import low_policy as lp
from . import lstm as lstm_mod
from . import numeric as nm
from . import predictor as pr
from .config import Config
from .data import Document
from .embeddings import Vocab, aspect_embedding, random_table
from .errors import DomainError

THETA = ("emb", "lstm_l.W", "lstm_l.b", "lstm_h.W", "lstm_h.b",
         "dec.W", "dec.b", "head.W", "head.b")
LOW_THETA = ("emb", "lstm_l.W", "lstm_l.b", "head.W", "head.b")
HIGH_THETA = ("lstm_h.W", "lstm_h.b", "dec.W", "dec.b")
POLICY_H = ("pol_h.W", "pol_h.b")
POLICY_L = ("pol_l.W", "pol_l.b")


@dataclass
class Rollout:
    """One pass of both policies over a document for one aspect."""

    high: hp.HighTrajectory
    clause_state: lstm_mod.LstmState
    word_state: lstm_mod.LstmState
    distribution: np.ndarray
    predicted: int
    fallback: bool
    final_prob: float | None = None
    rewards: list[float] = field(default_factory=list)

    @property
    def clause_mask(self) -> list[int]:
        return self.high.options

    def word_masks(self, doc: Document) -> list[list[int]]:
        out = []
        for i, clause in enumerate(doc.clauses):
            low = self.high.low.get(i)
            out.append([0] * len(clause) if low is None else [int(a) for a in low.actions])
        return out


class HRLModel:
    def __init__(self, config: Config, vocab: Vocab, aspects: dict[str, list[str]],
                 rng: np.random.Generator):
        config.validate()
        self.config = config
        self.vocab = vocab
        self.aspects = {a: list(k) for a, k in aspects.items()}
        dtype = np.dtype(config.dtype)
        d, C = config.d, config.num_classes
        lstm_l = lstm_mod.LstmParams.init(d, d, rng, config.forget_bias, dtype)
        lstm_h = lstm_mod.LstmParams.init(d, d, rng, config.forget_bias, dtype)
        dec = pr.DecoderParams.init(d, C, rng, dtype)
        pol_h = hp.HighPolicyParams.init(hp.n_features(d, config.high_features), rng, dtype,
                                         config.policy_bias_high)
        pol_l = lp.LowPolicyParams.init(d, rng, dtype, config.policy_bias_low)
        self.params: dict[str, np.ndarray] = {
            "emb": random_table(len(vocab), d, rng, config.embedding_init, dtype),
            "lstm_l.W": lstm_l.W, "lstm_l.b": lstm_l.b,
            "lstm_h.W": lstm_h.W, "lstm_h.b": lstm_h.b,
            "dec.W": dec.W, "dec.b": dec.b, "head.W": dec.head_W, "head.b": dec.head_b,
            "pol_h.W": pol_h.W, "pol_h.b": pol_h.b,
            "pol_l.W": pol_l.W, "pol_l.b": pol_l.b,
        }
        self.aspect_vectors: dict[str, np.ndarray] = {}
        self.refresh_aspect_vectors()
        self.stages = {"pretrain_low": False, "pretrain_high": False, "policy": False}
        self.counters: dict[str, int] = {}
        self._ids: dict[str, list[list[int]]] = {}
        self._clause_vecs: dict[str, np.ndarray] = {}
        self._clause_embs: dict[str, np.ndarray] = {}

    # ------------------------------------------------------------ accessors

    @property
    def d(self):
        return self.config.d

    @property
    def lstm_l(self):
        return lstm_mod.LstmParams(self.params["lstm_l.W"], self.params["lstm_l.b"])

    @property
    def lstm_h(self):
        return lstm_mod.LstmParams(self.params["lstm_h.W"], self.params["lstm_h.b"])

    @property
    def decoder(self):
        p = self.params
        return pr.DecoderParams(p["dec.W"], p["dec.b"], p["head.W"], p["head.b"])

    @property
    def policy_h(self):
        return hp.HighPolicyParams(self.params["pol_h.W"], self.params["pol_h.b"])

    @property
    def policy_l(self):
        return lp.LowPolicyParams(self.params["pol_l.W"], self.params["pol_l.b"])

    def set_embeddings(self, table: np.ndarray):
        if table.shape != self.params["emb"].shape:
            raise DomainError(f"embedding table {table.shape} does not match "
                              f"{self.params['emb'].shape}")
        self.params["emb"][...] = table
        self.refresh_aspect_vectors()
        self.invalidate_cache()

    def refresh_aspect_vectors(self):
        for name, kws in self.aspects.items():
            self.aspect_vectors[name] = aspect_embedding(self.params["emb"], self.vocab.ids(kws))

    def keyword_rows(self) -> list[int]:
        """Embedding rows behind the aspect vectors (held fixed unless aspects train)."""
        return sorted({i for kws in self.aspects.values() for i in self.vocab.ids(kws)})

    def aspect_vector(self, name: str) -> np.ndarray:
        try:
            return self.aspect_vectors[name]
        except KeyError:
            raise DomainError(f"unknown aspect {name!r}") from None

    def invalidate_cache(self):
        self._clause_vecs.clear()
        self._clause_embs.clear()

    def token_ids(self, doc: Document) -> list[list[int]]:
        ids = self._ids.get(doc.id)
        if ids is None:
            ids = [self.vocab.ids(c.tokens) for c in doc.clauses]
            self._ids[doc.id] = ids
        return ids

    def clause_vectors(self, doc: Document) -> np.ndarray:
        """Word-encoder summaries of each clause, cached until the encoder changes."""
        vecs = self._clause_vecs.get(doc.id)
        if vecs is None:
            emb, enc = self.params["emb"], self.lstm_l
            vecs = np.stack([hp.clause_vector(ids, emb, enc) for ids in self.token_ids(doc)])
            self._clause_vecs[doc.id] = vecs
        return vecs

    def clause_embeddings(self, doc: Document) -> np.ndarray:
        """Mean unit word embedding of each clause, cached like the clause vectors."""
        embs = self._clause_embs.get(doc.id)
        if embs is None:
            emb = self.params["emb"]
            embs = np.stack([hp.clause_embedding(ids, emb) for ids in self.token_ids(doc)])
            self._clause_embs[doc.id] = embs
        return embs

    def word_state_all(self, doc: Document) -> lstm_mod.LstmState:
        """Word encoder run over every word of the document, untraced."""
        emb, enc = self.params["emb"], self.lstm_l
        state = lstm_mod.LstmState.zeros(self.d, emb.dtype)
        for ids in self.token_ids(doc):
            state = lstm_mod.encode((emb[i] for i in ids), enc, state)
        return state

    # ------------------------------------------------------- traced losses

    def _dropout_masks(self, n, rng):
        p = self.config.dropout
        if rng is None or p <= 0:
            return None
        keep = rng.random((n, self.d)) >= p
        return list(keep.astype(self.params["emb"].dtype) / (1.0 - p))

    def low_pretrain_loss(self, P: dict, doc: Document, queries, dropout_rng=None):
        """Summed cross-entropy of the clause head on the all-words encoding."""
        ids = [i for clause in self.token_ids(doc) for i in clause]
        xs = [nm.lookup(P["emb"], i) for i in ids]
        enc = lstm_mod.LstmParams(P["lstm_l.W"], P["lstm_l.b"])
        state = lstm_mod.encode(xs, enc, dropout=self._dropout_masks(len(xs), dropout_rng))
        logits = nm.affine(P["head.W"], state.h, P["head.b"])
        return nm.addn(*[nm.softmax_cross_entropy(logits, q.rating) for q in queries])

    def high_pretrain_loss(self, P: dict, doc: Document, queries, dropout_rng=None):
        """Summed cross-entropy of the final decoder with every clause selected.

        Clause vectors and the word-level half of the representation come from
        the (already pretrained) word encoder and are constants here.
        """
        vecs = list(self.clause_vectors(doc))
        w_hat = self.word_state_all(doc).h
        enc = lstm_mod.LstmParams(P["lstm_h.W"], P["lstm_h.b"])
        state = lstm_mod.encode(vecs, enc, dropout=self._dropout_masks(len(vecs), dropout_rng))
        z = pr.document_representation(state.h, w_hat)
        logits = nm.affine(P["dec.W"], z, P["dec.b"])
        return nm.addn(*[nm.softmax_cross_entropy(logits, q.rating) for q in queries])

    def joint_loss(self, P: dict, doc: Document, queries, clause_head: bool = True):
        """Select-all classification loss with every encoder parameter traced."""
        token_ids = self.token_ids(doc)
        enc_l = lstm_mod.LstmParams(P["lstm_l.W"], P["lstm_l.b"])
        enc_h = lstm_mod.LstmParams(P["lstm_h.W"], P["lstm_h.b"])
        words = [[nm.lookup(P["emb"], i) for i in ids] for ids in token_ids]
        vecs = [lstm_mod.encode(ws, enc_l).h for ws in words]
        w_state = lstm_mod.encode([w for ws in words for w in ws], enc_l)
        v_state = lstm_mod.encode(vecs, enc_h)
        z = pr.document_representation(v_state.h, w_state.h)
        logits = nm.affine(P["dec.W"], z, P["dec.b"])
        terms = [nm.softmax_cross_entropy(logits, q.rating) for q in queries]
        if clause_head:
            head = nm.affine(P["head.W"], w_state.h, P["head.b"])
            terms += [nm.softmax_cross_entropy(head, q.rating) for q in queries]
        return nm.addn(*terms)

    def selected_loss(self, P: dict, doc: Document, query, rollout: Rollout):
        """Cross-entropy on the representation built from a rollout's selections."""
        token_ids = self.token_ids(doc)
        enc_l = lstm_mod.LstmParams(P["lstm_l.W"], P["lstm_l.b"])
        enc_h = lstm_mod.LstmParams(P["lstm_h.W"], P["lstm_h.b"])
        vecs = self.clause_vectors(doc)
        dtype = self.params["emb"].dtype
        hs = lstm_mod.LstmState.zeros(self.d, dtype)
        ls = lstm_mod.LstmState.zeros(self.d, dtype)
        terms = []
        for i, o in enumerate(rollout.clause_mask):
            if not o:
                continue
            hs = lstm_mod.step(hs, vecs[i], enc_h)
            low = rollout.high.low[i]
            if self.config.reset_low_state:
                ls = lstm_mod.LstmState.zeros(self.d, dtype)
            for tok, a in zip(token_ids[i], low.actions):
                if a:
                    ls = lstm_mod.step(ls, nm.lookup(P["emb"], tok), enc_l)
            head = nm.affine(P["head.W"], ls.h, P["head.b"])
            terms.append(nm.softmax_cross_entropy(head, query.rating))
        z = pr.document_representation(hs.h, ls.h)
        logits = nm.affine(P["dec.W"], z, P["dec.b"])
        terms.append(nm.softmax_cross_entropy(logits, query.rating))
        return nm.addn(*terms)

    # -------------------------------------------------------------- rollout

    def rollout(self, doc: Document, aspect: str, gold: int | None = None, rng=None,
                greedy: bool = False, forced_options=None, forced_actions=None,
                on_clause=None, assign_fallback: bool = True) -> Rollout:
        """Run the clause policy and, inside selected clauses, the word policy.

        With ``gold`` given, every reward is filled in.  ``forced_options`` /
        ``forced_actions`` replay fixed selections.  ``on_clause(i, low,
        incoming_state, word_vectors)`` is invoked after each selected clause
        once its reward is known (the trainer updates the word policy there).
        """
        cfg = self.config
        d = self.d
        emb = self.params["emb"]
        dtype = emb.dtype
        vecs = self.clause_vectors(doc)
        ids = self.token_ids(doc)
        v_a = self.aspect_vector(aspect)
        embs = self.clause_embeddings(doc) if cfg.high_features == "interaction" else None
        pol_h = self.policy_h
        pol_l = self.policy_l
        enc_l, enc_h, dec = self.lstm_l, self.lstm_h, self.decoder
        hs = lstm_mod.LstmState.zeros(d, dtype)
        ls = lstm_mod.LstmState.zeros(d, dtype)
        traj = hp.HighTrajectory()
        for i in range(doc.n):
            s = hp.high_state(hs, vecs[i], v_a)
            phi = hp.features(s, cfg.high_features, None if embs is None else embs[i])
            p = nm.sigmoid_scalar(float(pol_h.W[0] @ phi) + float(pol_h.b[0]))
            if forced_options is not None:
                o = int(bool(forced_options[i]))
            else:
                o = hp.sample_option(p, rng, greedy=greedy)
            if o:
                hs = lstm_mod.step(hs, vecs[i], enc_h)
                if cfg.reset_low_state:
                    ls = lstm_mod.LstmState.zeros(d, dtype)
                X = emb[ids[i]]
                forced = None if forced_actions is None else forced_actions[i]
                low, new_ls = lp.run_clause(X, ls, pol_l, enc_l, rng, greedy=greedy, forced=forced)
                if gold is not None:
                    pc = pr.delay_prob(new_ls.h, gold, dec, "clause", cfg.prob_floor)
                    low.step_reward = lp.low_reward(pc, low.n_selected, low.n_words, cfg)
                    if on_clause is not None:
                        on_clause(i, low, ls, X)
                traj.low[i] = low
                ls = new_ls
            cos_log = hp.cosine_reward(v_a, hs.h, cfg.cosine_eps, self.counters)
            traj.steps.append(hp.HighStep(s, phi, p, o, cos_log))
        traj.complete = True
        z = np.concatenate((hs.h, ls.h))
        dist, pred = pr.predict(z, dec)
        fallback = not any(traj.options)
        if fallback and assign_fallback:
            pred = pr.fallback_random_rating(rng, cfg.num_classes)
        out = Rollout(traj, hs, ls, dist, pred, fallback)
        if gold is not None:
            out.final_prob = max(float(dist[gold - 1]), cfg.prob_floor)
            out.rewards = hp.high_rewards(traj, out.final_prob, cfg)
            for step, r in zip(traj.steps, out.rewards):
                step.reward = r
        return out

    def sample_clause(self, X, incoming: lstm_mod.LstmState, gold: int, rng) -> lp.LowTrajectory:
        """Fresh word-policy sample over one clause, with its reward."""
        low, new_ls = lp.run_clause(X, incoming, self.policy_l, self.lstm_l, rng)
        pc = pr.delay_prob(new_ls.h, gold, self.decoder, "clause", self.config.prob_floor)
        low.step_reward = lp.low_reward(pc, low.n_selected, low.n_words, self.config)
        return low

    def log_prob_options(self, rollout: Rollout) -> float:
        total = 0.0
        for st in rollout.high.steps:
            total += math.log(st.prob if st.option else 1.0 - st.prob)
        return total
