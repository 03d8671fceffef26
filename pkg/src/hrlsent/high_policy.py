"""Clause selection: states, option probabilities, and the clause-level reward."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lstm as lstm_mod
from . import numeric as nm
from .errors import DomainError, ShapeError, StateError, UsageError


@dataclass
class HighPolicyParams:
    W: np.ndarray  # (1, F) with F = 4d, or 5d with the interaction block
    b: np.ndarray  # (1,)

    @classmethod
    def init(cls, n_features, rng, dtype=np.float64, bias=0.0):
        bound = 1.0 / np.sqrt(n_features)
        return cls(rng.uniform(-bound, bound, (1, n_features)).astype(dtype, copy=False),
                   np.full(1, bias, dtype=dtype))


@dataclass
class HighStep:
    state: np.ndarray
    features: np.ndarray
    prob: float       # P(o = 1 | state)
    option: int
    cos_log: float = 0.0
    reward: float = 0.0


@dataclass
class HighTrajectory:
    steps: list[HighStep] = field(default_factory=list)
    low: dict = field(default_factory=dict)  # clause index -> LowTrajectory
    complete: bool = False

    def __len__(self):
        return len(self.steps)

    @property
    def options(self):
        return [s.option for s in self.steps]

    def clause_low_reward(self, t: int) -> float:
        """Summed word-level reward of clause ``t``; 0 when it was discarded."""
        traj = self.low.get(t)
        return 0.0 if traj is None else traj.total_reward


def clause_vector(token_ids, table, params: lstm_mod.LstmParams) -> np.ndarray:
    """Final word-encoder hidden state over the whole clause, from a zero state."""
    if len(token_ids) == 0:
        raise DomainError("cannot encode an empty clause")
    tv = nm.value(table)
    state = lstm_mod.encode((tv[i] for i in token_ids), params)
    return np.asarray(nm.value(state.h))


def high_state(prev: lstm_mod.LstmState, v_i, v_a) -> np.ndarray:
    """``[h_prev ; c_prev ; v_i ; v_a]``."""
    h, c = prev.values()
    parts = (h, c, nm.value(v_i), nm.value(v_a))
    d = parts[0].shape
    if any(p.shape != d or p.ndim != 1 for p in parts):
        raise ShapeError(f"state parts have shapes {[p.shape for p in parts]}")
    return np.concatenate(parts)


def interaction(e_i, v_a) -> np.ndarray:
    """Elementwise product of the unit-normalised clause embedding and aspect vector, times d.

    The block sums to ``d * cos(e_i, v_a)``, so a linear policy can score how
    well a clause matches the queried aspect.
    """
    d = e_i.shape[0]
    ni, na = np.linalg.norm(e_i), np.linalg.norm(v_a)
    if ni == 0.0 or na == 0.0:
        return np.zeros(d, dtype=e_i.dtype)
    return (e_i / ni) * (v_a / na) * d


def clause_embedding(token_ids, table) -> np.ndarray:
    """Mean of the clause's unit-normalised word embeddings.

    Normalising first keeps words whose embeddings grew during pretraining
    from drowning out the rest of the clause.
    """
    if len(token_ids) == 0:
        raise DomainError("cannot embed an empty clause")
    rows = nm.value(table)[list(token_ids)]
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return (rows / np.where(norms > 0.0, norms, 1.0)).mean(axis=0)


def features(s: np.ndarray, mode: str = "concat", e_i=None) -> np.ndarray:
    """Policy input: the state itself, or the state plus the aspect-match block."""
    if mode == "concat":
        return s
    if e_i is None:
        raise UsageError("interaction features need the clause embedding")
    d = s.shape[0] // 4
    e_i = nm.value(e_i)
    if e_i.shape != (d,):
        raise ShapeError(f"clause embedding {e_i.shape} does not match d={d}")
    return np.concatenate((s, interaction(e_i, s[3 * d:])))


def n_features(d: int, mode: str) -> int:
    return 4 * d if mode == "concat" else 5 * d


def option_prob(s, params: HighPolicyParams, mode: str = "concat", e_i=None) -> float:
    """Probability of selecting the clause, ``sigmoid(W phi(s) + b)``."""
    s = nm.value(s)
    if s.ndim != 1 or s.shape[0] % 4:
        raise ShapeError(f"clause state must be 4d-dimensional, got {s.shape}")
    phi = features(s, mode, e_i)
    if params.W.shape != (1, phi.shape[0]):
        raise ShapeError(f"policy weights {params.W.shape} do not match features {phi.shape}")
    return nm.sigmoid_scalar(float(params.W[0] @ phi) + float(params.b[0]))


def sample_option(prob: float, rng=None, greedy: bool = False, u: float | None = None) -> int:
    """Bernoulli draw (1 iff ``u < prob``); greedy selects iff ``prob >= 0.5``."""
    if greedy:
        return int(prob >= 0.5)
    if u is None:
        u = rng.random()
    return int(u < prob)


def cosine_reward(v_a, v_hat, eps: float = 1e-4, counter: dict | None = None) -> float:
    """``log(max(cos(v_a, v_hat), eps))``."""
    a, b = nm.value(v_a), nm.value(v_hat)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        if counter is not None:
            counter["zero_norm"] = counter.get("zero_norm", 0) + 1
        return math.log(eps)
    cos = float(a @ b) / (na * nb)
    return math.log(max(cos, eps))


def high_reward(i: int, traj: HighTrajectory, final_prob: float, cfg) -> float:
    """Reward of step ``i`` (0-based) by explicit summation over ``t >= i``."""
    if not traj.complete:
        raise StateError("clause trajectory is not complete")
    n = len(traj)
    if not 0 <= i < n:
        raise DomainError(f"step {i} outside trajectory of length {n}")
    cos_sum = sum(cfg.gamma ** (t - i) * traj.steps[t].cos_log for t in range(i, n))
    low_sum = sum(cfg.gamma ** (t - i) * traj.clause_low_reward(t) for t in range(i, n))
    return cfg.lambda1 * cos_sum + cfg.lambda2 * low_sum + cfg.lambda3 * math.log(final_prob)


def high_rewards(traj: HighTrajectory, final_prob: float, cfg) -> list[float]:
    """All step rewards via the backward recurrence on both discounted sums."""
    if not traj.complete:
        raise StateError("clause trajectory is not complete")
    n = len(traj)
    out = [0.0] * n
    cos_acc = low_acc = 0.0
    delay = cfg.lambda3 * math.log(final_prob)
    for t in range(n - 1, -1, -1):
        cos_acc = traj.steps[t].cos_log + cfg.gamma * cos_acc
        low_acc = traj.clause_low_reward(t) + cfg.gamma * low_acc
        out[t] = cfg.lambda1 * cos_acc + cfg.lambda2 * low_acc + delay
    return out
