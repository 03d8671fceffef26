"""Word selection inside a selected clause."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from . import lstm as lstm_mod
from . import numeric as nm
from .errors import DomainError, ShapeError
from .high_policy import sample_option


@dataclass
class LowPolicyParams:
    W: np.ndarray  # (1, 3d)
    b: np.ndarray  # (1,)

    @classmethod
    def init(cls, d, rng, dtype=np.float64, bias=0.0):
        bound = 1.0 / np.sqrt(3 * d)
        return cls(rng.uniform(-bound, bound, (1, 3 * d)).astype(dtype, copy=False),
                   np.full(1, bias, dtype=dtype))


@dataclass
class LowTrajectory:
    states: np.ndarray    # (k, 3d)
    probs: np.ndarray     # P(a = 1 | state) per word
    actions: np.ndarray   # int8 0/1 per word
    step_reward: float = 0.0

    @property
    def n_words(self) -> int:
        return int(self.actions.shape[0])

    @property
    def n_selected(self) -> int:
        return int(self.actions.sum())

    @property
    def rewards(self) -> list[float]:
        # Both terms are delay rewards, so every word step carries the same value.
        return [self.step_reward] * self.n_words

    @property
    def total_reward(self) -> float:
        return self.step_reward * self.n_words


def low_state(prev: lstm_mod.LstmState, w) -> np.ndarray:
    """``[h_prev ; c_prev ; w]``."""
    h, c = prev.values()
    wv = nm.value(w)
    if not (h.shape == c.shape == wv.shape) or wv.ndim != 1:
        raise ShapeError(f"state parts have shapes {h.shape}, {c.shape}, {wv.shape}")
    return np.concatenate((h, c, wv))


def action_prob(s, params: LowPolicyParams) -> float:
    s = nm.value(s)
    if params.W.shape != (1, s.shape[0]):
        raise ShapeError(f"policy weights {params.W.shape} do not match state {s.shape}")
    return nm.sigmoid_scalar(float(params.W[0] @ s) + float(params.b[0]))


sample_action = sample_option


def low_reward(clause_final_prob: float, n_selected: int, n_words: int, cfg) -> float:
    """Per-step word reward: weighted log delay probability minus selection penalty."""
    if n_words <= 0:
        raise DomainError("clause has no words")
    if not 0 <= n_selected <= n_words:
        raise DomainError(f"{n_selected} selected words in a clause of {n_words}")
    return cfg.lambda1_low * math.log(clause_final_prob) + cfg.lambda2_low * (-n_selected / n_words)


def run_clause(word_vectors: np.ndarray, state: lstm_mod.LstmState, policy: LowPolicyParams,
               encoder: lstm_mod.LstmParams, rng=None, greedy: bool = False,
               forced=None) -> tuple[LowTrajectory, lstm_mod.LstmState]:
    """Scan a clause word by word, selecting words and updating the carried state."""
    X = np.ascontiguousarray(word_vectors)
    h, c = state.values()
    uniforms = None
    if forced is None and not greedy:
        uniforms = rng.random(X.shape[0])
    states, probs, actions, h, c = kernels.low_rollout(
        policy.W, policy.b[0], encoder.W, encoder.b, np.ascontiguousarray(h),
        np.ascontiguousarray(c), X, uniforms=uniforms, forced=forced, greedy=greedy)
    return LowTrajectory(states, probs, actions), lstm_mod.LstmState(h, c)
