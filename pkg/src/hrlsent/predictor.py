"""Softmax rating decoder.

Two heads share the rating scale: the final head reads the ``2d`` document
representation ``[clause state ; word state]``, the clause head reads a single
``d``-dim word-encoder state and supplies the per-clause delay reward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numeric as nm
from .errors import DomainError, ShapeError


@dataclass
class DecoderParams:
    W: np.ndarray
    b: np.ndarray
    head_W: np.ndarray
    head_b: np.ndarray

    @property
    def num_classes(self):
        return self.b.shape[0]

    @classmethod
    def init(cls, d, num_classes, rng, dtype=np.float64):
        if num_classes < 2:
            raise DomainError("need at least two rating classes")
        b2 = 1.0 / np.sqrt(2 * d)
        b1 = 1.0 / np.sqrt(d)
        return cls(rng.uniform(-b2, b2, (num_classes, 2 * d)).astype(dtype, copy=False),
                   np.zeros(num_classes, dtype=dtype),
                   rng.uniform(-b1, b1, (num_classes, d)).astype(dtype, copy=False),
                   np.zeros(num_classes, dtype=dtype))


def document_representation(v_hat, w_hat):
    """``[v_hat ; w_hat]`` with the clause-level part first."""
    a, b = nm.value(v_hat), nm.value(w_hat)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"representation halves {a.shape} and {b.shape} differ")
    return nm.concat(v_hat, w_hat)


def logits(x, W, b):
    return nm.affine(W, x, b)


def predict(z, params: DecoderParams):
    """Class distribution and the 1-based argmax rating (ties go to the lower rating)."""
    zv = nm.value(z)
    if zv.shape != (params.W.shape[1],):
        raise ShapeError(f"decoder expects {params.W.shape[1]}-dim input, got {zv.shape}")
    dist = nm.softmax_array(params.W @ zv + params.b)
    return dist, int(np.argmax(dist)) + 1


def head_distribution(hidden, params: DecoderParams, head: str = "final"):
    hv = nm.value(hidden)
    if head == "final":
        W, b = params.W, params.b
    elif head == "clause":
        W, b = params.head_W, params.head_b
    else:
        raise DomainError(f"unknown decoder head {head!r}")
    if hv.shape != (W.shape[1],):
        raise ShapeError(f"{head} head expects {W.shape[1]}-dim input, got {hv.shape}")
    return nm.softmax_array(W @ hv + b)


def delay_prob(hidden, gold: int, params: DecoderParams, head: str = "final",
               floor: float = 1e-12) -> float:
    """``p(gold | hidden)`` from the chosen head, floored before any log."""
    C = params.num_classes
    if not 1 <= gold <= C:
        raise DomainError(f"gold rating {gold} outside [1, {C}]")
    dist = head_distribution(hidden, params, head)
    return max(float(dist[gold - 1]), floor)


def fallback_random_rating(rng: np.random.Generator, num_classes: int) -> int:
    """Uniform rating used when nothing at all was selected."""
    if num_classes < 2:
        raise DomainError("need at least two rating classes")
    return int(rng.integers(1, num_classes + 1))
