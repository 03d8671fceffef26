"""LSTM cell with skip-copy recurrence.

A step whose mask bit is 0 copies the incoming hidden state and memory cell
unchanged; a step with bit 1 applies the ordinary LSTM update.  The same code
serves the clause-level and the word-level encoders.

Weights are stored as one ``4d x (n_in + d)`` matrix applied to ``[x ; h]``,
with row blocks ordered input, forget, output, candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from . import numeric as nm
from .errors import ShapeError

GATES = ("input", "forget", "output", "candidate")


@dataclass
class LstmState:
    h: object
    c: object

    @classmethod
    def zeros(cls, d, dtype=np.float64):
        return cls(np.zeros(d, dtype=dtype), np.zeros(d, dtype=dtype))

    def values(self):
        return nm.value(self.h), nm.value(self.c)


@dataclass
class LstmParams:
    W: object
    b: object

    @property
    def d(self):
        return nm.value(self.b).shape[0] // 4

    @property
    def input_dim(self):
        return nm.value(self.W).shape[1] - self.d

    def gate(self, name):
        """(weights, bias) views of one gate block."""
        k = GATES.index(name)
        d = self.d
        return nm.value(self.W)[k * d:(k + 1) * d], nm.value(self.b)[k * d:(k + 1) * d]

    @classmethod
    def init(cls, input_dim, d, rng, forget_bias=1.0, dtype=np.float64):
        bound = 1.0 / np.sqrt(d)
        W = rng.uniform(-bound, bound, size=(4 * d, input_dim + d)).astype(dtype, copy=False)
        b = np.zeros(4 * d, dtype=dtype)
        b[d:2 * d] = forget_bias
        return cls(W, b)


def _check(params: LstmParams, state: LstmState, x):
    d = params.d
    xv = nm.value(x)
    if xv.shape != (params.input_dim,):
        raise ShapeError(f"LSTM input {xv.shape} does not match input dim {params.input_dim}")
    if nm.value(state.h).shape != (d,) or nm.value(state.c).shape != (d,):
        raise ShapeError(f"LSTM state does not match hidden dim {d}")


def step(state: LstmState, x, params: LstmParams) -> LstmState:
    """Ordinary LSTM update.  Traced whenever any argument is a tape node."""
    _check(params, state, x)
    traced = any(isinstance(v, nm.Node) for v in (state.h, state.c, x, params.W, params.b))
    if not traced:
        h, c = kernels.lstm_step(params.W, params.b, state.h, state.c, x)
        return LstmState(h, c)
    d = params.d
    z = nm.affine(params.W, nm.concat(x, state.h), params.b)
    i = nm.sigmoid(nm.take(z, 0, d))
    f = nm.sigmoid(nm.take(z, d, 2 * d))
    o = nm.sigmoid(nm.take(z, 2 * d, 3 * d))
    g = nm.tanh(nm.take(z, 3 * d, 4 * d))
    c = nm.add(nm.mul(f, state.c), nm.mul(i, g))
    h = nm.mul(o, nm.tanh(c))
    return LstmState(h, c)


def skip(state: LstmState) -> LstmState:
    """Discarded step: the state passes through untouched."""
    return state


def encode_masked(seq, mask, params: LstmParams, initial: LstmState | None = None,
                  dropout=None) -> list[LstmState]:
    """Run the skip-copy recurrence; returns the state after every position.

    ``dropout`` optionally holds one multiplicative mask per input, applied to
    selected inputs only.
    """
    seq = list(seq)
    mask = list(mask)
    if len(seq) != len(mask):
        raise ShapeError(f"sequence length {len(seq)} differs from mask length {len(mask)}")
    state = initial if initial is not None else LstmState.zeros(params.d, nm.value(params.b).dtype)
    states = []
    for t, (x, m) in enumerate(zip(seq, mask)):
        if m:
            if dropout is not None:
                x = nm.mul(x, dropout[t])
            state = step(state, x, params)
        else:
            state = skip(state)
        states.append(state)
    return states


def encode(seq, params: LstmParams, initial: LstmState | None = None, dropout=None) -> LstmState:
    """Final state after encoding every element of ``seq``."""
    seq = list(seq)
    states = encode_masked(seq, [1] * len(seq), params, initial, dropout)
    if not states:
        return initial if initial is not None else LstmState.zeros(params.d, nm.value(params.b).dtype)
    return states[-1]
