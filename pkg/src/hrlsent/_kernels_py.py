"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

from .numeric import sigmoid_array, sigmoid_scalar


def lstm_step(W, b, h, c, x):
    d = h.shape[0]
    if W.shape != (4 * d, x.shape[0] + d) or b.shape[0] != 4 * d or c.shape[0] != d:
        raise ValueError("lstm_step: inconsistent shapes")
    z = W @ np.concatenate((x, h)) + b
    ifo = sigmoid_array(z[: 3 * d])
    g = np.tanh(z[3 * d:])
    c_new = ifo[d:2 * d] * c + ifo[:d] * g
    h_new = ifo[2 * d:] * np.tanh(c_new)
    return h_new, c_new


def low_rollout(Wp, bp, W, b, h0, c0, X, u, forced, mode):
    k_words, n_in = X.shape
    d = h0.shape[0]
    if Wp.shape[1] != 2 * d + n_in or W.shape != (4 * d, n_in + d):
        raise ValueError("low_rollout: inconsistent shapes")
    states = np.empty((k_words, 2 * d + n_in), dtype=X.dtype)
    probs = np.empty(k_words, dtype=X.dtype)
    actions = np.zeros(k_words, dtype=np.int8)
    h, c = h0.copy(), c0.copy()
    w = Wp[0]
    for j in range(k_words):
        s = states[j]
        s[:d] = h
        s[d:2 * d] = c
        s[2 * d:] = X[j]
        p = sigmoid_scalar(float(w @ s) + bp)
        probs[j] = p
        if mode == 0:
            act = u[j] < p
        elif mode == 1:
            act = p >= 0.5
        else:
            act = bool(forced[j])
        if act:
            actions[j] = 1
            h, c = lstm_step(W, b, h, c, X[j])
    return states, probs, actions, h, c
