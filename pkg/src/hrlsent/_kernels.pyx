# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled forward kernels for the LSTM cell and the word-level rollout.

Gate layout matches ``hrlsent.lstm``: rows [input, forget, output, candidate]
of a ``4d x (n_in + d)`` matrix applied to ``[x ; h]``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemv, ddot

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef void _cell(double[:, ::1] W, double[::1] b, double* xh, int m, int d,
                double[::1] gates, double[::1] h, double[::1] c) noexcept nogil:
    # gates = W @ xh + b ; W is row-major so call BLAS with the transpose.
    cdef char trans = b'T'
    cdef int rows = 4 * d
    cdef int inc = 1
    cdef double one = 1.0
    cdef int k
    cdef double ig, fg, og, gg
    for k in range(rows):
        gates[k] = b[k]
    dgemv(&trans, &m, &rows, &one, &W[0, 0], &m, xh, &inc, &one, &gates[0], &inc)
    for k in range(d):
        ig = _sigmoid(gates[k])
        fg = _sigmoid(gates[d + k])
        og = _sigmoid(gates[2 * d + k])
        gg = tanh(gates[3 * d + k])
        c[k] = fg * c[k] + ig * gg
        h[k] = og * tanh(c[k])


def lstm_step(double[:, ::1] W, double[::1] b, double[::1] h, double[::1] c,
              double[::1] x):
    """One LSTM step; returns fresh ``(h, c)`` arrays."""
    cdef int d = h.shape[0]
    cdef int n_in = x.shape[0]
    cdef int m = n_in + d
    if W.shape[0] != 4 * d or W.shape[1] != m or b.shape[0] != 4 * d or c.shape[0] != d:
        raise ValueError("lstm_step: inconsistent shapes")
    cdef double[::1] xh = np.empty(m)
    cdef double[::1] gates = np.empty(4 * d)
    h_out = np.array(h, copy=True)
    c_out = np.array(c, copy=True)
    cdef double[::1] hv = h_out
    cdef double[::1] cv = c_out
    cdef int k
    for k in range(n_in):
        xh[k] = x[k]
    for k in range(d):
        xh[n_in + k] = h[k]
    _cell(W, b, &xh[0], m, d, gates, hv, cv)
    return h_out, c_out


def low_rollout(double[:, ::1] Wp, double bp, double[:, ::1] W, double[::1] b,
                double[::1] h0, double[::1] c0, double[:, ::1] X, double[::1] u,
                cnp.int8_t[::1] forced, int mode):
    """Scan the words of one clause with the logistic word policy.

    mode 0 samples ``a = u[j] < p``, mode 1 is greedy (``p >= 0.5``), mode 2
    replays ``forced``.  Returns ``(states, probs, actions, h, c)`` where
    ``states[j]`` is the ``[h ; c ; x_j]`` vector the policy saw.
    """
    cdef int k_words = X.shape[0]
    cdef int d = h0.shape[0]
    cdef int n_in = X.shape[1]
    cdef int m = n_in + d
    cdef int sdim = 2 * d + n_in
    if Wp.shape[1] != sdim or W.shape[0] != 4 * d or W.shape[1] != m:
        raise ValueError("low_rollout: inconsistent shapes")
    states = np.empty((k_words, sdim))
    probs = np.empty(k_words)
    actions = np.zeros(k_words, dtype=np.int8)
    h_out = np.array(h0, copy=True)
    c_out = np.array(c0, copy=True)
    cdef double[:, ::1] S = states
    cdef double[::1] P = probs
    cdef cnp.int8_t[::1] A = actions
    cdef double[::1] hv = h_out
    cdef double[::1] cv = c_out
    cdef double[::1] xh = np.empty(m)
    cdef double[::1] gates = np.empty(4 * d)
    cdef int j, k, inc = 1
    cdef double p
    cdef int act
    for j in range(k_words):
        for k in range(d):
            S[j, k] = hv[k]
            S[j, d + k] = cv[k]
        for k in range(n_in):
            S[j, 2 * d + k] = X[j, k]
        p = _sigmoid(ddot(&sdim, &Wp[0, 0], &inc, &S[j, 0], &inc) + bp)
        P[j] = p
        if mode == 0:
            act = 1 if u[j] < p else 0
        elif mode == 1:
            act = 1 if p >= 0.5 else 0
        else:
            act = 1 if forced[j] else 0
        A[j] = act
        if act:
            for k in range(n_in):
                xh[k] = X[j, k]
            for k in range(d):
                xh[n_in + k] = hv[k]
            _cell(W, b, &xh[0], m, d, gates, hv, cv)
    return states, probs, actions, h_out, c_out
