"""Dense vector math and a small reverse-mode differentiation tape.

Every operation accepts plain ``numpy`` arrays or :class:`Node` objects.  With
only arrays it evaluates eagerly and returns an array; as soon as one argument
is a node, the result is recorded on that node's tape so :func:`backward` can
replay it.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, NumericError, ShapeError, UsageError

DEFAULT_DTYPE = np.float64
_DEBUG = False


def set_debug(flag: bool) -> None:
    """Enable NaN/Inf checks on every recorded value."""
    global _DEBUG
    _DEBUG = bool(flag)


class Node:
    __slots__ = ("value", "grad", "tape", "_backward", "name", "_outer")

    def __init__(self, value, tape, backward=None, name=None):
        self.value = value
        self.grad = None
        self.tape = tape
        self._backward = backward
        self.name = name
        self._outer = None

    @property
    def shape(self):
        return self.value.shape

    def add_grad(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.value.dtype, copy=True)
        else:
            self.grad += g

    def add_outer(self, g, x):
        # Deferred rank-1 update; summed once in Tape._finalize.
        if self._outer is None:
            self._outer = ([], [])
        self._outer[0].append(g)
        self._outer[1].append(x)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node{label}(shape={self.value.shape})"


class Tape:
    """Append-only record of operations for one forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}
        self.consumed = False

    def param(self, name: str, array: np.ndarray) -> Node:
        node = self.params.get(name)
        if node is None:
            node = Node(array, self, name=name)
            self.params[name] = node
        return node

    def bind(self, params: dict, names=None) -> dict:
        """Return ``params`` with the selected entries replaced by tape leaves."""
        out = dict(params)
        for key in params if names is None else names:
            out[key] = self.param(key, params[key])
        return out

    def record(self, value, backward) -> Node:
        if self.consumed:
            raise UsageError("tape already replayed; trace a new forward pass")
        if _DEBUG and not np.all(np.isfinite(value)):
            raise NumericError("non-finite value produced during forward pass")
        node = Node(value, self, backward)
        self.nodes.append(node)
        return node

    def _finalize(self):
        for node in self.params.values():
            if node._outer is None:
                continue
            gs, xs = node._outer
            acc = np.stack(gs).T @ np.stack(xs)
            node._outer = None
            node.add_grad(acc)


class GradStore(dict):
    """Parameter name -> gradient array.  Unused parameters map to zeros."""

    def __init__(self, tape: Tape):
        super().__init__()
        for name, node in tape.params.items():
            self[name] = node.grad if node.grad is not None else np.zeros_like(node.value)

    def get_or_zero(self, name, like):
        g = self.get(name)
        return np.zeros_like(like) if g is None else g


def backward(tape: Tape, loss) -> GradStore:
    if not isinstance(loss, Node) or loss.tape is not tape:
        raise UsageError("backward() needs a scalar recorded on this tape")
    if loss.value.size != 1:
        raise UsageError(f"loss must be scalar, got shape {loss.value.shape}")
    if tape.consumed:
        raise UsageError("backward() already called on this tape")
    tape.consumed = True
    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        if node.grad is not None and node._backward is not None:
            node._backward(node.grad)
    tape._finalize()
    return GradStore(tape)


# --------------------------------------------------------------------- helpers


def _tape_of(*args):
    for a in args:
        if isinstance(a, Node):
            return a.tape
    return None


def value(x):
    return x.value if isinstance(x, Node) else x


def _acc(x, g):
    if isinstance(x, Node):
        x.add_grad(g)


def _check_same(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def vector(values, dtype=None) -> np.ndarray:
    return np.asarray(values, dtype=dtype or DEFAULT_DTYPE).reshape(-1)


def zeros(n, dtype=None) -> np.ndarray:
    return np.zeros(n, dtype=dtype or DEFAULT_DTYPE)


def sigmoid_array(x):
    # Branch on sign so exp never overflows.
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_scalar(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def softmax_array(v):
    v = np.asarray(v)
    if v.size == 0:
        raise DomainError("softmax of an empty vector")
    e = np.exp(v - v.max())
    return e / e.sum()


# ------------------------------------------------------------------ operations


def affine(W, x, b=None):
    """``W @ x + b`` for a matrix ``W`` and vectors ``x``, ``b``."""
    Wv, xv = value(W), value(x)
    if Wv.ndim != 2 or xv.ndim != 1 or Wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"affine: W{Wv.shape} incompatible with x{xv.shape}")
    out = Wv @ xv
    if b is not None:
        bv = value(b)
        if bv.shape != out.shape:
            raise ShapeError(f"affine: bias {bv.shape} does not match output {out.shape}")
        out = out + bv
    tape = _tape_of(W, x, b)
    if tape is None:
        return out

    def back(g):
        if isinstance(W, Node):
            if W._backward is None:
                W.add_outer(g, xv)
            else:
                W.add_grad(np.outer(g, xv))
        _acc(x, Wv.T @ g)
        _acc(b, g)

    return tape.record(out, back)


def matvec(W, x):
    return affine(W, x)


def add(a, b):
    av, bv = value(a), value(b)
    _check_same(av, bv, "add")
    tape = _tape_of(a, b)
    out = av + bv
    if tape is None:
        return out

    def back(g):
        _acc(a, g)
        _acc(b, g)

    return tape.record(out, back)


def sub(a, b):
    av, bv = value(a), value(b)
    _check_same(av, bv, "sub")
    tape = _tape_of(a, b)
    out = av - bv
    if tape is None:
        return out

    def back(g):
        _acc(a, g)
        _acc(b, -g)

    return tape.record(out, back)


def mul(a, b):
    """Elementwise product of equal-shape vectors."""
    av, bv = value(a), value(b)
    _check_same(av, bv, "mul")
    tape = _tape_of(a, b)
    out = av * bv
    if tape is None:
        return out

    def back(g):
        _acc(a, g * bv)
        _acc(b, g * av)

    return tape.record(out, back)


def scale(a, k: float):
    av = value(a)
    tape = _tape_of(a)
    out = av * k
    if tape is None:
        return out
    return tape.record(out, lambda g: _acc(a, g * k))


def sigmoid(x):
    xv = value(x)
    out = sigmoid_array(xv)
    tape = _tape_of(x)
    if tape is None:
        return out
    return tape.record(out, lambda g: _acc(x, g * out * (1.0 - out)))


def tanh(x):
    xv = value(x)
    out = np.tanh(xv)
    tape = _tape_of(x)
    if tape is None:
        return out
    return tape.record(out, lambda g: _acc(x, g * (1.0 - out * out)))


def concat(*parts):
    vals = [value(p) for p in parts]
    for v in vals:
        if v.ndim != 1:
            raise ShapeError(f"concat expects vectors, got shape {v.shape}")
    out = np.concatenate(vals)
    tape = _tape_of(*parts)
    if tape is None:
        return out
    bounds = np.cumsum([0] + [v.shape[0] for v in vals])

    def back(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _acc(p, g[lo:hi])

    return tape.record(out, back)


def take(x, start: int, stop: int):
    """Contiguous slice ``x[start:stop]``."""
    xv = value(x)
    out = xv[start:stop]
    tape = _tape_of(x)
    if tape is None:
        return out

    def back(g):
        if isinstance(x, Node):
            full = np.zeros_like(xv)
            full[start:stop] = g
            x.add_grad(full)

    return tape.record(out, back)


def lookup(table, idx: int):
    """Row ``idx`` of an embedding table."""
    tv = value(table)
    if not 0 <= idx < tv.shape[0]:
        raise DomainError(f"token id {idx} outside table of {tv.shape[0]} rows")
    out = tv[idx].copy()
    tape = _tape_of(table)
    if tape is None:
        return out

    def back(g):
        if isinstance(table, Node):
            if table.grad is None:
                table.grad = np.zeros_like(tv)
            table.grad[idx] += g

    return tape.record(out, back)


def dot(a, b):
    av, bv = value(a), value(b)
    _check_same(av, bv, "dot")
    out = np.array(av @ bv)
    tape = _tape_of(a, b)
    if tape is None:
        return out

    def back(g):
        _acc(a, g * bv)
        _acc(b, g * av)

    return tape.record(out, back)


def total(x):
    xv = value(x)
    out = np.array(xv.sum())
    tape = _tape_of(x)
    if tape is None:
        return out
    return tape.record(out, lambda g: _acc(x, np.full_like(xv, g)))


def sumsq(x):
    xv = value(x)
    out = np.array(np.sum(xv * xv))
    tape = _tape_of(x)
    if tape is None:
        return out
    return tape.record(out, lambda g: _acc(x, 2.0 * g * xv))


def softmax(v):
    vv = value(v)
    out = softmax_array(vv)
    tape = _tape_of(v)
    if tape is None:
        return out

    def back(g):
        _acc(v, out * (g - np.dot(g, out)))

    return tape.record(out, back)


def cross_entropy(probs, label: int, floor: float = 0.0) -> float:
    """``-log probs[label]`` for a 1-based class label."""
    p = value(probs)
    if not 1 <= label <= p.shape[0]:
        raise DomainError(f"label {label} outside [1, {p.shape[0]}]")
    return -math.log(max(float(p[label - 1]), floor)) if floor else -math.log(p[label - 1])


def softmax_cross_entropy(logits, label: int):
    """Cross-entropy of ``softmax(logits)`` against a 1-based label.

    The gradient with respect to the logits is ``softmax(logits) - onehot``.
    """
    lv = value(logits)
    C = lv.shape[0]
    if not 1 <= label <= C:
        raise DomainError(f"label {label} outside [1, {C}]")
    shifted = lv - lv.max()
    logz = math.log(np.exp(shifted).sum())
    out = np.array(logz - shifted[label - 1])
    tape = _tape_of(logits)
    if tape is None:
        return out

    def back(g):
        p = np.exp(shifted - logz)
        p[label - 1] -= 1.0
        _acc(logits, g * p)

    return tape.record(out, back)


def addn(*terms):
    """Sum of scalars or equal-shape vectors."""
    out = terms[0]
    for t in terms[1:]:
        out = add(out, t)
    return out
