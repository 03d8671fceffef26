import numpy as np
import pytest

from hrlsent import numeric as nm
from hrlsent.config import Config
from hrlsent.data import SyntheticSpec, generate_synthetic
from hrlsent.trainer import Trainer


def rel_err(a, b):
    """Norm-relative difference; 0 when both are exactly zero."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0.0 else float(np.linalg.norm(a - b) / den)


def numeric_grads(loss_value, params, names, h=1e-5):
    """Central differences of ``loss_value()`` w.r.t. every entry of ``params[name]``."""
    out = {}
    for name in names:
        arr = params[name]
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + h
            up = loss_value()
            arr[idx] = old - h
            down = loss_value()
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        out[name] = g
    return out


def analytic_grads(loss_fn, params, names):
    tape = nm.Tape()
    P = tape.bind(params, names)
    store = nm.backward(tape, loss_fn(P))
    return {n: store[n] for n in names}


def small_corpus(num_docs=40, seed=0, **kw):
    spec = SyntheticSpec(num_docs=num_docs, seed=seed, **kw)
    return generate_synthetic(spec), spec


def small_trainer(d=6, num_docs=40, seed=0, **cfg):
    corpus, _ = small_corpus(num_docs, seed)
    config = Config(d=d, seed=seed, **cfg)
    return Trainer.from_corpus(corpus, config), corpus


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
