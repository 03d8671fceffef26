import numpy as np
import pytest

from hrlsent import kernels
from hrlsent.errors import ShapeError

native = kernels.native_module()
py = kernels.python_module()
needs_native = pytest.mark.skipif(native is None, reason="compiled extension not built")


def _problem(rng, d=5, n_in=4, k=9):
    return dict(Wp=rng.normal(size=(1, 2 * d + n_in)), bp=float(rng.normal()),
                W=rng.normal(size=(4 * d, n_in + d)) * 0.4, b=rng.normal(size=4 * d),
                h=rng.normal(size=d) * 0.3, c=rng.normal(size=d), X=rng.normal(size=(k, n_in)))


@needs_native
def test_step_parity(rng):
    for _ in range(50):
        p = _problem(rng)
        a = native.lstm_step(p["W"], p["b"], p["h"], p["c"], p["X"][0])
        b = py.lstm_step(p["W"], p["b"], p["h"], p["c"], p["X"][0])
        for x, y in zip(a, b):
            assert np.max(np.abs(x - y)) <= 1e-12


@needs_native
@pytest.mark.parametrize("mode", ["sample", "greedy", "forced"])
def test_rollout_parity_and_identical_decisions(rng, mode):
    for _ in range(30):
        p = _problem(rng)
        k = p["X"].shape[0]
        kw = {}
        if mode == "sample":
            kw["uniforms"] = rng.random(k)
        elif mode == "greedy":
            kw["greedy"] = True
        else:
            kw["forced"] = rng.integers(0, 2, k)
        args = (p["Wp"], p["bp"], p["W"], p["b"], p["h"], p["c"], p["X"])
        a = kernels.low_rollout(*args, backend=native, **kw)
        b = kernels.low_rollout(*args, backend=py, **kw)
        assert np.array_equal(a[2], b[2])
        for x, y in zip(a[:2] + a[3:], b[:2] + b[3:]):
            assert np.max(np.abs(x - y)) <= 1e-12


def test_forced_rollout_matches_step_chain(rng):
    p = _problem(rng)
    mask = np.array([1, 0, 1, 1, 0, 0, 1, 0, 1])
    _, _, acts, h, c = kernels.low_rollout(p["Wp"], p["bp"], p["W"], p["b"], p["h"], p["c"],
                                           p["X"], forced=mask)
    assert acts.tolist() == mask.tolist()
    hh, cc = p["h"], p["c"]
    for j in np.flatnonzero(mask):
        hh, cc = kernels.lstm_step(p["W"], p["b"], hh, cc, p["X"][j])
    assert np.max(np.abs(h - hh)) <= 1e-12 and np.max(np.abs(c - cc)) <= 1e-12


def test_rollout_argument_errors(rng):
    p = _problem(rng)
    args = (p["Wp"], p["bp"], p["W"], p["b"], p["h"], p["c"], p["X"])
    with pytest.raises(ShapeError):
        kernels.low_rollout(*args)
    with pytest.raises(ShapeError):
        kernels.low_rollout(*args, uniforms=np.zeros(2))
    with pytest.raises(ShapeError):
        kernels.low_rollout(*args, forced=np.ones(3))


def test_float32_falls_back_to_python(rng):
    p = _problem(rng)
    W32 = p["W"].astype(np.float32)
    h, c = kernels.lstm_step(W32, p["b"].astype(np.float32), p["h"].astype(np.float32),
                             p["c"].astype(np.float32), p["X"][0].astype(np.float32))
    assert h.dtype == np.float32


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    assert (kernels.BACKEND == "cython") == (native is not None)
