"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --d 200 --words 8 --repeat 2000
"""

import argparse
import timeit

import numpy as np

from hrlsent import kernels


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=200, help="hidden and input size")
    ap.add_argument("--words", type=int, default=8, help="words per clause in the rollout")
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    r = np.random.default_rng(args.seed)
    d = args.d
    W, b = r.normal(size=(4 * d, 2 * d)) * 0.05, np.zeros(4 * d)
    h, c, x = r.normal(size=d) * 0.1, r.normal(size=d) * 0.1, r.normal(size=d)
    Wp, bp = r.normal(size=(1, 3 * d)) * 0.05, 0.0
    X = r.normal(size=(args.words, d))
    u = r.random(args.words)

    backends = [("python", kernels.python_module())]
    if kernels.native_module() is not None:
        backends.insert(0, ("cython", kernels.native_module()))
    else:
        print("compiled kernels unavailable; timing the numpy fallback only")

    print(f"d={d} words={args.words} repeat={args.repeat}")
    print(f"{'backend':<8} {'lstm_step us':>13} {'low_rollout us':>15}")
    for name, mod in backends:
        step = timeit.timeit(lambda: kernels.lstm_step(W, b, h, c, x, backend=mod),
                             number=args.repeat)
        roll = timeit.timeit(lambda: kernels.low_rollout(Wp, bp, W, b, h, c, X, uniforms=u,
                                                         backend=mod),
                             number=args.repeat)
        print(f"{name:<8} {1e6 * step / args.repeat:>13.1f} {1e6 * roll / args.repeat:>15.1f}")


if __name__ == "__main__":
    main()
