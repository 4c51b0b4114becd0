"""Compare the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeats 5] [--steps 1000]
"""

import argparse
import time

import numpy as np

from memristor_mlp import dataset
from memristor_mlp.circuit import ActivationTable
from memristor_mlp.kernels import _fallback

try:
    from memristor_mlp.kernels import _core
except ImportError:
    _core = None


def _best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_interp(impl, table, s, repeats):
    return _best_of(lambda: impl.interp_uniform(table.s_min, table.step, table.f, s), repeats)


def bench_train(impl, table, X, D, steps, per_sample, repeats):
    rng = np.random.default_rng(0)
    init = [rng.uniform(-0.1, 0.1, shape) for shape in [(2, 4), (2,), (1, 2), (1,)]]
    orders = np.array([rng.permutation(len(X)) for _ in range(steps)]) if per_sample else None

    def once():
        p = [a.copy() for a in init]
        impl.train_two_layer(*p, X, D, table.f, table.df, table.s_min, table.step,
                             0.01, steps, 1.0, 1.0, 0.0, orders)
    return _best_of(once, repeats)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--lookups", type=int, default=1_000_000)
    args = parser.parse_args(argv)

    impls = [("python", _fallback)] + ([("cython", _core)] if _core is not None else [])
    table = ActivationTable.tanh()
    s = np.random.default_rng(1).uniform(-5, 5, args.lookups)
    X, D = dataset.to_arrays(dataset.generate(20, 0.25, np.random.default_rng(2)))

    cases = [
        (f"interp_uniform ({args.lookups} points)", lambda m: bench_interp(m, table, s, args.repeats)),
        (f"train_two_layer full batch ({args.steps} steps)",
         lambda m: bench_train(m, table, X, D, args.steps, False, args.repeats)),
        (f"train_two_layer per sample ({args.steps // 10} steps)",
         lambda m: bench_train(m, table, X, D, args.steps // 10, True, args.repeats)),
    ]
    print(f"{'case':50s} " + " ".join(f"{name:>10s}" for name, _ in impls) + "    speedup")
    for label, fn in cases:
        times = [fn(m) for _, m in impls]
        speed = f"{times[0] / times[-1]:9.1f}x" if len(times) > 1 else "      n/a"
        print(f"{label:50s} " + " ".join(f"{t * 1e3:8.2f}ms" for t in times) + f" {speed}")
    if _core is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
