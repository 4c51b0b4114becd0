import os
import subprocess
import sys

import numpy as np
import pytest

from memristor_mlp import kernels
from memristor_mlp.circuit import ActivationTable
from memristor_mlp.kernels import _fallback

_core = pytest.importorskip("memristor_mlp.kernels._core")
IMPLS = [_fallback, _core]


@pytest.fixture
def table():
    return ActivationTable.tanh()


class TestInterpUniform:
    @pytest.mark.parametrize("impl", IMPLS)
    def test_nodes_and_clamping(self, impl):
        v = np.array([0.0, 1.0, 4.0, 9.0])
        np.testing.assert_array_equal(impl.interp_uniform(0.0, 1.0, v, np.array([0.0, 1.0, 2.0, 3.0])), v)
        np.testing.assert_array_equal(impl.interp_uniform(0.0, 1.0, v, np.array([-5.0, 50.0])), [0.0, 9.0])
        assert impl.interp_uniform(0.0, 1.0, v, 1.5) == 2.5
        assert np.isnan(impl.interp_uniform(0.0, 1.0, v, np.nan))

    def test_backends_agree(self, table, rng):
        s = rng.uniform(-6, 6, (50, 3))
        a = _fallback.interp_uniform(table.s_min, table.step, table.f, s)
        b = _core.interp_uniform(table.s_min, table.step, table.f, s)
        assert a.shape == b.shape == (50, 3)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


class TestTrainTwoLayer:
    @pytest.mark.parametrize("per_sample", [False, True])
    def test_backends_agree(self, table, train_data, per_sample):
        X, D = train_data
        rng = np.random.default_rng(8)
        params = [rng.uniform(-0.5, 0.5, s) for s in [(2, 4), (2,), (1, 2), (1,)]]
        orders = np.array([rng.permutation(len(X)) for _ in range(40)]) if per_sample else None
        out = []
        for impl in IMPLS:
            p = [a.copy() for a in params]
            e = impl.train_two_layer(*p, X, D, table.f, table.df, table.s_min, table.step,
                                     0.05, 40, 1.0, 1.0, 0.0, orders)
            out.append((p, e))
        np.testing.assert_allclose(out[0][1], out[1][1], rtol=1e-11, atol=1e-13)
        for a, b in zip(out[0][0], out[1][0]):
            np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-13)

    @pytest.mark.parametrize("impl", IMPLS)
    def test_stops_early(self, impl, table, train_data):
        X, D = train_data
        p = [np.full((2, 4), 0.1), np.zeros(2), np.full((1, 2), 0.1), np.zeros(1)]
        e = impl.train_two_layer(*p, X, D, table.f, table.df, table.s_min, table.step,
                                 0.1, 1000, 1.0, 1.0, 0.05, None)
        assert e[-1] / e[0] < 0.05 and np.all(e[:-1] / e[0] >= 0.05)


def test_pure_python_switch():
    env = dict(os.environ, MEMRISTOR_MLP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import memristor_mlp.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("cython", "python")


def test_benchmark_runs(capsys):
    import runpy
    from pathlib import Path
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    mod = runpy.run_path(str(script))
    mod["main"](["--repeats", "1", "--steps", "20", "--lookups", "1000"])
    out = capsys.readouterr().out
    assert "interp_uniform" in out and "train_two_layer" in out
