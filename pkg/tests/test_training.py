import numpy as np
import pytest

from memristor_mlp.circuit import TanhActivation
from memristor_mlp.errors import ConfigError, NonFiniteLoss
from memristor_mlp.network import Perceptron, Topology, init_random
from memristor_mlp.training import (
    BatchMode,
    ErrorHistory,
    TrainConfig,
    analytic_gradient,
    clamp,
    loss,
    numeric_gradient,
    step,
    train,
)


def _oracle_step(W1, t1, W2, t2, X, D, eps):
    """Independent delta rule with exact tanh, written out sample by sample."""
    gW1, gt1 = np.zeros_like(W1), np.zeros_like(t1)
    gW2, gt2 = np.zeros_like(W2), np.zeros_like(t2)
    for x, d in zip(X, D):
        s1 = W1 @ x + t1
        h = np.tanh(s1)
        s2 = W2 @ h + t2
        y = np.tanh(s2)
        d2 = (1 - y ** 2) * (d - y)
        d1 = (1 - h ** 2) * (W2.T @ d2)
        gW2 += np.outer(d2, h)
        gt2 += d2
        gW1 += np.outer(d1, x)
        gt1 += d1
    return W1 + eps * gW1, t1 + eps * gt1, W2 + eps * gW2, t2 + eps * gt2


class TestConfig:
    @pytest.mark.parametrize("eps", [-0.1, 1.0, 1.5, float("nan")])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ConfigError):
            TrainConfig(epsilon=eps)

    def test_other_fields(self):
        with pytest.raises(ConfigError):
            TrainConfig(max_steps=-1)
        with pytest.raises(ConfigError):
            TrainConfig(w_max=0.0)
        assert TrainConfig(w_max=0.7).theta_bound == 0.7
        assert TrainConfig(theta_max=0.3).theta_bound == 0.3
        assert TrainConfig(batch="PER_SAMPLE").batch is BatchMode.PER_SAMPLE


class TestLoss:
    def test_half_sum_of_squares(self, topology):
        net = Perceptron.zeros(topology)
        X = np.zeros((3, 4))
        D = np.array([[1.0], [-1.0], [0.5]])
        assert loss(net, X, D) == pytest.approx(0.5 * (1 + 1 + 0.25))


class TestGradient:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_difference(self, seed, train_data):
        X, D = train_data
        net = init_random(Topology(), np.random.default_rng(seed), scale=0.5, activation=TanhActivation())
        a = analytic_gradient(net, X, D)
        n = numeric_gradient(net, X, D)
        rel = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        assert np.max(rel) < 1e-6

    def test_table_gradient_close_to_smooth(self, small_net, train_data):
        X, D = train_data
        a = analytic_gradient(small_net, X, D)
        n = numeric_gradient(small_net, X, D)
        np.testing.assert_allclose(a, n, atol=1e-3)

    def test_bad_h(self, small_net, train_data):
        with pytest.raises(ValueError):
            numeric_gradient(small_net, *train_data, h=0.0)


class TestStep:
    def test_matches_oracle(self, train_data):
        X, D = train_data
        net = init_random(Topology(), np.random.default_rng(4), scale=0.5, activation=TanhActivation())
        new, e = step(net, X, D, TrainConfig(epsilon=0.05, w_max=10.0))
        W1, t1, W2, t2 = _oracle_step(net.weights[0], net.thresholds[0], net.weights[1], net.thresholds[1], X, D, 0.05)
        np.testing.assert_allclose(new.weights[0], W1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(new.weights[1], W2, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(new.thresholds[0], t1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(new.thresholds[1], t2, rtol=1e-12, atol=1e-14)
        assert e == loss(net, X, D)

    def test_does_not_mutate_input(self, small_net, train_data):
        before = small_net.parameters().copy()
        step(small_net, *train_data, TrainConfig())
        np.testing.assert_array_equal(small_net.parameters(), before)

    def test_zero_epsilon_is_noop(self, small_net, train_data):
        new, _ = step(small_net, *train_data, TrainConfig(epsilon=0.0))
        np.testing.assert_array_equal(new.parameters(), small_net.parameters())

    def test_clamps(self, topology, train_data):
        net = init_random(topology, np.random.default_rng(0), scale=0.9)
        new, _ = step(net, *train_data, TrainConfig(epsilon=0.9, w_max=0.95))
        assert new.max_abs_weight() <= 0.95 and new.max_abs_threshold() <= 0.95

    def test_per_sample_order_matters(self, small_net, train_data):
        X, D = train_data
        cfg = TrainConfig(epsilon=0.3, batch=BatchMode.PER_SAMPLE)
        a, _ = step(small_net, X, D, cfg, order=range(len(X)))
        b, _ = step(small_net, X, D, cfg, order=range(len(X) - 1, -1, -1))
        assert not np.allclose(a.parameters(), b.parameters())

    def test_clamp_in_place(self, topology):
        net = Perceptron.zeros(topology)
        net.weights[0][:] = 3.0
        net.thresholds[1][:] = -3.0
        clamp(net, 1.0, 0.5)
        assert net.max_abs_weight() == 1.0 and net.thresholds[1][0] == -0.5


class TestTrain:
    def test_converges(self, small_net, train_data):
        _, hist = train(small_net, *train_data, TrainConfig())
        assert hist.final_normalized < 0.05
        assert len(hist) <= 1001

    def test_zero_epsilon_flat_history(self, small_net, train_data):
        net, hist = train(small_net, *train_data, TrainConfig(epsilon=0.0, max_steps=20))
        assert len(hist) == 21
        np.testing.assert_array_equal(hist.normalized, np.ones(21))
        np.testing.assert_array_equal(net.parameters(), small_net.parameters())

    @pytest.mark.parametrize("batch", list(BatchMode))
    def test_kernel_matches_generic_loop(self, small_net, train_data, batch):
        cfg = TrainConfig(epsilon=0.05, max_steps=30, batch=batch, seed=3, stop_error=0.0)
        a, ha = train(small_net, *train_data, cfg, use_kernel=True)
        b, hb = train(small_net, *train_data, cfg, use_kernel=False)
        np.testing.assert_allclose(ha.errors, hb.errors, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(a.parameters(), b.parameters(), rtol=1e-10, atol=1e-13)

    def test_on_step_sees_every_step(self, small_net, train_data):
        seen = []
        _, hist = train(small_net, *train_data, TrainConfig(max_steps=5, stop_error=0.0),
                        on_step=lambda k, net, e: seen.append((k, e, net.max_abs_weight())))
        assert [s[0] for s in seen] == [1, 2, 3, 4, 5]
        np.testing.assert_array_equal([s[1] for s in seen], hist.errors[1:])
        assert all(s[2] <= 1.0 for s in seen)

    def test_non_finite_raises(self, topology, train_data):
        X, D = train_data
        D = D.copy()
        D[0, 0] = np.nan
        with pytest.raises(NonFiniteLoss):
            train(init_random(topology, np.random.default_rng(0)), X, D, TrainConfig())

    def test_deeper_net_uses_generic_loop(self, train_data):
        topo = Topology(hidden=(2, 1), pair_budget=20)
        net = init_random(topo, np.random.default_rng(0), scale=0.5)
        _, hist = train(net, *train_data, TrainConfig(max_steps=50))
        assert hist.errors[-1] < hist.errors[0]


class TestHistory:
    def test_normalized_and_csv(self):
        h = ErrorHistory(np.array([4.0, 2.0, 1.0]))
        assert h[2] == (2, 1.0, 0.25)
        text = h.to_csv()
        assert text.splitlines() == ["step,error,normalized_error", "0,4.0,1.0", "1,2.0,0.5", "2,1.0,0.25"]
        np.testing.assert_array_equal(ErrorHistory.from_csv(text).errors, h.errors)

    def test_zero_initial_error(self):
        np.testing.assert_array_equal(ErrorHistory(np.zeros(3)).normalized, np.ones(3))
