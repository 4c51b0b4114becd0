import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memristor_mlp.circuit import (
    ActivationTable,
    ComplementaryPair,
    NeuronCircuit,
    TanhActivation,
    activate,
    activate_deriv,
    check_safe_inputs,
    conductance_weight,
    default_gain,
    layer_summing_outputs,
    pair_weight,
    summing_output,
    w_max,
    weight_window,
)
from memristor_mlp.device import DeviceState, OxideProfile, synth_calibration
from memristor_mlp.errors import InvalidCurve, UnsafeInputVoltage


def _dev(profile, r):
    return DeviceState(profile, synth_calibration(profile), r)


def _pair(profile, r_up, r_lo):
    return ComplementaryPair(_dev(profile, r_up), _dev(profile, r_lo))


class TestPairWeight:
    def test_example_value(self, zro2):
        # 300 * (1/300 - 1/1e6) = 1 - 3e-4, hand-computed.
        assert conductance_weight(300.0, 1e6) == pytest.approx(1 - 3e-4, rel=1e-15)

    def test_upper_lrs_lower_hrs(self, zro2):
        assert pair_weight(_pair(zro2, 1e3, 1e6)) == pytest.approx(0.3 - 3e-4, rel=1e-14)
        assert pair_weight(_pair(zro2, 1e3, 1e6), gain=1 / 0.2997) == pytest.approx(1.0, rel=1e-14)

    def test_equal_resistances_give_zero(self, zro2):
        assert pair_weight(_pair(zro2, 12345.0, 12345.0)) == 0.0

    @given(st.floats(3.0, 6.0), st.floats(3.0, 6.0))
    def test_antisymmetric(self, a, b):
        p = _pair(OxideProfile.zro2_y(), 10 ** a, 10 ** b)
        assert pair_weight(p.swapped()) == -pair_weight(p)

    def test_window(self, zro2, sio2):
        assert weight_window(zro2) == pytest.approx(300 * (1e-3 - 1e-6), rel=1e-15)
        assert weight_window(sio2) == pytest.approx(300 * (1e-2 - 1e-3), rel=1e-15)
        for p in (zro2, sio2):
            assert w_max(p) == pytest.approx(1.0, rel=1e-15)
            assert default_gain(p) * weight_window(p) == pytest.approx(1.0, rel=1e-15)

    def test_mixed_oxides_rejected(self, zro2, sio2):
        with pytest.raises(ValueError):
            ComplementaryPair(_dev(zro2, 1e4), _dev(sio2, 500.0))


def _neuron(profile, rs, r_theta, gain=1.0, u_theta=1.0):
    return NeuronCircuit([_pair(profile, *r) for r in rs], _pair(profile, *r_theta),
                         gain=gain, u_theta=u_theta)


class TestSummingOutput:
    def test_hand_computed(self, zro2):
        n = _neuron(zro2, [(1e3, 1e6), (1e6, 2e3)], (1e4, 1e6))
        s = summing_output(n, [0.5, -1.0])
        expected = 300 * ((1e-3 - 1e-6) * 0.5 + (1e-6 - 5e-4) * -1.0 + (1e-4 - 1e-6))
        assert s == pytest.approx(expected, rel=1e-14)

    def test_is_weighted_sum(self, zro2, rng):
        rs = 10 ** rng.uniform(3, 6, (4, 2))
        n = _neuron(zro2, rs, (2e3, 5e4), gain=2.5, u_theta=0.8)
        u = rng.uniform(-1, 1, 4)
        assert summing_output(n, u) == pytest.approx(n.weights() @ u + n.threshold(), rel=1e-12)
        assert n.threshold() == pytest.approx(0.8 * pair_weight(n.theta_pair, gain=2.5), rel=1e-15)

    @settings(deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3),
           st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(-2, 2))
    def test_linear_in_inputs(self, u, v, a):
        p = OxideProfile.zro2_y()
        n = _neuron(p, [(1e3, 1e6), (5e4, 2e3), (1e5, 1e5)], (1e6, 3e3))
        base = summing_output(n, np.zeros(3))
        u, v = np.array(u), np.array(v)
        w = a * u + (1 - a) * v
        if np.max(np.abs(w)) > 1:
            return
        lhs = summing_output(n, w) - base
        rhs = a * (summing_output(n, u) - base) + (1 - a) * (summing_output(n, v) - base)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_layer_matches_single(self, zro2, rng):
        neurons = [_neuron(zro2, 10 ** rng.uniform(3, 6, (4, 2)), 10 ** rng.uniform(3, 6, 2))
                   for _ in range(3)]
        U = rng.uniform(-1, 1, (10, 4))
        out = layer_summing_outputs(neurons, U)
        ref = np.array([[summing_output(n, u) for n in neurons] for u in U])
        np.testing.assert_allclose(out, ref, rtol=0, atol=1e-12)

    def test_unsafe_voltage(self, zro2):
        n = _neuron(zro2, [(1e3, 1e6)], (1e4, 1e6))
        with pytest.raises(UnsafeInputVoltage):
            summing_output(n, [1.01])
        check_safe_inputs([1.0, -1.0])

    def test_wrong_fan_in(self, zro2):
        n = _neuron(zro2, [(1e3, 1e6)], (1e4, 1e6))
        with pytest.raises(ValueError):
            summing_output(n, [0.1, 0.2])


class TestActivationTable:
    def test_tanh_grid(self):
        t = ActivationTable.tanh()
        assert t.f.size == 1025 and t.step == 8 / 1024 == 0.0078125

    def test_known_values(self):
        t = ActivationTable.tanh()
        assert activate(t, 0.0) == 0.0
        # s = 1 is a grid node (128 steps) so the lookup is exact.
        assert activate(t, 1.0) == pytest.approx(0.7615941559557649, abs=1e-15)
        assert activate(t, 10.0) == pytest.approx(math.tanh(4.0), abs=1e-15)
        assert activate(t, -10.0) == pytest.approx(-math.tanh(4.0), abs=1e-15)

    def test_close_to_tanh_between_nodes(self, rng):
        t = ActivationTable.tanh()
        s = rng.uniform(-4, 4, 1000)
        np.testing.assert_allclose(activate(t, s), np.tanh(s), atol=1e-5)

    def test_odd_and_monotone(self, rng):
        t = ActivationTable.tanh()
        s = np.sort(rng.uniform(-6, 6, 1000))
        y = activate(t, s)
        np.testing.assert_allclose(activate(t, -s), -y, atol=1e-15)
        assert np.all(np.diff(y) >= 0) and np.all(np.abs(y) <= 1)

    @pytest.mark.parametrize("table", [ActivationTable.tanh(), ActivationTable.hard_clip()])
    def test_derivative_matches_finite_difference(self, table, rng):
        s = rng.uniform(-3.9, 3.9, 2000)
        h = table.step
        fd = (activate(table, s + h) - activate(table, s - h)) / (2 * h)
        assert np.max(np.abs(fd - activate_deriv(table, s))) <= 1e-3

    def test_hard_clip(self):
        t = ActivationTable.hard_clip()
        assert activate(t, 0.5) == pytest.approx(0.5)
        assert activate(t, 3.0) == 1.0 and activate_deriv(t, 3.0) == 0.0
        assert activate_deriv(t, 0.25) == pytest.approx(1.0)

    @pytest.mark.parametrize("mutate", [
        lambda f, df: (f[:1000], df[:1000]),
        lambda f, df: (f * 1.5, df),
        lambda f, df: (f[::-1], df),
        lambda f, df: (f, df * 1.1),
        lambda f, df: (f + 0.01, df),
    ])
    def test_rejects_bad_tables(self, mutate):
        s = np.linspace(-4, 4, 1025)
        f, df = mutate(np.tanh(s), 1 - np.tanh(s) ** 2)
        with pytest.raises(InvalidCurve):
            ActivationTable(-4.0, 4.0, f, df)

    def test_csv_round_trip(self):
        t = ActivationTable.hard_clip()
        text = t.to_csv()
        assert text.splitlines()[0] == "s,f,df"
        back = ActivationTable.from_csv(text)
        np.testing.assert_array_equal(back.f, t.f)
        np.testing.assert_array_equal(back.df, t.df)
        assert (back.s_min, back.s_max) == (t.s_min, t.s_max)

    def test_nan_propagates(self):
        assert np.isnan(activate(ActivationTable.tanh(), np.nan))

    def test_reference_tanh(self):
        ref = TanhActivation()
        assert ref.activate(1.0) == math.tanh(1.0)
        assert ref.activate_deriv(0.0) == 1.0
        assert ref == TanhActivation()
