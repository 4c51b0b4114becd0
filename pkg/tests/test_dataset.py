import numpy as np
import pytest

from memristor_mlp import dataset
from memristor_mlp.dataset import (
    CONCAVE_NOMINAL,
    CONVEX_NOMINAL,
    Label,
    Sample,
    generate,
    nominal_samples,
    scale_for_input,
    to_arrays,
)


class TestGenerate:
    def test_zero_noise_gives_nominals(self, rng):
        samples = generate(3, 0.0, rng)
        assert [s.label for s in samples] == [Label.CONCAVE, Label.CONVEX] * 3
        for s in samples:
            assert s.x == s.label.nominal

    def test_nominals(self):
        assert CONCAVE_NOMINAL == (1.0, -1.0, -1.0, 1.0)
        assert CONVEX_NOMINAL == (-1.0, 1.0, 1.0, -1.0)
        assert Label.CONCAVE.target == 1.0 and Label.CONVEX.target == -1.0

    def test_noise_bounded(self, rng):
        for s in generate(500, 0.25, rng):
            assert np.max(np.abs(np.subtract(s.x, s.label.nominal))) <= 0.25

    def test_noise_is_uniform_scaled(self):
        rng = np.random.default_rng(3)
        ref = np.random.default_rng(3)
        samples = generate(2, 0.2, rng)
        for s in samples:
            np.testing.assert_allclose(s.x, np.add(s.label.nominal, 0.2 * ref.uniform(-1, 1, 4)), rtol=0, atol=1e-15)

    def test_deterministic(self):
        a = generate(10, 0.25, np.random.default_rng(1))
        b = generate(10, 0.25, np.random.default_rng(1))
        assert a == b

    def test_invalid(self, rng):
        with pytest.raises(ValueError):
            generate(1, -0.1, rng)
        with pytest.raises(ValueError):
            generate(-1, 0.1, rng)


class TestArrays:
    def test_scaling_keeps_inputs_safe(self, rng):
        X, D = to_arrays(generate(200, 0.25, rng))
        assert X.shape == (400, 4) and D.shape == (400, 1)
        assert np.max(np.abs(X)) <= 1.0
        np.testing.assert_array_equal(D[:, 0], np.tile([1.0, -1.0], 200))

    def test_scale_value(self):
        np.testing.assert_array_equal(scale_for_input((1.25, -1.25, 0.0, 0.5)), [1.0, -1.0, 0.0, 0.4])

    def test_empty(self):
        with pytest.raises(ValueError):
            to_arrays([])


class TestCsv:
    def test_round_trip(self, rng):
        samples = generate(5, 0.25, rng)
        text = dataset.to_csv(samples)
        assert text.splitlines()[0] == "x0,x1,x2,x3,label"
        assert dataset.from_csv(text) == samples

    def test_bad_header(self):
        with pytest.raises(ValueError):
            dataset.from_csv("a,b\n1,2\n")

    def test_label_coercion(self):
        assert Sample((0, 0, 0, 0), "convex").label is Label.CONVEX
        assert len(nominal_samples()) == 2
