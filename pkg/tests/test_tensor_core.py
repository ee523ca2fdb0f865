# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import DegenerateInputError, NonFiniteError, ShapeError
from src.core.tensor import Distribution, Tensor, channel_stats, l2_normalize, rng_fill


class TestChannelStats:

    def test_constant_channel_has_zero_sigma(self):
        f = Tensor(np.stack([np.ones((2, 2)), np.arange(4.0).reshape(2, 2)]))
        stats = channel_stats(f)
        assert stats.mu[0] == 1.0
        assert stats.sigma[0] == 0.0

    def test_hand_computed_values(self):
        stats = channel_stats(Tensor.of([0.0, 1.0, 2.0, 3.0], (1, 2, 2)))
        assert stats.mu[0] == pytest.approx(1.5, abs=1e-15)
        assert stats.sigma[0] == pytest.approx(math.sqrt(1.25), rel=1e-12)

    def test_matches_two_pass_recomputation(self):
        f = rng_fill((2, 4, 5), 7, Distribution.uniform(1.0))
        stats = channel_stats(f)
        for k in range(2):
            values = [float(v) for v in f.data[k].reshape(-1)]
            mean = sum(values) / len(values)
            var = sum((v - mean) ** 2 for v in values) / len(values)
            assert stats.mu[k] == pytest.approx(mean, abs=1e-14)
            assert stats.sigma[k] == pytest.approx(math.sqrt(var), rel=1e-12)

    @pytest.mark.parametrize("shape", [(4,), (2, 3), (1, 2, 2, 2)])
    def test_rank_other_than_three_is_rejected(self, shape):
        with pytest.raises(ShapeError):
            channel_stats(Tensor(np.zeros(shape)))

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2 ** 32),
           alpha=st.floats(0.1, 10.0),
           negate=st.booleans(),
           beta=st.floats(-10.0, 10.0))
    def test_shift_scale_law(self, seed, alpha, negate, beta):
        a = -alpha if negate else alpha
        f = rng_fill((3, 4, 4), seed, Distribution.normal(1.0))
        base = channel_stats(f)
        moved = channel_stats(f * a + beta)
        assert_allclose(moved.mu, a * base.mu + beta, rtol=1e-9, atol=1e-9)
        assert_allclose(moved.sigma, abs(a) * base.sigma, rtol=1e-9, atol=1e-12)


class TestL2Normalize:

    def test_three_four_five(self):
        assert_allclose(l2_normalize(Tensor.of([3.0, 4.0])).data, [0.6, 0.8], rtol=1e-15)

    def test_unit_vector_is_fixed(self):
        v = Tensor.of([0.0, 1.0, 0.0])
        assert l2_normalize(v).equals(v)

    def test_zero_vector_is_degenerate(self):
        with pytest.raises(DegenerateInputError):
            l2_normalize(Tensor.of([0.0, 0.0]))


class TestRngFill:

    def test_same_call_is_bit_identical(self):
        a = rng_fill((3, 5, 7), 123, Distribution.normal(0.5))
        b = rng_fill((3, 5, 7), 123, Distribution.normal(0.5))
        assert a.equals(b)

    def test_different_seeds_differ(self):
        a = rng_fill((64,), 1, Distribution.uniform(1.0))
        b = rng_fill((64,), 2, Distribution.uniform(1.0))
        assert not a.equals(b)

    def test_uniform_range(self):
        t = rng_fill((1000,), 9, Distribution.uniform(0.25))
        assert np.all(t.data >= -0.25) and np.all(t.data <= 0.25)

    def test_normal_moments(self):
        t = rng_fill((10_000,), 2024, Distribution.normal(1.0))
        assert abs(t.data.mean()) < 0.05
        assert 0.95 <= t.data.std() <= 1.05

    @pytest.mark.parametrize("shape", [(0,), (3, 0, 2), ()])
    def test_zero_dimension_is_rejected(self, shape):
        with pytest.raises(ShapeError):
            rng_fill(shape, 1, Distribution.uniform(1.0))


class TestTensor:

    def test_data_is_read_only(self):
        t = Tensor.of([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_non_finite_entries_are_rejected(self):
        with pytest.raises(NonFiniteError):
            Tensor.of([1.0, float("nan")])

    def test_flat_list_with_shape(self):
        t = Tensor.of(list(range(6)), (2, 3))
        assert t.shape == (2, 3)
        assert_array_equal(t.flat, np.arange(6.0))

    def test_shape_mismatch_in_arithmetic(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 2))) + Tensor(np.zeros((2, 3)))

    def test_arithmetic_is_repeatable(self):
        f = rng_fill((2, 3, 3), 4, Distribution.normal(1.0))
        assert (f * 1.7 + 0.3).equals(f * 1.7 + 0.3)
