"""Testes dos fluxos Philox por teste de permutação."""

import numpy as np
import pytest

from app.core.rng import block_generator, scenario_generator, stream_key


class TestStreamKey:
    def test_deterministic(self):
        assert stream_key(7, "dia", "anger", "gender", "M", "F") == stream_key(7, "dia", "anger", "gender", "M", "F")

    def test_distinct_identities(self):
        keys = {
            stream_key(7, "dia", "anger", "gender", "M", "F"),
            stream_key(7, "dia", "anger", "gender", "F", "M"),
            stream_key(7, "dip", "anger", "gender", "M", "F"),
            stream_key(8, "dia", "anger", "gender", "M", "F"),
            stream_key(7, "ab", "c"),
            stream_key(7, "a", "bc"),
        }
        assert len(keys) == 6

    def test_fits_128_bits(self):
        assert 0 <= stream_key(2**64 - 1, "x") < 2**128

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_out_of_range(self, seed):
        with pytest.raises(ValueError):
            stream_key(seed, "x")


class TestBlockGenerator:
    def test_same_block_same_draws(self):
        key = stream_key(1, "t")
        np.testing.assert_array_equal(block_generator(key, 3).random(8), block_generator(key, 3).random(8))

    def test_blocks_differ(self):
        key = stream_key(1, "t")
        assert not np.array_equal(block_generator(key, 0).random(8), block_generator(key, 1).random(8))

    def test_negative_block(self):
        with pytest.raises(ValueError):
            block_generator(stream_key(1, "t"), -1)

    def test_scenario_generator_labels(self):
        a = scenario_generator(3, "anchors").random(4)
        b = scenario_generator(3, "biased").random(4)
        assert not np.array_equal(a, b)
