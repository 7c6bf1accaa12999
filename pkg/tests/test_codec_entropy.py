"""Arithmetic coder and residual-plane protocol tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srcodec import codec
from srcodec.metrics import binary_entropy


class TestArithmeticCoder:
    def test_empty_round_trip(self):
        payload = codec.arith_encode_bits(np.zeros(0, dtype=np.uint8))
        assert payload == b""
        out = codec.arith_decode_bits(payload, 0)
        assert out.size == 0

    def test_single_bits(self):
        for b in (0, 1):
            bits = np.array([b], dtype=np.uint8)
            payload = codec.arith_encode_bits(bits)
            assert np.array_equal(codec.arith_decode_bits(payload, 1), bits)

    @settings(max_examples=60, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        n=st.integers(min_value=1, max_value=2000),
        p=st.floats(min_value=0.0, max_value=1.0),
    )
    def test_round_trip_random(self, seed, n, p):
        rng = np.random.default_rng(seed)
        bits = (rng.random(n) < p).astype(np.uint8)
        payload = codec.arith_encode_bits(bits)
        assert np.array_equal(codec.arith_decode_bits(payload, n), bits)

    def test_all_zero_stream_tiny(self):
        bits = np.zeros(100_000, dtype=np.uint8)
        payload = codec.arith_encode_bits(bits)
        assert len(payload) <= 200
        assert np.array_equal(codec.arith_decode_bits(payload, bits.size), bits)

    @pytest.mark.parametrize("p", [0.05, 0.2, 0.5])
    def test_near_optimality(self, p):
        rng = np.random.default_rng(12345)
        n = 100_000
        bits = (rng.random(n) < p).astype(np.uint8)
        payload = codec.arith_encode_bits(bits)
        ones = float(np.count_nonzero(bits)) / n
        ideal_bytes = n * binary_entropy(ones) / 8
        assert len(payload) <= ideal_bytes * 1.02 + 16
        assert np.array_equal(codec.arith_decode_bits(payload, n), bits)

    def test_fair_coin_within_2_percent(self):
        rng = np.random.default_rng(7)
        n = 100_000
        bits = (rng.random(n) < 0.5).astype(np.uint8)
        payload = codec.arith_encode_bits(bits)
        assert abs(len(payload) - 12500) <= 12500 * 0.02 + 16

    def test_truncated_stream_errors(self):
        rng = np.random.default_rng(11)
        bits = (rng.random(10_000) < 0.5).astype(np.uint8)
        payload = codec.arith_encode_bits(bits)
        with pytest.raises(codec.DecodeError):
            codec.arith_decode_bits(payload[: len(payload) // 2], bits.size)

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            codec.arith_encode_bits(np.array([0, 2], dtype=np.uint8))


class TestResidualPlane:
    def plane(self, values):
        return np.array(values, dtype=np.int8)

    def test_identical_planes_zero_residual(self):
        t = self.plane(np.sign(np.random.default_rng(0).standard_normal((8, 8))))
        t[0, 0] = 5  # DC position is skipped regardless
        e = codec.compute_residual(t, t.copy())
        assert e.size == 63
        assert not e.any()

    def test_negated_plane_all_ones(self):
        rng = np.random.default_rng(1)
        t = np.where(rng.random((8, 8)) < 0.5, -1, 1).astype(np.int8)
        e = codec.compute_residual(t, (-t).astype(np.int8))
        assert e.size == 63
        assert e.all()

    def test_mixed_example(self):
        t = np.zeros((8, 8), dtype=np.int8)
        r = np.zeros((8, 8), dtype=np.int8)
        # first three zig-zag AC slots: (0,1), (1,0), (1,1)
        t[0, 1], t[1, 0], t[1, 1] = 1, -1, 1
        r[0, 1], r[1, 0], r[1, 1] = 1, 1, 1
        e = codec.compute_residual(t, r)
        assert e.tolist() == [0, 1, 0]

    def test_zero_pattern_mismatch(self):
        t = np.zeros((8, 8), dtype=np.int8)
        r = np.zeros((8, 8), dtype=np.int8)
        t[0, 1] = 1
        with pytest.raises(codec.ProtocolError):
            codec.compute_residual(t, r)

    def test_apply_zero_residual_identity(self):
        rng = np.random.default_rng(2)
        r = np.where(rng.random((16, 16)) < 0.5, -1, 1).astype(np.int8)
        out = codec.apply_residual(r, np.zeros(codec.count_nonzero_ac(np.abs(r)), np.uint8))
        assert np.array_equal(out, r)

    def test_single_bit_flips_one_sign(self):
        r = np.ones((8, 8), dtype=np.int8)
        e = np.zeros(63, dtype=np.uint8)
        e[5] = 1
        out = codec.apply_residual(r, e)
        assert int((out != r).sum()) == 1

    def test_count_mismatch(self):
        r = np.ones((8, 8), dtype=np.int8)
        with pytest.raises(codec.ProtocolError):
            codec.apply_residual(r, np.zeros(10, dtype=np.uint8))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_xor_involution(self, seed):
        rng = np.random.default_rng(seed)
        shape = (16, 24)
        zero = rng.random(shape) < 0.3
        truth = np.where(rng.random(shape) < 0.5, -1, 1).astype(np.int8)
        retrieved = np.where(rng.random(shape) < 0.5, -1, 1).astype(np.int8)
        truth[zero] = 0
        retrieved[zero] = 0
        e = codec.compute_residual(truth, retrieved)
        rebuilt = codec.apply_residual(retrieved, e)
        # AC positions recover the truth exactly; DC is not touched
        ac = np.ones(shape, dtype=bool)
        ac[0::8, 0::8] = False
        assert np.array_equal(rebuilt[ac], truth[ac])


class TestZigzag:
    def test_is_permutation(self):
        flat = [r * 8 + c for r, c in codec.ZIGZAG]
        assert sorted(flat) == list(range(64))

    def test_standard_prefix(self):
        flat = [r * 8 + c for r, c in codec.ZIGZAG]
        assert flat[:16] == [0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5]

    def test_antidiagonal_monotone(self):
        sums = [r + c for r, c in codec.ZIGZAG]
        assert sums == sorted(sums)
