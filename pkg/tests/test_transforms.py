import numpy as np
import pytest

from srcodec import transforms as tr


def dct2_oracle(block):
    """Direct O(64^2) orthonormal 2D DCT-II of one 8x8 block."""
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            acc = 0.0
            for x in range(8):
                for y in range(8):
                    acc += (
                        block[x, y]
                        * np.cos((2 * x + 1) * u * np.pi / 16)
                        * np.cos((2 * y + 1) * v * np.pi / 16)
                    )
            cu = 1 / np.sqrt(2) if u == 0 else 1.0
            cv = 1 / np.sqrt(2) if v == 0 else 1.0
            out[u, v] = acc * cu * cv / 4.0
    return out


def atrous_oracle(x, levels, lo):
    """Direct periodic a-trous analysis via rolled sums; independent of FFTs."""
    hi = tr.quadrature_mirror(lo)

    def conv_axis(a, taps, step, axis):
        out = np.zeros_like(a)
        for k, t in enumerate(taps):
            out += t * np.roll(a, k * step, axis=axis)
        return out

    bands = []
    approx = x.astype(np.float64)
    for j in range(1, levels + 1):
        step = 2 ** (j - 1)
        lo0 = conv_axis(approx, lo, step, 0) / np.sqrt(2)
        hi0 = conv_axis(approx, hi, step, 0) / np.sqrt(2)
        ll = conv_axis(lo0, lo, step, 1) / np.sqrt(2)
        lh = conv_axis(lo0, hi, step, 1) / np.sqrt(2)
        hl = conv_axis(hi0, lo, step, 1) / np.sqrt(2)
        hh = conv_axis(hi0, hi, step, 1) / np.sqrt(2)
        bands.extend([lh, hl, hh])
        approx = ll
    return np.stack([approx] + bands)


class TestDct:
    def test_constant_block_dc_1024(self):
        c = tr.dct2_forward(np.full((8, 8), 128.0))
        assert c[0, 0] == pytest.approx(1024.0, abs=1e-9)
        assert np.abs(c.ravel()[1:]).max() < 1e-9

    def test_zero_grid(self):
        assert not tr.dct2_forward(np.zeros((16, 16))).any()

    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(42)
        block = rng.uniform(0, 255, (8, 8))
        got = tr.dct2_forward(block)
        assert np.abs(got - dct2_oracle(block)).max() < 1e-9

    def test_parseval_per_block(self):
        rng = np.random.default_rng(7)
        g = rng.uniform(0, 255, (32, 32))
        c = tr.dct2_forward(g)
        for i in range(0, 32, 8):
            for j in range(0, 32, 8):
                px = (g[i : i + 8, j : j + 8] ** 2).sum()
                cf = (c[i : i + 8, j : j + 8] ** 2).sum()
                assert abs(cf - px) <= 1e-9 * px

    def test_round_trip(self):
        rng = np.random.default_rng(9)
        g = rng.uniform(0, 255, (40, 64))
        assert np.abs(tr.dct2_inverse(tr.dct2_forward(g)) - g).max() < 1e-9

    def test_dc_only_block_constant(self):
        c = np.zeros((8, 8))
        c[0, 0] = 1024.0
        g = tr.dct2_inverse(c)
        assert np.abs(g - 128.0).max() < 1e-9

    def test_linearity(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((16, 16))
        b = rng.standard_normal((16, 16))
        lhs = tr.dct2_forward(2.5 * a - b)
        rhs = 2.5 * tr.dct2_forward(a) - tr.dct2_forward(b)
        assert np.abs(lhs - rhs).max() < 1e-9


class TestQuantizer:
    def test_quality_50_is_base_table(self):
        q = tr.build_quantizer(50)
        assert np.array_equal(q.table, tr.BASE_LUMA_TABLE)

    def test_quality_100_all_ones(self):
        q = tr.build_quantizer(100)
        assert (q.table == 1).all()

    def test_quality_20_dc_step_40(self):
        q = tr.build_quantizer(20)
        assert q.table[0, 0] == 40

    def test_out_of_range(self):
        for bad in (0, 101, -3):
            with pytest.raises(ValueError):
                tr.build_quantizer(bad)

    def test_reconstruction_levels(self):
        q = tr.build_quantizer(50)
        c = np.zeros((8, 8))
        c[0, 0] = 33.0  # step 16 -> index 2 -> 32
        got = tr.quantize_dequantize(c, q)
        assert got[0, 0] == 32.0

    def test_round_half_away_from_zero(self):
        q = tr.build_quantizer(50)
        c = np.zeros((8, 8))
        c[0, 0] = 24.0  # 24/16 = 1.5 rounds away from zero to 2
        assert tr.quantize_dequantize(c, q)[0, 0] == 32.0
        c[0, 0] = -7.0  # -0.4375 rounds to 0
        assert tr.quantize_dequantize(c, q)[0, 0] == 0.0
        c[0, 0] = -24.0
        assert tr.quantize_dequantize(c, q)[0, 0] == -32.0

    def test_idempotent(self):
        rng = np.random.default_rng(13)
        c = tr.dct2_forward(rng.uniform(0, 255, (24, 24)))
        q = tr.build_quantizer(35)
        once = tr.quantize_dequantize(c, q)
        assert np.array_equal(tr.quantize_dequantize(once, q), once)

    def test_steps_tiling(self):
        q = tr.build_quantizer(50)
        steps = q.steps((16, 24))
        assert steps.shape == (16, 24)
        assert np.array_equal(steps[8:16, 8:16], tr.BASE_LUMA_TABLE.astype(float))


class TestFrame:
    def test_zero_image(self):
        assert not tr.frame_analysis(np.zeros((32, 32)), 3).any()

    def test_band_count(self):
        for j in (1, 2, 3):
            bands = tr.frame_analysis(np.ones((64, 64)), j)
            assert bands.shape == (3 * j + 1, 64, 64)

    def test_parseval_random(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            g = rng.standard_normal((64, 64))
            bands = tr.frame_analysis(g, 3)
            rel = abs((bands**2).sum() - (g**2).sum()) / (g**2).sum()
            assert rel < 1e-8

    def test_round_trip(self):
        rng = np.random.default_rng(22)
        g = rng.standard_normal((64, 64)) * 100
        back = tr.frame_synthesis(tr.frame_analysis(g, 3))
        assert np.abs(back - g).max() < 1e-8 * np.abs(g).max() + 1e-10

    def test_adjoint_identity(self):
        rng = np.random.default_rng(23)
        x = rng.standard_normal((32, 48))
        y = rng.standard_normal((10, 32, 48))
        lhs = float(np.vdot(tr.frame_analysis(x, 3), y))
        rhs = float(np.vdot(x, tr.frame_synthesis(y)))
        assert abs(lhs - rhs) < 1e-8 * max(abs(lhs), 1.0)

    def test_matches_direct_atrous_oracle(self):
        rng = np.random.default_rng(24)
        g = rng.uniform(0, 255, (32, 32))
        fast = tr.frame_analysis(g, 3)
        slow = atrous_oracle(g, 3, tr.SYM6_LO)
        assert np.abs(fast - slow).max() < 1e-9 * np.abs(slow).max()

    def test_levels_too_deep(self):
        with pytest.raises(ValueError):
            tr.frame_analysis(np.zeros((8, 8)), 4)
        with pytest.raises(ValueError):
            tr.frame_analysis(np.zeros((8, 16)), 4)
        tr.frame_analysis(np.zeros((8, 8)), 3)  # 2^3 divides 8

    def test_synthesis_shape_check(self):
        with pytest.raises(Exception):
            tr.frame_synthesis(np.zeros((5, 16, 16)))

    def test_filter_is_orthonormal(self):
        h = tr.SYM6_LO
        assert abs((h * h).sum() - 1.0) < 1e-10
        assert abs(h.sum() - np.sqrt(2)) < 1e-12
        for k in (1, 2, 3, 4, 5):
            assert abs(np.dot(h[: -2 * k], h[2 * k :])) < 1e-10
