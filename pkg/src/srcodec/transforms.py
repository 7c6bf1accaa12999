"""Block DCT, JPEG-style quantization, and a translation-invariant tight frame.

The 8x8 DCT is the orthonormal DCT-II realized as an explicit matrix
product per block, so Parseval holds per block and forward/inverse are
exact adjoints.

The sparsifying transform is an undecimated (a-trous) separable wavelet
decomposition built from the 12-tap symlet scaling filter, with periodic
boundaries and a 1/sqrt(2) rescale per level per dimension. The resulting
frame is Parseval: synthesis is the exact adjoint of analysis and
synthesis(analysis(x)) == x up to floating point. Both directions are
evaluated as circular convolutions through cached FFT transfer functions,
which is numerically identical to the direct a-trous recursion.
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .imagery import BLOCK, ShapeError, require_block_multiple

# 12-tap symlet scaling (lowpass) filter, least-asymmetric family with 6
# vanishing moments. Numeric values from the PyWavelets filter bank
# ("sym6" dec_lo), which follows Daubechies' construction.
SYM6_LO = np.array(
    [
        0.015404109327027373,
        0.0034907120842174702,
        -0.11799011114819057,
        -0.048311742585633,
        0.4910559419267466,
        0.787641141030194,
        0.3379294217276218,
        -0.07263752278646252,
        -0.021060292512300564,
        0.04472490177066578,
        0.0017677118642428036,
        -0.007800708325034148,
    ]
)

# Standard JPEG luminance quantization table (Annex K of the JPEG spec).
BASE_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)


def _dct_matrix(n=BLOCK):
    k = np.arange(n)
    m = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / (2 * n)) * np.sqrt(2.0 / n)
    m[0, :] *= 1.0 / np.sqrt(2.0)
    return m


DCT_MATRIX = _dct_matrix()


def _as_blocks(g):
    h, w = g.shape
    return g.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def _from_blocks(b):
    n1, n2 = b.shape[0], b.shape[1]
    return b.swapaxes(1, 2).reshape(n1 * BLOCK, n2 * BLOCK)


def dct2_forward(g):
    """Per-block orthonormal 2D DCT-II of a grid with 8-multiple dimensions."""
    require_block_multiple(g)
    b = _as_blocks(np.asarray(g, dtype=np.float64))
    return _from_blocks(DCT_MATRIX @ b @ DCT_MATRIX.T)


def dct2_inverse(c):
    """Inverse per-block DCT; exact adjoint of dct2_forward."""
    require_block_multiple(c)
    b = _as_blocks(np.asarray(c, dtype=np.float64))
    return _from_blocks(DCT_MATRIX.T @ b @ DCT_MATRIX)


@dataclass(frozen=True)
class QuantizerSpec:
    """Quality factor plus the scaled 8x8 step-size table it produces."""

    quality: int
    table: np.ndarray

    def steps(self, shape):
        """Step sizes tiled to a full coefficient-grid shape."""
        n1, n2 = shape[0] // BLOCK, shape[1] // BLOCK
        return np.tile(self.table, (n1, n2)).astype(np.float64)


def build_quantizer(quality):
    """IJG scaling of the base luminance table for quality in 1..100."""
    if not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise ValueError(f"quality must be an integer in [1, 100], got {quality!r}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = (BASE_LUMA_TABLE * scale + 50) // 100
    table = np.clip(table, 1, 255)
    return QuantizerSpec(quality=int(quality), table=table.astype(np.int64))


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_indices(c, q):
    """Integer quantization indices round(c/step), half away from zero."""
    steps = q.steps(c.shape)
    return _round_half_away(np.asarray(c, dtype=np.float64) / steps).astype(np.int64)


def dequantize_indices(idx, q):
    """Reconstruction levels index*step as float64 (exact for |idx*step| < 2^53)."""
    return idx.astype(np.float64) * q.steps(idx.shape)


def quantize_dequantize(c, q):
    """Map every coefficient to its reconstruction level round(c/step)*step."""
    return dequantize_indices(quantize_indices(c, q), q)


def _dft_samples(filt, n):
    """n-point DFT of a filter laid out periodically (wraps when len > n)."""
    k = np.arange(len(filt))
    m = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(m, k) / n) @ filt


def quadrature_mirror(lo):
    """Highpass filter g[k] = (-1)^k h[L-1-k] paired with a scaling filter h."""
    lo = np.asarray(lo, dtype=np.float64)
    sign = np.where(np.arange(len(lo)) % 2 == 0, 1.0, -1.0)
    return sign * lo[::-1]


def max_levels(shape):
    """Largest decomposition depth whose 2^J divides both dimensions."""
    j = 0
    while shape[0] % (2 ** (j + 1)) == 0 and shape[1] % (2 ** (j + 1)) == 0:
        j += 1
    return j


_TF_CACHE = {}


def _frame_transfer(shape, levels, lo):
    """Per-subband 2D transfer functions on the rfft2 grid, cached.

    Band order: approximation at the deepest level first, then for each
    level j = 1..J the (lowpass x highpass), (highpass x lowpass),
    (highpass x highpass) details. Each level applies filters upsampled
    by 2^(j-1) and a 1/sqrt(2) rescale per dimension, which makes the
    squared transfer functions sum to one at every frequency.
    """
    key = (shape, levels, lo.tobytes())
    cached = _TF_CACHE.get(key)
    if cached is not None:
        return cached
    h, w = shape
    hi = quadrature_mirror(lo)
    lo0 = _dft_samples(lo, h) / np.sqrt(2.0)
    hi0 = _dft_samples(hi, h) / np.sqrt(2.0)
    lo1 = _dft_samples(lo, w) / np.sqrt(2.0)
    hi1 = _dft_samples(hi, w) / np.sqrt(2.0)
    wr = w // 2 + 1  # rfft half-spectrum along the last axis

    details = []
    approx = np.ones((h, wr), dtype=np.complex128)
    for j in range(1, levels + 1):
        s = 2 ** (j - 1)
        a0 = lo0[(np.arange(h) * s) % h]
        d0 = hi0[(np.arange(h) * s) % h]
        a1 = lo1[(np.arange(w) * s) % w][:wr]
        d1 = hi1[(np.arange(w) * s) % w][:wr]
        details.append(approx * np.outer(a0, d1))
        details.append(approx * np.outer(d0, a1))
        details.append(approx * np.outer(d0, d1))
        approx = approx * np.outer(a0, a1)
    bands = np.stack([approx] + details)
    _TF_CACHE[key] = bands
    return bands


def _check_levels(shape, levels):
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if levels > max_levels(shape):
        raise ValueError(
            f"levels={levels} too deep for shape {shape}: "
            f"2^{levels} must divide both dimensions"
        )


def frame_analysis(g, levels, scaling_filter=SYM6_LO):
    """Undecimated wavelet analysis; returns (3*levels + 1, h, w) subbands."""
    g = np.asarray(g, dtype=np.float64)
    _check_levels(g.shape, levels)
    tf = _frame_transfer(g.shape, levels, scaling_filter)
    spec = _fft.rfft2(g)
    out = np.empty((tf.shape[0],) + g.shape, dtype=np.float64)
    for i in range(tf.shape[0]):
        out[i] = _fft.irfft2(spec * tf[i], s=g.shape)
    return out


def frame_synthesis(bands, scaling_filter=SYM6_LO):
    """Adjoint of frame_analysis; exact left inverse on its range."""
    bands = np.asarray(bands, dtype=np.float64)
    if bands.ndim != 3 or (bands.shape[0] - 1) % 3 != 0 or bands.shape[0] < 4:
        raise ShapeError(
            f"expected (3*levels + 1, h, w) subbands, got shape {bands.shape}"
        )
    levels = (bands.shape[0] - 1) // 3
    shape = bands.shape[1:]
    _check_levels(shape, levels)
    tf = _frame_transfer(shape, levels, scaling_filter)
    acc = np.zeros((shape[0], shape[1] // 2 + 1), dtype=np.complex128)
    for i in range(tf.shape[0]):
        acc += _fft.rfft2(bands[i]) * np.conj(tf[i])
    return _fft.irfft2(acc, s=shape)
