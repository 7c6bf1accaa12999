"""Bitstream protocol: sign residuals, entropy coding, compose and parse.

The stream never carries the signs of quantized AC coefficients. Both
sides re-derive them with the solver from the transmitted magnitudes, and
the encoder appends only an arithmetic-coded XOR plane ("residual") that
flips the solver's wrong guesses, making the whole scheme lossless with
respect to the ordinary quantize-dequantize reconstruction.

Wire layout (all integers little-endian):

    magic "SRC1" | version u8 | width u32 | height u32 | quality u8 |
    gamma u8 | theta u16 | lambda f64 | mu f64 | levels u8 | seed u64 |
    magnitude payload length u64, bytes |
    residual bit count u64 | residual payload length u64, bytes

The magnitude payload stores, per block in raster order: the signed DC
quantization index, the nonzero-AC count, then (zero-run, |index| - 1)
pairs in zig-zag order, all as order-0 exp-Golomb codes. The residual
payload is the adaptive binary arithmetic coding of the residual bits in
the same canonical scan order.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .imagery import BLOCK, require_block_multiple
from .solver import (
    SolverConfig,
    alpha_constant,
    extract_signs,
    fienup_solve,
    sign_plane,
)
from .transforms import (
    build_quantizer,
    dct2_forward,
    dct2_inverse,
    dequantize_indices,
    quantize_indices,
)

MAGIC = b"SRC1"
VERSION = 1


class FormatError(ValueError):
    """Stream does not look like this codec's format at all."""


class ProtocolError(ValueError):
    """Well-framed stream whose payloads disagree with each other."""


class DecodeError(ValueError):
    """Entropy-coded payload cannot be decoded (e.g. truncated)."""


# ---------------------------------------------------------------------------
# canonical coefficient scan


def _zigzag_positions():
    order = []
    for s in range(2 * BLOCK - 1):
        if s % 2 == 0:
            r = min(s, BLOCK - 1)
            c = s - r
            while r >= 0 and c < BLOCK:
                order.append((r, c))
                r -= 1
                c += 1
        else:
            c = min(s, BLOCK - 1)
            r = s - c
            while c >= 0 and r < BLOCK:
                order.append((r, c))
                r += 1
                c -= 1
    return order


ZIGZAG = _zigzag_positions()

_SCAN_CACHE = {}


def ac_scan_indices(shape):
    """(rows, cols) of every AC position: raster across blocks, zig-zag within."""
    cached = _SCAN_CACHE.get(shape)
    if cached is not None:
        return cached
    h, w = shape
    u1 = np.array([p[0] for p in ZIGZAG[1:]])
    u2 = np.array([p[1] for p in ZIGZAG[1:]])
    b1 = np.arange(h // BLOCK) * BLOCK
    b2 = np.arange(w // BLOCK) * BLOCK
    rows = (b1[:, None, None] + np.zeros_like(b2)[None, :, None] + u1).ravel()
    cols = (np.zeros_like(b1)[:, None, None] + b2[None, :, None] + u2).ravel()
    _SCAN_CACHE[shape] = (rows, cols)
    return rows, cols


# ---------------------------------------------------------------------------
# residual plane


def compute_residual(true_signs, retrieved):
    """XOR plane between two sign planes over the nonzero AC positions.

    Bit 0 where the signs agree, 1 where they differ, in canonical scan
    order. Both planes must share the same zero pattern.
    """
    t = np.asarray(true_signs)
    r = np.asarray(retrieved)
    if t.shape != r.shape:
        raise ProtocolError(f"sign plane shapes differ: {t.shape} vs {r.shape}")
    if np.any((t == 0) != (r == 0)):
        raise ProtocolError("sign planes have different zero patterns")
    rows, cols = ac_scan_indices(t.shape)
    tv = t[rows, cols]
    sel = tv != 0
    return (tv[sel] != r[rows, cols][sel]).astype(np.uint8)


def apply_residual(retrieved, residual):
    """Flip retrieved signs where the residual bit is 1; inverse of compute."""
    r = np.array(retrieved, copy=True)
    rows, cols = ac_scan_indices(r.shape)
    sel = r[rows, cols] != 0
    rows, cols = rows[sel], cols[sel]
    e = np.asarray(residual, dtype=np.uint8)
    if e.size != rows.size:
        raise ProtocolError(
            f"residual has {e.size} bits but plane has {rows.size} nonzero ACs"
        )
    flip = e == 1
    r[rows[flip], cols[flip]] = -r[rows[flip], cols[flip]]
    return r


def count_nonzero_ac(mags):
    rows, cols = ac_scan_indices(mags.shape)
    return int(np.count_nonzero(np.asarray(mags)[rows, cols]))


# ---------------------------------------------------------------------------
# bit I/O


class _BitWriter:
    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._n = 0

    def write_bit(self, b):
        self._acc = (self._acc << 1) | (b & 1)
        self._n += 1
        if self._n == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._n = 0

    def write_bits(self, value, n):
        for i in range(n - 1, -1, -1):
            self.write_bit((value >> i) & 1)

    def getvalue(self):
        out = bytes(self._buf)
        if self._n:
            out += bytes([(self._acc << (8 - self._n)) & 0xFF])
        return out


class _BitReader:
    def __init__(self, data):
        self._data = data
        self._pos = 0
        self._nbits = len(data) * 8

    def read_bit(self):
        if self._pos >= self._nbits:
            raise DecodeError("bitstream exhausted (truncated payload)")
        bit = (self._data[self._pos >> 3] >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, n):
        v = 0
        for _ in range(n):
            v = (v << 1) | self.read_bit()
        return v


# ---------------------------------------------------------------------------
# adaptive binary arithmetic coder
#
# Classic 32-bit integer coder with one adaptive context: counts start at
# (1, 1), increment per coded bit, and halve (keeping >= 1) when their sum
# reaches 2^16. The flush emits the quarter-interval selector plus 32 zero
# bits so the decoder's code window never reads past the payload.

_CODE_BITS = 32
_TOP = 1 << _CODE_BITS
_MASK = _TOP - 1
_HALF = _TOP >> 1
_QTR = _TOP >> 2
_THREE_QTR = _HALF + _QTR
_MAX_TOTAL = 1 << 16


def arith_encode_bits(bits):
    """Arithmetic-code a 0/1 array; returns b'' for an empty input."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return b""
    if bits.max() > 1:
        raise ValueError("residual bits must be 0 or 1")
    w = _BitWriter()
    low, high, pending = 0, _MASK, 0
    c0 = c1 = 1

    def emit(b):
        nonlocal pending
        w.write_bit(b)
        while pending:
            w.write_bit(b ^ 1)
            pending -= 1

    for b in bits.tolist():
        rng = high - low + 1
        split = low + (rng * c0) // (c0 + c1)
        if b:
            low = split
            c1 += 1
        else:
            high = split - 1
            c0 += 1
        if c0 + c1 >= _MAX_TOTAL:
            c0 = (c0 + 1) >> 1
            c1 = (c1 + 1) >> 1
        while True:
            if high < _HALF:
                emit(0)
            elif low >= _HALF:
                emit(1)
                low -= _HALF
                high -= _HALF
            elif low >= _QTR and high < _THREE_QTR:
                pending += 1
                low -= _QTR
                high -= _QTR
            else:
                break
            low <<= 1
            high = (high << 1) | 1
    pending += 1
    emit(0 if low < _QTR else 1)
    w.write_bits(0, _CODE_BITS)
    return w.getvalue()


def arith_decode_bits(data, count):
    """Exact inverse of arith_encode_bits given the original bit count."""
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    r = _BitReader(data)
    value = r.read_bits(_CODE_BITS)
    low, high = 0, _MASK
    c0 = c1 = 1
    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        rng = high - low + 1
        split = low + (rng * c0) // (c0 + c1)
        if value >= split:
            out[i] = 1
            low = split
            c1 += 1
        else:
            out[i] = 0
            high = split - 1
            c0 += 1
        if c0 + c1 >= _MAX_TOTAL:
            c0 = (c0 + 1) >> 1
            c1 = (c1 + 1) >> 1
        while True:
            if high < _HALF:
                pass
            elif low >= _HALF:
                low -= _HALF
                high -= _HALF
                value -= _HALF
            elif low >= _QTR and high < _THREE_QTR:
                low -= _QTR
                high -= _QTR
                value -= _QTR
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            value = (value << 1) | r.read_bit()
    return out


# ---------------------------------------------------------------------------
# magnitude + DC payload (exp-Golomb, zig-zag run-length)


def _write_ue(w, v):
    n = (v + 1).bit_length()
    w.write_bits(v + 1, 2 * n - 1)


def _read_ue(r):
    zeros = 0
    while r.read_bit() == 0:
        zeros += 1
        if zeros > 63:
            raise ProtocolError("exp-Golomb prefix too long")
    v = 1
    for _ in range(zeros):
        v = (v << 1) | r.read_bit()
    return v - 1


def _signed_to_ue(v):
    return 2 * v - 1 if v > 0 else -2 * v


def _ue_to_signed(u):
    return (u + 1) // 2 if u % 2 else -(u // 2)


def encode_magnitudes(idx):
    """Lossless payload of signed DC indices and AC absolute indices."""
    h, w = idx.shape
    u1 = [p[0] for p in ZIGZAG[1:]]
    u2 = [p[1] for p in ZIGZAG[1:]]
    writer = _BitWriter()
    for r0 in range(0, h, BLOCK):
        for c0 in range(0, w, BLOCK):
            block = idx[r0 : r0 + BLOCK, c0 : c0 + BLOCK]
            _write_ue(writer, _signed_to_ue(int(block[0, 0])))
            acs = block[u1, u2]
            nz = np.nonzero(acs)[0]
            _write_ue(writer, len(nz))
            prev = -1
            for t in nz:
                _write_ue(writer, int(t) - prev - 1)
                _write_ue(writer, int(abs(acs[t])) - 1)
                prev = int(t)
    return writer.getvalue()


def decode_magnitudes(data, shape):
    """Inverse of encode_magnitudes.

    Returns an int64 grid holding the signed DC index at each block's
    (0, 0) position and the absolute AC index elsewhere.
    """
    h, w = shape
    u1 = [p[0] for p in ZIGZAG[1:]]
    u2 = [p[1] for p in ZIGZAG[1:]]
    reader = _BitReader(data)
    out = np.zeros(shape, dtype=np.int64)
    try:
        for r0 in range(0, h, BLOCK):
            for c0 in range(0, w, BLOCK):
                out[r0, c0] = _ue_to_signed(_read_ue(reader))
                nnz = _read_ue(reader)
                if nnz > BLOCK * BLOCK - 1:
                    raise ProtocolError(f"block claims {nnz} nonzero ACs")
                t = -1
                for _ in range(nnz):
                    t += _read_ue(reader) + 1
                    if t > BLOCK * BLOCK - 2:
                        raise ProtocolError("AC run past end of block")
                    out[r0 + u1[t], c0 + u2[t]] = _read_ue(reader) + 1
    except DecodeError as exc:
        raise ProtocolError(f"magnitude payload truncated: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# stream framing


_HEADER = struct.Struct("<4sBIIBBHddBQ")


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    quality: int
    gamma: int
    theta: int
    lam: float
    mu: float
    levels: int
    seed: int
    version: int = VERSION

    def solver_config(self):
        return SolverConfig(
            lam=self.lam,
            mu=self.mu,
            theta_max=self.theta,
            gamma_max=self.gamma,
            seed=self.seed,
            levels=self.levels,
        )


def compose_bitstream(header, mag_payload, residual_count, residual_payload):
    head = _HEADER.pack(
        MAGIC,
        header.version,
        header.width,
        header.height,
        header.quality,
        header.gamma,
        header.theta,
        header.lam,
        header.mu,
        header.levels,
        header.seed,
    )
    return b"".join(
        [
            head,
            struct.pack("<Q", len(mag_payload)),
            mag_payload,
            struct.pack("<QQ", residual_count, len(residual_payload)),
            residual_payload,
        ]
    )


def parse_bitstream(data):
    if len(data) < _HEADER.size:
        raise FormatError(f"stream too short for header: {len(data)} bytes")
    magic, version, width, height, quality, gamma, theta, lam, mu, levels, seed = (
        _HEADER.unpack_from(data, 0)
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, this codec reads {VERSION}")
    if width % BLOCK or height % BLOCK or width == 0 or height == 0:
        raise ProtocolError(f"dimensions {width}x{height} not positive multiples of {BLOCK}")
    if not 1 <= quality <= 100:
        raise ProtocolError(f"quality {quality} outside [1, 100]")
    if gamma < 1 or theta < 1 or levels < 1:
        raise ProtocolError("gamma, theta and levels must all be >= 1")
    pos = _HEADER.size
    if pos + 8 > len(data):
        raise ProtocolError("stream ends inside magnitude length field")
    (mag_len,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if pos + mag_len > len(data):
        raise ProtocolError("magnitude payload extends past end of stream")
    mag_payload = data[pos : pos + mag_len]
    pos += mag_len
    if pos + 16 > len(data):
        raise ProtocolError("stream ends inside residual length fields")
    residual_count, arith_len = struct.unpack_from("<QQ", data, pos)
    pos += 16
    if pos + arith_len > len(data):
        raise ProtocolError("residual payload extends past end of stream")
    residual_payload = data[pos : pos + arith_len]
    header = StreamHeader(
        width=width,
        height=height,
        quality=quality,
        gamma=gamma,
        theta=theta,
        lam=lam,
        mu=mu,
        levels=levels,
        seed=seed,
        version=version,
    )
    return header, mag_payload, residual_count, residual_payload


# ---------------------------------------------------------------------------
# end-to-end protocol


def assemble_coefficients(mags, dc, signs):
    """Signed coefficient grid from magnitudes, DC values, and a sign plane."""
    coeffs = np.asarray(signs, dtype=np.float64) * np.asarray(mags, dtype=np.float64)
    coeffs[0::BLOCK, 0::BLOCK] = dc
    return coeffs


def to_display(real):
    """Clamp a real-valued reconstruction to displayable 8-bit samples."""
    return np.floor(np.clip(real, 0.0, 255.0) + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class EncodeResult:
    stream: bytes
    header: StreamHeader
    coefficients: np.ndarray
    baseline: np.ndarray
    true_signs: np.ndarray
    retrieved_signs: np.ndarray
    residual_bits: np.ndarray
    alphas: tuple


@dataclass(frozen=True)
class DecodeResult:
    pixels: np.ndarray
    real: np.ndarray
    coefficients: np.ndarray
    header: StreamHeader
    retrieved_signs: np.ndarray
    corrected_signs: np.ndarray


def encode(image, quality, cfg, cascade_hook=None):
    """Compress a grid into a bitstream with no AC sign bits in it."""
    img = np.asarray(image, dtype=np.float64)
    require_block_multiple(img)
    q = build_quantizer(quality)
    idx = quantize_indices(dct2_forward(img), q)
    y = dequantize_indices(idx, q)
    mags = np.abs(y)
    dc = y[0::BLOCK, 0::BLOCK]
    baseline = dct2_inverse(y)

    alphas = []
    base_norm = float(np.linalg.norm(baseline))

    def hook(gamma, z):
        if base_norm > 0 and np.linalg.norm(z) > 0:
            alphas.append(alpha_constant(baseline, z))
        else:
            alphas.append(float("nan"))
        if cascade_hook is not None:
            cascade_hook(gamma, z)

    z = fienup_solve(mags, dc, cfg, cascade_hook=hook)
    retrieved = extract_signs(z, mags)
    truth = sign_plane(y)
    residual = compute_residual(truth, retrieved)

    header = StreamHeader(
        width=img.shape[1],
        height=img.shape[0],
        quality=quality,
        gamma=cfg.gamma_max,
        theta=cfg.theta_max,
        lam=cfg.lam,
        mu=cfg.mu,
        levels=cfg.levels,
        seed=cfg.seed,
    )
    stream = compose_bitstream(
        header,
        encode_magnitudes(idx),
        residual.size,
        arith_encode_bits(residual),
    )
    return EncodeResult(
        stream=stream,
        header=header,
        coefficients=y,
        baseline=baseline,
        true_signs=truth,
        retrieved_signs=retrieved,
        residual_bits=residual,
        alphas=tuple(alphas),
    )


def decode(data):
    """Parse a bitstream, re-run sign recovery, and reconstruct the image."""
    header, mag_payload, residual_count, residual_payload = parse_bitstream(data)
    shape = (header.height, header.width)
    idx = decode_magnitudes(mag_payload, shape)
    q = build_quantizer(header.quality)
    vals = dequantize_indices(idx, q)  # AC: magnitudes; DC: signed values
    mags = np.abs(vals)
    dc = vals[0::BLOCK, 0::BLOCK]
    if residual_count != count_nonzero_ac(mags):
        raise ProtocolError(
            f"residual bit count {residual_count} does not match "
            f"{count_nonzero_ac(mags)} nonzero ACs in the magnitude payload"
        )
    z = fienup_solve(mags, dc, header.solver_config())
    retrieved = extract_signs(z, mags)
    residual = arith_decode_bits(residual_payload, residual_count)
    corrected = apply_residual(retrieved, residual)
    coeffs = assemble_coefficients(mags, dc, corrected)
    real = dct2_inverse(coeffs)
    return DecodeResult(
        pixels=to_display(real),
        real=real,
        coefficients=coeffs,
        header=header,
        retrieved_signs=retrieved,
        corrected_signs=corrected,
    )
