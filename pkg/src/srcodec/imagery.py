"""Grayscale image ingest, 8x8 block bookkeeping, and binary PGM I/O.

Images are plain 2D float64 numpy arrays while the codec works on them;
on disk they are 8-bit binary PGM (P5). Dimensions are always a multiple
of 8 inside the codec, enforced by cropping on ingest.
"""

import numpy as np

BLOCK = 8


class PgmError(ValueError):
    """Malformed or unsupported PGM input."""


class ShapeError(ValueError):
    """Array dimensions violate a block-layout precondition."""


def _parse_error(offset, what):
    raise PgmError(f"invalid PGM at byte {offset}: {what}")


def _next_token(data, pos):
    """Return (token, new_pos), skipping whitespace and '#' comments."""
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in b"#"[0:1] or c == 0x23:
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        elif c in (0x20, 0x09, 0x0A, 0x0D, 0x0B, 0x0C):
            pos += 1
        else:
            break
    if pos >= n:
        _parse_error(pos, "unexpected end of header")
    start = pos
    while pos < n and data[pos] not in (0x20, 0x09, 0x0A, 0x0D, 0x0B, 0x0C, 0x23):
        pos += 1
    return data[start:pos], pos


def parse_pgm(data):
    """Parse binary PGM (P5) bytes into a uint8 array, no cropping.

    Raises PgmError naming the byte offset for malformed input and for
    bit depths other than 8.
    """
    if len(data) < 2:
        _parse_error(0, "too short for a PGM header")
    if data[:2] != b"P5":
        _parse_error(0, f"bad magic {data[:2]!r}, expected b'P5'")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos)
        try:
            val = int(tok)
        except ValueError:
            _parse_error(pos - len(tok), f"non-numeric {name} {tok!r}")
        if val <= 0:
            _parse_error(pos - len(tok), f"non-positive {name} {val}")
        fields.append(val)
    width, height, maxval = fields
    if maxval > 255:
        raise PgmError(
            f"unsupported bit depth: maxval {maxval} at byte {pos}; only 8-bit PGM is supported"
        )
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or data[pos] not in (0x20, 0x09, 0x0A, 0x0D, 0x0B, 0x0C):
        _parse_error(pos, "missing whitespace before raster data")
    pos += 1
    need = width * height
    raster = data[pos : pos + need]
    if len(raster) < need:
        _parse_error(len(data), f"raster truncated: need {need} bytes, have {len(raster)}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm_bytes(img):
    """Serialize a grayscale image to binary PGM (P5) bytes.

    Float input is clipped to [0, 255] and rounded half-up.
    """
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2D image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.floor(np.clip(arr, 0.0, 255.0) + 0.5).astype(np.uint8)
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def crop_to_block_multiple(img):
    """Crop top-left anchored so both dimensions are positive multiples of 8."""
    h, w = img.shape
    ch, cw = (h // BLOCK) * BLOCK, (w // BLOCK) * BLOCK
    if ch == 0 or cw == 0:
        raise PgmError(f"image {w}x{h} too small: needs at least {BLOCK}x{BLOCK}")
    return img[:ch, :cw]


def load_image(path):
    """Read an 8-bit binary PGM and return a float64 grid cropped to 8-multiples."""
    with open(path, "rb") as f:
        data = f.read()
    raw = parse_pgm(data)
    return crop_to_block_multiple(raw).astype(np.float64)


def save_image(path, img):
    """Write a grid to disk as binary PGM."""
    with open(path, "wb") as f:
        f.write(write_pgm_bytes(img))


def require_block_multiple(img):
    h, w = img.shape
    if h % BLOCK or w % BLOCK:
        raise ShapeError(f"dimensions {w}x{h} are not multiples of {BLOCK}")


def split_blocks(g):
    """Stack the 8x8 blocks of a grid in raster order, shape (n_blocks, 8, 8)."""
    require_block_multiple(g)
    h, w = g.shape
    return (
        g.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK)
        .swapaxes(1, 2)
        .reshape(-1, BLOCK, BLOCK)
    )


def merge_blocks(blocks, shape):
    """Inverse of split_blocks; blocks in raster order back to a (h, w) grid."""
    h, w = shape
    if h % BLOCK or w % BLOCK:
        raise ShapeError(f"target shape {shape} is not a multiple of {BLOCK}")
    n_expected = (h // BLOCK) * (w // BLOCK)
    blocks = np.asarray(blocks)
    if blocks.shape != (n_expected, BLOCK, BLOCK):
        raise ShapeError(
            f"expected {n_expected} blocks of {BLOCK}x{BLOCK} for shape {shape}, "
            f"got array of shape {blocks.shape}"
        )
    return (
        blocks.reshape(h // BLOCK, w // BLOCK, BLOCK, BLOCK)
        .swapaxes(1, 2)
        .reshape(h, w)
    )
