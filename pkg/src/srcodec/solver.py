"""Sign recovery for quantized block-DCT coefficients.

Given only the magnitudes of the quantized coefficients (plus the fully
known DC values), the solver searches for an image whose coefficients sit
inside the per-coefficient box |c| <= magnitude while being sparse in a
translation-invariant wavelet frame and correlated with an anchor image.
Three closed-form steps alternate: a frame-domain soft threshold, a shift
toward the anchor, and a projection onto the coefficient box with DC
pinned. The whole loop is re-run in cascades, promoting the previous
solution to be the next anchor.

Everything here is deterministic: the anchor comes from a fixed, seeded
PRNG, and all array arithmetic uses a fixed evaluation order, so an
encoder and decoder that share a seed reproduce identical iterates.
"""

from dataclasses import dataclass

import numpy as np

from .imagery import BLOCK, ShapeError
from .transforms import dct2_forward, dct2_inverse, frame_analysis, frame_synthesis

# Anchor PRNG contract: NumPy PCG64 bit generator, standard_normal fill in
# C order. Pinned by a golden vector in the test suite; the seed travels in
# the bitstream header so both codec sides regenerate the same anchor.
_ANCHOR_BITGEN = np.random.PCG64


@dataclass(frozen=True)
class SolverConfig:
    """Iteration parameters shared verbatim between encoder and decoder."""

    lam: float = 1.0
    mu: float = 0.01
    theta_max: int = 200
    gamma_max: int = 1
    seed: int = 0
    levels: int = 3

    def __post_init__(self):
        # lam == 0 is allowed as a degenerate diagnostic (pure anchor drive)
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.theta_max < 1:
            raise ValueError(f"theta_max must be >= 1, got {self.theta_max}")
        if self.gamma_max < 1:
            raise ValueError(f"gamma_max must be >= 1, got {self.gamma_max}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")


def make_anchor(shape, seed):
    """Standard-normal anchor image from the pinned PRNG; bit-reproducible."""
    rng = np.random.Generator(_ANCHOR_BITGEN(seed))
    return rng.standard_normal(shape)


def prox_l1(z, lam, levels):
    """Soft threshold in the frame domain: synthesis(shrink(analysis(z)))."""
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    coeffs = frame_analysis(z, levels)
    shrunk = np.sign(coeffs) * np.maximum(np.abs(coeffs) - lam, 0.0)
    return frame_synthesis(shrunk)


def anchor_step(f, phi, mu):
    """Closed-form anchor pull: f + phi / mu."""
    if f.shape != phi.shape:
        raise ShapeError(f"shape mismatch: {f.shape} vs {phi.shape}")
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return f + phi / mu


def project_box(g, mags, dc):
    """Euclidean projection onto the magnitude box with DC pinned.

    Every AC coefficient of each 8x8 block is clamped into [-m, +m] for
    its magnitude bound m; the DC coefficient is overwritten with its
    transmitted value. Performed in the DCT domain, which is the exact
    pixel-domain projection because the transform is orthonormal.
    """
    if g.shape != mags.shape:
        raise ShapeError(f"shape mismatch: grid {g.shape} vs magnitudes {mags.shape}")
    c = dct2_forward(g)
    np.clip(c, -mags, mags, out=c)
    c[0::BLOCK, 0::BLOCK] = dc
    return dct2_inverse(c)


def fienup_solve(mags, dc, cfg, cascade_hook=None):
    """Cascaded alternating solve; returns the final box-feasible image.

    Each cascade restarts from the projection of the current anchor and
    runs theta_max rounds of (frame soft threshold -> anchor pull -> box
    projection); the cascade's result becomes the next anchor. The
    optional cascade_hook(cascade_index, z) observes each cascade's
    result (1-based index) without affecting the iteration.
    """
    mags = np.asarray(mags, dtype=np.float64)
    if np.any(mags < 0):
        raise ValueError("magnitude plane must be non-negative")
    expected_dc = (mags.shape[0] // BLOCK, mags.shape[1] // BLOCK)
    dc = np.asarray(dc, dtype=np.float64)
    if dc.shape != expected_dc:
        raise ShapeError(f"DC plane shape {dc.shape}, expected {expected_dc}")

    phi = make_anchor(mags.shape, cfg.seed)
    z = None
    for gamma in range(1, cfg.gamma_max + 1):
        z = project_box(phi, mags, dc)
        for _ in range(cfg.theta_max):
            f = prox_l1(z, cfg.lam, cfg.levels)
            g = anchor_step(f, phi, cfg.mu)
            z = project_box(g, mags, dc)
        phi = z
        if cascade_hook is not None:
            cascade_hook(gamma, z)
    return z


def extract_signs(z, mags):
    """Ternary sign plane of z's block-DCT coefficients.

    Zero wherever the magnitude bound is zero (no sign exists there);
    elsewhere +1 or -1, with sign(0) defined as +1 so both codec sides
    break ties identically.
    """
    c = dct2_forward(z)
    signs = np.where(c < 0, -1, 1).astype(np.int8)
    signs[np.asarray(mags) == 0] = 0
    return signs


def sign_plane(coeffs):
    """Sign plane of actual coefficients: sign(c) with 0 kept at zeros."""
    c = np.asarray(coeffs)
    return np.sign(c).astype(np.int8)


def alpha_constant(x, phi):
    """Normalized-correlation angle score in [-1, 1]: 1 at phi == x.

    1 - (2/pi) * arccos(<x, phi> / (||x|| ||phi||)); a diagnostic for how
    well an anchor aligns with a target image.
    """
    x = np.asarray(x, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if x.shape != phi.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {phi.shape}")
    nx = np.linalg.norm(x)
    nphi = np.linalg.norm(phi)
    if nx == 0.0 or nphi == 0.0:
        raise ValueError("alpha_constant undefined for an all-zero argument")
    cosine = np.clip(np.vdot(x, phi) / (nx * nphi), -1.0, 1.0)
    return 1.0 - (2.0 / np.pi) * np.arccos(cosine)
