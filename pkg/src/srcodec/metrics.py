"""Rate and quality measurements for codec runs, plus CSV serialization."""

import math
from dataclasses import dataclass, field

import numpy as np

from .codec import compute_residual
from .imagery import ShapeError


def binary_entropy(p):
    """H2(p) in bits, with the 0*log(0) limits taken as zero."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def residual_entropy_bpp(residual, n_pixels):
    """Zeroth-order entropy of the residual plane, normalized per pixel."""
    if n_pixels <= 0:
        raise ValueError(f"n_pixels must be positive, got {n_pixels}")
    e = np.asarray(residual)
    if e.size == 0:
        return 0.0
    p = float(np.count_nonzero(e)) / e.size
    return e.size * binary_entropy(p) / n_pixels


def sign_accuracy(truth, retrieved):
    """Fraction of nonzero-AC positions whose signs agree; 1.0 if none exist."""
    residual = compute_residual(truth, retrieved)
    if residual.size == 0:
        return 1.0
    return 1.0 - float(np.count_nonzero(residual)) / residual.size


def psnr(a, b):
    """Peak signal-to-noise ratio against a 255 peak; inf for identical inputs."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


CSV_FIELDS = (
    "image",
    "quality",
    "method",
    "gamma",
    "sign_count",
    "one_fraction",
    "entropy_bpp",
    "coded_bpp",
    "sign_accuracy",
    "psnr_retrieved_db",
    "alphas",
    "wall_seconds",
)


@dataclass
class EvalRecord:
    """One sweep measurement; a row of the rate/accuracy table.

    method is "sign_retrieval" for solver runs (gamma >= 1) or "raw_signs"
    for the uncoded 1-bit-per-sign baseline (gamma = 0, rate fields only).
    """

    image: str
    quality: int
    method: str
    gamma: int
    sign_count: int
    entropy_bpp: float
    coded_bpp: float
    one_fraction: float | None = None
    sign_accuracy: float | None = None
    psnr_retrieved_db: float | None = None
    alphas: tuple = field(default_factory=tuple)
    wall_seconds: float | None = None

    def to_row(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)

        return [
            self.image,
            str(self.quality),
            self.method,
            str(self.gamma),
            str(self.sign_count),
            fmt(self.one_fraction),
            fmt(self.entropy_bpp),
            fmt(self.coded_bpp),
            fmt(self.sign_accuracy),
            fmt(self.psnr_retrieved_db),
            ";".join(repr(a) for a in self.alphas),
            fmt(self.wall_seconds),
        ]


def write_csv(path, records):
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            writer.writerow(rec.to_row())
