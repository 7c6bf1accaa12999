"""DCT image codec that recovers AC sign bits instead of transmitting them."""

from .codec import (
    DecodeResult,
    EncodeResult,
    FormatError,
    ProtocolError,
    DecodeError,
    decode,
    encode,
)
from .imagery import load_image, save_image
from .solver import SolverConfig

__all__ = [
    "DecodeResult",
    "EncodeResult",
    "FormatError",
    "ProtocolError",
    "DecodeError",
    "SolverConfig",
    "decode",
    "encode",
    "load_image",
    "save_image",
]

__version__ = "0.1.0"
