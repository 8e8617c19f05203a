"""Checkpoint converter for ESRGAN-family models.

Turns published PyTorch checkpoints (RRDB generators, U-Net and
attention-U-Net discriminators) into the SRWT1 named-tensor container,
and emits seeded forward-pass test vectors computed in the source
framework so independent inference engines can prove parity.
"""

__version__ = "0.1.0"

from .container import read_srwt1, read_vector, write_srwt1, write_vector
from .convert import convert, emit_test_vector
from .maps import ARCHES, ConversionError, MappingError, infer_config

__all__ = [
    "ARCHES",
    "ConversionError",
    "MappingError",
    "convert",
    "emit_test_vector",
    "infer_config",
    "read_srwt1",
    "read_vector",
    "write_srwt1",
    "write_vector",
]
