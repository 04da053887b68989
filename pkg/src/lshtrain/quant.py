"""Software bfloat16: 1 sign / 8 exponent / 7 mantissa bits stored as uint16.

Conversion from fp32 keeps the high half of the bit pattern (truncation);
conversion back pads 16 zero low bits. Round-to-nearest-even is available
behind the ``rounding`` flag for comparison runs.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

# Forced when truncating a NaN whose payload lives entirely in the low
# mantissa bits would otherwise produce the infinity pattern.
_QUIET_BIT = np.uint16(0x0040)

TRUNC = "trunc"
RNE = "rne"


class QuantMode(str, Enum):
    """bf16 usage during training."""

    BOTH = "both"  # weights and activations stored through bf16
    ACTIVATIONS = "activations"  # activations only; weights and ADAM state stay fp32
    NONE = "none"


class QuantModeError(RuntimeError):
    pass


def from_fp32(x, rounding: str = TRUNC) -> np.ndarray:
    """fp32 -> bf16 bit patterns (uint16). Elementwise, shape-preserving."""
    arr = np.asarray(x, dtype=np.float32)
    bits = arr.view(np.uint32)
    hi_trunc = (bits >> np.uint32(16)).astype(np.uint16)
    if rounding == TRUNC:
        hi = hi_trunc
    elif rounding == RNE:
        lsb = (bits >> np.uint32(16)) & np.uint32(1)
        with np.errstate(over="ignore"):
            hi = ((bits + np.uint32(0x7FFF) + lsb) >> np.uint32(16)).astype(np.uint16)
    else:
        raise ValueError(f"unknown rounding mode: {rounding!r}")
    nan = np.isnan(arr)
    if nan.any():
        lost = nan & ((hi_trunc & np.uint16(0x007F)) == 0)
        hi = np.where(nan, np.where(lost, hi_trunc | _QUIET_BIT, hi_trunc), hi)
    return hi[()] if arr.ndim == 0 else hi


def to_fp32(b) -> np.ndarray:
    """bf16 bit patterns (uint16) -> fp32, low 16 bits zero."""
    arr = np.asarray(b, dtype=np.uint16)
    out = (arr.astype(np.uint32) << np.uint32(16)).view(np.float32)
    return out[()] if arr.ndim == 0 else out


def roundtrip(x, rounding: str = TRUNC) -> np.ndarray:
    """Quantize fp32 values through bf16 and back (the storage effect)."""
    return to_fp32(from_fp32(x, rounding))


def apply_mode(mode, net, rounding: str = TRUNC):
    """Fix the bf16 storage policy on a network before training starts.

    BOTH truncates the weight/bias master copies in place; ACTIVATIONS leaves
    parameters untouched (the trainer quantizes layer outputs); NONE is a
    no-op. Changing the mode after any training step is an error.
    """
    mode = QuantMode(mode)
    current = getattr(net, "quant_mode", QuantMode.NONE)
    if getattr(net, "train_steps", 0) > 0 and mode is not QuantMode(current):
        raise QuantModeError("bf16 mode cannot change after training has started")
    net.quant_mode = mode
    if mode is QuantMode.BOTH:
        for layer in net.layers:
            w = layer.weights
            w.buffer[:] = roundtrip(w.buffer, rounding)
            w.bias[:] = roundtrip(w.bias, rounding)
    return mode
