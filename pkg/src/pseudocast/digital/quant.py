"""Uniform midrise quantizer."""

from __future__ import annotations

import numpy as np


def _check(bits_per_coeff: int, lo, hi) -> None:
    if not 2 <= bits_per_coeff <= 16:
        raise ValueError("bits_per_coeff must lie in [2, 16]")
    if np.any(np.asarray(lo) >= np.asarray(hi)):
        raise ValueError("quantizer range is degenerate (min >= max)")


def quantize_indices(values, bits_per_coeff: int, lo, hi) -> np.ndarray:
    """Bin index of each value; ``lo``/``hi`` may be scalars or per-value arrays."""
    _check(bits_per_coeff, lo, hi)
    levels = 1 << bits_per_coeff
    step = (np.asarray(hi, dtype=np.float64) - lo) / levels
    idx = np.floor((np.asarray(values, dtype=np.float64) - lo) / step)
    return np.clip(idx, 0, levels - 1).astype(np.int64)


def dequantize_indices(idx, bits_per_coeff: int, lo, hi) -> np.ndarray:
    _check(bits_per_coeff, lo, hi)
    step = (np.asarray(hi, dtype=np.float64) - lo) / (1 << bits_per_coeff)
    return lo + (np.asarray(idx, dtype=np.float64) + 0.5) * step


def indices_to_bits(idx, bits_per_coeff: int) -> np.ndarray:
    shifts = np.arange(bits_per_coeff - 1, -1, -1)
    return ((np.asarray(idx, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def bits_to_indices(bits, bits_per_coeff: int) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).reshape(-1, bits_per_coeff)
    return b @ (1 << np.arange(bits_per_coeff - 1, -1, -1))


def quantize(coeffs, bits_per_coeff: int, value_range) -> np.ndarray:
    """MSB-first bit vector of the bin indices."""
    lo, hi = value_range
    return indices_to_bits(quantize_indices(coeffs, bits_per_coeff, lo, hi), bits_per_coeff)


def dequantize(bits, bits_per_coeff: int, value_range) -> np.ndarray:
    lo, hi = value_range
    return dequantize_indices(bits_to_indices(bits, bits_per_coeff), bits_per_coeff, lo, hi)
