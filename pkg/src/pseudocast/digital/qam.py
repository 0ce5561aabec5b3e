"""Gray-coded 16-QAM with unit average energy.

Bits (b0 b1 b2 b3) map to I from (b0 b1) and Q from (b2 b3), each axis using
the Gray sequence 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3, scaled by 1/sqrt(10).
So 0000 is (-3 - 3j)/sqrt(10) and 1010 is (3 + 3j)/sqrt(10).
"""

from __future__ import annotations

import numpy as np

SCALE = 1 / np.sqrt(10.0)
_LEVEL = {0b00: -3, 0b01: -1, 0b11: 1, 0b10: 3}
_LEVELS = np.array([_LEVEL[i] for i in range(4)], dtype=np.float64)
# index by sorted level position (-3, -1, 1, 3) -> 2-bit label
_LABEL_BY_POS = np.array([0b00, 0b01, 0b11, 0b10])


def constellation() -> np.ndarray:
    """All 16 points, indexed by the 4-bit label."""
    idx = np.arange(16)
    return (_LEVELS[idx >> 2] + 1j * _LEVELS[idx & 3]) * SCALE


def qam16_map(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size % 4:
        b = np.concatenate([b, np.zeros(4 - b.size % 4, dtype=np.int64)])
    q = b.reshape(-1, 4)
    i_lab = (q[:, 0] << 1) | q[:, 1]
    q_lab = (q[:, 2] << 1) | q[:, 3]
    return (_LEVELS[i_lab] + 1j * _LEVELS[q_lab]) * SCALE


def _axis_bits(x: np.ndarray) -> np.ndarray:
    pos = np.clip(np.floor((x / SCALE + 4) / 2), 0, 3).astype(np.int64)
    lab = _LABEL_BY_POS[pos]
    return np.stack([lab >> 1, lab & 1], axis=-1)


def qam16_demap(symbols, noise_var=None) -> np.ndarray:
    """Minimum-distance hard decisions. ``noise_var`` does not affect hard output."""
    s = np.asarray(symbols, dtype=np.complex128).ravel()
    out = np.concatenate([_axis_bits(s.real), _axis_bits(s.imag)], axis=1)
    return out.ravel().astype(np.uint8)
