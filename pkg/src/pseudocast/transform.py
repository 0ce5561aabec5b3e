"""3D-DCT decorrelation, equal-size chunking and Hadamard whitening.

Coefficients are scanned frequency-major: the flattening order is C order over
(time, height, width), so temporal plane 0 comes first and each plane is read
row by row. Chunk ``i`` therefore covers a fixed frequency band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.fft import dctn, idctn
from scipy.linalg import hadamard

from .source import Gop

SCAN_ORDER = "C"


@dataclass(frozen=True)
class CoefficientCube:
    coeffs: np.ndarray

    @property
    def dims(self) -> Tuple[int, int, int]:
        return tuple(self.coeffs.shape)


@dataclass(frozen=True)
class Chunk:
    index: int
    samples: np.ndarray
    variance: float
    mean: float = 0.0


@dataclass(frozen=True)
class WhitenedPayload:
    samples: np.ndarray
    hadamard_order: int
    length: int  # unpadded input length

    @property
    def pad(self) -> int:
        return len(self.samples) - self.length


def dct3(gop) -> CoefficientCube:
    """Orthonormal type-II DCT along width, height and time."""
    cube = gop.to_array() if isinstance(gop, Gop) else np.asarray(gop, dtype=np.float64)
    if cube.ndim != 3 or cube.size == 0:
        raise ValueError("dct3 needs a non-empty (time, height, width) array")
    return CoefficientCube(dctn(cube, type=2, norm="ortho"))


def idct3(cube: CoefficientCube) -> Gop:
    return Gop.from_array(idctn(cube.coeffs, type=2, norm="ortho"))


def chunk_length(total: int, num_chunks: int) -> int:
    return -(-total // num_chunks)


def chunk(cube: CoefficientCube, num_chunks: int) -> List[Chunk]:
    """Split scanned coefficients into ``num_chunks`` equal pieces.

    The scan is zero-padded at the end to a multiple of ``num_chunks``; the pad
    count follows from the cube dims (see :func:`chunk_padding`).
    """
    if num_chunks < 1:
        raise ValueError("num_chunks must be >= 1")
    flat = cube.coeffs.ravel(order=SCAN_ORDER)
    n = chunk_length(flat.size, num_chunks)
    padded = np.zeros(n * num_chunks)
    padded[: flat.size] = flat
    rows = padded.reshape(num_chunks, n)
    return [Chunk(i, row.copy(), float(np.var(row)), float(np.mean(row)))
            for i, row in enumerate(rows)]


def chunk_padding(dims: Sequence[int], num_chunks: int) -> int:
    total = int(np.prod(dims))
    return chunk_length(total, num_chunks) * num_chunks - total


def dechunk(chunks: Sequence[Chunk], dims: Sequence[int]) -> CoefficientCube:
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    lengths = {len(c.samples) for c in chunks}
    if len(lengths) != 1:
        raise ValueError("chunks have unequal lengths")
    n = lengths.pop()
    if n != chunk_length(total, len(chunks)):
        raise ValueError(
            f"chunk length {n} inconsistent with dims {dims} and {len(chunks)} chunks"
        )
    ordered = sorted(chunks, key=lambda c: c.index)
    flat = np.concatenate([c.samples for c in ordered])[:total]
    return CoefficientCube(flat.reshape(dims, order=SCAN_ORDER))


def _check_order(order: int) -> None:
    if order < 1 or order & (order - 1):
        raise ValueError(f"Hadamard order must be a power of two, got {order}")


def _normalized_hadamard(order: int) -> np.ndarray:
    return hadamard(order, dtype=np.float64) / np.sqrt(order)


def whiten(samples, order: int = 64) -> WhitenedPayload:
    """Multiply each block of ``order`` samples by the normalized Hadamard matrix."""
    _check_order(order)
    x = np.asarray(samples, dtype=np.float64).ravel()
    n_blocks = -(-x.size // order)
    padded = np.zeros(n_blocks * order)
    padded[: x.size] = x
    out = padded.reshape(n_blocks, order) @ _normalized_hadamard(order)
    return WhitenedPayload(out.ravel(), order, x.size)


def unwhiten(payload: WhitenedPayload) -> np.ndarray:
    order = payload.hadamard_order
    _check_order(order)
    blocks = np.asarray(payload.samples, dtype=np.float64).reshape(-1, order)
    # H/sqrt(n) is symmetric and orthogonal, hence its own inverse
    return (blocks @ _normalized_hadamard(order)).ravel()[: payload.length]


def scatter_index(n: int) -> np.ndarray:
    """Stride permutation i -> a*i mod n with a near n/phi and coprime to n."""
    if n <= 2:
        return np.arange(n)
    a = int(n * 0.6180339887498949) | 1
    while math.gcd(a, n) != 1:
        a += 2
    return (a * np.arange(n, dtype=np.int64)) % n


def spread(samples, order: int = 64) -> WhitenedPayload:
    """Whiten across the whole payload rather than within neighbouring samples.

    The padded payload is permuted by :func:`scatter_index`, whitened in
    blocks, and the outputs put back in the original positions. Each block
    then mixes samples from all over the payload and its outputs land far
    apart, so a few large coefficients no longer make one OFDM symbol loud.
    With ``order=1`` this is the identity.
    """
    _check_order(order)
    x = np.asarray(samples, dtype=np.float64).ravel()
    padded = np.zeros(-(-x.size // order) * order)
    padded[: x.size] = x
    p = scatter_index(padded.size)
    out = np.empty_like(padded)
    out[p] = whiten(padded[p], order).samples
    return WhitenedPayload(out, order, x.size)


def unspread(payload: WhitenedPayload) -> np.ndarray:
    y = np.asarray(payload.samples, dtype=np.float64)
    p = scatter_index(y.size)
    out = np.empty_like(y)
    out[p] = unwhiten(WhitenedPayload(y[p], payload.hadamard_order, y.size))
    return out[: payload.length]
