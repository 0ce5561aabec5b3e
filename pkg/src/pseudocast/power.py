"""Per-chunk power scaling, packet normalization, MMSE decoding and packet metadata.

Power conventions: the budget ``P`` is the average power per *real* transmitted
sample. Two real samples share one complex subcarrier value, so the energy per
data subcarrier is ``2 P``; the default ``P = 0.5`` gives data carriers the same
unit energy as the pilots and training symbols. Noise estimates are likewise
per real dimension (I or Q), so ``gamma = P / sigma_sq`` is the SNR of the real
sample stream.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .transform import Chunk

VARIANCE_FLOOR = 1e-6
DEFAULT_POWER = 0.5


class DegenerateSourceError(ValueError):
    """All chunk variances are zero, so there is nothing to allocate power to."""


class MetadataError(ValueError):
    """Packet metadata failed its CRC or is structurally invalid."""


@dataclass(frozen=True)
class GainVector:
    gains: np.ndarray
    power_budget: float


@dataclass(frozen=True)
class NoiseEstimate:
    sigma_sq: float  # per real dimension
    gamma: float

    @classmethod
    def from_sigma(cls, sigma_sq: float, power: float = DEFAULT_POWER) -> "NoiseEstimate":
        if sigma_sq < 0:
            raise ValueError("noise power must be non-negative")
        gamma = np.inf if sigma_sq == 0 else power / sigma_sq
        return cls(float(sigma_sq), float(gamma))

    @property
    def snr_db(self) -> float:
        return float(10 * np.log10(self.gamma)) if self.gamma > 0 else -np.inf


def normalize_packet(samples) -> Tuple[np.ndarray, float]:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot normalize an empty packet")
    mean = float(np.mean(x))
    return x - mean, mean


def allocate_gains(variances: Sequence[float], lengths: Sequence[int],
                   power_budget: float) -> GainVector:
    """Closed-form gains g_i = c * lambda_i**(-1/4).

    ``c`` is fixed by sum_i g_i^2 lambda_i n_i / N = P. Chunks below the
    variance floor are treated as having the floor variance.
    """
    lam = np.asarray(variances, dtype=np.float64)
    n = np.asarray(lengths, dtype=np.float64)
    if lam.shape != n.shape or lam.size == 0:
        raise ValueError("variances and lengths must be non-empty and aligned")
    if np.any(lam < 0):
        raise ValueError("variances must be non-negative")
    if power_budget <= 0:
        raise ValueError("power budget must be positive")
    if not np.any(lam > 0):
        raise DegenerateSourceError("all chunk variances are zero")
    lam = np.maximum(lam, VARIANCE_FLOOR)
    weights = n / n.sum()
    c = np.sqrt(power_budget / np.sum(weights * np.sqrt(lam)))
    return GainVector(c * lam ** -0.25, float(power_budget))


def scale(chunks: Sequence[Chunk], gains: GainVector) -> np.ndarray:
    if len(chunks) != len(gains.gains):
        raise ValueError(f"{len(chunks)} chunks but {len(gains.gains)} gains")
    return np.concatenate([g * c.samples for c, g in zip(chunks, gains.gains)])


def mmse_decode(received, gains: GainVector, variances: Sequence[float],
                noise: NoiseEstimate) -> List[Chunk]:
    """Linear MMSE estimate x = g lam / (g^2 lam + sigma^2) * y, chunk by chunk."""
    y = np.asarray(received, dtype=np.float64)
    g = np.asarray(gains.gains, dtype=np.float64)
    lam = np.asarray(variances, dtype=np.float64)
    if g.shape != lam.shape:
        raise ValueError("gains and variances are not aligned")
    if y.size % g.size:
        raise ValueError(f"{y.size} received samples do not split into {g.size} chunks")
    rows = y.reshape(g.size, -1)
    den = g ** 2 * lam + noise.sigma_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(den > 0, g * lam / den, 1.0 / g)
    est = rows * coef[:, None]
    return [Chunk(i, est[i], float(lam[i])) for i in range(g.size)]


# --- metadata -------------------------------------------------------------

def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    b = np.asarray(bits, dtype=np.uint8)
    if b.size % 8:
        raise MetadataError("bit count is not a multiple of 8")
    return np.packbits(b).tobytes()


def seal(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body))


def unseal(data: bytes) -> bytes:
    if len(data) < 4:
        raise MetadataError("metadata too short")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise MetadataError("metadata CRC mismatch")
    return body


_META_MAGIC = b"SC"
_META_VERSION = 1
_META_HEAD = struct.Struct("<2sBBIHHHHHIIIIff")


@dataclass(frozen=True)
class PacketMeta:
    """Side information the receiver needs to invert the pseudo-analog coding.

    Wire layout (little endian)::

        2s  magic "SC"          B  version (1)        B  flags (0)
        I   gop_id              H  T   H  H   H  W    H  num_chunks
        H   hadamard_order      I  chunk_pad          I  whiten_pad
        I   payload_len (real samples sent)           I  carrier_pad
        f   power_budget        f  dc_mean
        f * num_chunks  chunk variances
        f * num_chunks  chunk means
        I   CRC-32 of everything above
    """

    gop_id: int
    dims: Tuple[int, int, int]
    chunk_variances: Tuple[float, ...]
    chunk_means: Tuple[float, ...]
    dc_mean: float
    power_budget: float = DEFAULT_POWER
    hadamard_order: int = 64
    chunk_pad: int = 0
    whiten_pad: int = 0
    payload_len: int = 0
    carrier_pad: int = 0

    def __post_init__(self):
        # every float goes through float32 so both ends compute from identical values
        f32 = lambda seq: tuple(float(v) for v in np.asarray(seq, dtype=np.float32))
        object.__setattr__(self, "chunk_variances", f32(self.chunk_variances))
        object.__setattr__(self, "chunk_means", f32(self.chunk_means))
        object.__setattr__(self, "dc_mean", float(np.float32(self.dc_mean)))
        object.__setattr__(self, "power_budget", float(np.float32(self.power_budget)))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def num_chunks(self) -> int:
        return len(self.chunk_variances)

    @property
    def iq_length(self) -> int:
        return -(-self.payload_len // 2)

    @property
    def iq_padded(self) -> bool:
        return bool(self.payload_len % 2)


def encode_meta(meta: PacketMeta) -> np.ndarray:
    k = meta.num_chunks
    if k == 0:
        raise MetadataError("metadata needs at least one chunk variance")
    if len(meta.chunk_means) != k:
        raise MetadataError("chunk means and variances differ in length")
    t, h, w = meta.dims
    head = _META_HEAD.pack(_META_MAGIC, _META_VERSION, 0, meta.gop_id, t, h, w, k,
                           meta.hadamard_order, meta.chunk_pad, meta.whiten_pad,
                           meta.payload_len, meta.carrier_pad, meta.power_budget,
                           meta.dc_mean)
    body = head + struct.pack(f"<{2 * k}f", *meta.chunk_variances, *meta.chunk_means)
    return bytes_to_bits(seal(body))


def decode_meta(bits) -> PacketMeta:
    body = unseal(bits_to_bytes(bits))
    if len(body) < _META_HEAD.size:
        raise MetadataError("metadata truncated")
    (magic, version, _flags, gop_id, t, h, w, k, order, chunk_pad, whiten_pad,
     payload_len, carrier_pad, power, dc_mean) = _META_HEAD.unpack_from(body)
    if magic != _META_MAGIC or version != _META_VERSION:
        raise MetadataError("not a pseudo-analog metadata block")
    if len(body) != _META_HEAD.size + 8 * k:
        raise MetadataError("metadata length does not match chunk count")
    vals = struct.unpack_from(f"<{2 * k}f", body, _META_HEAD.size)
    return PacketMeta(gop_id, (t, h, w), vals[:k], vals[k:], dc_mean, power, order,
                      chunk_pad, whiten_pad, payload_len, carrier_pad)
