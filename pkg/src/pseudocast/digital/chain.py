"""End-to-end digital baseline over the shared OFDM burst format.

3D-DCT, uniform quantizer, rate-1/3 convolutional code, 16-QAM. Under
bandwidth parity the coded payload must fit in roughly the same number of
complex symbols the pseudo-analog codec uses for the GOP. That budget is
about 2/3 of an information bit per coefficient, below the quantizer's
2-bit minimum, so only the highest-energy chunks are sent, in energy order,
truncated to ``kept_coeffs`` coefficients. The depth ``b`` is the one with
the lowest predicted distortion (energy dropped plus step^2 / 12 per kept
coefficient).

Information bits are split into terminated packets of ``packet_bits`` so
Viterbi decoding runs as one batch. Residual bit errors are left where they
fall.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..channel import ChannelParams
from ..link import (PhyOptions, SyncError, analog_iq_length, build_burst, gray_gop,
                    over_the_air, receive_burst)
from ..ofdm import IqPayload
from ..power import MetadataError, bits_to_bytes, bytes_to_bits, seal, unseal
from ..source import Gop, compute_psnr
from ..transform import Chunk, chunk, chunk_length, dct3, dechunk, idct3
from .fec import CODE, conv_encode, viterbi_decode
from .qam import qam16_demap, qam16_map
from .quant import dequantize_indices, indices_to_bits, bits_to_indices, quantize_indices

BITS_PER_SYMBOL = 4
MIN_BITS, MAX_BITS = 2, 16


@dataclass(frozen=True)
class DigitalOptions:
    """``bits_per_coeff=None`` lets the parity solver pick the depth.

    With ``bandwidth_parity=False`` every coefficient is sent at
    ``bits_per_coeff`` (10 if unset), whatever the airtime.
    """

    bits_per_coeff: Optional[int] = None
    bandwidth_parity: bool = True
    num_chunks: int = 64
    hadamard_order: int = 64  # only used to size the parity budget
    packet_bits: int = 4096
    phy: PhyOptions = PhyOptions()


# --- metadata ---------------------------------------------------------------

_MAGIC = b"SD"
_VERSION = 1
_HEAD = struct.Struct("<2sBBIHHHHHIIIf")


@dataclass(frozen=True)
class DigitalMeta:
    """Wire layout (little endian)::

        2s magic "SD"   B version (1)   B bits_per_coeff
        I  gop_id       H T  H H  H W   H num_chunks   H n_kept
        I  kept_coeffs  I packet_bits   I iq_length    f dc_mean
        H * n_kept      chunk indices in send order
        f * 2 n_kept    quantizer (lo, hi) per kept chunk
        I  CRC-32
    """

    gop_id: int
    dims: Tuple[int, int, int]
    bits_per_coeff: int
    num_chunks: int
    kept_chunks: Tuple[int, ...]
    ranges: Tuple[Tuple[float, float], ...]
    kept_coeffs: int
    packet_bits: int
    iq_length: int
    dc_mean: float

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "kept_chunks", tuple(int(i) for i in self.kept_chunks))
        r = np.asarray(self.ranges, dtype=np.float32).reshape(-1, 2)
        object.__setattr__(self, "ranges", tuple((float(a), float(b)) for a, b in r))
        object.__setattr__(self, "dc_mean", float(np.float32(self.dc_mean)))

    iq_padded = False

    @property
    def info_bits(self) -> int:
        return self.kept_coeffs * self.bits_per_coeff

    @property
    def packet_sizes(self) -> Tuple[int, ...]:
        full, rest = divmod(self.info_bits, self.packet_bits)
        return (self.packet_bits,) * full + ((rest,) if rest else ())


def encode_digital_meta(meta: DigitalMeta) -> np.ndarray:
    k = len(meta.kept_chunks)
    if len(meta.ranges) != k:
        raise MetadataError("one quantizer range per kept chunk")
    t, h, w = meta.dims
    body = _HEAD.pack(_MAGIC, _VERSION, meta.bits_per_coeff, meta.gop_id, t, h, w,
                      meta.num_chunks, k, meta.kept_coeffs, meta.packet_bits,
                      meta.iq_length, meta.dc_mean)
    body += struct.pack(f"<{k}H", *meta.kept_chunks)
    body += struct.pack(f"<{2 * k}f", *np.ravel(meta.ranges))
    return bytes_to_bits(seal(body))


def decode_digital_meta(bits) -> DigitalMeta:
    body = unseal(bits_to_bytes(bits))
    if len(body) < _HEAD.size:
        raise MetadataError("metadata truncated")
    (magic, version, b, gop_id, t, h, w, num_chunks, k, kept, packet_bits, iq_length,
     dc) = _HEAD.unpack_from(body)
    if magic != _MAGIC or version != _VERSION:
        raise MetadataError("not a digital metadata block")
    if len(body) != _HEAD.size + 10 * k:
        raise MetadataError("metadata length does not match kept chunk count")
    order = struct.unpack_from(f"<{k}H", body, _HEAD.size)
    ranges = np.reshape(struct.unpack_from(f"<{2 * k}f", body, _HEAD.size + 2 * k), (k, 2))
    return DigitalMeta(gop_id, (t, h, w), b, num_chunks, order, ranges, kept, packet_bits,
                       iq_length, dc)


# --- budget -----------------------------------------------------------------

def coded_symbols(info_bits: int, packet_bits: int) -> int:
    """16-QAM symbols for ``info_bits`` split into terminated packets."""
    n_packets = -(-info_bits // packet_bits) if info_bits else 0
    coded = CODE.n_out * (info_bits + CODE.tail_bits * n_packets)
    return -(-coded // BITS_PER_SYMBOL)


def info_budget(symbols: int, packet_bits: int) -> int:
    """Largest information bit count whose coded packets fit in ``symbols``."""
    hi = symbols * BITS_PER_SYMBOL // CODE.n_out
    lo = 0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if coded_symbols(mid, packet_bits) <= symbols:
            lo = mid
        else:
            hi = mid - 1
    return lo


def _ranges(rows: np.ndarray) -> np.ndarray:
    lo = rows.min(axis=1).astype(np.float32)
    hi = rows.max(axis=1).astype(np.float32)
    flat = hi <= lo
    hi[flat] = lo[flat] + np.maximum(np.abs(lo[flat]) * 1e-6, 1e-6).astype(np.float32)
    return np.stack([lo, hi], axis=1)


def predicted_distortion(rows: np.ndarray, order, ranges, kept: int, bits: int) -> float:
    """Squared error summed over coefficients: dropped energy plus step^2 / 12."""
    n = rows.shape[1]
    sent = np.asarray(order)
    full, part = divmod(kept, n)
    energy = float(np.sum(rows ** 2))
    kept_energy = float(np.sum(rows[sent[:full]] ** 2))
    steps = (ranges[:, 1] - ranges[:, 0]).astype(np.float64) / (1 << bits)
    quant = float(np.sum(n * steps[:full] ** 2)) / 12
    if part:
        kept_energy += float(np.sum(rows[sent[full], :part] ** 2))
        quant += part * steps[full] ** 2 / 12
    return energy - kept_energy + quant


def plan(rows: np.ndarray, budget_bits: Optional[int], bits_per_coeff: Optional[int]):
    """Pick (bits, send order, ranges, kept coefficient count).

    ``budget_bits=None`` keeps everything at ``bits_per_coeff``.
    """
    n_chunks, n = rows.shape
    order = np.argsort(-np.sum(rows ** 2, axis=1), kind="stable")
    ranges_all = _ranges(rows)
    if budget_bits is None:
        b = bits_per_coeff or 10
        return b, order, ranges_all[order], n_chunks * n
    candidates = [bits_per_coeff] if bits_per_coeff else range(MIN_BITS, MAX_BITS + 1)
    best = None
    for b in candidates:
        kept = min(budget_bits // b, n_chunks * n)
        if kept == 0:
            continue
        d = predicted_distortion(rows, order, ranges_all[order], kept, b)
        if best is None or d < best[0]:
            best = (d, b, kept)
    if best is None:
        raise ValueError("symbol budget too small for a single coefficient")
    _, b, kept = best
    n_sent = -(-kept // n)
    return b, order[:n_sent], ranges_all[order[:n_sent]], kept


# --- transmit / receive -----------------------------------------------------

@dataclass(frozen=True)
class DigitalTx:
    burst: np.ndarray
    meta: DigitalMeta
    info: np.ndarray  # transmitted information bits


def encode_digital(gop: Gop, gop_id: int = 0, opts: DigitalOptions = DigitalOptions()
                   ) -> DigitalTx:
    pixels = gop.to_array()
    dims = pixels.shape
    dc = float(np.float32(np.mean(pixels)))
    rows = np.stack([c.samples for c in chunk(dct3(pixels - dc), opts.num_chunks)])
    target = analog_iq_length(dims, opts.num_chunks, opts.hadamard_order)
    budget = info_budget(target, opts.packet_bits) if opts.bandwidth_parity else None
    b, order, ranges, kept = plan(rows, budget, opts.bits_per_coeff)
    coeffs = rows[order].ravel()[:kept]
    n = rows.shape[1]
    lo = np.repeat(ranges[:, 0].astype(np.float64), n)[:kept]
    hi = np.repeat(ranges[:, 1].astype(np.float64), n)[:kept]
    info = indices_to_bits(quantize_indices(coeffs, b, lo, hi), b)
    meta = DigitalMeta(gop_id, dims, b, opts.num_chunks, order, ranges, kept,
                       opts.packet_bits, 0, dc)
    coded = np.concatenate([conv_encode(p) for p in _split(info, meta.packet_sizes)])
    symbols = qam16_map(coded)
    meta = DigitalMeta(gop_id, dims, b, opts.num_chunks, order, ranges, kept,
                       opts.packet_bits, symbols.size, dc)
    frame = build_burst(encode_digital_meta(meta), IqPayload(symbols), opts.phy.ofdm)
    return DigitalTx(frame.samples, meta, info)


def _split(bits: np.ndarray, sizes) -> list:
    return np.split(bits, np.cumsum(sizes)[:-1]) if len(sizes) else []


def decode_info(symbols, meta: DigitalMeta) -> np.ndarray:
    """Hard 16-QAM decisions then hard Viterbi, packet by packet."""
    coded = qam16_demap(symbols)
    sizes = meta.packet_sizes
    lengths = [CODE.coded_length(s) for s in sizes]
    need = sum(lengths)
    if coded.size < need:
        raise MetadataError(f"payload has {coded.size} coded bits, metadata implies {need}")
    parts = _split(coded[:need], lengths)
    out = []
    full = [p for p, s in zip(parts, sizes) if s == meta.packet_bits]
    if full:
        out.append(viterbi_decode(np.stack(full)).ravel())
    if len(full) < len(parts):
        out.append(viterbi_decode(parts[-1]))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.uint8)


def rebuild(meta: DigitalMeta, info) -> Gop:
    """Dequantize the kept coefficients; everything not sent is zero."""
    b, kept = meta.bits_per_coeff, meta.kept_coeffs
    n = chunk_length(int(np.prod(meta.dims)), meta.num_chunks)
    ranges = np.asarray(meta.ranges, dtype=np.float64)
    lo = np.repeat(ranges[:, 0], n)[:kept]
    hi = np.repeat(ranges[:, 1], n)[:kept]
    values = dequantize_indices(bits_to_indices(info[: kept * b], b), b, lo, hi)
    rows = np.zeros((meta.num_chunks, n))
    sent = np.zeros(len(meta.kept_chunks) * n)
    sent[:kept] = values
    rows[list(meta.kept_chunks)] = sent.reshape(-1, n)
    chunks = [Chunk(i, rows[i], 0.0) for i in range(meta.num_chunks)]
    cube = idct3(dechunk(chunks, meta.dims)).to_array()
    return Gop.from_array(cube + meta.dc_mean)


def receive_digital(rx_samples, tx: DigitalTx, config: DigitalOptions = DigitalOptions()
                    ) -> Tuple[Gop, Dict]:
    """Decode received samples of ``tx``'s burst. Returns (reconstruction, report row).

    A missed preamble or a header that fails its checks loses the GOP: it
    comes back as flat gray and its bit error rate is recorded as 0.5.
    """
    dims = tx.meta.dims
    row = {"sync_failure": False, "meta_crc_failure": False, "lost": False,
           "measured_snr_db": float("nan"), "ber": 0.5, "bits_per_coeff": tx.meta.bits_per_coeff,
           "payload_symbols": tx.meta.iq_length}
    try:
        rx = receive_burst(rx_samples, decode_digital_meta, config.phy)
    except SyncError:
        row.update(sync_failure=True, lost=True)
        return gray_gop(dims), row
    except MetadataError:
        row.update(meta_crc_failure=True, lost=True)
        return gray_gop(dims), row
    info = decode_info(rx.payload.symbols, rx.meta)
    if rx.pilot_noise is not None:
        row["measured_snr_db"] = rx.pilot_noise.snr_db
    row["ber"] = float(np.mean(info != tx.info)) if info.size else 0.0
    return rebuild(rx.meta, info), row


def run_digital_chain(gop: Gop, channel: ChannelParams,
                      config: DigitalOptions = DigitalOptions(), gop_id: int = 0
                      ) -> Tuple[Gop, Dict]:
    """Send one GOP through the digital baseline. Returns (reconstruction, report row)."""
    tx = encode_digital(gop, gop_id, config)
    return receive_digital(over_the_air(tx.burst, channel), tx, config)


def clean_psnr(gop: Gop, config: DigitalOptions = DigitalOptions()) -> float:
    """Mean PSNR of the quantized GOP with no channel errors (the ceiling)."""
    tx = encode_digital(gop, 0, config)
    out = rebuild(tx.meta, tx.info)
    return float(np.mean([compute_psnr(a, b).psnr_db for a, b in zip(gop.frames, out.frames)]))
