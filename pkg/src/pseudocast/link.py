"""Burst framing shared by both schemes, and the pseudo-analog GOP codec.

A burst carries, after the preamble:

* a 2-symbol SIGNAL field: 16-bit metadata byte count plus a 10-bit check,
  rate-1/3 coded (26 + 6 tail bits -> 96 coded bits = 2 x 48 carriers);
* the metadata block, rate-1/3 coded, BPSK;
* the payload symbols.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .digital.fec import CODE, conv_encode, viterbi_decode
from .ofdm import IqPayload, OfdmConfig, OfdmFrame, allocate_carriers, map_iq, modulate, \
    symbols_needed, unmap_iq
from .channel import ChannelParams, apply_channel
from .power import (DEFAULT_POWER, MetadataError, NoiseEstimate, PacketMeta, allocate_gains,
                    decode_meta, encode_meta, mmse_decode, normalize_packet, scale)
from .receiver import (SyncResult, correct_cfo, demodulate, detect_frame, equalize,
                       estimate_cfo, estimate_channel, header_soft_bits, long_training,
                       pilot_noise, serialize, smooth_channel)
from .source import Gop
from .transform import Chunk, WhitenedPayload, chunk, chunk_length, chunk_padding, dct3, \
    dechunk, idct3, spread, unspread

log = logging.getLogger(__name__)

SIGNAL_INFO_BITS = 26
SIGNAL_SYMBOLS = 2
GRAY_LEVEL = 128.0
LEAD_SILENCE = 200
TAIL_SILENCE = 100


class SyncError(RuntimeError):
    """No frame found in the received samples."""


@dataclass(frozen=True)
class PhyOptions:
    ofdm: OfdmConfig = OfdmConfig()
    threshold: float = 0.15
    window: int = 48
    min_corr: float = 0.45
    search: int = 96
    backoff: int = 3
    pilot_window: int = 4
    channel_taps: Optional[int] = 16  # None keeps the raw per-carrier estimate


@dataclass(frozen=True)
class RxResult:
    meta: object
    payload: IqPayload
    sync: SyncResult
    cfo_hz: float
    noise: NoiseEstimate  # long-training estimate mapped to the equalized payload
    pilot_noise: Optional[NoiseEstimate]


def _signal_bits(n_bytes: int) -> np.ndarray:
    if not 0 < n_bytes < 1 << 16:
        raise MetadataError("metadata size out of range for the SIGNAL field")
    length = n_bytes.to_bytes(2, "little")
    check = zlib.crc32(length) & 0x3FF
    word = (n_bytes << 10) | check
    return ((word >> np.arange(SIGNAL_INFO_BITS - 1, -1, -1)) & 1).astype(np.uint8)


def _parse_signal(bits) -> int:
    word = int(np.asarray(bits, dtype=np.int64) @ (1 << np.arange(SIGNAL_INFO_BITS - 1, -1, -1)))
    n_bytes, check = word >> 10, word & 0x3FF
    if n_bytes == 0 or zlib.crc32(n_bytes.to_bytes(2, "little")) & 0x3FF != check:
        raise MetadataError("SIGNAL field check failed")
    return n_bytes


def header_bits(meta_bits) -> np.ndarray:
    meta_bits = np.asarray(meta_bits, dtype=np.uint8)
    return np.concatenate([conv_encode(_signal_bits(meta_bits.size // 8)), conv_encode(meta_bits)])


def build_burst(meta_bits, payload: IqPayload, config: OfdmConfig) -> OfdmFrame:
    hdr = header_bits(meta_bits)
    freq = allocate_carriers(payload, hdr, config)
    return modulate(freq, config, n_header=symbols_needed(hdr.size, config))


def over_the_air(burst, channel: ChannelParams, lead: int = LEAD_SILENCE,
                 tail: int = TAIL_SILENCE) -> np.ndarray:
    """Pad a burst with silence and pass it through the channel.

    Noise power is set from the burst itself, so the padding does not change
    the SNR. Both schemes go through here, which keeps their noise sequences
    identical for a given channel seed.
    """
    x = np.asarray(burst, dtype=np.complex128)
    power = float(np.mean(np.abs(x) ** 2))
    padded = np.concatenate([np.zeros(lead), x, np.zeros(tail)])
    return apply_channel(padded, channel, signal_power=power)


def receive_burst(samples, parse_meta: Callable, opts: PhyOptions = PhyOptions()) -> RxResult:
    """Synchronize, equalize and pull metadata plus payload out of one burst.

    Raises :class:`SyncError` when no preamble is found and
    :class:`~pseudocast.power.MetadataError` when the header does not decode.
    """
    cfg = opts.ofdm
    r = np.asarray(samples, dtype=np.complex128)
    sync = detect_frame(r, cfg, opts.threshold, opts.search, opts.window, opts.min_corr)
    if not sync.detected:
        raise SyncError("no preamble detected")
    cfo = estimate_cfo(r, sync, cfg)
    r = correct_cfo(r, cfo, cfg.sample_rate)
    bo = opts.backoff
    est = estimate_channel(long_training(r, sync, cfg, bo), cfg)
    if opts.channel_taps:
        est = smooth_channel(est, cfg, opts.channel_taps)

    def symbols(count, first):
        try:
            y = demodulate(r, sync, cfg, count, first, bo)
        except ValueError as exc:
            raise SyncError(str(exc)) from exc
        return equalize(y, est, cfg, opts.pilot_window)

    sig = header_soft_bits(symbols(SIGNAL_SYMBOLS, 0), est, cfg)
    n_bytes = _parse_signal(viterbi_decode(sig, soft=True))
    n_coded = CODE.coded_length(8 * n_bytes)
    n_meta_sym = symbols_needed(n_coded, cfg)
    soft = header_soft_bits(symbols(n_meta_sym, SIGNAL_SYMBOLS), est, cfg)[:n_coded]
    meta = parse_meta(viterbi_decode(soft, soft=True))
    n_pay = symbols_needed(meta.iq_length, cfg)
    pay = symbols(n_pay, SIGNAL_SYMBOLS + n_meta_sym)
    payload = serialize(pay, cfg, meta)

    data = cfg.data_bins
    good = ~est.erased[data]
    inv = np.mean(1.0 / np.abs(est.h[data][good]) ** 2) if np.any(good) else np.inf
    sigma = est.noise.sigma_sq * inv
    noise = NoiseEstimate.from_sigma(sigma, getattr(meta, "power_budget", DEFAULT_POWER))
    pilots = pilot_noise(pay, cfg)
    if pilots is not None and np.isfinite(noise.gamma):
        log.debug("noise estimate: long training %.2f dB, pilots %.2f dB",
                  noise.snr_db, pilots.snr_db)
    return RxResult(meta, payload, sync, cfo, noise, pilots)


# --- pseudo-analog codec ---------------------------------------------------

@dataclass(frozen=True)
class AnalogOptions:
    num_chunks: int = 64
    hadamard_order: int = 64
    power_budget: float = DEFAULT_POWER
    phy: PhyOptions = PhyOptions()


@dataclass(frozen=True)
class AnalogTx:
    frame: OfdmFrame
    meta: PacketMeta
    real_samples: np.ndarray  # whitened, scaled samples handed to map_iq


def encode_gop(gop: Gop, gop_id: int = 0, opts: AnalogOptions = AnalogOptions()) -> AnalogTx:
    pixels = gop.to_array()
    dims = pixels.shape
    _, dc = normalize_packet(pixels.ravel())
    dc = float(np.float32(dc))
    chunks = chunk(dct3(pixels - dc), opts.num_chunks)
    meta = PacketMeta(gop_id, dims, [c.variance for c in chunks], [c.mean for c in chunks], dc,
                      opts.power_budget, opts.hadamard_order,
                      chunk_pad=chunk_padding(dims, opts.num_chunks))
    centered = [Chunk(c.index, c.samples - m, c.variance)
                for c, m in zip(chunks, meta.chunk_means)]
    n = len(chunks[0].samples)
    gains = allocate_gains(meta.chunk_variances, [n] * len(chunks), meta.power_budget)
    white = spread(scale(centered, gains), opts.hadamard_order)
    iq = map_iq(white.samples)
    meta = replace(meta, whiten_pad=white.pad, payload_len=white.samples.size,
                   carrier_pad=symbols_needed(iq.symbols.size, opts.phy.ofdm)
                   * opts.phy.ofdm.n_data - iq.symbols.size)
    frame = build_burst(encode_meta(meta), iq, opts.phy.ofdm)
    return AnalogTx(frame, meta, white.samples)


def reconstruct(meta: PacketMeta, real_samples, noise: NoiseEstimate) -> Gop:
    """Unwhiten, MMSE-decode and invert the transform."""
    real = np.asarray(real_samples, dtype=np.float64)[: meta.payload_len]
    x = unspread(WhitenedPayload(real, meta.hadamard_order, real.size - meta.whiten_pad))
    k = meta.num_chunks
    gains = allocate_gains(meta.chunk_variances, [x.size // k] * k, meta.power_budget)
    est = mmse_decode(x, gains, meta.chunk_variances, noise)
    chunks = [Chunk(c.index, c.samples + m, c.variance) for c, m in zip(est, meta.chunk_means)]
    cube = idct3(dechunk(chunks, meta.dims)).to_array()
    return Gop.from_array(cube + meta.dc_mean)


def decode_gop(samples, opts: AnalogOptions = AnalogOptions()):
    """Receive one burst and rebuild its GOP. Returns (Gop, RxResult)."""
    rx = receive_burst(samples, decode_meta, opts.phy)
    return reconstruct(rx.meta, unmap_iq(rx.payload), rx.noise), rx


def analog_iq_length(dims, num_chunks: int = 64, hadamard_order: int = 64) -> int:
    """Complex payload symbols the pseudo-analog codec spends on a GOP of ``dims``."""
    n = chunk_length(int(np.prod(dims)), num_chunks) * num_chunks
    blocks = -(-n // hadamard_order)
    return -(-blocks * hadamard_order // 2)


def gray_gop(dims) -> Gop:
    return Gop.from_array(np.full(dims, GRAY_LEVEL))
