"""OFDM receive side: frame detection, CFO estimation, channel estimation, equalization."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import measure_snr
from .ofdm import (LTS_GUARD, STS_PERIOD, STS_REPEATS, IqPayload, OfdmConfig,
                   lts_freq, lts_time)
from .power import NoiseEstimate

log = logging.getLogger(__name__)

ERASURE_LEVEL = 1e-6
STS_LEN = STS_PERIOD * STS_REPEATS
LTS_START = STS_LEN + LTS_GUARD  # offset of the first long training symbol


@dataclass(frozen=True)
class SyncResult:
    frame_start: int
    coarse_metric_peak: float
    cfo_hz: float
    detected: bool


@dataclass(frozen=True)
class ChannelEstimate:
    h: np.ndarray
    noise: NoiseEstimate
    used: np.ndarray  # bool mask over FFT bins

    @property
    def erased(self) -> np.ndarray:
        return self.used & (np.abs(self.h) < ERASURE_LEVEL)


def timing_metric(samples, period: int = STS_PERIOD, window: int = 1):
    """Schmidl & Cox metric M(d) = |P(d)|^2 / R(d)^2 and its correlator P(d).

    With ``window > 1`` both P and R are summed over ``window`` consecutive
    positions before the ratio is taken (same lag, longer accumulation).
    Arrays have length len(samples) - 2 * period - window + 2.
    """
    r = np.asarray(samples, dtype=np.complex128)
    L = period
    n = r.size - 2 * L + 1
    if n < window:
        return np.zeros(0), np.zeros(0, dtype=np.complex128)
    prod = np.concatenate([[0], np.cumsum(np.conj(r[:-L]) * r[L:])])
    energy = np.concatenate([[0], np.cumsum(np.abs(r) ** 2)])
    d = np.arange(n)
    p = prod[d + L] - prod[d]
    rr = energy[d + 2 * L] - energy[d + L]
    if window > 1:
        k = np.ones(window)
        p = np.convolve(p, k, mode="valid")
        rr = np.convolve(rr, k, mode="valid")
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(rr > 0, np.abs(p) ** 2 / rr ** 2, 0.0)
    return np.clip(m, 0.0, 1.0), p


def _runs(mask: np.ndarray, max_gap: int = 0):
    """(start, stop) of True runs; runs separated by <= max_gap samples are merged."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    runs = []
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        if runs and a - runs[-1][1] <= max_gap:
            runs[-1] = (runs[-1][0], b)
        else:
            runs.append((a, b))
    return runs


def _lts_score(samples: np.ndarray, lo: int, hi: int, config: OfdmConfig,
               shift_hz: float) -> np.ndarray:
    """Normalized c(t) + c(t + N) over t in [lo, hi), window derotated by shift_hz.

    1.0 means both long training symbols match exactly (Cauchy-Schwarz bound).
    """
    N = config.fft_size
    seg = samples[lo:hi + 2 * N]
    n = np.arange(lo, lo + seg.size)
    seg = seg * np.exp(-2j * np.pi * shift_hz * n / config.sample_rate)
    ref = lts_time(config)
    c = np.abs(np.correlate(seg, ref, mode="valid"))
    e = np.sqrt(np.convolve(np.abs(seg) ** 2, np.ones(N), mode="valid"))
    k = hi - lo
    den = np.linalg.norm(ref) * (e[:k] + e[N:N + k])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, (c[:k] + c[N:N + k]) / den, 0.0)


def detect_frame(samples, config: OfdmConfig, threshold: float = 0.8,
                 search: int = 96, window: int = 1, min_corr: float = 0.5) -> SyncResult:
    """Find the preamble start.

    Runs of the timing metric above ``threshold`` are visited in time order.
    For each, the plateau midpoint (64 samples after the short training
    starts, less half the accumulation window) gives a coarse position, and
    cross-correlation with the known long training pins the exact sample. The
    cross-correlation is tried under each CFO hypothesis the short-training
    phase cannot tell apart (multiples of fs / 16); a run is accepted when its
    best normalized correlation reaches ``min_corr``.
    """
    r = np.asarray(samples, dtype=np.complex128)
    miss = SyncResult(0, 0.0, 0.0, False)
    if r.size < config.preamble_len:
        return miss
    m, p = timing_metric(r, STS_PERIOD, window)
    alias = config.sample_rate / STS_PERIOD
    last = r.size - 2 * config.fft_size

    def best_lts(center, half, cfo):
        t_lo, t_hi = max(center - half, 0), min(center + half + 1, last)
        if t_hi <= t_lo:
            return center, 0.0
        scores = np.array([_lts_score(r, t_lo, t_hi, config, cfo + k * alias)
                           for k in (-1, 0, 1)]).max(axis=0)
        i = int(np.argmax(scores))
        return t_lo + i, float(scores[i])

    for lo, hi in _runs(m >= threshold, STS_PERIOD):
        mid = (lo + hi - 1) // 2
        cfo = float(np.angle(p[lo:hi].sum()) * config.sample_rate / (2 * np.pi * STS_PERIOD))
        coarse = mid - (STS_LEN - 2 * STS_PERIOD - window + 1) // 2
        t, score = best_lts(coarse + LTS_START, max(search, (hi - lo) // 2 + STS_PERIOD), cfo)
        if score < min_corr:
            continue
        # a window edge can catch a shifted partial match; recentre until stable
        for _ in range(4):
            t_new, score = best_lts(t, search, cfo)
            if t_new == t:
                break
            t = t_new
        start = t - LTS_START
        if start < 0 or start + config.preamble_len > r.size:
            continue
        return SyncResult(int(start), float(m[lo:hi].max()), cfo, True)
    return miss


def correct_cfo(samples, cfo_hz: float, sample_rate: float, offset: int = 0) -> np.ndarray:
    r = np.asarray(samples, dtype=np.complex128)
    n = np.arange(offset, offset + r.size)
    return r * np.exp(-2j * np.pi * cfo_hz * n / sample_rate)


def _lts_halves(r: np.ndarray, start: int, config: OfdmConfig):
    a = start + LTS_START
    N = config.fft_size
    return (np.fft.fft(r[a:a + N], norm="ortho"),
            np.fft.fft(r[a + N:a + 2 * N], norm="ortho"))


def _integer_offset(y: np.ndarray, config: OfdmConfig, max_bins: int = 8) -> int:
    """Integer carrier shift maximizing differential correlation with the long training."""
    N = config.fft_size
    known = lts_freq(config)
    k = np.arange(-26, 26) % N
    k1 = (k + 1) % N
    ok = (known[k] != 0) & (known[k1] != 0)
    ref = known[k][ok] * np.conj(known[k1][ok])
    best, best_val = 0, -1.0
    for shift in range(-max_bins, max_bins + 1):
        ks, ks1 = (k[ok] + shift) % N, (k1[ok] + shift) % N
        val = abs(np.sum(y[ks] * np.conj(y[ks1]) * np.conj(ref)))
        if val > best_val:
            best, best_val = shift, val
    return best


def estimate_cfo(samples, sync: SyncResult, config: OfdmConfig) -> float:
    """Combined CFO estimate in Hz.

    1. fine: phase of the lag-16 short-training correlation, unambiguous
       within +-fs/32;
    2. coarse: integer carrier shift of the long training spectrum;
    3. residual: phase of the lag-64 long-training correlation.
    """
    if not sync.detected:
        raise ValueError("cannot estimate CFO without a detected frame")
    r = np.asarray(samples, dtype=np.complex128)
    s, fs, N = sync.frame_start, config.sample_rate, config.fft_size
    seg = r[s:s + config.preamble_len]
    L = STS_PERIOD
    fine = np.angle(np.sum(np.conj(seg[:STS_LEN - L]) * seg[L:STS_LEN])) * fs / (2 * np.pi * L)
    seg1 = correct_cfo(seg, fine, fs)
    y1, y2 = _lts_halves(seg1, 0, config)
    coarse = _integer_offset((y1 + y2) / 2, config) * config.subcarrier_spacing
    seg2 = correct_cfo(seg1, coarse, fs)
    a = STS_LEN
    resid_p = np.sum(np.conj(seg2[a:a + LTS_GUARD + N]) * seg2[a + N:a + LTS_GUARD + 2 * N])
    resid = np.angle(resid_p) * fs / (2 * np.pi * N)
    return float(fine + coarse + resid)


def estimate_channel(long_training_rx, config: OfdmConfig) -> ChannelEstimate:
    """Per-carrier gains from the two received long training symbols (2N samples)."""
    rx = np.asarray(long_training_rx, dtype=np.complex128)
    N = config.fft_size
    if rx.size != 2 * N:
        raise ValueError(f"expected {2 * N} long training samples, got {rx.size}")
    y1 = np.fft.fft(rx[:N], norm="ortho")
    y2 = np.fft.fft(rx[N:], norm="ortho")
    known = lts_freq(config)
    used = np.zeros(N, dtype=bool)
    used[config.used_bins] = True
    h = np.zeros(N, dtype=np.complex128)
    h[used] = (y1[used] + y2[used]) / 2 / known[used]
    # E|y1 - y2|^2 = 2 sigma_c^2, and sigma_c^2 is split over two real dimensions
    sigma_sq = float(np.mean(np.abs(y1[used] - y2[used]) ** 2)) / 4
    sig = float(np.mean(np.abs(h[used]) ** 2)) / 2
    gamma = np.inf if sigma_sq == 0 else sig / sigma_sq
    return ChannelEstimate(h, NoiseEstimate(sigma_sq, gamma), used)


def smooth_channel(est: ChannelEstimate, config: OfdmConfig, taps: int = 0) -> ChannelEstimate:
    """Least-squares fit of H to an impulse response of ``taps`` samples.

    Exact for any channel (plus FFT-window backoff) shorter than ``taps``, and
    cuts estimation noise by roughly taps / (used carriers). ``taps=0`` means
    the cyclic prefix length. The noise figure is carried over unchanged.
    """
    L = taps or config.cp_len
    N = config.fft_size
    k = np.flatnonzero(est.used & ~est.erased)
    if L >= k.size:
        return est
    basis = np.exp(-2j * np.pi * np.outer(k, np.arange(L)) / N)
    coef, *_ = np.linalg.lstsq(basis, est.h[k], rcond=None)
    h = np.zeros_like(est.h)
    h[est.used] = (np.exp(-2j * np.pi * np.outer(np.flatnonzero(est.used), np.arange(L)) / N)
                   @ coef)
    return ChannelEstimate(h, est.noise, est.used)


def long_training(samples, sync: SyncResult, config: OfdmConfig, backoff: int = 0):
    a = sync.frame_start - backoff + LTS_START
    return np.asarray(samples)[a:a + 2 * config.fft_size]


def demodulate(samples, sync: SyncResult, config: OfdmConfig, n_symbols: int,
               first_symbol: int = 0, backoff: int = 0) -> np.ndarray:
    """Strip cyclic prefixes and FFT ``n_symbols`` symbols following the preamble.

    ``backoff`` moves the FFT window that many samples into the cyclic prefix.
    """
    r = np.asarray(samples, dtype=np.complex128)
    S, N = config.symbol_len, config.fft_size
    start = sync.frame_start + config.preamble_len + first_symbol * S - backoff
    end = start + n_symbols * S
    if start < 0 or end > r.size:
        raise ValueError(
            f"need samples [{start}, {end}) for {n_symbols} symbols, have {r.size}"
        )
    block = r[start:end].reshape(n_symbols, S)[:, config.cp_len:]
    return np.fft.fft(block, axis=1, norm="ortho")


def equalize(symbols, est: ChannelEstimate, config: OfdmConfig,
             pilot_window: int = 0) -> np.ndarray:
    """Divide by H, then remove the common phase error seen on the pilots.

    The phase is the least-squares fit over the pilots of each symbol, pooled
    over +-``pilot_window`` neighbouring symbols. Erased carriers come out as 0.
    """
    y = np.atleast_2d(np.asarray(symbols, dtype=np.complex128))
    h = est.h
    good = est.used & ~est.erased
    z = np.zeros_like(y)
    z[:, good] = y[:, good] / h[good]
    pb = config.pilot_bins
    w = np.abs(h[pb]) ** 2
    corr = np.sum(z[:, pb] * np.conj(config.pilots) * w, axis=1)
    if pilot_window > 0:
        c = np.concatenate([[0], np.cumsum(corr)])
        i = np.arange(corr.size)
        lo = np.maximum(i - pilot_window, 0)
        hi = np.minimum(i + pilot_window + 1, corr.size)
        corr = c[hi] - c[lo]
    if np.any(corr != 0):
        z *= np.exp(-1j * np.angle(corr))[:, None]
    return z


def header_soft_bits(equalized, est: ChannelEstimate, config: OfdmConfig) -> np.ndarray:
    """BPSK soft values (positive means bit 0) weighted by carrier SNR."""
    z = np.atleast_2d(equalized)[:, config.data_bins]
    return (z.real * np.abs(est.h[config.data_bins]) ** 2).ravel()


def serialize(symbols, config: OfdmConfig, meta) -> IqPayload:
    """Drop pilots and collect data carriers in allocation order.

    ``meta`` supplies ``iq_length`` and ``iq_padded``.
    """
    y = np.atleast_2d(np.asarray(symbols, dtype=np.complex128))
    need = -(-meta.iq_length // config.n_data)
    if y.shape[0] != need:
        raise ValueError(f"metadata implies {need} payload symbols, got {y.shape[0]}")
    values = y[:, config.data_bins].ravel()[: meta.iq_length]
    return IqPayload(values, bool(meta.iq_padded))


def pilot_noise(equalized, config: OfdmConfig) -> Optional[NoiseEstimate]:
    """Report-only SNR from equalized pilots against their per-carrier average."""
    z = np.atleast_2d(equalized)[:, config.pilot_bins]
    if z.size < 8:
        return None
    h = np.mean(z * np.conj(config.pilots), axis=0)
    return measure_snr(z, config.pilots, h)
