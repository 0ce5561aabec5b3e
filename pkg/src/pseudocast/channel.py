"""Channel impairments: multipath FIR, carrier frequency offset, phase noise, AWGN."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .power import NoiseEstimate

SNR_CAP_DB = 60.0
MIN_PILOT_OBS = 8


@dataclass(frozen=True)
class ChannelParams:
    """``snr_db=None`` disables noise entirely."""

    snr_db: Optional[float] = None
    taps: Tuple[complex, ...] = (1.0,)
    cfo_hz: float = 0.0
    phase_noise_std: float = 0.0
    seed: int = 0
    sample_rate: float = 20e6

    def __post_init__(self):
        taps = tuple(complex(t) for t in np.atleast_1d(self.taps))
        if not taps:
            raise ValueError("at least one channel tap is required")
        object.__setattr__(self, "taps", taps)
        if self.phase_noise_std < 0:
            raise ValueError("phase noise std must be non-negative")

    @property
    def gamma(self) -> float:
        return np.inf if self.snr_db is None else 10 ** (self.snr_db / 10)


def apply_channel(samples, params: ChannelParams, signal_power: Optional[float] = None
                  ) -> np.ndarray:
    """y = rotate(taps * x) + w, with output length len(x) + len(taps) - 1.

    Noise power per complex sample is the received signal power divided by
    gamma. The signal power is measured over ``samples`` unless given, which
    lets a caller pad a burst with silence without changing its SNR.
    """
    x = np.asarray(samples, dtype=np.complex128)
    gamma = params.gamma
    if not gamma > 0:
        raise ValueError(f"SNR must be positive in linear terms, got {params.snr_db} dB")
    y = np.convolve(x, np.asarray(params.taps))
    noise_rng, phase_rng = (np.random.default_rng(s)
                            for s in np.random.SeedSequence(params.seed).spawn(2))
    if signal_power is None:
        signal_power = float(np.mean(np.abs(y) ** 2)) if y.size else 0.0
    n = np.arange(y.size)
    angle = 2 * np.pi * params.cfo_hz * n / params.sample_rate
    if params.phase_noise_std > 0:
        angle = angle + np.cumsum(params.phase_noise_std * phase_rng.standard_normal(y.size))
    if params.cfo_hz or params.phase_noise_std:
        y = y * np.exp(1j * angle)
    if np.isfinite(gamma):
        y = y + complex_noise(noise_rng, y.size, signal_power / gamma)
    return y


def complex_noise(rng: np.random.Generator, n: int, power: float) -> np.ndarray:
    """Circular complex Gaussian noise with E|w|^2 = power.

    Draws are interleaved (re, im) so a shorter sequence is a prefix of a
    longer one from the same seed.
    """
    w = rng.standard_normal((n, 2))
    return np.sqrt(power / 2) * (w[:, 0] + 1j * w[:, 1])


def rayleigh_taps(n_taps: int, decay: float, rng: np.random.Generator) -> np.ndarray:
    """Block-fading taps with an exponential power-delay profile, unit total power."""
    profile = np.exp(-decay * np.arange(n_taps))
    profile /= profile.sum()
    return complex_noise(rng, n_taps, 1.0) * np.sqrt(profile)


def measure_snr(rx_pilots, known_pilots, channel_est) -> NoiseEstimate:
    """Noise power from pilot residuals; gamma capped at 60 dB."""
    rx = np.asarray(rx_pilots, dtype=np.complex128).ravel()
    ref = (np.asarray(known_pilots, dtype=np.complex128)
           * np.asarray(channel_est, dtype=np.complex128))
    ref = np.broadcast_to(ref, np.shape(rx_pilots)).ravel()
    if rx.size != ref.size:
        raise ValueError("pilot observation and reference lengths differ")
    if rx.size < MIN_PILOT_OBS:
        raise ValueError(f"need at least {MIN_PILOT_OBS} pilot observations, got {rx.size}")
    sigma_sq = float(np.mean(np.abs(rx - ref) ** 2)) / 2
    signal = float(np.mean(np.abs(ref) ** 2)) / 2
    cap = 10 ** (SNR_CAP_DB / 10)
    gamma = cap if sigma_sq <= signal / cap else signal / sigma_sq
    return NoiseEstimate(sigma_sq, gamma)
