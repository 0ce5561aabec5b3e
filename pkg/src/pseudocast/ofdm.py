"""OFDM transmit side: I/Q mapping, preamble, carrier allocation, IFFT + cyclic prefix.

Numerology follows the 802.11a 20 MHz layout: 64-point FFT, 16-sample cyclic
prefix, 48 data carriers and 4 pilots at -21, -7, +7, +21. Pilot polarity is
fixed on every symbol (no per-symbol scrambling). All FFTs are unitary, so the
energy of a time-domain symbol equals the energy of its bins.

Burst layout::

    | short training 10x16 | guard 32 + long training 2x64 | header symbols | payload symbols |
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

DATA_CARRIERS = tuple(k for k in range(-26, 27) if k not in (0, -21, -7, 7, 21))
PILOT_CARRIERS = (-21, -7, 7, 21)
PILOT_VALUES = (1.0, 1.0, 1.0, -1.0)

# 802.11a short training seed: QPSK on every fourth carrier, period 16 in time
_STS_SEED = {
    -24: 1 + 1j, -20: -1 - 1j, -16: 1 + 1j, -12: -1 - 1j, -8: -1 - 1j, -4: 1 + 1j,
    4: -1 - 1j, 8: -1 - 1j, 12: 1 + 1j, 16: 1 + 1j, 20: 1 + 1j, 24: 1 + 1j,
}
# 802.11a long training sequence on carriers -26..26 (DC zero)
_LTS_SEQ = (1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1,
            1, 1, 1, 1, 0, 1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1,
            -1, -1, 1, -1, 1, -1, 1, 1, 1, 1)

STS_PERIOD = 16
STS_REPEATS = 10
LTS_GUARD = 32


@dataclass(frozen=True)
class OfdmConfig:
    fft_size: int = 64
    cp_len: int = 16
    data_carriers: tuple = DATA_CARRIERS
    pilot_carriers: tuple = PILOT_CARRIERS
    pilot_values: tuple = PILOT_VALUES
    sample_rate: float = 20e6
    clip_amplitude: Optional[float] = None

    def __post_init__(self):
        data, pilots = set(self.data_carriers), set(self.pilot_carriers)
        if data & pilots:
            raise ValueError("data and pilot carriers overlap")
        if 0 in data or 0 in pilots:
            raise ValueError("the DC carrier must stay unused")
        half = self.fft_size // 2
        if any(abs(k) >= half for k in data | pilots):
            raise ValueError("carrier index outside the FFT band (guard carriers)")
        if len(data) + len(pilots) > self.fft_size:
            raise ValueError("too many carriers for the FFT size")
        if len(self.pilot_values) != len(self.pilot_carriers):
            raise ValueError("one pilot value per pilot carrier")
        if not 0 < self.cp_len < self.fft_size:
            raise ValueError("cyclic prefix must be shorter than the symbol")

    @property
    def n_data(self) -> int:
        return len(self.data_carriers)

    @property
    def data_bins(self) -> np.ndarray:
        return np.asarray(self.data_carriers) % self.fft_size

    @property
    def pilot_bins(self) -> np.ndarray:
        return np.asarray(self.pilot_carriers) % self.fft_size

    @property
    def used_bins(self) -> np.ndarray:
        return np.sort(np.concatenate([self.data_bins, self.pilot_bins]))

    @property
    def pilots(self) -> np.ndarray:
        return np.asarray(self.pilot_values, dtype=np.complex128)

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def subcarrier_spacing(self) -> float:
        return self.sample_rate / self.fft_size

    @property
    def preamble_len(self) -> int:
        return STS_PERIOD * STS_REPEATS + LTS_GUARD + 2 * self.fft_size


@dataclass(frozen=True)
class IqPayload:
    symbols: np.ndarray
    padded: bool = False

    @property
    def real_length(self) -> int:
        return 2 * len(self.symbols) - int(self.padded)


@dataclass(frozen=True)
class OfdmFrame:
    samples: np.ndarray
    layout: Dict[str, int] = field(default_factory=dict)

    @property
    def n_header(self) -> int:
        return self.layout.get("n_header", 0)

    @property
    def n_payload(self) -> int:
        return self.layout.get("n_payload", 0)


def map_iq(samples) -> IqPayload:
    """Pair consecutive real samples (a, b) into a + ib; odd input gets one zero."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    padded = bool(x.size % 2)
    if padded:
        x = np.append(x, 0.0)
    return IqPayload(x[0::2] + 1j * x[1::2], padded)


def unmap_iq(payload: IqPayload) -> np.ndarray:
    sym = np.asarray(payload.symbols, dtype=np.complex128)
    out = np.empty(2 * sym.size)
    out[0::2] = sym.real
    out[1::2] = sym.imag
    return out[:-1] if payload.padded else out


def lts_freq(config: OfdmConfig) -> np.ndarray:
    """Known long training values indexed by FFT bin."""
    _require_64(config)
    bins = np.zeros(config.fft_size, dtype=np.complex128)
    for k, v in zip(range(-26, 27), _LTS_SEQ):
        bins[k % config.fft_size] = v
    return bins


def sts_freq(config: OfdmConfig) -> np.ndarray:
    _require_64(config)
    bins = np.zeros(config.fft_size, dtype=np.complex128)
    for k, v in _STS_SEED.items():
        bins[k % config.fft_size] = v * np.sqrt(13.0 / 6.0)
    return bins


def _require_64(config: OfdmConfig) -> None:
    if config.fft_size != 64:
        raise ValueError("training sequences are defined for a 64-point FFT")


def lts_time(config: OfdmConfig) -> np.ndarray:
    return np.fft.ifft(lts_freq(config), norm="ortho")


def build_preamble(config: OfdmConfig) -> np.ndarray:
    """Short training (10 x 16 samples) then guard + two long training symbols."""
    sts = np.fft.ifft(sts_freq(config), norm="ortho")[:STS_PERIOD]
    lts = lts_time(config)
    return np.concatenate([np.tile(sts, STS_REPEATS), lts[-LTS_GUARD:], lts, lts])


def symbols_needed(count: int, config: OfdmConfig) -> int:
    return -(-count // config.n_data)


def allocate_carriers(payload: IqPayload, header_bits, config: OfdmConfig) -> np.ndarray:
    """Lay out BPSK header symbols then payload symbols, pilots on every symbol.

    Returns an array of shape (n_symbols, fft_size) in FFT bin order. Bit 0 maps
    to +1, bit 1 to -1. Trailing slots of the last header and last payload
    symbol are zero.
    """
    bits = np.asarray(header_bits, dtype=np.uint8).ravel()
    values = np.asarray(payload.symbols, dtype=np.complex128).ravel()
    n_head = symbols_needed(bits.size, config)
    n_pay = symbols_needed(values.size, config)
    grid = np.zeros((n_head + n_pay, config.n_data), dtype=np.complex128)
    grid[:n_head].flat[: bits.size] = 1.0 - 2.0 * bits
    grid[n_head:].flat[: values.size] = values
    out = np.zeros((n_head + n_pay, config.fft_size), dtype=np.complex128)
    out[:, config.data_bins] = grid
    out[:, config.pilot_bins] = config.pilots
    return out


def modulate(freq_symbols, config: OfdmConfig, n_header: int = 0) -> OfdmFrame:
    """Unitary IFFT per symbol, prepend cyclic prefix, then prepend the preamble."""
    freq = np.asarray(freq_symbols, dtype=np.complex128).reshape(-1, config.fft_size)
    body = np.fft.ifft(freq, axis=1, norm="ortho")
    body = np.concatenate([body[:, -config.cp_len:], body], axis=1).ravel()
    preamble = build_preamble(config)
    samples = np.concatenate([preamble, body])
    if config.clip_amplitude is not None:
        samples = clip(samples, config.clip_amplitude)
    n_pay = freq.shape[0] - n_header
    layout = {
        "short_training": 0,
        "long_training": STS_PERIOD * STS_REPEATS,
        "header": preamble.size,
        "payload": preamble.size + n_header * config.symbol_len,
        "end": samples.size,
        "n_header": n_header,
        "n_payload": n_pay,
    }
    return OfdmFrame(samples, layout)


def clip(samples: np.ndarray, amplitude: float) -> np.ndarray:
    """Hard envelope clipper standing in for a D/A converter's range."""
    mag = np.abs(samples)
    over = mag > amplitude
    out = samples.copy()
    out[over] *= amplitude / mag[over]
    return out


def papr_db(samples) -> float:
    p = np.abs(np.asarray(samples)) ** 2
    return float(10 * np.log10(p.max() / p.mean()))


def write_iq(path, samples) -> None:
    """Interleaved little-endian float32 I/Q."""
    s = np.asarray(samples, dtype=np.complex128)
    out = np.empty(2 * s.size, dtype="<f4")
    out[0::2] = s.real
    out[1::2] = s.imag
    out.tofile(path)


def read_iq(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2:
        raise ValueError(f"{path}: odd number of floats in an I/Q trace")
    return raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
