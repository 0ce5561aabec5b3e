"""Timing and CFO benchmark for the preamble detector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .channel import ChannelParams, apply_channel
from .ofdm import IqPayload, OfdmConfig, allocate_carriers, modulate
from .receiver import detect_frame, estimate_cfo

SYNC_COLUMNS = ("snr_db", "trial", "cfo_hz", "offset", "detected", "frame_start",
                "timing_error", "cfo_est_hz", "cfo_error_spacing")


@dataclass(frozen=True)
class SyncBenchConfig:
    snr_list_db: Sequence[float] = (10.0, 20.0)
    trials: int = 1000
    cfo_spacings: Sequence[float] = (0.0,)  # offsets in units of the carrier spacing
    payload_symbols: int = 10
    threshold: float = 0.8
    seed: int = 0


def test_burst(config: OfdmConfig, n_symbols: int, rng: np.random.Generator) -> np.ndarray:
    """Preamble followed by ``n_symbols`` of random unit-energy payload."""
    n = n_symbols * config.n_data
    values = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    return modulate(allocate_carriers(IqPayload(values), np.zeros(0, np.uint8), config),
                    config).samples


test_burst.__test__ = False  # not a pytest test


def run_sync_bench(bench: SyncBenchConfig, config: OfdmConfig = OfdmConfig()) -> List[Dict]:
    """One row per (snr, cfo, trial): random start offset, detection, CFO error."""
    root = np.random.SeedSequence(bench.seed)
    burst = test_burst(config, bench.payload_symbols, np.random.default_rng(root.spawn(1)[0]))
    power = float(np.mean(np.abs(burst) ** 2))
    spacing = config.subcarrier_spacing
    rows = []
    for si, snr in enumerate(bench.snr_list_db):
        for ci, cfo_units in enumerate(bench.cfo_spacings):
            cfo = cfo_units * spacing
            for trial in range(bench.trials):
                ss = np.random.SeedSequence([bench.seed, si, ci, trial])
                rng = np.random.default_rng(ss)
                offset = int(rng.integers(100, 400))
                x = np.concatenate([np.zeros(offset), burst, np.zeros(100)])
                chan = ChannelParams(snr, cfo_hz=cfo, seed=int(ss.generate_state(1)[0]),
                                     sample_rate=config.sample_rate)
                y = apply_channel(x, chan, signal_power=power)
                sync = detect_frame(y, config, bench.threshold)
                row = dict(snr_db=snr, trial=trial, cfo_hz=cfo, offset=offset,
                           detected=sync.detected, frame_start=sync.frame_start,
                           timing_error=None, cfo_est_hz=None, cfo_error_spacing=None)
                if sync.detected:
                    est = estimate_cfo(y, sync, config)
                    row.update(timing_error=sync.frame_start - offset, cfo_est_hz=est,
                               cfo_error_spacing=abs(est - cfo) / spacing)
                rows.append(row)
    return rows


def sync_stats(rows: Sequence[Dict], max_timing_error: int = 1) -> Dict:
    n = len(rows)
    hits = [r for r in rows if r["detected"]]
    timing_ok = sum(abs(r["timing_error"]) <= max_timing_error for r in hits)
    cfo_err = [r["cfo_error_spacing"] for r in hits]
    return {"trials": n, "detected": len(hits),
            "timing_ok_fraction": timing_ok / n if n else float("nan"),
            "max_cfo_error_spacing": max(cfo_err) if cfo_err else float("nan")}
