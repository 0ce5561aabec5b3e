"""Batch experiments: SNR sweeps over both schemes, CSV reports, frame and I/Q dumps.

Outputs written to ``output_dir``:

``frames.csv``
    one row per (scheme, snr_db, trial, frame). Lost frames stay in, flagged.
``summary.csv``
    one row per SNR point, see :func:`sweep_summary`.
``frames/<scheme>_snr<snr>_t<trial>_f<frame>.pgm``
    selected decoded frames.
``iq/<scheme>_snr<snr>_t<trial>_g<gop>.iq``
    received samples as interleaved float32, when ``iq_traces`` is on.

Every CSV starts with ``# key=value`` lines holding the full configuration.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import ChannelParams
from .digital.chain import DigitalOptions, encode_digital, receive_digital
from .link import AnalogOptions, SyncError, decode_gop, encode_gop, gray_gop, over_the_air
from .ofdm import write_iq
from .power import DegenerateSourceError, MetadataError
from .source import FORMATS, Frame, Gop, compute_psnr, load_video, split_gops, write_frame
from .synthetic import synthetic_sequence
from .theory import analog_distortion, min_distortion_digital

log = logging.getLogger(__name__)

SCHEMES = ("pseudo-analog", "digital")
SYNTHETIC = "synthetic"


class ConfigError(ValueError):
    """Invalid run configuration; ``problems`` lists every issue found."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class RunConfig:
    input: str = SYNTHETIC
    width: int = 176
    height: int = 144
    video_format: str = "y-only-planar"
    frames: int = 0  # 0 reads every frame
    gop_size: int = 4
    num_chunks: int = 64
    hadamard_order: int = 64
    power_budget: float = 0.5
    snr_list_db: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    taps: Tuple[complex, ...] = (1.0,)
    cfo_hz: float = 0.0
    phase_noise_std: float = 0.0
    scheme: str = "both"
    trials: int = 10
    seed: int = 0
    bits_per_coeff: int = 0  # 0 lets the parity solver choose
    output_dir: str = ""
    dump_frames: str = "auto"  # "auto", "none" or comma-separated frame indices
    iq_traces: bool = False

    @property
    def schemes(self) -> Tuple[str, ...]:
        return SCHEMES if self.scheme == "both" else (self.scheme,)


def validate(config: RunConfig) -> RunConfig:
    """Return ``config`` unchanged or raise :class:`ConfigError` listing all problems."""
    bad = []
    for name in ("width", "height", "gop_size", "num_chunks", "hadamard_order", "trials"):
        if getattr(config, name) <= 0:
            bad.append(f"{name} must be positive")
    if config.hadamard_order > 0 and config.hadamard_order & (config.hadamard_order - 1):
        bad.append("hadamard_order must be a power of two")
    if not config.power_budget > 0:
        bad.append("power_budget must be positive")
    if config.frames < 0:
        bad.append("frames must be >= 0")
    if config.seed < 0:
        bad.append("seed must be >= 0")
    if config.phase_noise_std < 0:
        bad.append("phase_noise_std must be >= 0")
    if not config.snr_list_db:
        bad.append("snr_list_db must not be empty")
    elif not all(math.isfinite(s) for s in config.snr_list_db):
        bad.append("snr_list_db entries must be finite")
    if not config.taps or not any(t != 0 for t in config.taps):
        bad.append("taps must contain a non-zero value")
    if config.scheme not in SCHEMES + ("both",):
        bad.append(f"scheme must be one of {', '.join(SCHEMES + ('both',))}")
    if config.bits_per_coeff and not 2 <= config.bits_per_coeff <= 16:
        bad.append("bits_per_coeff must be 0 (auto) or within [2, 16]")
    if config.video_format not in FORMATS:
        bad.append(f"video_format must be one of {', '.join(FORMATS)}")
    if config.input != SYNTHETIC and not os.path.isfile(config.input):
        bad.append(f"input file not found: {config.input}")
    if config.width > 0 and config.height > 0 and config.gop_size > 0 and config.num_chunks > 0:
        if config.num_chunks > config.width * config.height * config.gop_size:
            bad.append("num_chunks exceeds the number of coefficients in a GOP")
    try:
        _dump_indices(config, 1)
    except ValueError:
        bad.append("dump_frames must be 'auto', 'none' or comma-separated frame indices")
    if bad:
        raise ConfigError(bad)
    return config


# --- config text ------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_value(name: str, text: str):
    """Convert ``text`` to the type of RunConfig field ``name``."""
    default = RunConfig.__dataclass_fields__[name].default
    text = text.strip()
    if name == "snr_list_db":
        return tuple(float(v) for v in text.split(",") if v.strip())
    if name == "taps":
        return tuple(complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip())
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def config_from_pairs(pairs: Dict[str, str], base: RunConfig = RunConfig()) -> RunConfig:
    """Apply textual overrides; unknown keys and unparsable values are all reported."""
    known = {f.name for f in fields(RunConfig)}
    bad, values = [], {}
    for key, text in pairs.items():
        name = key.strip().replace("-", "_")
        if name not in known:
            bad.append(f"unknown key: {key}")
            continue
        try:
            values[name] = parse_value(name, text)
        except ValueError as exc:
            bad.append(f"{name}: {exc}")
    if bad:
        raise ConfigError(bad)
    return replace(base, **values)


def read_config_file(path) -> Dict[str, str]:
    """Flat ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    pairs, bad = {}, []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                bad.append(f"{path}:{n}: expected key = value")
                continue
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    if bad:
        raise ConfigError(bad)
    return pairs


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, complex):
        return repr(value.real) if value.imag == 0 else repr(value).strip("()")
    return str(value)


def config_lines(config: RunConfig) -> List[str]:
    return [f"# {k}={format_value(v)}" for k, v in asdict(config).items()]


# --- running ----------------------------------------------------------------

@dataclass
class LinkReport:
    config: RunConfig
    rows: List[Dict] = field(default_factory=list)

    def summary(self) -> List[Dict]:
        return sweep_summary(self)


FRAME_COLUMNS = ("scheme", "snr_db", "trial", "frame", "gop", "psnr_db", "mse",
                 "measured_snr_db", "sync_failure", "meta_crc_failure", "lost", "ber")


def channel_seed(seed: int, snr_index: int, trial: int, gop: int) -> int:
    """Noise seed for one cell; independent of the scheme, so both see the same noise."""
    return int(np.random.SeedSequence([seed, snr_index, trial, gop]).generate_state(1)[0])


def load_frames(config: RunConfig) -> List[Frame]:
    if config.input == SYNTHETIC:
        n = config.frames or 300
        return synthetic_sequence(n, config.width, config.height)
    frames = load_video(config.input, config.width, config.height, config.video_format)
    return frames[: config.frames] if config.frames else frames


def _dump_indices(config: RunConfig, n_frames: int) -> List[int]:
    choice = config.dump_frames.strip().lower()
    if choice == "none":
        return []
    if choice == "auto":
        out = []
        for start in range(0, n_frames, config.gop_size):
            out += [start, start + config.gop_size // 2]
        return sorted({i for i in out if i < n_frames})
    return sorted({int(v) for v in choice.split(",") if v.strip()})


def _clamped(gop: Gop) -> Gop:
    return Gop.from_array(np.clip(gop.to_array(), 0.0, 255.0))


def _run_analog(gop: Gop, gop_id: int, channel: ChannelParams, opts: AnalogOptions):
    row = {"sync_failure": False, "meta_crc_failure": False, "lost": False,
           "measured_snr_db": float("nan"), "ber": float("nan")}
    try:
        tx = encode_gop(gop, gop_id, opts)
    except DegenerateSourceError:
        # a perfectly flat GOP has nothing to scale; its mean alone rebuilds it
        return Gop.from_array(np.full(gop.dims, gop.to_array().mean())), row, None
    rx_samples = over_the_air(tx.frame.samples, channel)
    try:
        out, rx = decode_gop(rx_samples, opts)
    except SyncError:
        row.update(sync_failure=True, lost=True)
        return gray_gop(gop.dims), row, rx_samples
    except MetadataError:
        row.update(meta_crc_failure=True, lost=True)
        return gray_gop(gop.dims), row, rx_samples
    if rx.pilot_noise is not None:
        row["measured_snr_db"] = rx.pilot_noise.snr_db
    return out, row, rx_samples


def run_experiment(config: RunConfig) -> LinkReport:
    """Run every (scheme, SNR, trial, GOP) cell and return per-frame rows.

    Output is a pure function of the configuration. Files are written only
    when ``output_dir`` is set.
    """
    validate(config)
    frames = load_frames(config)
    if not frames:
        raise ConfigError(["input holds no frames"])
    n_frames = len(frames)
    gops = split_gops(frames, config.gop_size)
    analog = AnalogOptions(config.num_chunks, config.hadamard_order, config.power_budget)
    digital = DigitalOptions(config.bits_per_coeff or None, True, config.num_chunks,
                             config.hadamard_order)
    out_dir = Path(config.output_dir) if config.output_dir else None
    dumps = set(_dump_indices(config, n_frames))
    dump_snrs = {min(config.snr_list_db), max(config.snr_list_db)} \
        if config.dump_frames.strip().lower() == "auto" else set(config.snr_list_db)
    report = LinkReport(config)
    for scheme in config.schemes:
        for si, snr in enumerate(config.snr_list_db):
            for trial in range(config.trials):
                for gi, gop in enumerate(gops):
                    channel = ChannelParams(snr, config.taps, config.cfo_hz,
                                            config.phase_noise_std,
                                            channel_seed(config.seed, si, trial, gi))
                    rx_samples = None
                    if scheme == "digital":
                        tx = encode_digital(gop, gi, digital)
                        rx_samples = over_the_air(tx.burst, channel)
                        out, row = receive_digital(rx_samples, tx, digital)
                        row = {k: row[k] for k in ("sync_failure", "meta_crc_failure",
                                                   "lost", "measured_snr_db", "ber")}
                    else:
                        out, row, rx_samples = _run_analog(gop, gi, channel, analog)
                    out = _clamped(out)
                    base = gi * config.gop_size
                    for k, (ref, dec) in enumerate(zip(gop.frames, out.frames)):
                        idx = base + k
                        if idx >= n_frames:
                            break  # tail padding, not an input frame
                        p = compute_psnr(ref, dec)
                        report.rows.append(dict(scheme=scheme, snr_db=snr, trial=trial,
                                                frame=idx, gop=gi, psnr_db=p.psnr_db,
                                                mse=p.mse, **row))
                        if out_dir and trial == 0 and idx in dumps and snr in dump_snrs:
                            path = out_dir / "frames" / f"{scheme}_snr{snr:g}_t{trial}_f{idx}.pgm"
                            path.parent.mkdir(parents=True, exist_ok=True)
                            write_frame(dec, path)
                    if out_dir and config.iq_traces and rx_samples is not None:
                        _write_trace(out_dir, scheme, snr, trial, gi, rx_samples)
                    log.info("%s snr=%g trial=%d gop=%d lost=%s", scheme, snr, trial, gi,
                             row["lost"])
    report.rows.sort(key=lambda r: (SCHEMES.index(r["scheme"]), r["snr_db"], r["trial"],
                                    r["frame"]))
    if out_dir:
        write_report(report, out_dir)
    return report


def _write_trace(out_dir: Path, scheme, snr, trial, gop, samples) -> None:
    path = out_dir / "iq" / f"{scheme}_snr{snr:g}_t{trial}_g{gop}.iq"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_iq(path, samples)


# --- reporting --------------------------------------------------------------

SUMMARY_COLUMNS = ("snr_db", "psnr_pseudo_analog", "psnr_digital", "min_psnr_pseudo_analog",
                   "min_psnr_digital", "gain_db", "lost_pseudo_analog", "lost_digital",
                   "d_analog", "d_digital")


def sweep_summary(report: LinkReport) -> List[Dict]:
    """Per SNR point: mean and min PSNR per scheme, gain, lost frames, theory.

    ``gain_db`` is pseudo-analog minus digital mean PSNR, or None when a
    scheme is missing. ``d_analog`` and ``d_digital`` are the OPTA
    distortions for a unit-variance source, 1 / (1 + gamma).
    """
    if not report.rows:
        raise ValueError("empty report")
    out = []
    for snr in sorted({r["snr_db"] for r in report.rows}):
        gamma = 10 ** (snr / 10)
        row = {"snr_db": snr, "d_analog": analog_distortion(1.0, gamma),
               "d_digital": min_distortion_digital(1.0, gamma)}
        for scheme in SCHEMES:
            key = scheme.replace("-", "_")
            vals = [r for r in report.rows if r["scheme"] == scheme and r["snr_db"] == snr]
            psnr = [r["psnr_db"] for r in vals]
            row[f"psnr_{key}"] = float(np.mean(psnr)) if psnr else None
            row[f"min_psnr_{key}"] = float(np.min(psnr)) if psnr else None
            row[f"lost_{key}"] = sum(bool(r["lost"]) for r in vals) if vals else None
        a, d = row["psnr_pseudo_analog"], row["psnr_digital"]
        row["gain_db"] = a - d if a is not None and d is not None else None
        out.append(row)
    return out


def _cell(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def _csv_text(config: RunConfig, columns, rows) -> str:
    buf = io.StringIO()
    buf.write("# luma-only PSNR, frames clamped to [0, 255]\n")
    buf.write("\n".join(config_lines(config)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_report(report: LinkReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "frames.csv").write_text(_csv_text(report.config, FRAME_COLUMNS, report.rows))
    (out / "summary.csv").write_text(
        _csv_text(report.config, SUMMARY_COLUMNS, sweep_summary(report)))
