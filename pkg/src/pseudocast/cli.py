"""Command-line entry point: ``pseudocast simulate | theory | sync-bench``.

Validation problems go to stderr as one JSON object and the exit code is 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields, replace
from typing import Dict, List, Optional

from .experiment import ConfigError, RunConfig, config_from_pairs, format_value, \
    read_config_file, run_experiment, sweep_summary, validate
from .source import VideoFormatError
from .syncbench import SYNC_COLUMNS, SyncBenchConfig, run_sync_bench, sync_stats
from .theory import monte_carlo_analog, theory_point

EXIT_INVALID = 2


def _fail(kind: str, problems: List[str]) -> int:
    json.dump({"error": kind, "problems": problems}, sys.stderr)
    sys.stderr.write("\n")
    return EXIT_INVALID


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, dest=f"cfg_{f.name}", metavar="VALUE",
                       help=f"default {format_value(f.default)}")


def _run_config(args) -> RunConfig:
    pairs: Dict[str, str] = {}
    if args.config:
        pairs.update(read_config_file(args.config))
    for f in fields(RunConfig):
        value = getattr(args, f"cfg_{f.name}")
        if value is not None:
            pairs[f.name] = value
    return validate(config_from_pairs(pairs))


def _write_csv(path: Optional[str], columns, rows) -> None:
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["NA" if r[c] is None else r[c] for c in columns])
    finally:
        if path:
            out.close()


def cmd_simulate(args) -> int:
    config = _run_config(args)
    if not config.output_dir:
        config = replace(config, output_dir="out")
    report = run_experiment(config)
    for row in sweep_summary(report):
        print(json.dumps(row))
    return 0


def _floats(text: str, name: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([f"{name}: expected comma-separated numbers"]) from None


def cmd_theory(args) -> int:
    snrs = _floats(args.snr_list_db, "snr_list_db")
    bad = []
    if not snrs:
        bad.append("snr_list_db must not be empty")
    if not args.variance > 0:
        bad.append("variance must be positive")
    if args.samples and args.samples < 10_000:
        bad.append("samples must be 0 or at least 10000")
    if bad:
        raise ConfigError(bad)
    rows = []
    for snr in snrs:
        gamma = 10 ** (snr / 10)
        t = theory_point(args.variance, gamma)
        row = {"snr_db": snr, "gamma": gamma, "lambda": t.lam, "rate": t.rate,
               "capacity": t.capacity, "d_digital": t.d_digital, "d_analog": t.d_analog,
               "d_monte_carlo": None}
        if args.samples:
            power = 1.0
            row["d_monte_carlo"] = monte_carlo_analog(args.variance, power, power / gamma,
                                                      args.samples, args.seed)
        rows.append(row)
    _write_csv(args.output, list(rows[0]), rows)
    return 0


def cmd_sync_bench(args) -> int:
    snrs = _floats(args.snr_list_db, "snr_list_db")
    cfos = _floats(args.cfo_spacings, "cfo_spacings")
    bad = []
    if not snrs:
        bad.append("snr_list_db must not be empty")
    if not cfos:
        bad.append("cfo_spacings must not be empty")
    if args.trials <= 0:
        bad.append("trials must be positive")
    if not 0 < args.threshold <= 1:
        bad.append("threshold must lie in (0, 1]")
    if bad:
        raise ConfigError(bad)
    bench = SyncBenchConfig(snrs, args.trials, cfos, threshold=args.threshold, seed=args.seed)
    rows = run_sync_bench(bench)
    _write_csv(args.output, SYNC_COLUMNS, rows)
    for snr in snrs:
        stats = sync_stats([r for r in rows if r["snr_db"] == snr])
        print(json.dumps({"snr_db": snr, **stats}), file=sys.stderr if not args.output
              else sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudocast",
                                     description="Pseudo-analog vs digital video link simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="SNR sweep over the video link, CSV + PGM output")
    _add_run_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    th = sub.add_parser("theory", help="OPTA bounds and Monte Carlo check per SNR")
    th.add_argument("--snr-list-db", default="0,5,10,15,20,25")
    th.add_argument("--variance", type=float, default=1.0)
    th.add_argument("--samples", type=int, default=0, help="Monte Carlo samples, 0 skips")
    th.add_argument("--seed", type=int, default=0)
    th.add_argument("--output", help="CSV path, stdout when omitted")
    th.set_defaults(func=cmd_theory)

    sb = sub.add_parser("sync-bench", help="timing and CFO accuracy of the preamble detector")
    sb.add_argument("--snr-list-db", default="10,20")
    sb.add_argument("--cfo-spacings", default="0", help="offsets in carrier spacings")
    sb.add_argument("--trials", type=int, default=1000)
    sb.add_argument("--threshold", type=float, default=0.8)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--output", help="CSV path, stdout when omitted")
    sb.set_defaults(func=cmd_sync_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("invalid-config", exc.problems)
    except VideoFormatError as exc:
        return _fail("video-format", [str(exc)])
    except OSError as exc:
        return _fail("io", [str(exc)])


if __name__ == "__main__":
    sys.exit(main())
