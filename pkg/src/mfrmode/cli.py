"""Command-line interface.

Subcommands::

    mfrmode simulate [SCENARIO] --seed N --out DIR
    mfrmode analyze LOG.csv --truth M [--windows campaign|FILE] --out DIR
    mfrmode compare STATS_A STATS_B [--label-a L] [--label-b L]
    mfrmode tables [SITE=]STATS.csv ... --out DIR

Failures exit non-zero and print a one-line JSON object
``{"error": <type>, "message": <text>}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

from . import __version__
from .errors import ConfigurationError, RModeError, ScenarioError
from .experiment import CAMPAIGN_WINDOWS, analyze, compare, run_scenario, standard_comparisons
from .io import (
    default_scenario_path,
    ingest_log,
    parse_scenario,
    read_stats,
    render_tables,
    windows_from_file,
    write_epochs,
    write_histograms,
    write_stats,
)

log = logging.getLogger("mfrmode")

EXIT_USAGE = 2
EXIT_FAILURE = 1


def _write_outputs(out: Path, analysis, header: list[str] | None = None, ks_threshold: float = 0.2) -> list:
    out.mkdir(parents=True, exist_ok=True)
    stats = list(analysis.stats.values())
    write_stats(out / "stats.csv", stats)
    write_histograms(out / "histogram.csv", stats)
    for label in sorted({s.label for s in stats}):
        sel = [s for s in stats if s.label == label]
        write_stats(out / f"stats_{label}.csv", sel)
        write_histograms(out / f"histogram_{label}.csv", sel)
    reports = standard_comparisons(analysis, ks_threshold)
    lines = list(header or [])
    lines.append(f"gated out (SNR below threshold): {analysis.gated_out}")
    for label, tone in analysis.empty:
        lines.append(f"empty partition: {label} {tone}")
    for s in stats:
        lines.append(
            f"{s.label:<10} {s.tone_id}  n={s.n_epochs:<5d} rms_m={s.rms_m:.3f} mean_m={s.mean_m:.3f} "
            f"median_m={s.median_m:.3f} mean_snr_db={s.mean_snr_db:.3f}"
        )
    for r in reports:
        lines.append(_report_line(r))
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return reports


def _report_line(r) -> str:
    winner = f" ({r.winner}_better)" if r.winner else ""
    return (
        f"compare {r.label_a} vs {r.label_b} [{r.tone_id}]: rms_ratio={r.rms_ratio:.4f} "
        f"median_ratio={r.median_ratio:.4f} ks_d={r.ks_d:.4f} verdict={r.verdict}{winner}"
    )


def cmd_simulate(args) -> int:
    path = Path(args.scenario) if args.scenario else default_scenario_path()
    scenario = parse_scenario(path)
    seed = args.seed if args.seed is not None else scenario.seeds[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    epochs = list(run_scenario(scenario, seed))
    write_epochs(out / "epochs.csv", epochs)
    analysis = analyze(epochs, scenario.windows, bins=scenario.histogram_bins)
    header = [f"scenario: {path.name}", f"seed: {seed}", f"epochs: {len(epochs) // 2}"]
    reports = _write_outputs(out, analysis, header=header, ks_threshold=scenario.ks_threshold)
    for r in reports:
        print(_report_line(r))
    print(f"wrote {out}")
    return 0


def _windows(spec: str):
    if spec == "campaign":
        return CAMPAIGN_WINDOWS
    return windows_from_file(spec)


def cmd_analyze(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = ingest_log(args.log, args.truth, threshold_db=args.threshold)
    for w in caught:
        log.warning("%s", w.message)
    analysis = analyze(result.epochs, _windows(args.windows), bins=args.bins)
    header = [
        f"log: {Path(args.log).name}",
        f"truth_range_m: {args.truth!r}",
        f"rows: {result.rows} malformed: {result.malformed}",
    ]
    reports = _write_outputs(Path(args.out), analysis, header=header, ks_threshold=args.ks_threshold)
    for r in reports:
        print(_report_line(r))
    print(f"wrote {args.out}")
    return 0


def _pick(stats, label):
    if label is None:
        labels = {s.label for s in stats}
        if len(labels) != 1:
            raise ConfigurationError(f"stats file holds labels {sorted(labels)}; choose one with --label-a/--label-b")
        return stats
    sel = [s for s in stats if s.label == label]
    if not sel:
        raise ConfigurationError(f"label {label!r} not found")
    return sel


def cmd_compare(args) -> int:
    a = {s.tone_id: s for s in _pick(read_stats(args.stats_a), args.label_a)}
    b = {s.tone_id: s for s in _pick(read_stats(args.stats_b), args.label_b)}
    tones = [t for t in a if t in b]
    if not tones:
        raise ConfigurationError("no tone present in both stats files")
    results = [compare(a[t], b[t], args.ks_threshold) for t in tones]
    if args.json:
        print(json.dumps([_finite(r.__dict__) for r in results]))
    else:
        for r in results:
            print(_report_line(r))
    return 0


def _finite(d: dict) -> dict:
    # strict JSON has no NaN/Infinity
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def cmd_tables(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    parts = []
    for item in args.stats:
        site, sep, path = item.partition("=")
        if not sep:
            site, path = "", item
        parts.append(render_tables(read_stats(path), site))
    text = "\n".join(parts)
    (out / "tables.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfrmode", description="MF R-Mode skywave ranging simulator and analysis")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write epochs, stats and histograms")
    s.add_argument("scenario", nargs="?", help="scenario YAML (default: bundled campaign scenario)")
    s.add_argument("--seed", type=int, help="random seed (default: first seed in the scenario)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="analyse a field log (timestamp,tone_id,snr_db,range_m CSV)")
    a.add_argument("log")
    a.add_argument("--truth", type=float, required=True, help="surveyed true range in metres")
    a.add_argument("--windows", default="campaign", help="'campaign' or a YAML file with a 'windows' mapping")
    a.add_argument("--threshold", type=float, default=7.0, help="SNR gate in dB (inclusive)")
    a.add_argument("--bins", type=int, default=50)
    a.add_argument("--ks-threshold", type=float, default=0.2)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="compare two stats files")
    c.add_argument("stats_a")
    c.add_argument("stats_b")
    c.add_argument("--label-a")
    c.add_argument("--label-b")
    c.add_argument("--ks-threshold", type=float, default=0.2)
    c.add_argument("--json", action="store_true", help="print the reports as JSON")
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("tables", help="render stats files as RMS / SNR text tables")
    t.add_argument("stats", nargs="+", help="stats CSV, optionally prefixed with SITE=")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tables)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        sys.stderr.write(json.dumps({"error": "ScenarioError", "message": str(exc), "problems": exc.problems}) + "\n")
        return EXIT_USAGE
    except ConfigurationError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_USAGE)
    except (RModeError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_FAILURE)
    except Exception as exc:  # keep stderr machine-readable
        log.debug("unexpected failure", exc_info=True)
        return _fail(type(exc).__name__, str(exc), EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
