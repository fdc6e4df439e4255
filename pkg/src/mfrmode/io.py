"""Scenario files, field-log ingestion, CSV outputs and text tables.

Scenario files are versioned YAML.  Every key carries its unit in its
name (``_hz``, ``_s``, ``_m``, ``_db``, ``_deg``, ``_km``, ``_rad``).
Clock times are quoted ``"HH:MM"`` strings, instants are ISO-8601 with a
UTC offset.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .channel import DiurnalSchedule, LinkGeometry
from .errors import ConfigurationError, FormatError, IngestionAbortedError, RModeError, ScenarioError
from .experiment import CAMPAIGN_WINDOWS, ClockInterval, CwBoost, ErrorStats, Scenario, WindowSpec
from .receiver import DEFAULT_SNR_THRESHOLD_DB, TONE_IDS, RangeEpoch, snr_gate, wavelength
from .signal_gen import CwParams, MskParams, TransmitterConfig

SCENARIO_VERSION = 1
DEFAULT_TONE_HZ = {"CW1": 318_250.0, "CW2": 317_750.0}

# --- scenario schema -----------------------------------------------------------


def _parse_clock(v) -> dt.time:
    if isinstance(v, dt.time):
        return v
    if not isinstance(v, str):
        raise ValueError("clock times must be quoted strings like \"06:00\"")
    try:
        return dt.time.fromisoformat(v)
    except ValueError:
        raise ValueError(f"invalid clock time {v!r}, expected HH:MM[:SS]") from None


def _parse_instant(v) -> dt.datetime:
    if isinstance(v, dt.datetime):
        out = v
    elif isinstance(v, str):
        try:
            out = dt.datetime.fromisoformat(v)
        except ValueError:
            raise ValueError(f"invalid ISO-8601 timestamp {v!r}") from None
    else:
        raise ValueError("timestamps must be ISO-8601 strings")
    if out.tzinfo is None:
        raise ValueError("timestamp needs a UTC offset, e.g. 2022-04-21T13:25:00+09:00")
    return out


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Msk(_Section):
    amplitude: float = 1.0
    bit_interval_s: float = 0.005
    phase_offset_rad: float = 0.0
    bit_seed: int = 0


class _Cw(_Section):
    amplitude: float = 0.25
    phase_offset_rad: float = 0.0
    offset_hz: float


class _Transmitter(_Section):
    carrier_hz: float = 318_000.0
    sample_rate_hz: float = 8000.0
    strict_band: bool = True
    msk: _Msk = _Msk()
    cw1: _Cw = _Cw(offset_hz=250.0)
    cw2: _Cw = _Cw(offset_hz=-250.0)


class _Link(_Section):
    # Assumed sites: Chungju transmitter, Daejeon receiver.
    tx_lat_deg: float = 36.99
    tx_lon_deg: float = 127.93
    rx_lat_deg: float = 36.37
    rx_lon_deg: float = 127.36
    groundwave_velocity_factor: float = 1.0
    ionosphere_height_km: float = 90.0


class _Schedule(_Section):
    day_start: dt.time = dt.time(6)
    day_end: dt.time = dt.time(18)
    alpha_night: float = 0.3
    ramp_minutes: float = 30.0
    t_d_night_s: Optional[float] = None
    random_phase: bool = False

    _clock = field_validator("day_start", "day_end", mode="before")(_parse_clock)


class _Noise(_Section):
    sigma: float = 1.4


class _Timing(_Section):
    start: dt.datetime = Scenario.start
    end: dt.datetime = Scenario.end
    epoch_interval_s: float = 27.0
    integration_s: float = 1.0

    _instant = field_validator("start", "end", mode="before")(_parse_instant)


class _Receiver(_Section):
    snr_threshold_db: float = DEFAULT_SNR_THRESHOLD_DB
    a_priori: Union[Literal["truth", "coarse"], float] = "truth"
    clock_offset_s: float = 0.0


class _Boost(_Section):
    start: dt.time
    end: dt.time
    gain_db: float

    _clock = field_validator("start", "end", mode="before")(_parse_clock)


class _Analysis(_Section):
    histogram_bins: int = 50
    ks_threshold: float = 0.2


class _Interval(BaseModel):
    model_config = ConfigDict(extra="forbid")
    start: dt.time
    end: dt.time

    _clock = field_validator("start", "end", mode="before")(_parse_clock)


class _ScenarioFile(_Section):
    version: Literal[1]
    transmitter: _Transmitter = _Transmitter()
    link: _Link = _Link()
    schedule: _Schedule = _Schedule()
    noise: _Noise = _Noise()
    timing: _Timing = _Timing()
    receiver: _Receiver = _Receiver()
    boost: Optional[_Boost] = None
    windows: Optional[dict[str, list[_Interval]]] = None
    analysis: _Analysis = _Analysis()
    seeds: list[int] = [1, 2, 3, 4, 5]

    @field_validator("windows", mode="before")
    @classmethod
    def _pairs(cls, v):
        # accept [["13:25", "18:00"], ...] as well as mappings
        if isinstance(v, dict):
            return {
                k: [{"start": iv[0], "end": iv[1]} if isinstance(iv, (list, tuple)) and len(iv) == 2 else iv for iv in ivs]
                if isinstance(ivs, list)
                else ivs
                for k, ivs in v.items()
            }
        return v


def _node_line(root, loc) -> int | None:
    """1-based source line of the YAML node addressed by a pydantic ``loc``."""
    node, line = root, None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt, line = v, k.start_mark.line + 1
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _format_problem(root, loc, msg) -> str:
    path = ".".join(str(p) for p in loc) or "<root>"
    line = _node_line(root, loc) if root is not None else None
    where = f"line {line}: " if line else ""
    return f"{where}{path}: {msg}"


def scenario_from_text(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate scenario YAML, reporting every problem found."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"{source}: YAML syntax error: {exc}"]) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError([f"{source}: top level must be a mapping"])
    problems = _schema_problems(data, root)
    if problems:
        # drop broken sections and keep going so domain checks still run
        bad = {p[0] for p in problems}
        partial = {k: v for k, v in data.items() if k not in bad and k in _ScenarioFile.model_fields}
        partial["version"] = SCENARIO_VERSION
        try:
            _build(_ScenarioFile.model_validate(partial), root)
        except ScenarioError as exc:
            problems.extend((None, msg) for msg in exc.problems)
        raise ScenarioError([msg for _, msg in problems])
    return _build(_ScenarioFile.model_validate(data), root)


def _schema_problems(data: dict, root) -> list[tuple]:
    try:
        _ScenarioFile.model_validate(data)
    except ValidationError as exc:
        out = []
        for err in exc.errors():
            # union/literal branches add type tags to loc; keep the key path
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and ("[" in p or p in ("float", "str", "int"))))
            msg = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
            if err["type"] == "missing" and loc == ("version",):
                msg = "version field is mandatory"
            out.append((loc[0] if loc else None, _format_problem(root, loc, msg)))
        return out
    return []


def _build(m: _ScenarioFile, root) -> Scenario:
    problems = []

    def attempt(loc, fn):
        try:
            return fn()
        except (ConfigurationError, RModeError, ValueError) as exc:
            problems.append(_format_problem(root, loc, str(exc)))
            return None

    t = m.transmitter
    tx = attempt(
        ("transmitter",),
        lambda: TransmitterConfig(
            carrier_hz=t.carrier_hz,
            msk=MskParams(t.msk.amplitude, t.msk.bit_interval_s, t.msk.phase_offset_rad, t.msk.bit_seed),
            cw1=CwParams(t.cw1.amplitude, t.cw1.phase_offset_rad, t.cw1.offset_hz),
            cw2=CwParams(t.cw2.amplitude, t.cw2.phase_offset_rad, t.cw2.offset_hz),
            sample_rate_hz=t.sample_rate_hz,
            strict_band=t.strict_band,
        ),
    )
    lk = m.link
    link = attempt(
        ("link",),
        lambda: LinkGeometry(
            lk.tx_lat_deg, lk.tx_lon_deg, lk.rx_lat_deg, lk.rx_lon_deg,
            lk.groundwave_velocity_factor, lk.ionosphere_height_km,
        ),
    )
    sc = m.schedule
    schedule = attempt(
        ("schedule",),
        lambda: DiurnalSchedule(sc.day_start, sc.day_end, sc.alpha_night, sc.ramp_minutes, sc.t_d_night_s, sc.random_phase),
    )
    boost = None if m.boost is None else CwBoost(m.boost.start, m.boost.end, m.boost.gain_db)
    if m.windows is None:
        windows = CAMPAIGN_WINDOWS
    else:
        windows = tuple(
            w
            for label, ivs in m.windows.items()
            if (w := attempt(("windows", label), lambda: WindowSpec(label, tuple(ClockInterval(i.start, i.end) for i in ivs))))
        )
    if problems:
        raise ScenarioError(problems)
    scenario = attempt(
        (),
        lambda: Scenario(
            transmitter=tx,
            link=link,
            schedule=schedule,
            noise_sigma=m.noise.sigma,
            start=m.timing.start,
            end=m.timing.end,
            epoch_interval_s=m.timing.epoch_interval_s,
            integration_s=m.timing.integration_s,
            cw_boost=boost,
            a_priori=m.receiver.a_priori,
            snr_threshold_db=m.receiver.snr_threshold_db,
            clock_offset_s=m.receiver.clock_offset_s,
            windows=windows,
            seeds=tuple(m.seeds),
            histogram_bins=m.analysis.histogram_bins,
            ks_threshold=m.analysis.ks_threshold,
        ),
    )
    if problems:
        raise ScenarioError(problems)
    return scenario


def parse_scenario(path) -> Scenario:
    """Load a scenario file.

    Raises
    ------
    ScenarioError
        Listing every missing field, unit violation and unknown key.
    """
    path = Path(path)
    return scenario_from_text(path.read_text(encoding="utf-8"), str(path))


def _clock_str(t: dt.time) -> str:
    return t.strftime("%H:%M:%S" if t.second or t.microsecond else "%H:%M")


def scenario_to_dict(s: Scenario) -> dict:
    tx, lk, sc = s.transmitter, s.link, s.schedule

    def cw(c: CwParams):
        return {"amplitude": c.amplitude, "phase_offset_rad": c.phase_offset, "offset_hz": c.offset_hz}

    return {
        "version": SCENARIO_VERSION,
        "transmitter": {
            "carrier_hz": tx.carrier_hz,
            "sample_rate_hz": tx.sample_rate_hz,
            "strict_band": tx.strict_band,
            "msk": {
                "amplitude": tx.msk.amplitude,
                "bit_interval_s": tx.msk.bit_interval,
                "phase_offset_rad": tx.msk.phase_offset,
                "bit_seed": tx.msk.bit_seed,
            },
            "cw1": cw(tx.cw1),
            "cw2": cw(tx.cw2),
        },
        "link": {
            "tx_lat_deg": lk.tx_lat,
            "tx_lon_deg": lk.tx_lon,
            "rx_lat_deg": lk.rx_lat,
            "rx_lon_deg": lk.rx_lon,
            "groundwave_velocity_factor": lk.groundwave_velocity_factor,
            "ionosphere_height_km": lk.ionosphere_height_km,
        },
        "schedule": {
            "day_start": _clock_str(sc.day_start),
            "day_end": _clock_str(sc.day_end),
            "alpha_night": sc.alpha_night,
            "ramp_minutes": sc.ramp_minutes,
            "t_d_night_s": sc.t_d_night,
            "random_phase": sc.random_phase,
        },
        "noise": {"sigma": s.noise_sigma},
        "timing": {
            "start": s.start.isoformat(),
            "end": s.end.isoformat(),
            "epoch_interval_s": s.epoch_interval_s,
            "integration_s": s.integration_s,
        },
        "receiver": {
            "snr_threshold_db": s.snr_threshold_db,
            "a_priori": s.a_priori,
            "clock_offset_s": s.clock_offset_s,
        },
        "boost": None
        if s.cw_boost is None
        else {"start": _clock_str(s.cw_boost.start), "end": _clock_str(s.cw_boost.end), "gain_db": s.cw_boost.gain_db},
        "windows": {w.label: [[_clock_str(i.start), _clock_str(i.end)] for i in w.intervals] for w in s.windows},
        "analysis": {"histogram_bins": s.histogram_bins, "ks_threshold": s.ks_threshold},
        "seeds": list(s.seeds),
    }


def serialize_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False)


def default_scenario_path() -> Path:
    return Path(str(resources.files("mfrmode") / "data" / "default_scenario.yaml"))


def bundled_data(name: str) -> Path:
    return Path(str(resources.files("mfrmode") / "data" / name))


def windows_from_file(path) -> tuple[WindowSpec, ...]:
    """Window spec from a YAML file with a top-level ``windows`` mapping."""
    text = Path(path).read_text(encoding="utf-8")
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict) or set(data) - {"windows"}:
        raise ScenarioError([f"{path}: expected a single top-level 'windows' mapping"])
    return scenario_from_text(yaml.safe_dump({"version": 1, "windows": data.get("windows")}), str(path)).windows


# --- epoch CSV ---------------------------------------------------------------

EPOCH_COLUMNS = (
    "timestamp",
    "epoch_time_s",
    "tone_id",
    "snr_db",
    "range_m",
    "integer_cycles",
    "phase_cycles",
    "error_m",
    "gated",
    "alpha_linear",
    "boosted",
)
LOG_COLUMNS = ("timestamp", "tone_id", "snr_db", "range_m")


def _num(x) -> str:
    return repr(float(x))


def write_epochs(path, epochs) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPOCH_COLUMNS)
        for e in epochs:
            w.writerow(
                (
                    e.local_time.isoformat() if e.local_time else "",
                    _num(e.epoch_time),
                    e.tone_id,
                    _num(e.snr_db),
                    _num(e.range_m),
                    e.integer_cycles_N,
                    _num(e.phase_cycles),
                    _num(e.error_m),
                    "true" if e.gated else "false",
                    _num(e.alpha),
                    "true" if e.boosted else "false",
                )
            )
            n += 1
    return n


@dataclass
class IngestResult:
    """Outcome of reading a field log."""

    epochs: list[RangeEpoch] = field(default_factory=list)
    rows: int = 0
    malformed: int = 0
    gated_out: int = 0
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.epochs)


def _read_csv_log(path) -> tuple[list[str] | None, list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return None, []
    return rows[0], rows[1:]


# Readers for receiver log formats, keyed by name.  Native receiver formats
# plug in here by returning (header, rows) in the open CSV schema.
LOG_READERS = {"csv": _read_csv_log}


def ingest_log(
    path,
    truth_range_m: float,
    *,
    threshold_db: float = DEFAULT_SNR_THRESHOLD_DB,
    tone_hz: dict | None = None,
    fmt: str = "csv",
    max_malformed_fraction: float = 0.01,
) -> IngestResult:
    """Read a field log into range epochs with ``error = range - truth``.

    Rows below the SNR threshold are kept but marked ungated and counted.
    Malformed rows (bad numbers, unknown tone, missing UTC offset,
    timestamps going backwards) are counted; if they exceed
    ``max_malformed_fraction`` of all rows, ingestion is aborted.

    Raises
    ------
    FormatError
        If the header lacks a required column.
    IngestionAbortedError
        If too many rows are malformed.
    """
    tone_hz = dict(DEFAULT_TONE_HZ if tone_hz is None else tone_hz)
    header, rows = LOG_READERS[fmt](path)
    result = IngestResult()
    if header is None:
        msg = f"{path}: empty log"
        warnings.warn(msg, stacklevel=2)
        result.warnings.append(msg)
        return result
    header = [h.strip() for h in header]
    missing = [c for c in LOG_COLUMNS if c not in header]
    if missing:
        raise FormatError(f"{path}: header lacks column(s) {', '.join(missing)}")
    col = {c: header.index(c) for c in LOG_COLUMNS}

    first = last = None
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        result.rows += 1
        try:
            ts = dt.datetime.fromisoformat(row[col["timestamp"]].strip())
            tone = row[col["tone_id"]].strip()
            snr = float(row[col["snr_db"]])
            rng = float(row[col["range_m"]])
            if ts.tzinfo is None:
                raise ValueError("timestamp without UTC offset")
            if tone not in TONE_IDS:
                raise ValueError(f"unknown tone {tone!r}")
            if not (math.isfinite(snr) and math.isfinite(rng)):
                raise ValueError("non-finite value")
            if last is not None and ts < last:
                raise ValueError("timestamp goes backwards")
        except (ValueError, IndexError) as exc:
            result.malformed += 1
            result.warnings.append(f"{path}:{lineno}: {exc}")
            continue
        first = ts if first is None else first
        last = ts
        lam = wavelength(tone_hz[tone])
        cycles = rng / lam
        n_int = math.floor(cycles)
        gated = snr_gate(snr, threshold_db)
        result.gated_out += not gated
        result.epochs.append(
            RangeEpoch(
                tone_id=tone,
                epoch_time=(ts - first).total_seconds(),
                range_m=rng,
                integer_cycles_N=n_int,
                phase_cycles=min(cycles - n_int, math.nextafter(1.0, 0.0)),
                gated=gated,
                error_m=rng - truth_range_m,
                snr_db=snr,
                local_time=ts,
            )
        )
    if result.rows and result.malformed > max_malformed_fraction * result.rows:
        raise IngestionAbortedError(
            f"{path}: {result.malformed} of {result.rows} rows malformed "
            f"(limit {max_malformed_fraction:.0%})"
        )
    if result.rows == 0:
        msg = f"{path}: log has a header but no records"
        warnings.warn(msg, stacklevel=2)
        result.warnings.append(msg)
    return result


# --- statistics CSV ------------------------------------------------------------

STATS_COLUMNS = ("label", "tone_id", "n_epochs", "rms_m", "mean_m", "median_m", "median_abs_m", "mean_snr_db")
HISTOGRAM_COLUMNS = ("label", "tone_id", "bin_lo_m", "bin_hi_m", "count")


def write_stats(path, stats) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_COLUMNS)
        for s in stats:
            w.writerow(
                (s.label, s.tone_id or "", s.n_epochs, _num(s.rms_m), _num(s.mean_m),
                 _num(s.median_m), _num(s.median_abs_m), _num(s.mean_snr_db))
            )


def write_histograms(path, stats) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_COLUMNS)
        for s in stats:
            for lo, hi, c in zip(s.bin_edges_m, s.bin_edges_m[1:], s.counts):
                w.writerow((s.label, s.tone_id or "", _num(lo), _num(hi), c))


def histogram_path_for(stats_path) -> Path:
    p = Path(stats_path)
    return p.with_name(p.name.replace("stats", "histogram", 1))


def read_stats(path) -> list[ErrorStats]:
    """Load statistics (and the sibling histogram file, when present)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != STATS_COLUMNS:
            raise FormatError(f"{path}: not a stats file (header {reader.fieldnames})")
        rows = list(reader)
    hist: dict[tuple[str, str], list[tuple[float, float, int]]] = {}
    hpath = histogram_path_for(path)
    if hpath.exists():
        with open(hpath, newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                hist.setdefault((r["label"], r["tone_id"]), []).append(
                    (float(r["bin_lo_m"]), float(r["bin_hi_m"]), int(r["count"]))
                )
    out = []
    for r in rows:
        bins = hist.get((r["label"], r["tone_id"]), [])
        edges = tuple([b[0] for b in bins] + [bins[-1][1]]) if bins else ()
        out.append(
            ErrorStats(
                label=r["label"],
                n_epochs=int(r["n_epochs"]),
                rms_m=float(r["rms_m"]),
                mean_m=float(r["mean_m"]),
                median_m=float(r["median_m"]),
                median_abs_m=float(r["median_abs_m"]),
                bin_edges_m=edges,
                counts=tuple(b[2] for b in bins),
                tone_id=r["tone_id"] or None,
                mean_snr_db=float(r["mean_snr_db"]),
            )
        )
    return out


# --- text tables ---------------------------------------------------------------

COLUMN_TITLES = {"day": "Daytime", "night": "Nighttime", "modified": "Modified", "unmodified": "Unmodified"}

TABLE_KINDS = (
    ("rms", ("day", "night"), "RMS distance error (m) of CW1 and CW2 in daytime and nighttime"),
    ("snr", ("modified", "unmodified"), "SNR (dB) of modified and unmodified CW1 and CW2 signals"),
)


def format_rms(x: float) -> str:
    return f"{x:.0f}"


def format_snr(x: float) -> str:
    return f"{x:.6g}"


def _grid(title: str, head: list[str], body: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    rule = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"

    return "\n".join([title, rule, line(head), rule, *(line(r) for r in body), rule])


def render_tables(stats, site: str = "") -> str:
    """Render RMS and SNR tables (tone rows x window columns) as text.

    Tables whose columns are absent from ``stats`` are omitted.
    """
    by_key = {(s.label, s.tone_id): s for s in stats}
    blocks = []
    for kind, labels, title in TABLE_KINDS:
        if not any((lab, t) in by_key for lab in labels for t in TONE_IDS):
            continue
        fmt = format_rms if kind == "rms" else format_snr
        body = []
        for tone in TONE_IDS:
            cells = [tone]
            for lab in labels:
                s = by_key.get((lab, tone))
                if s is None:
                    cells.append("-")
                else:
                    cells.append(fmt(s.rms_m if kind == "rms" else s.mean_snr_db))
            body.append(cells)
        full = f"{title} ({site})" if site else title
        blocks.append(_grid(full, [""] + [COLUMN_TITLES.get(lab, lab) for lab in labels], body))
    return "\n\n".join(blocks) + "\n"
