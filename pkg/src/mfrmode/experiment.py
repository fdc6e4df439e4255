"""Scenario runner and the day/night, modified/unmodified analysis protocol."""

from __future__ import annotations

import datetime as dt
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Union

import numpy as np
from scipy import stats as sps

from .channel import (
    DiurnalSchedule,
    LinkGeometry,
    SkywaveParams,
    add_awgn,
    apply_skywave,
    clock_seconds,
    delayed_rmode,
    derive_link,
    schedule_alpha,
    skywave_margins,
)
from .errors import ConfigurationError, EmptyPartitionError
from .receiver import (
    DEFAULT_INTEGRATION_S,
    DEFAULT_SNR_THRESHOLD_DB,
    TONE_IDS,
    RangeEpoch,
    delay_phase,
    estimate_tone,
    phase_to_range,
    resolve_coarse,
    snr_gate,
)
from .signal_gen import SampleBlock, TransmitterConfig

DAY = 86_400.0


def _clock(h: int, m: int = 0) -> dt.time:
    return dt.time(h, m)


@dataclass(frozen=True)
class ClockInterval:
    """Left-closed, right-open interval of local clock time.

    An interval whose end is not after its start wraps past midnight, so
    ``21:00-00:00`` covers the last three hours of the day.
    """

    start: dt.time
    end: dt.time

    @property
    def seconds(self) -> float:
        a, b = clock_seconds(self.start), clock_seconds(self.end)
        return (b - a) % DAY or DAY

    def contains(self, local_time) -> bool:
        x = clock_seconds(local_time)
        a = clock_seconds(self.start)
        return (x - a) % DAY < self.seconds

    def overlaps(self, other: "ClockInterval") -> bool:
        a = clock_seconds(self.start)
        b = clock_seconds(other.start)
        return (b - a) % DAY < self.seconds or (a - b) % DAY < other.seconds


@dataclass(frozen=True)
class WindowSpec:
    """Named set of clock intervals used to partition epochs."""

    label: str
    intervals: tuple[ClockInterval, ...]

    def __post_init__(self):
        ivs = tuple(iv if isinstance(iv, ClockInterval) else ClockInterval(*iv) for iv in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for i, a in enumerate(ivs):
            for b in ivs[i + 1 :]:
                if a.overlaps(b):
                    raise ConfigurationError(f"overlapping intervals in window {self.label!r}")

    def contains(self, local_time) -> bool:
        return any(iv.contains(local_time) for iv in self.intervals)

    @property
    def total_seconds(self) -> float:
        return sum(iv.seconds for iv in self.intervals)


# Campaign windows: equal-length day/night sets and the 3 h boost comparison.
CAMPAIGN_WINDOWS = (
    WindowSpec("day", ((_clock(13, 25), _clock(18)), (_clock(6), _clock(9)))),
    WindowSpec("night", ((_clock(18), _clock(21)), (_clock(1, 25), _clock(6)))),
    WindowSpec("modified", ((_clock(21), _clock(0)),)),
    WindowSpec("unmodified", ((_clock(0), _clock(3)),)),
)


@dataclass(frozen=True)
class CwBoost:
    """Raise both CW amplitudes by ``gain_db`` inside a clock window."""

    start: dt.time
    end: dt.time
    gain_db: float

    def contains(self, local_time) -> bool:
        return ClockInterval(self.start, self.end).contains(local_time)


APrioriSource = Union[str, float]


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one link over a time span.

    ``a_priori`` selects how the integer ambiguity is seeded: ``"truth"``
    uses the surveyed range, ``"coarse"`` the dual-tone beat estimate, and
    a number is taken as a fixed a-priori range in metres.
    """

    transmitter: TransmitterConfig = field(default_factory=TransmitterConfig)
    link: LinkGeometry = field(default_factory=lambda: LinkGeometry(36.99, 127.93, 36.37, 127.36))
    schedule: DiurnalSchedule = field(default_factory=DiurnalSchedule)
    noise_sigma: float = 1.4
    start: dt.datetime = dt.datetime(2022, 4, 21, 13, 25, tzinfo=dt.timezone(dt.timedelta(hours=9)))
    end: dt.datetime = dt.datetime(2022, 4, 22, 11, 30, tzinfo=dt.timezone(dt.timedelta(hours=9)))
    epoch_interval_s: float = 27.0
    integration_s: float = DEFAULT_INTEGRATION_S
    cw_boost: CwBoost | None = None
    a_priori: APrioriSource = "truth"
    snr_threshold_db: float = DEFAULT_SNR_THRESHOLD_DB
    clock_offset_s: float = 0.0
    windows: tuple[WindowSpec, ...] = CAMPAIGN_WINDOWS
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    histogram_bins: int = 50
    ks_threshold: float = 0.2

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ConfigurationError("start/end must carry a UTC offset")
        if not self.end > self.start:
            raise ConfigurationError("end must be after start")
        if not self.integration_s > 0:
            raise ConfigurationError("integration_s must be > 0")
        if not self.epoch_interval_s >= self.integration_s:
            raise ConfigurationError("epoch_interval_s must be >= integration_s")
        if not self.noise_sigma >= 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if isinstance(self.a_priori, str):
            if self.a_priori not in ("truth", "coarse"):
                raise ConfigurationError(f"a_priori must be 'truth', 'coarse' or metres, got {self.a_priori!r}")
        elif not self.a_priori >= 0:
            raise ConfigurationError("a_priori range must be >= 0")
        if self.histogram_bins < 1:
            raise ConfigurationError("histogram_bins must be >= 1")
        labels = [w.label for w in self.windows]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("duplicate window labels")
        if self.schedule.t_d_night is None:
            sol = derive_link(self.link)
            object.__setattr__(self, "schedule", replace(self.schedule, t_d_night=sol.t_d))

    @property
    def duration_s(self) -> float:
        return (self.end - self.start).total_seconds()

    def epoch_times(self) -> np.ndarray:
        count = math.ceil(self.duration_s / self.epoch_interval_s - 1e-9)
        return np.arange(count) * self.epoch_interval_s

    def local_time(self, t: float) -> dt.datetime:
        return self.start + dt.timedelta(seconds=float(t))


def _epoch_rng(seed: int, k: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, k, stream])


def _noise_seed(seed: int, k: int) -> list[int]:
    return [seed, k, 1]


def run_scenario(s: Scenario, seed: int, windows=None) -> Iterator[RangeEpoch]:
    """Simulate every epoch of ``s`` and yield two :class:`RangeEpoch` each.

    Random draws are keyed by ``(seed, epoch index)``, so the same epoch
    sees the same noise and echo phase whether or not other epochs are
    simulated, and regardless of CW boost.  ``windows`` restricts the run
    to epochs falling inside at least one of the given windows.
    """
    sol = derive_link(s.link)
    tx0 = s.transmitter
    fs = tx0.sample_rate_hz
    n = int(round(s.integration_s * fs))
    vf = s.link.groundwave_velocity_factor
    offsets = {t: tx0.tone(t).offset_hz for t in TONE_IDS}
    freqs = {t: tx0.tone_hz(t) for t in TONE_IDS}
    boosted_tx = tx0.with_cw_gain(s.cw_boost.gain_db) if s.cw_boost else tx0
    windows = None if windows is None else list(windows)

    for k, t in enumerate(s.epoch_times()):
        local = s.local_time(t)
        if windows is not None and not any(w.contains(local) for w in windows):
            continue
        sky = schedule_alpha(s.schedule, local)
        if s.schedule.random_phase and sky.alpha > 0:
            sky = replace(sky, extra_phase=float(_epoch_rng(seed, k, 2).uniform(0.0, 2 * math.pi)))
        boosted = s.cw_boost is not None and s.cw_boost.contains(local)
        tx = boosted_tx if boosted else tx0

        t0 = t - 0.5 * n / fs
        before, after = skywave_margins(sky.t_d, fs) if sky.alpha > 0 else (0, 0)
        gw = delayed_rmode(tx, t0 - before / fs, before + n + after, sol.groundwave_delay + s.clock_offset_s)
        body = SampleBlock(t0, fs, gw.samples[before : before + n], tx.carrier_hz)
        rx = apply_skywave(body, sky, history=gw.samples[:before], lookahead=gw.samples[before + n :])
        rx = add_awgn(rx, s.noise_sigma, _noise_seed(seed, k))

        meas = {}
        for tone in TONE_IDS:
            other = [offsets[o] for o in TONE_IDS if o != tone]
            raw = estimate_tone(rx, offsets[tone], s.integration_s, tone_id=tone, other_offsets_hz=other)
            meas[tone] = (raw, delay_phase(raw, tx.tone(tone).phase_offset))

        if s.a_priori == "truth":
            a_priori = sol.true_range
        elif s.a_priori == "coarse":
            a_priori = resolve_coarse(meas["CW1"][1], meas["CW2"][1], freqs["CW1"], freqs["CW2"], velocity_factor=vf)
        else:
            a_priori = float(s.a_priori)

        for tone in TONE_IDS:
            raw, dly = meas[tone]
            epoch = phase_to_range(dly, freqs[tone], a_priori, velocity_factor=vf)
            yield replace(
                epoch,
                gated=snr_gate(raw, s.snr_threshold_db),
                error_m=epoch.range_m - sol.true_range,
                local_time=local,
                alpha=sky.alpha,
                boosted=boosted,
            )


def partition(epochs: Iterable[RangeEpoch], spec) -> dict[str, list[RangeEpoch]]:
    """Assign each admitted epoch to every window containing it.

    Epochs rejected by the SNR gate are dropped before partitioning.
    """
    specs = [spec] if isinstance(spec, WindowSpec) else list(spec)
    out: dict[str, list[RangeEpoch]] = {w.label: [] for w in specs}
    for e in epochs:
        if not e.gated:
            continue
        if e.local_time is None:
            raise ConfigurationError("epoch has no local time; cannot partition")
        for w in specs:
            if w.contains(e.local_time):
                out[w.label].append(e)
    return out


# --- statistics ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorStats:
    """Summary of one set of range errors.

    ``median_abs_m`` (median of ``|error|``) is what comparisons use, since
    signed medians of near-zero-mean sets are not meaningful as ratios.
    ``errors`` keeps the raw sample for exact distribution tests; it is
    empty for statistics read back from CSV.
    """

    label: str
    n_epochs: int
    rms_m: float
    mean_m: float
    median_m: float
    median_abs_m: float
    bin_edges_m: tuple[float, ...]
    counts: tuple[int, ...]
    tone_id: str | None = None
    mean_snr_db: float = math.nan
    errors: tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def histogram(self) -> tuple[tuple[float, ...], tuple[int, ...]]:
        return self.bin_edges_m, self.counts


class RunningStats:
    """Streaming mean/RMS accumulator (Welford); mergeable across partitions."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def merge(self, other: "RunningStats") -> "RunningStats":
        out = RunningStats()
        out.n = self.n + other.n
        if out.n == 0:
            return out
        d = other.mean - self.mean
        out.mean = self.mean + d * other.n / out.n
        out.m2 = self.m2 + other.m2 + d * d * self.n * other.n / out.n
        return out

    @property
    def rms(self) -> float:
        if self.n == 0:
            raise EmptyPartitionError("no samples accumulated")
        return math.sqrt(self.mean**2 + self.m2 / self.n)


def _errors_and_snr(items) -> tuple[np.ndarray, np.ndarray]:
    errs, snrs = [], []
    for it in items:
        if isinstance(it, RangeEpoch):
            errs.append(it.error_m)
            snrs.append(it.snr_db)
        else:
            errs.append(float(it))
    return np.asarray(errs, dtype=float), np.asarray(snrs, dtype=float)


def compute_stats(items, bins=50, label: str = "", tone_id: str | None = None) -> ErrorStats:
    """RMS, mean, median and histogram of a set of errors.

    Parameters
    ----------
    items : iterable of RangeEpoch or float
    bins : int or sequence of float
        Number of uniform bins over ``[min, max]`` or explicit edges.
        Values outside explicit edges are counted in the end bins.

    Raises
    ------
    EmptyPartitionError
        If there are no errors to summarise.
    """
    errs, snrs = _errors_and_snr(items)
    if errs.size == 0:
        raise EmptyPartitionError(f"no epochs in partition {label!r}")
    if not np.all(np.isfinite(errs)):
        raise ConfigurationError("non-finite range error in partition")
    edges = np.histogram_bin_edges(errs, bins=bins)
    counts, _ = np.histogram(np.clip(errs, edges[0], edges[-1]), bins=edges)
    return ErrorStats(
        label=label,
        n_epochs=int(errs.size),
        rms_m=math.sqrt(math.fsum(errs * errs) / errs.size),
        mean_m=math.fsum(errs) / errs.size,
        median_m=float(np.median(errs)),
        median_abs_m=float(np.median(np.abs(errs))),
        bin_edges_m=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        tone_id=tone_id,
        mean_snr_db=float(np.mean(snrs)) if snrs.size and np.all(np.isfinite(snrs)) else math.nan,
        errors=tuple(float(e) for e in errs),
    )


@dataclass(frozen=True)
class Analysis:
    """Per-(label, tone) statistics of a partitioned run."""

    stats: dict
    empty: tuple = ()
    gated_out: int = 0


def analyze(epochs: Iterable[RangeEpoch], windows, bins=50) -> Analysis:
    """Gate, partition and summarise epochs per window label and tone.

    With an integer ``bins`` all histograms share edges spanning the pooled
    errors of every partition, so they can be compared bin by bin.
    """
    epochs = list(epochs)
    gated_out = sum(1 for e in epochs if not e.gated)
    parts = partition(epochs, windows)
    pooled = [e.error_m for es in parts.values() for e in es]
    edges = np.histogram_bin_edges(pooled, bins=bins) if pooled and np.ndim(bins) == 0 else bins
    stats, empty = {}, []
    for label, es in parts.items():
        for tone in TONE_IDS:
            sel = [e for e in es if e.tone_id == tone]
            if not sel:
                empty.append((label, tone))
                continue
            stats[(label, tone)] = compute_stats(sel, bins=edges, label=label, tone_id=tone)
    return Analysis(stats, tuple(empty), gated_out)


# --- comparison ----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    label_a: str
    label_b: str
    tone_id: str | None
    rms_ratio: float
    median_ratio: float
    ks_d: float
    verdict: str
    ks_threshold: float

    @property
    def winner(self) -> str | None:
        """Label of the better set, or None when inconclusive."""
        return {"a_better": self.label_a, "b_better": self.label_b}.get(self.verdict)


def _ratio(x: float, y: float) -> float:
    if x == y:
        return 1.0
    if y == 0:
        return math.inf
    return x / y


def _hist_cdf_distance(a: ErrorStats, b: ErrorStats) -> float:
    # CDFs are known exactly at bin edges; linear in between.
    grid = np.union1d(a.bin_edges_m, b.bin_edges_m)

    def cdf(s):
        c = np.concatenate(([0.0], np.cumsum(s.counts))) / s.n_epochs
        return np.interp(grid, s.bin_edges_m, c, left=0.0, right=1.0)

    return float(np.max(np.abs(cdf(a) - cdf(b))))


def ks_distance(a: ErrorStats, b: ErrorStats) -> float:
    """Two-sample Kolmogorov-Smirnov D.

    Exact when both carry raw errors, otherwise evaluated from the
    histograms; NaN when either side has neither.
    """
    if a.errors and b.errors:
        return float(sps.ks_2samp(a.errors, b.errors).statistic)
    if not (a.counts and b.counts):
        return math.nan
    return _hist_cdf_distance(a, b)


def compare(a: ErrorStats, b: ErrorStats, ks_threshold: float = 0.2) -> ComparisonReport:
    """Compare two error distributions.

    A set is called better only if the KS distance exceeds
    ``ks_threshold`` and its RMS error is the smaller one.  An unknown
    distance (no raw errors or histograms) is always inconclusive.
    """
    if a.n_epochs == 0 or b.n_epochs == 0:
        raise EmptyPartitionError("cannot compare an empty set")
    d = ks_distance(a, b)
    if d > ks_threshold and a.rms_m < b.rms_m:
        verdict = "a_better"
    elif d > ks_threshold and b.rms_m < a.rms_m:
        verdict = "b_better"
    else:
        verdict = "inconclusive"
    return ComparisonReport(
        label_a=a.label,
        label_b=b.label,
        tone_id=a.tone_id if a.tone_id == b.tone_id else None,
        rms_ratio=_ratio(a.rms_m, b.rms_m),
        median_ratio=_ratio(a.median_abs_m, b.median_abs_m),
        ks_d=d,
        verdict=verdict,
        ks_threshold=ks_threshold,
    )


STANDARD_COMPARISONS = (("day", "night"), ("modified", "unmodified"))


def standard_comparisons(analysis: Analysis, ks_threshold: float = 0.2) -> list[ComparisonReport]:
    """Day vs night and modified vs unmodified, per tone, where available."""
    reports = []
    for la, lb in STANDARD_COMPARISONS:
        for tone in TONE_IDS:
            a, b = analysis.stats.get((la, tone)), analysis.stats.get((lb, tone))
            if a is not None and b is not None:
                reports.append(compare(a, b, ks_threshold))
    return reports


def group_by_tone(epochs: Iterable[RangeEpoch]) -> dict[str, list[RangeEpoch]]:
    out = defaultdict(list)
    for e in epochs:
        out[e.tone_id].append(e)
    return dict(out)
