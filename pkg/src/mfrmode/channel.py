"""Propagation: groundwave delay, delayed skywave echo, diurnal schedule, AWGN."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, GeometryError, HistoryUnderrunError
from .signal_gen import (
    SPEED_OF_LIGHT,
    SampleBlock,
    TransmitterConfig,
    generate_rmode,
)

EARTH_RADIUS_M = 6_371_000.0
SECONDS_PER_DAY = 86_400.0
DEFAULT_TAPS = 63
_INTEGER_DELAY_TOL = 1e-9  # samples


@dataclass(frozen=True)
class SkywaveParams:
    """Skywave echo parameters.

    ``extra_phase`` is an additional carrier-phase rotation of the echo in
    radians.  It is zero for the plain delayed-copy model and is only set
    by the randomised-phase sensitivity mode.
    """

    alpha: float = 0.0
    t_d: float = 0.0
    extra_phase: float = 0.0

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha!r}")
        if not (self.t_d >= 0 and math.isfinite(self.t_d)):
            raise ConfigurationError(f"t_d must be >= 0, got {self.t_d!r}")


def clock_seconds(value) -> float:
    """Seconds past local midnight for a ``time``, ``datetime`` or number."""
    if isinstance(value, dt.datetime):
        value = value.timetz()
    if isinstance(value, dt.time):
        return value.hour * 3600.0 + value.minute * 60.0 + value.second + value.microsecond * 1e-6
    return float(value) % SECONDS_PER_DAY


@dataclass(frozen=True)
class DiurnalSchedule:
    """Time-of-day evolution of the skywave.

    Skywave is absent inside ``[day_start, day_end)``.  After ``day_end``
    alpha ramps linearly up to ``alpha_night`` over ``ramp_minutes``; it
    ramps back down to zero over the ``ramp_minutes`` preceding
    ``day_start``.  ``t_d_night=None`` means "derive from link geometry".
    """

    day_start: dt.time = dt.time(6, 0)
    day_end: dt.time = dt.time(18, 0)
    alpha_night: float = 0.3
    ramp_minutes: float = 30.0
    t_d_night: float | None = None
    random_phase: bool = False

    def __post_init__(self):
        ds, de = clock_seconds(self.day_start), clock_seconds(self.day_end)
        if not ds < de:
            raise ConfigurationError("day_start must precede day_end within one day")
        if not (self.alpha_night >= 0 and math.isfinite(self.alpha_night)):
            raise ConfigurationError("alpha_night must be >= 0")
        if not self.ramp_minutes >= 0:
            raise ConfigurationError("ramp_minutes must be >= 0")
        if 2 * self.ramp_minutes * 60.0 > SECONDS_PER_DAY - (de - ds):
            raise ConfigurationError("ramps do not fit inside the night")
        if self.t_d_night is not None and not self.t_d_night >= 0:
            raise ConfigurationError("t_d_night must be >= 0")

    def is_day(self, local_time) -> bool:
        x = clock_seconds(local_time)
        return clock_seconds(self.day_start) <= x < clock_seconds(self.day_end)


def schedule_alpha(schedule: DiurnalSchedule, local_time) -> SkywaveParams:
    """Skywave parameters in force at ``local_time``."""
    x = clock_seconds(local_time)
    ds, de = clock_seconds(schedule.day_start), clock_seconds(schedule.day_end)
    t_d = schedule.t_d_night or 0.0
    if ds <= x < de:
        return SkywaveParams(0.0, t_d)
    ramp = schedule.ramp_minutes * 60.0
    if ramp == 0:
        return SkywaveParams(schedule.alpha_night, t_d)
    since_sunset = (x - de) % SECONDS_PER_DAY
    until_sunrise = (ds - x) % SECONDS_PER_DAY
    frac = min(1.0, since_sunset / ramp, until_sunrise / ramp)
    return SkywaveParams(schedule.alpha_night * frac, t_d)


@dataclass(frozen=True)
class LinkGeometry:
    """Transmitter/receiver placement on a spherical Earth."""

    tx_lat: float
    tx_lon: float
    rx_lat: float
    rx_lon: float
    groundwave_velocity_factor: float = 1.0
    ionosphere_height_km: float = 90.0

    def __post_init__(self):
        for name in ("tx_lat", "rx_lat"):
            v = getattr(self, name)
            if not (math.isfinite(v) and -90.0 <= v <= 90.0):
                raise GeometryError(f"{name}={v!r} outside [-90, 90]")
        for name in ("tx_lon", "rx_lon"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryError(f"{name} is not finite")
        if not 0 < self.groundwave_velocity_factor <= 1:
            raise ConfigurationError("groundwave_velocity_factor must be in (0, 1]")
        if not self.ionosphere_height_km > 0:
            raise ConfigurationError("ionosphere_height_km must be > 0")


class LinkSolution(NamedTuple):
    groundwave_delay: float
    t_d: float
    true_range: float


def great_circle_distance(lat1, lon1, lat2, lon2, radius=EARTH_RADIUS_M) -> float:
    """Haversine distance in metres between two points given in degrees."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(min(1.0, math.sqrt(h)))


def derive_link(geom: LinkGeometry) -> LinkSolution:
    """Range, groundwave delay and one-hop skywave excess delay for a link.

    The skywave path is a flat-Earth single reflection at the layer
    height: ``2 sqrt((d/2)^2 + h^2)``.
    """
    d = great_circle_distance(geom.tx_lat, geom.tx_lon, geom.rx_lat, geom.rx_lon)
    if d > math.pi * EARTH_RADIUS_M * (1 - 1e-9):
        raise GeometryError("antipodal transmitter/receiver: great circle is not unique")
    h = geom.ionosphere_height_km * 1000.0
    hop = 2.0 * math.hypot(d / 2.0, h)
    return LinkSolution(
        groundwave_delay=d / (SPEED_OF_LIGHT * geom.groundwave_velocity_factor),
        t_d=(hop - d) / SPEED_OF_LIGHT,
        true_range=d,
    )


def delayed_rmode(config: TransmitterConfig, t0: float, n: int, delay: float) -> SampleBlock:
    """Transmit signal as seen ``delay`` seconds later, on the receiver's grid.

    The generators are analytic in time, so the delay is applied exactly by
    evaluating them at ``t - delay`` and rotating by the carrier phase
    ``exp(-j 2 pi f_c delay)`` that a passband delay implies.
    """
    src = generate_rmode(config, t0 - delay, n)
    rot = np.exp(-2j * np.pi * _frac(config.carrier_hz * delay))
    return SampleBlock(t0, config.sample_rate_hz, src.samples * rot, config.carrier_hz)


def _frac(x: float) -> float:
    return x - math.floor(x)


def fractional_delay_taps(mu: float, taps: int = DEFAULT_TAPS) -> np.ndarray:
    """Blackman-windowed sinc taps delaying by ``mu`` in [0, 1) samples.

    Tap ``i`` multiplies input sample ``n - K + j`` with
    ``j = i - (taps - 1) // 2``.  Taps are normalised to unit DC gain.
    """
    if taps < 3 or taps % 2 == 0:
        raise ConfigurationError("taps must be an odd number >= 3")
    half = (taps - 1) // 2
    j = np.arange(-half, half + 1, dtype=np.float64)
    x = j + mu
    w = 0.42 + 0.5 * np.cos(np.pi * x / (half + 1)) + 0.08 * np.cos(2 * np.pi * x / (half + 1))
    h = np.sinc(x) * w
    return h / h.sum()


def skywave_margins(t_d: float, fs: float, taps: int = DEFAULT_TAPS) -> tuple[int, int]:
    """Samples of (history, lookahead) ``apply_skywave`` needs for ``t_d``."""
    d = t_d * fs
    k = round(d)
    if abs(d - k) <= _INTEGER_DELAY_TOL:
        return int(k), 0
    k = math.floor(d)
    half = (taps - 1) // 2
    return k + half, max(0, half - k)


def apply_skywave(
    s: SampleBlock,
    params: SkywaveParams,
    history=None,
    lookahead=None,
    carrier_hz: float | None = None,
    taps: int = DEFAULT_TAPS,
) -> SampleBlock:
    """Add the delayed, attenuated skywave copy to ``s``.

    ``r(t) = s(t) + alpha s(t - t_d) exp(-j 2 pi f_c t_d)``, with an
    optional extra echo phase.  Integer-sample delays are exact; fractional
    ones use windowed-sinc interpolation, which also needs a few samples
    after the block (``lookahead``).

    Parameters
    ----------
    s : SampleBlock
    params : SkywaveParams
    history, lookahead : array-like of complex, optional
        Samples immediately before / after ``s``.  See
        :func:`skywave_margins` for the required lengths.
    carrier_hz : float, optional
        Overrides ``s.carrier_hz``.

    Raises
    ------
    HistoryUnderrunError
        When ``history`` or ``lookahead`` is too short for ``t_d``.
    """
    if params.alpha == 0:
        return s
    fc = s.carrier_hz if carrier_hz is None else carrier_hz
    if fc is None:
        raise ConfigurationError("carrier frequency unknown: block has no carrier_hz")
    fs = s.sample_rate_hz
    need_before, need_after = skywave_margins(params.t_d, fs, taps)
    history = np.zeros(0, complex) if history is None else np.asarray(history, dtype=complex)
    lookahead = np.zeros(0, complex) if lookahead is None else np.asarray(lookahead, dtype=complex)
    if history.size < need_before:
        raise HistoryUnderrunError(f"t_d={params.t_d:g} s needs {need_before} history samples, got {history.size}")
    if lookahead.size < need_after:
        raise HistoryUnderrunError(f"fractional t_d needs {need_after} lookahead samples, got {lookahead.size}")

    n = len(s)
    ext = np.concatenate((history[history.size - need_before :], s.samples, lookahead[:need_after]))
    if need_after == 0 and abs(params.t_d * fs - round(params.t_d * fs)) <= _INTEGER_DELAY_TOL:
        delayed = ext[:n]
    else:
        d = params.t_d * fs
        k = math.floor(d)
        h = fractional_delay_taps(d - k, taps)
        # output n uses ext[need_before + n - k + j], j = -half..half
        delayed = np.convolve(ext, h[::-1], mode="valid")[:n]
    rot = np.exp(1j * (params.extra_phase - 2.0 * np.pi * _frac(fc * params.t_d)))
    return s.with_samples(s.samples + params.alpha * rot * delayed)


def add_awgn(s: SampleBlock, noise_sigma: float, seed) -> SampleBlock:
    """Add circularly-symmetric complex Gaussian noise.

    ``noise_sigma`` is the RMS of the complex noise, ``E|n|^2 = sigma^2``;
    each quadrature therefore carries ``sigma^2 / 2``.
    """
    if not noise_sigma >= 0:
        raise ConfigurationError(f"noise_sigma must be >= 0, got {noise_sigma!r}")
    if noise_sigma == 0:
        return s
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((2, len(s)))
    return s.with_samples(s.samples + (noise_sigma / math.sqrt(2.0)) * (w[0] + 1j * w[1]))
