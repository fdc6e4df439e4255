"""Per-tone phase/SNR estimation, phase-to-range conversion and SNR gating."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, EpochMismatchError, InsufficientDataError
from .signal_gen import SPEED_OF_LIGHT, SampleBlock, _cycles

SNR_CAP_DB = 60.0
DEFAULT_SNR_THRESHOLD_DB = 7.0
DEFAULT_INTEGRATION_S = 1.0
TONE_GUARD_BINS = 3
# Central region dominated by the MSK main lobe (+-0.75/T) plus margin; 1/T at 200 bit/s.
DEFAULT_CENTER_EXCLUSION_HZ = 200.0
TONE_IDS = ("CW1", "CW2")


@dataclass(frozen=True)
class CwMeasurement:
    """One tone's estimate over one integration window.

    ``phase_cycles`` is in [0, 1).  Straight out of :func:`estimate_tone`
    it is the tone phase against ``exp(j 2 pi offset t)``; after
    :func:`delay_phase` it is the propagation phase ``f_tone * tau``.
    """

    tone_id: str
    epoch_time: float
    phase_cycles: float
    snr_db: float
    amplitude_est: float

    def __post_init__(self):
        if not 0.0 <= self.phase_cycles < 1.0:
            raise ConfigurationError(f"phase_cycles={self.phase_cycles!r} outside [0, 1)")


@dataclass(frozen=True)
class RangeEpoch:
    """Resolved range for one tone at one epoch.

    ``range_m == (integer_cycles_N + phase_cycles) * wavelength``.  The
    trailing fields are bookkeeping for analysis and may be NaN/None when
    unknown (e.g. for ingested logs).
    """

    tone_id: str
    epoch_time: float
    range_m: float
    integer_cycles_N: int
    phase_cycles: float
    gated: bool = True
    error_m: float = math.nan
    snr_db: float = math.nan
    local_time: dt.datetime | None = None
    alpha: float = math.nan
    boosted: bool = False


def _wrap01(x: float) -> float:
    y = x - math.floor(x)
    return 0.0 if y >= 1.0 else y


def estimate_tone(
    r: SampleBlock,
    offset_hz: float,
    integration_s: float = DEFAULT_INTEGRATION_S,
    *,
    tone_id: str = "CW1",
    other_offsets_hz=None,
    center_exclusion_hz: float = DEFAULT_CENTER_EXCLUSION_HZ,
) -> CwMeasurement:
    """Correlate the first ``integration_s`` of ``r`` against a tone.

    The Hann-weighted correlation ``X = sum(w r exp(-j 2 pi offset t)) /
    sum(w)`` uses absolute sample times, so the returned phase is
    referenced to the scenario epoch.  The taper keeps MSK pulses cut by
    the window edges from leaking into the tone bin.  SNR is the tone's
    power over the noise power per bin of the same windowed periodogram.
    Noise power is the median periodogram bin divided by ln 2 (the
    median of an exponential variate), taken over bins outside
    ``±TONE_GUARD_BINS`` of every tone and outside ``|f| <=
    center_exclusion_hz``.  SNR is clipped to ``±SNR_CAP_DB``.

    Parameters
    ----------
    other_offsets_hz : sequence of float, optional
        Other tones to exclude from the noise estimate.  Defaults to the
        mirror tone ``-offset_hz``.

    Raises
    ------
    InsufficientDataError
        If the block is shorter than the integration window.
    """
    fs = r.sample_rate_hz
    n = int(round(integration_s * fs))
    if n < 16:
        raise InsufficientDataError(f"integration window of {n} samples is too short")
    if len(r) < n:
        raise InsufficientDataError(f"block has {len(r)} samples, window needs {n}")
    if not abs(offset_hz) < fs / 2:
        raise ConfigurationError(f"tone offset {offset_hz} Hz beyond Nyquist for fs={fs}")

    w = _hann(n)
    x = r.samples[:n] * w
    idx = r.start_index + np.arange(n)
    ref = np.exp(-2j * np.pi * _cycles(offset_hz, idx, fs))
    corr = np.dot(x, ref) / w.sum()
    amplitude = abs(corr)
    phase = _wrap01(math.atan2(corr.imag, corr.real) / (2 * math.pi))

    spec = np.abs(np.fft.fft(x)) ** 2
    freqs = np.fft.fftfreq(n, 1.0 / fs)
    df = fs / n
    others = (-offset_hz,) if other_offsets_hz is None else tuple(other_offsets_hz)
    keep = np.abs(freqs) > center_exclusion_hz
    for f in (offset_hz, *others):
        keep &= np.abs(freqs - f) > (TONE_GUARD_BINS + 0.5) * df
    noise = float(np.median(spec[keep])) / math.log(2.0) if keep.any() else 0.0
    tone_power = (w.sum() * amplitude) ** 2
    snr_db = _snr_db(tone_power, noise)
    epoch = r.start_time + 0.5 * n / fs
    return CwMeasurement(tone_id, epoch, phase, snr_db, amplitude)


@lru_cache(maxsize=8)
def _hann(n: int) -> np.ndarray:
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    w.flags.writeable = False
    return w


def _snr_db(signal: float, noise: float) -> float:
    if noise <= 0:
        return SNR_CAP_DB if signal > 0 else -SNR_CAP_DB
    if signal <= 0:
        return -SNR_CAP_DB
    return float(np.clip(10.0 * math.log10(signal / noise), -SNR_CAP_DB, SNR_CAP_DB))


def delay_phase(m: CwMeasurement, transmit_phase: float) -> CwMeasurement:
    """Turn a raw tone phase into the propagation phase ``f_tone * tau``.

    A tone sent with phase ``transmit_phase`` (radians) and delayed by
    ``tau`` arrives with phase ``transmit_phase - 2 pi f_tone tau``.
    """
    return replace(m, phase_cycles=_wrap01(transmit_phase / (2 * math.pi) - m.phase_cycles))


def wavelength(tone_hz: float, velocity_factor: float = 1.0) -> float:
    if not tone_hz > 0:
        raise ConfigurationError(f"tone frequency must be > 0, got {tone_hz!r}")
    return SPEED_OF_LIGHT * velocity_factor / tone_hz


def phase_to_range(
    m: CwMeasurement,
    tone_hz: float,
    a_priori_range_m: float,
    *,
    velocity_factor: float = 1.0,
) -> RangeEpoch:
    """Resolve the integer ambiguity nearest to an a-priori range.

    ``N`` minimises ``|(N + phase) * lambda - a_priori|``; exact ties go
    to the smaller ``N``.
    """
    if not a_priori_range_m >= 0:
        raise ConfigurationError(f"a-priori range must be >= 0, got {a_priori_range_m!r}")
    lam = wavelength(tone_hz, velocity_factor)
    n_cycles = math.ceil(a_priori_range_m / lam - m.phase_cycles - 0.5)
    return RangeEpoch(
        tone_id=m.tone_id,
        epoch_time=m.epoch_time,
        range_m=(n_cycles + m.phase_cycles) * lam,
        integer_cycles_N=n_cycles,
        phase_cycles=m.phase_cycles,
        snr_db=m.snr_db,
    )


def resolve_coarse(
    m1: CwMeasurement,
    m2: CwMeasurement,
    f1: float,
    f2: float,
    *,
    velocity_factor: float = 1.0,
) -> float:
    """Coarse range from the beat between two tones' propagation phases.

    The phase difference is taken higher-frequency minus lower-frequency
    so that it grows with range, then wrapped into [0, 1) beat cycles.
    """
    if f1 == f2:
        raise ConfigurationError("tone frequencies must differ")
    if abs(m1.epoch_time - m2.epoch_time) > 1e-9:
        raise EpochMismatchError(f"epochs differ: {m1.epoch_time} vs {m2.epoch_time}")
    beat = abs(f1 - f2)
    diff = m1.phase_cycles - m2.phase_cycles if f1 > f2 else m2.phase_cycles - m1.phase_cycles
    return _wrap01(diff) * SPEED_OF_LIGHT * velocity_factor / beat


def snr_gate(m, threshold_db: float = DEFAULT_SNR_THRESHOLD_DB) -> bool:
    """True when the SNR reaches the threshold (inclusive).

    ``m`` may be a measurement, a :class:`RangeEpoch` or a bare number.
    """
    snr = m if isinstance(m, (int, float)) else m.snr_db
    return bool(snr >= threshold_db)
