"""Transmit-side waveform synthesis for MF R-Mode.

Everything is produced as complex baseband relative to the carrier
frequency: a sample ``x`` at time ``t`` stands for the passband signal
``Re{x * exp(j 2 pi f_c t)}``.  Time is measured in seconds from the
scenario epoch and sample instants are ``(i0 + n) / fs`` where ``i0`` is
the (usually integer) sample index of the block start.  Deriving every
sample from its absolute index is what makes consecutive blocks join
without a seam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, EmptyRequestError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

MF_BAND_HZ = (285_000.0, 325_000.0)

# Bits are drawn in fixed-size chunks so any bit index can be reached
# without replaying the whole stream.
_CHUNK_BITS = 1 << 16
_CHUNK_BIAS = 1 << 40  # keeps SeedSequence entropy non-negative for t < 0
_GRID_TOL = 1e-6  # samples


@dataclass(frozen=True)
class MskParams:
    """MSK data-channel parameters.

    ``bit_interval`` defaults to 5 ms (200 bit/s), a common beacon rate.
    """

    amplitude: float = 1.0
    bit_interval: float = 0.005
    phase_offset: float = 0.0
    bit_seed: int = 0

    def __post_init__(self):
        if not (self.bit_interval > 0 and math.isfinite(self.bit_interval)):
            raise ConfigurationError(f"bit_interval must be > 0, got {self.bit_interval!r}")
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ConfigurationError(f"MSK amplitude must be >= 0, got {self.amplitude!r}")
        if int(self.bit_seed) != self.bit_seed or self.bit_seed < 0:
            raise ConfigurationError(f"bit_seed must be a non-negative integer, got {self.bit_seed!r}")

    @property
    def deviation_hz(self) -> float:
        """Peak frequency deviation, 1/(4T)."""
        return 1.0 / (4.0 * self.bit_interval)


@dataclass(frozen=True)
class CwParams:
    """One continuous-wave ranging tone at ``offset_hz`` from the carrier."""

    amplitude: float = 0.25
    phase_offset: float = 0.0
    offset_hz: float = 250.0

    def __post_init__(self):
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise ConfigurationError(f"CW amplitude must be >= 0, got {self.amplitude!r}")
        if not (abs(self.offset_hz) > 0 and math.isfinite(self.offset_hz)):
            raise ConfigurationError("CW offset_hz must be non-zero")


def _min_rate(max_offset_hz: float, bit_interval: float | None) -> float:
    half_lobe = 0.0 if bit_interval is None else 1.0 / (2.0 * bit_interval)
    return 4.0 * (abs(max_offset_hz) + half_lobe)


@dataclass(frozen=True)
class TransmitterConfig:
    """Complete description of the transmitted R-Mode signal.

    The default tone assignment puts CW1 above the carrier (318.25 kHz)
    and CW2 below it (317.75 kHz).  Swap the signs of ``offset_hz`` to
    get the opposite convention.
    """

    carrier_hz: float = 318_000.0
    msk: MskParams = field(default_factory=MskParams)
    cw1: CwParams = field(default_factory=lambda: CwParams(offset_hz=250.0))
    cw2: CwParams = field(default_factory=lambda: CwParams(offset_hz=-250.0))
    sample_rate_hz: float = 8000.0
    strict_band: bool = True

    def __post_init__(self):
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ConfigurationError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz!r}")
        need = _min_rate(max(abs(self.cw1.offset_hz), abs(self.cw2.offset_hz)), self.msk.bit_interval)
        if self.sample_rate_hz < need:
            raise ConfigurationError(
                f"sample_rate_hz={self.sample_rate_hz} below the required {need:g} Hz "
                "(4 x (max tone offset + MSK half main lobe))"
            )
        if self.strict_band and not (MF_BAND_HZ[0] <= self.carrier_hz <= MF_BAND_HZ[1]):
            raise ConfigurationError(
                f"carrier_hz={self.carrier_hz} outside the {MF_BAND_HZ[0]:g}-{MF_BAND_HZ[1]:g} Hz band"
            )
        if self.cw1.offset_hz == self.cw2.offset_hz:
            raise ConfigurationError("CW1 and CW2 must use different offsets")

    def tone(self, tone_id: str) -> CwParams:
        if tone_id == "CW1":
            return self.cw1
        if tone_id == "CW2":
            return self.cw2
        raise ConfigurationError(f"unknown tone {tone_id!r}")

    def tone_hz(self, tone_id: str) -> float:
        """Absolute frequency of a tone in Hz."""
        return self.carrier_hz + self.tone(tone_id).offset_hz

    def with_cw_gain(self, gain_db: float) -> "TransmitterConfig":
        """Copy with both CW amplitudes scaled by ``gain_db`` (power dB)."""
        g = 10.0 ** (gain_db / 20.0)
        return replace(
            self,
            cw1=replace(self.cw1, amplitude=self.cw1.amplitude * g),
            cw2=replace(self.cw2, amplitude=self.cw2.amplitude * g),
        )


@dataclass(frozen=True, eq=False)
class SampleBlock:
    """Immutable run of complex-baseband samples.

    Attributes
    ----------
    start_time : float
        Time of the first sample, seconds since the scenario epoch.
    sample_rate_hz : float
    samples : numpy.ndarray
        complex128, read-only.
    carrier_hz : float or None
        Carrier the baseband is referenced to.
    """

    start_time: float
    sample_rate_hz: float
    samples: np.ndarray
    carrier_hz: float | None = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128, copy=True)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigurationError("SampleBlock needs a non-empty 1-D sample array")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def start_index(self) -> float:
        return _grid_index(self.start_time, self.sample_rate_hz)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def end_time(self) -> float:
        """Time of the sample that would follow this block."""
        return self.start_time + self.duration

    def times(self) -> np.ndarray:
        return (self.start_index + np.arange(self.samples.size)) / self.sample_rate_hz

    def with_samples(self, samples) -> "SampleBlock":
        return SampleBlock(self.start_time, self.sample_rate_hz, samples, self.carrier_hz)

    def __add__(self, other: "SampleBlock") -> "SampleBlock":
        _check_aligned(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other: "SampleBlock") -> "SampleBlock":
        _check_aligned(self, other)
        return self.with_samples(self.samples - other.samples)


def _check_aligned(a: SampleBlock, b: SampleBlock) -> None:
    if a.sample_rate_hz != b.sample_rate_hz or len(a) != len(b) or a.start_index != b.start_index:
        raise ConfigurationError("sample blocks are not on the same time grid")


def concatenate(blocks) -> SampleBlock:
    """Join consecutive blocks into one."""
    blocks = list(blocks)
    if not blocks:
        raise EmptyRequestError("nothing to concatenate")
    first = blocks[0]
    for prev, nxt in zip(blocks, blocks[1:]):
        if nxt.sample_rate_hz != first.sample_rate_hz or abs(nxt.start_index - (prev.start_index + len(prev))) > _GRID_TOL:
            raise ConfigurationError("blocks are not contiguous")
    return first.with_samples(np.concatenate([b.samples for b in blocks]))


def _grid_index(t0: float, fs: float) -> float:
    """Sample index of time ``t0``; snapped to an integer when on the grid."""
    x = t0 * fs
    k = round(x)
    if abs(x - k) <= _GRID_TOL:
        return float(k)
    return x


def _check_request(n: int, fs: float) -> None:
    if int(n) != n or n < 0:
        raise ConfigurationError(f"sample count must be a non-negative integer, got {n!r}")
    if n == 0:
        raise EmptyRequestError("requested zero samples")
    if not (fs > 0 and math.isfinite(fs)):
        raise ConfigurationError(f"invalid sample rate {fs!r}")


def _cycles(freq_hz: float, idx: np.ndarray, fs: float) -> np.ndarray:
    """Fractional cycles of ``freq_hz`` at sample indices ``idx``."""
    c = freq_hz * idx / fs
    return c - np.floor(c)


# --- pseudorandom bit stream --------------------------------------------------


@lru_cache(maxsize=64)
def _chunk(seed: int, chunk: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, chunk + _CHUNK_BIAS])
    bits = rng.integers(0, 2, _CHUNK_BITS, dtype=np.int8) * 2 - 1
    before = np.concatenate(([0], np.cumsum(bits[:-1], dtype=np.int64)))
    bits.flags.writeable = False
    before.flags.writeable = False
    return bits, before


@lru_cache(maxsize=65536)
def _chunk_sum(seed: int, chunk: int) -> int:
    bits, before = _chunk(seed, chunk)
    return int(before[-1] + bits[-1])


def _chunk_prefix(seed: int, chunk: int) -> int:
    # sum of all bits in chunks [0, chunk), negated sum of [chunk, 0) for chunk < 0
    if chunk >= 0:
        return sum(_chunk_sum(seed, c) for c in range(chunk))
    return -sum(_chunk_sum(seed, c) for c in range(chunk, 0))


def msk_bits(seed: int, first: int, count: int) -> np.ndarray:
    """Bits ``first .. first+count-1`` of the ±1 stream for ``seed``."""
    k = np.arange(first, first + count, dtype=np.int64)
    bits, _ = _bits_and_prefix(seed, k)
    return bits


def _bits_and_prefix(seed: int, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bit value at each index and the running sum of all bits before it."""
    chunks = np.floor_divide(k, _CHUNK_BITS)
    within = k - chunks * _CHUNK_BITS
    bits = np.empty(k.shape, dtype=np.int64)
    prefix = np.empty(k.shape, dtype=np.int64)
    for c in np.unique(chunks):
        sel = chunks == c
        cb, cbefore = _chunk(seed, int(c))
        bits[sel] = cb[within[sel]]
        prefix[sel] = _chunk_prefix(seed, int(c)) + cbefore[within[sel]]
    return bits, prefix


def msk_phase(params: MskParams, idx: np.ndarray, fs: float) -> np.ndarray:
    """Instantaneous baseband MSK phase (radians) at sample indices ``idx``.

    Each bit advances the phase by ±pi/2 linearly over its interval, so the
    phase is continuous across bit boundaries.
    """
    u = np.asarray(idx, dtype=np.float64) / (fs * params.bit_interval)  # time in bits
    k = np.floor(u).astype(np.int64)
    bits, prefix = _bits_and_prefix(params.bit_seed, k)
    quarter_turns = np.mod(prefix, 4) + bits * (u - k)
    return params.phase_offset + 0.5 * np.pi * quarter_turns


# --- generators ----------------------------------------------------------------


def generate_msk(params: MskParams, carrier_hz: float, t0: float, n: int, fs: float) -> SampleBlock:
    """MSK data signal ``A exp(j(±pi t/(2T) + Phi))`` at complex baseband.

    Raises
    ------
    EmptyRequestError
        If ``n == 0``.
    ConfigurationError
        If ``fs`` cannot represent the MSK main lobe.
    """
    _check_request(n, fs)
    need = _min_rate(0.0, params.bit_interval)
    if fs < need:
        raise ConfigurationError(f"sample rate {fs} Hz below {need:g} Hz needed for MSK")
    idx = _grid_index(t0, fs) + np.arange(n)
    x = params.amplitude * np.exp(1j * msk_phase(params, idx, fs))
    return SampleBlock(t0, fs, x, carrier_hz)


def generate_cw(params: CwParams, t0: float, n: int, fs: float, carrier_hz: float | None = None) -> SampleBlock:
    """Baseband tone ``B exp(j(2 pi offset t + Phi))``."""
    _check_request(n, fs)
    if fs < _min_rate(params.offset_hz, None):
        raise ConfigurationError(f"sample rate {fs} Hz too low for a {params.offset_hz} Hz tone")
    idx = _grid_index(t0, fs) + np.arange(n)
    phase = 2.0 * np.pi * _cycles(params.offset_hz, idx, fs) + params.phase_offset
    return SampleBlock(t0, fs, params.amplitude * np.exp(1j * phase), carrier_hz)


def generate_rmode(config: TransmitterConfig, t0: float, n: int) -> SampleBlock:
    """Combined MSK + CW1 + CW2 transmit signal."""
    fs = config.sample_rate_hz
    msk = generate_msk(config.msk, config.carrier_hz, t0, n, fs)
    cw1 = generate_cw(config.cw1, t0, n, fs, config.carrier_hz)
    cw2 = generate_cw(config.cw2, t0, n, fs, config.carrier_hz)
    return msk.with_samples(msk.samples + cw1.samples + cw2.samples)
