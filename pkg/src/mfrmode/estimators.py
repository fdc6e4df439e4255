"""scikit-learn style wrappers around the receiver chain.

``CwToneEstimator`` turns received sample blocks into per-tone features and
``RangeEstimator`` turns those features into ranges, learning the transmit
tone phases from epochs with known range.  Chained in a
:class:`sklearn.pipeline.Pipeline` they form a calibrated ranging receiver::

    pipe = make_pipeline(CwToneEstimator(), RangeEstimator())
    pipe.fit(train_blocks, true_ranges)
    ranges = pipe.predict(blocks)
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .receiver import CwMeasurement, estimate_tone, phase_to_range, resolve_coarse, wavelength
from .signal_gen import SampleBlock


class CwToneEstimator(TransformerMixin, BaseEstimator):
    """Per-tone phase, SNR and amplitude of each received block.

    ``X`` is a sequence of :class:`SampleBlock`.  The output has one row per
    block and columns ``[phase_1..phase_k, snr_1..snr_k, amp_1..amp_k]`` for
    the ``k`` tones in ``offsets_hz``; phases are raw tone phases in cycles.

    Parameters
    ----------
    offsets_hz : tuple of float
        Tone offsets from the carrier.
    integration_s : float
    """

    def __init__(self, offsets_hz=(250.0, -250.0), integration_s=1.0):
        self.offsets_hz = offsets_hz
        self.integration_s = integration_s

    def fit(self, X, y=None):
        blocks = self._check_blocks(X)
        self.n_tones_ = len(self.offsets_hz)
        self.sample_rate_hz_ = blocks[0].sample_rate_hz
        return self

    def transform(self, X):
        check_is_fitted(self, "n_tones_")
        blocks = self._check_blocks(X)
        out = np.empty((len(blocks), 3 * self.n_tones_))
        for i, b in enumerate(blocks):
            for j, off in enumerate(self.offsets_hz):
                others = [o for o in self.offsets_hz if o != off]
                m = estimate_tone(b, off, self.integration_s, other_offsets_hz=others)
                out[i, j] = m.phase_cycles
                out[i, self.n_tones_ + j] = m.snr_db
                out[i, 2 * self.n_tones_ + j] = m.amplitude_est
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "n_tones_")
        k = range(1, self.n_tones_ + 1)
        return np.array([f"phase_cw{i}" for i in k] + [f"snr_cw{i}" for i in k] + [f"amp_cw{i}" for i in k], dtype=object)

    @staticmethod
    def _check_blocks(X):
        blocks = list(X)
        if not blocks:
            raise ValueError("need at least one sample block")
        if not all(isinstance(b, SampleBlock) for b in blocks):
            raise TypeError("X must be a sequence of SampleBlock")
        return blocks


class RangeEstimator(RegressorMixin, BaseEstimator):
    """Ranges from raw tone phases, calibrated on epochs of known range.

    ``fit`` learns each tone's transmit phase as the circular mean of
    ``raw_phase + f_tone * range / (c * velocity_factor)``.  ``predict``
    turns raw phases into propagation phases and resolves the integer
    ambiguity, either against ``a_priori_range_m`` (default: the median
    training range) or, with ``ambiguity="coarse"``, against the dual-tone
    beat estimate from the first two tones.

    ``X`` columns are the raw phases (cycles) of the tones in ``tone_hz``,
    optionally followed by further columns (e.g. SNR) which are ignored.
    ``predict`` returns the mean range over tones; :meth:`predict_tones`
    gives one column per tone.
    """

    def __init__(self, tone_hz=(318_250.0, 317_750.0), a_priori_range_m=None, ambiguity="a_priori", velocity_factor=1.0):
        self.tone_hz = tone_hz
        self.a_priori_range_m = a_priori_range_m
        self.ambiguity = ambiguity
        self.velocity_factor = velocity_factor

    def fit(self, X, y):
        X, y = validate_data(self, X, y, ensure_min_features=len(self.tone_hz), y_numeric=True)
        if self.ambiguity not in ("a_priori", "coarse"):
            raise ValueError(f"ambiguity must be 'a_priori' or 'coarse', got {self.ambiguity!r}")
        if self.ambiguity == "coarse" and len(self.tone_hz) < 2:
            raise ValueError("coarse ambiguity resolution needs two tones")
        k = len(self.tone_hz)
        phases = np.empty(k)
        for j, f in enumerate(self.tone_hz):
            cyc = X[:, j] + y / wavelength(f, self.velocity_factor)
            z = np.mean(np.exp(2j * np.pi * cyc))
            phases[j] = (np.angle(z) / (2 * np.pi)) % 1.0
        self.transmit_phase_cycles_ = phases
        self.a_priori_range_ = float(np.median(y)) if self.a_priori_range_m is None else float(self.a_priori_range_m)
        return self

    def predict_tones(self, X):
        check_is_fitted(self, "transmit_phase_cycles_")
        X = validate_data(self, X, reset=False)
        out = np.empty((X.shape[0], len(self.tone_hz)))
        for i, row in enumerate(X):
            meas = [
                CwMeasurement(f"CW{j + 1}", 0.0, _wrap(self.transmit_phase_cycles_[j] - row[j]), math.nan, math.nan)
                for j in range(len(self.tone_hz))
            ]
            if self.ambiguity == "coarse":
                a_priori = resolve_coarse(meas[0], meas[1], self.tone_hz[0], self.tone_hz[1], velocity_factor=self.velocity_factor)
            else:
                a_priori = self.a_priori_range_
            for j, m in enumerate(meas):
                out[i, j] = phase_to_range(m, self.tone_hz[j], a_priori, velocity_factor=self.velocity_factor).range_m
        return out

    def predict(self, X):
        return self.predict_tones(X).mean(axis=1)


def _wrap(x: float) -> float:
    y = x % 1.0
    return 0.0 if y >= 1.0 else float(y)

