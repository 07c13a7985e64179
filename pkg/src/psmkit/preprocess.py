"""Signal conditioning ahead of spectral estimation: DC removal,
moving-average motion isolation, and band SNR accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, ParameterError
from .frames import PressureSeries

DC_REMOVED = "dc-removed"
MOTION_SUPPRESSED = "motion-suppressed"

# Fraction of total non-DC power below which the rest-band is treated as
# empty and the SNR reported as +inf.
SNR_REST_EPS = 1e-12


@dataclass(frozen=True)
class ConditionedSeries:
    """Zero-mean samples ready for spectral analysis, with provenance."""

    values: np.ndarray
    fs: float
    kind: str = DC_REMOVED

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise EmptyInputError("conditioned series must hold at least one sample")
        if not np.all(np.isfinite(values)):
            raise ParameterError("conditioned series contains non-finite samples")
        fs = float(self.fs)
        if fs <= 0:
            raise ParameterError(f"fs must be positive, got {fs}")
        if self.kind not in (DC_REMOVED, MOTION_SUPPRESSED):
            raise ParameterError(f"unknown provenance tag {self.kind!r}")
        scale = np.abs(values).max()
        if scale > 0 and abs(values.mean()) > 1e-9 * scale:
            raise ParameterError("conditioned series mean is not zero")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fs", fs)

    @property
    def n(self) -> int:
        return self.values.size


def remove_dc(series) -> ConditionedSeries:
    """Subtract the record mean from every sample (idempotent)."""
    v = np.asarray(series.values, dtype=float)
    if np.all(v == v[0]):
        return ConditionedSeries(np.zeros(v.size), series.fs, DC_REMOVED)
    r = v - v.mean()
    # second centering pass keeps the residual mean at rounding scale even
    # when the offset dwarfs the signal
    return ConditionedSeries(r - r.mean(), series.fs, DC_REMOVED)


def _window_length(window_s: float, fs: float) -> int:
    w = int(round(float(window_s) * fs))
    if w < 1:
        raise ParameterError(
            f"moving-average window {window_s} s is shorter than one sample at fs={fs}"
        )
    return w


def _moving_mean(v: np.ndarray, w: int) -> np.ndarray:
    # Centered window, truncated to the available samples at the edges.
    # Even lengths center on the earlier of the two middle samples.
    n = v.size
    left = (w - 1) // 2
    right = w - 1 - left
    csum = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(n)
    lo = np.maximum(idx - left, 0)
    hi = np.minimum(idx + right + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def moving_average(series, window_s: float = 1.5) -> PressureSeries:
    """Centered moving mean; output length equals input length."""
    w = _window_length(window_s, series.fs)
    return PressureSeries(_moving_mean(np.asarray(series.values, float), w), series.fs)


def isolate_breathing(series, window_s: float = 1.5) -> ConditionedSeries:
    """Suppress slow motion artifact: raw minus its moving average, then DC-removed.

    The moving average tracks the low-frequency artifact; subtracting it
    leaves the faster breathing component.
    """
    v = np.asarray(series.values, dtype=float)
    w = _window_length(window_s, series.fs)
    if np.all(v == v[0]):
        return ConditionedSeries(np.zeros(v.size), series.fs, MOTION_SUPPRESSED)
    residual = v - _moving_mean(v, w)
    residual = residual - residual.mean()
    return ConditionedSeries(residual - residual.mean(), series.fs, MOTION_SUPPRESSED)


def snr_db(
    series: ConditionedSeries,
    f0: float,
    n_harmonics: int = 2,
    band_halfwidth: float = 0.05,
) -> float:
    """Signal band power versus all other non-DC power, in dB.

    The signal band collects periodogram bins within ±band_halfwidth of
    f0 and of its n_harmonics further integer multiples (2*f0, 3*f0, ...).
    Returns +inf when effectively no power lies outside the band; noise
    overlapping the band is counted as signal, so the figure can
    overestimate the true SNR.
    """
    f0 = float(f0)
    band_halfwidth = float(band_halfwidth)
    n_harmonics = int(n_harmonics)
    nyquist = series.fs / 2.0
    if not 0.0 < f0 < nyquist:
        raise ParameterError(f"f0 must lie in (0, {nyquist}), got {f0}")
    if n_harmonics < 0:
        raise ParameterError("n_harmonics must be >= 0")
    if band_halfwidth <= 0:
        raise ParameterError("band halfwidth must be positive")
    centers = [f0 * (k + 1) for k in range(n_harmonics + 1)]
    for fc in centers:
        if fc - band_halfwidth <= 0 or fc + band_halfwidth >= nyquist:
            raise ParameterError(
                f"band around {fc:.6g} Hz does not fit inside (0, {nyquist}) Hz"
            )
    v = series.values
    power = np.abs(np.fft.rfft(v)) ** 2
    freqs = np.fft.rfftfreq(v.size, 1.0 / series.fs)
    nondc = power[1:]
    f_nondc = freqs[1:]
    tol = band_halfwidth + 1e-9 * series.fs
    in_band = np.zeros(f_nondc.size, dtype=bool)
    for fc in centers:
        in_band |= np.abs(f_nondc - fc) <= tol
    p_total = float(nondc.sum())
    if p_total == 0.0:
        raise DegenerateInputError("series has no non-DC spectral power")
    p_signal = float(nondc[in_band].sum())
    p_rest = p_total - p_signal
    if p_rest < SNR_REST_EPS * p_total:
        return math.inf
    return 10.0 * math.log10(p_signal / p_rest)
