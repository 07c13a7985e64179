"""Frequency-domain respiratory-rate estimation.

The baseline estimator transforms 20 s windows (50 % overlap), takes the
highest-power non-DC bin per window and reports 60 times the mean peak
frequency.  The modified estimator first isolates the breathing component
by subtracting a moving average, then runs the same pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, NoPeakError, ParameterError
from .preprocess import isolate_breathing

BASELINE = "baseline"
MODIFIED = "modified"


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectrum: |DFT|^2 at bin centers k*fs/n_fft."""

    freqs: np.ndarray
    power: np.ndarray
    n_fft: int

    def __post_init__(self):
        freqs = np.array(self.freqs, dtype=float)
        power = np.array(self.power, dtype=float)
        if freqs.shape != power.shape or freqs.ndim != 1:
            raise ParameterError("freqs and power must be 1-D arrays of equal length")
        if len(freqs) != self.n_fft // 2 + 1:
            raise ParameterError(
                f"one-sided spectrum of n_fft={self.n_fft} must have "
                f"{self.n_fft // 2 + 1} bins, got {len(freqs)}"
            )
        if np.any(power < 0):
            raise ParameterError("power must be non-negative")
        for arr in (freqs, power):
            arr.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "power", power)


def periodogram(series) -> Spectrum:
    """Rectangular-window power spectrum, n_fft = N (no zero padding)."""
    v = np.asarray(series.values, dtype=float)
    if v.size < 2:
        raise InsufficientDataError("periodogram needs at least 2 samples")
    coeffs = np.fft.rfft(v)
    power = np.abs(coeffs) ** 2
    freqs = np.fft.rfftfreq(v.size, 1.0 / series.fs)
    return Spectrum(freqs, power, n_fft=v.size)


def peak_frequency(
    spec: Spectrum,
    exclude_dc: bool = True,
    band: tuple[float, float] | None = None,
) -> float:
    """Bin-center frequency of maximum power; ties break toward the lowest bin."""
    mask = np.ones(spec.power.size, dtype=bool)
    if exclude_dc:
        mask[0] = False
    if band is not None:
        lo, hi = float(band[0]), float(band[1])
        if lo > hi:
            raise ParameterError(f"band must satisfy lo <= hi, got ({lo}, {hi})")
        mask &= (spec.freqs >= lo) & (spec.freqs <= hi)
    if not mask.any():
        raise NoPeakError("no candidate bins inside the search band")
    candidates = spec.power[mask]
    if candidates.max() == 0.0:
        raise NoPeakError("all candidate bins have zero power")
    # argmax returns the first maximum; freqs ascend, so ties resolve low.
    return float(spec.freqs[mask][np.argmax(candidates)])


@dataclass(frozen=True)
class RrEstimate:
    """Respiratory-rate estimate with its per-window peak audit trail."""

    rr_bpm: float
    per_window_peaks: tuple[float, ...]
    window_s: float
    overlap_fraction: float
    method: str = BASELINE
    band: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {
            "rr_bpm": self.rr_bpm,
            "per_window_peaks_hz": list(self.per_window_peaks),
            "window_s": self.window_s,
            "overlap_fraction": self.overlap_fraction,
            "method": self.method,
            "band_hz": list(self.band) if self.band is not None else None,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _window_plan(n: int, fs: float, window_s: float, overlap: float) -> tuple[int, int]:
    if not 0.0 <= overlap < 1.0:
        raise ParameterError(f"overlap must lie in [0, 1), got {overlap}")
    n_win = int(round(window_s * fs))
    if n_win < 2:
        raise ParameterError(f"window of {window_s} s holds fewer than 2 samples at fs={fs}")
    hop = int(round((1.0 - overlap) * window_s * fs))
    if hop < 1:
        raise ParameterError("window advance is shorter than one sample")
    if n < n_win:
        raise InsufficientDataError(
            f"record of {n} samples is shorter than one {window_s} s window ({n_win})"
        )
    return n_win, hop


def _windowed_peaks(
    values: np.ndarray,
    fs: float,
    window_s: float,
    overlap: float,
    band: tuple[float, float] | None,
) -> list[float]:
    n_win, hop = _window_plan(values.size, fs, window_s, overlap)
    peaks = []
    for start in range(0, values.size - n_win + 1, hop):
        chunk = values[start:start + n_win]
        chunk = chunk - chunk.mean()
        coeffs = np.fft.rfft(chunk)
        spec = Spectrum(
            np.fft.rfftfreq(n_win, 1.0 / fs), np.abs(coeffs) ** 2, n_fft=n_win
        )
        peaks.append(peak_frequency(spec, exclude_dc=True, band=band))
    return peaks


def estimate_rr(
    series,
    window_s: float = 20.0,
    overlap: float = 0.5,
    band: tuple[float, float] | None = None,
) -> RrEstimate:
    """Baseline estimator: windowed DC-removed periodogram peak mean times 60.

    A trailing partial window is discarded.  When ``band`` is given the
    peak search is restricted to it; by default only DC is excluded.
    """
    peaks = _windowed_peaks(
        np.asarray(series.values, dtype=float), series.fs, window_s, overlap, band
    )
    return RrEstimate(
        rr_bpm=60.0 * float(np.mean(peaks)),
        per_window_peaks=tuple(peaks),
        window_s=float(window_s),
        overlap_fraction=float(overlap),
        method=BASELINE,
        band=band,
    )


def estimate_rr_modified(
    series,
    smooth_window_s: float = 1.5,
    window_s: float = 20.0,
    overlap: float = 0.5,
    band: tuple[float, float] | None = None,
) -> RrEstimate:
    """Motion-suppressed estimator: isolate breathing, then the baseline pipeline."""
    conditioned = isolate_breathing(series, smooth_window_s)
    peaks = _windowed_peaks(conditioned.values, conditioned.fs, window_s, overlap, band)
    return RrEstimate(
        rr_bpm=60.0 * float(np.mean(peaks)),
        per_window_peaks=tuple(peaks),
        window_s=float(window_s),
        overlap_fraction=float(overlap),
        method=MODIFIED,
        band=band,
    )
