"""Figure rendering for the CLI report path.

Every function writes a PNG next to the delimited output and returns the
path.  Rendering is headless (Agg backend).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .preprocess import isolate_breathing, moving_average

DPI = 150


def _time_axis(series) -> np.ndarray:
    return np.arange(len(series.values)) / series.fs


def save_series_plot(series, path, title="Average contact pressure") -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(_time_axis(series), series.values, lw=0.8)
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("Pressure (psi)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_conditioning_plot(series, path, smooth_window_s=1.5) -> Path:
    """Three panels: raw signal, moving-average artifact, suppressed residual."""
    path = Path(path)
    smoothed = moving_average(series, smooth_window_s)
    residual = isolate_breathing(series, smooth_window_s)
    t = _time_axis(series)
    fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    axes[0].plot(t, series.values, lw=0.8)
    axes[0].set_title("Raw average pressure")
    axes[1].plot(t, smoothed.values, lw=0.8, color="tab:orange")
    axes[1].set_title(f"Moving average ({smooth_window_s:g} s): isolated artifact")
    axes[2].plot(t, residual.values, lw=0.8, color="tab:green")
    axes[2].set_title("Raw minus smoothed: breathing component")
    axes[2].set_xlabel("Time (s)")
    for ax in axes:
        ax.set_ylabel("psi")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_spectrum_plot(spectrum, path, peak_hz=None, band=None, title="Periodogram") -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(spectrum.freqs, spectrum.power, lw=0.8)
    if band is not None:
        ax.axvspan(band[0], band[1], color="tab:blue", alpha=0.08, label="search band")
    if peak_hz is not None:
        ax.axvline(peak_hz, color="tab:red", ls="--", lw=1.0,
                   label=f"peak {peak_hz:.3g} Hz = {60 * peak_hz:.3g} bpm")
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel("Power")
    ax.set_title(title)
    ax.legend(loc="upper right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_metrology_plot(series, path, endpoint_window_s=5.0) -> Path:
    """Series with the two endpoint means the creep estimate is built from."""
    path = Path(path)
    t = _time_axis(series)
    k = max(1, int(round(endpoint_window_s * series.fs)))
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ax.plot(t, series.values, lw=0.8)
    p = series.values
    ax.hlines(p[:k].mean(), t[0], t[k - 1], color="tab:red", lw=2, label="first-window mean")
    ax.hlines(p[-k:].mean(), t[-k], t[-1], color="tab:purple", lw=2, label="last-window mean")
    ax.axhline(p.mean(), color="gray", ls=":", lw=1, label="record mean")
    ax.set_xlabel("Time (s)")
    ax.set_ylabel("Pressure (psi)")
    ax.set_title("Drift/creep record with endpoint means")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_agreement_plot(gold, diffs, report, path) -> Path:
    """Difference-versus-gold scatter with bias and 95 % limits."""
    path = Path(path)
    gold = np.asarray(gold, dtype=float)
    diffs = np.asarray(diffs, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    jitter = (np.arange(len(gold)) % 7 - 3) * 0.25
    ax.scatter(gold + jitter, diffs, s=24, alpha=0.7)
    ax.axhline(report.bias, color="gray", ls="--", label=f"bias {report.bias:.2f}")
    ax.axhline(report.upper, color="tab:red", ls="--",
               label=f"95% LoA [{report.lower:.2f}, {report.upper:.2f}]")
    ax.axhline(report.lower, color="tab:red", ls="--")
    ax.set_xlabel("Gold-standard RR (bpm)")
    ax.set_ylabel("Estimate - gold (bpm)")
    title = "Limits of agreement"
    if report.method:
        title += f" ({report.method})"
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_frame_heatmap(frame, path, roi=None) -> Path:
    """Contact-pressure image of one frame, optionally outlining the ROI."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(frame.grid, cmap="viridis", origin="upper")
    fig.colorbar(im, ax=ax, label="psi")
    if roi is not None:
        from matplotlib.patches import Rectangle

        ax.add_patch(Rectangle(
            (roi.col0 - 0.5, roi.row0 - 0.5),
            roi.col1 - roi.col0 + 1,
            roi.row1 - roi.row0 + 1,
            fill=False, edgecolor="red", lw=1.5,
        ))
    ax.set_title(f"Pressure frame at t = {frame.timestamp:.2f} s")
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
