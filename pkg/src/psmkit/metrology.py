"""Measurement uncertainty of the mat: percent drift, one-minute percent
creep, and the moving-block-bootstrap spread of drift.

Drift uses the population divisor N, exactly as defined for the
instrument; the bootstrap spread uses the sample divisor n_boot - 1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, ParameterError
from .frames import PressureSeries


def drift_percent(series: PressureSeries) -> float:
    """Standard deviation of the averaged pressure as a percentage of its mean."""
    p = series.values
    if p.size < 2:
        raise InsufficientDataError("drift needs at least 2 samples")
    p_avg = float(p.mean())
    if p_avg == 0.0:
        raise DegenerateInputError("drift undefined: average pressure is 0")
    if np.all(p == p[0]):
        return 0.0
    return 100.0 * float(np.sqrt(((p - p_avg) ** 2).mean())) / p_avg


def creep_percent(series: PressureSeries, endpoint_window_s: float = 5.0) -> float:
    """Endpoint pressure difference extrapolated to one minute, as % of mean.

    The endpoints are temporally averaged over ``endpoint_window_s``
    windows to mitigate drift while estimating creep.
    """
    endpoint_window_s = float(endpoint_window_s)
    if endpoint_window_s <= 0:
        raise ParameterError("endpoint window must be positive")
    p = series.values
    k = int(round(endpoint_window_s * series.fs))
    if k < 1:
        raise ParameterError("endpoint window shorter than one sample")
    if p.size < 2 * k:
        raise InsufficientDataError(
            f"record must span two {endpoint_window_s} s endpoint windows "
            f"({2 * k} samples), got {p.size}"
        )
    p_avg = float(p.mean())
    if p_avg == 0.0:
        raise DegenerateInputError("creep undefined: average pressure is 0")
    p_first = float(p[:k].mean())
    p_last = float(p[-k:].mean())
    return (p_last - p_first) / p_avg * (60.0 * series.fs / p.size) * 100.0


def bootstrap_drift_std(
    series: PressureSeries,
    block_size: int = 100,
    n_boot: int = 2000,
    seed: int = 0,
) -> float:
    """Moving-block-bootstrap standard deviation of the percent drift.

    Each resample concatenates floor(N/block_size) blocks drawn uniformly
    with replacement from the N - block_size + 1 overlapping contiguous
    blocks (non-circular).  Deterministic for a fixed seed.
    """
    block_size = int(block_size)
    n_boot = int(n_boot)
    if block_size < 1:
        raise ParameterError("block size must be >= 1")
    if n_boot < 2:
        raise ParameterError("need at least 2 bootstrap resamples")
    p = series.values
    n = p.size
    if n < block_size:
        raise InsufficientDataError(
            f"record ({n} samples) shorter than one block ({block_size})"
        )
    if np.all(p == p[0]):
        return 0.0  # every resample of a constant record drifts 0
    n_blocks = n // block_size
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, n - block_size + 1, size=(n_boot, n_blocks))
    # (n_boot, n_blocks, block_size) gather, flattened to resample rows
    samples = p[starts[:, :, None] + np.arange(block_size)]
    samples = samples.reshape(n_boot, n_blocks * block_size)
    means = samples.mean(axis=1)
    if np.any(means == 0.0):
        raise DegenerateInputError("a bootstrap resample has zero mean pressure")
    drifts = 100.0 * np.sqrt(((samples - means[:, None]) ** 2).mean(axis=1)) / means
    return float(np.std(drifts, ddof=1))


@dataclass(frozen=True)
class MetrologyReport:
    """Table-style uncertainty summary for one record."""

    p_avg: float
    drift_pct: float
    creep_pct: float
    drift_std_pct: float
    n_samples: int
    fs: float
    contact_area_pct: float | None = None

    def __post_init__(self):
        if self.p_avg <= 0:
            raise ParameterError("report requires a positive average pressure")
        if self.drift_pct < 0 or self.drift_std_pct < 0:
            raise ParameterError("drift percentages cannot be negative")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def metrology_report(
    series: PressureSeries,
    block_size: int = 100,
    n_boot: int = 2000,
    seed: int = 0,
    endpoint_window_s: float = 5.0,
    contact_area_pct: float | None = None,
) -> MetrologyReport:
    """Run the full drift/creep/bootstrap chain over one averaged series."""
    return MetrologyReport(
        p_avg=float(series.values.mean()),
        drift_pct=drift_percent(series),
        creep_pct=creep_percent(series, endpoint_window_s),
        drift_std_pct=bootstrap_drift_std(series, block_size, n_boot, seed),
        n_samples=series.n,
        fs=series.fs,
        contact_area_pct=contact_area_pct,
    )
