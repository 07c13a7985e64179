"""Sensel-grid data model: pressure frames, ROI averaging and frame-file I/O.

All types are immutable after construction; every operation is a pure
function, safe to call concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    BoundsError,
    EmptyInputError,
    FrameParseError,
    ParameterError,
)

# Relative tolerance on frame spacing before a sequence is rejected.
TIMESTAMP_RTOL = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PressureFrame:
    """One timestamped sensel grid, pressures in psi (non-negative)."""

    timestamp: float
    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2 or grid.size == 0:
            raise ParameterError(
                f"frame grid must be a non-empty 2-D array, got shape {grid.shape}"
            )
        if not np.all(np.isfinite(grid)):
            raise ParameterError("frame grid contains non-finite pressures")
        if np.any(grid < 0):
            raise ParameterError("frame grid contains negative pressures")
        object.__setattr__(self, "grid", _freeze(grid))
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape


@dataclass(frozen=True)
class FrameSequence:
    """Ordered pressure frames sampled uniformly at ``fs`` frames/s."""

    frames: tuple[PressureFrame, ...]
    fs: float

    def __post_init__(self):
        frames = tuple(self.frames)
        fs = float(self.fs)
        if fs <= 0 or not np.isfinite(fs):
            raise ParameterError(f"fs must be positive, got {fs}")
        if not frames:
            raise EmptyInputError("frame sequence is empty")
        shape = frames[0].shape
        for i, frame in enumerate(frames):
            if frame.shape != shape:
                raise ParameterError(
                    f"frame {i} has grid shape {frame.shape}, expected {shape}"
                )
        for i in range(1, len(frames)):
            gap = frames[i].timestamp - frames[i - 1].timestamp
            if gap <= 0 or abs(gap * fs - 1.0) > TIMESTAMP_RTOL:
                raise ParameterError(
                    f"timestamps must increase by 1/fs={1.0 / fs:.6g} s; "
                    f"frame {i} gap is {gap:.9g} s"
                )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fs", fs)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    @property
    def duration_s(self) -> float:
        return len(self.frames) / self.fs

    @classmethod
    def from_grids(cls, grids, fs: float, t0: float = 0.0) -> "FrameSequence":
        """Build a sequence from an iterable of 2-D grids, timestamps derived from fs."""
        frames = tuple(
            PressureFrame(t0 + i / fs, grid) for i, grid in enumerate(grids)
        )
        return cls(frames, fs)


@dataclass(frozen=True)
class Roi:
    """Inclusive rectangular sensel-index bounds (row0..row1, col0..col1)."""

    row0: int
    row1: int
    col0: int
    col1: int

    def __post_init__(self):
        for name in ("row0", "row1", "col0", "col1"):
            value = getattr(self, name)
            if value != int(value):
                raise ParameterError(f"ROI bound {name} must be an integer, got {value}")
            object.__setattr__(self, name, int(value))
        if self.row0 < 0 or self.col0 < 0 or self.row1 < self.row0 or self.col1 < self.col0:
            raise ParameterError(
                f"ROI bounds must satisfy 0 <= row0 <= row1 and 0 <= col0 <= col1, "
                f"got ({self.row0},{self.row1},{self.col0},{self.col1})"
            )

    def validate_for(self, shape: tuple[int, int]) -> None:
        rows, cols = shape
        if self.row1 >= rows or self.col1 >= cols:
            raise BoundsError(
                f"ROI ({self.row0},{self.row1},{self.col0},{self.col1}) "
                f"exceeds grid shape {rows}x{cols}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.row1 - self.row0 + 1, self.col1 - self.col0 + 1)

    @property
    def size(self) -> int:
        r, c = self.shape
        return r * c

    @property
    def slices(self) -> tuple[slice, slice]:
        return (slice(self.row0, self.row1 + 1), slice(self.col0, self.col1 + 1))

    @classmethod
    def full(cls, shape: tuple[int, int]) -> "Roi":
        return cls(0, shape[0] - 1, 0, shape[1] - 1)


@dataclass(frozen=True)
class PressureSeries:
    """Spatially averaged contact pressure, uniformly sampled at ``fs``.

    ``active_counts`` records, per sample, how many sensels passed the
    noise floor when the series came out of :func:`average_series`;
    samples with zero active sensels carry value 0 and are the flagged
    ones downstream estimators may censor.
    """

    values: np.ndarray
    fs: float
    active_counts: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise EmptyInputError("pressure series must hold at least one sample")
        if not np.all(np.isfinite(values)):
            raise ParameterError("pressure series contains non-finite samples")
        fs = float(self.fs)
        if fs <= 0 or not np.isfinite(fs):
            raise ParameterError(f"fs must be positive, got {fs}")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "fs", fs)
        if self.active_counts is not None:
            counts = np.asarray(self.active_counts, dtype=int)
            if counts.shape != values.shape:
                raise ParameterError("active_counts must match values in length")
            counts = counts.copy()
            counts.setflags(write=False)
            object.__setattr__(self, "active_counts", counts)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def duration_s(self) -> float:
        return self.n / self.fs

    @property
    def flagged(self) -> np.ndarray:
        """Boolean mask of samples produced with zero active sensels."""
        if self.active_counts is None:
            return np.zeros(self.n, dtype=bool)
        return self.active_counts == 0


class SpatialAverage(NamedTuple):
    pressure: float
    active_sensels: int


def _check_noise_floor(noise_floor: float) -> float:
    noise_floor = float(noise_floor)
    if noise_floor < 0 or not np.isfinite(noise_floor):
        raise ParameterError(f"noise floor must be finite and >= 0, got {noise_floor}")
    return noise_floor


def spatial_average(frame: PressureFrame, roi: Roi, noise_floor: float) -> SpatialAverage:
    """Average the ROI sensels at or above the noise floor.

    Sensels below the floor are excluded from the mean; when none pass,
    the pressure is 0 with an active count of 0.
    """
    noise_floor = _check_noise_floor(noise_floor)
    roi.validate_for(frame.shape)
    patch = frame.grid[roi.slices]
    active = patch >= noise_floor
    count = int(active.sum())
    if count == 0:
        return SpatialAverage(0.0, 0)
    return SpatialAverage(float(patch[active].mean()), count)


def average_series(seq: FrameSequence, roi: Roi, noise_floor: float) -> PressureSeries:
    """Reduce a frame sequence to its ROI-averaged pressure series."""
    noise_floor = _check_noise_floor(noise_floor)
    roi.validate_for(seq.shape)
    values = np.empty(len(seq))
    counts = np.empty(len(seq), dtype=int)
    for i, frame in enumerate(seq):
        values[i], counts[i] = spatial_average(frame, roi, noise_floor)
    return PressureSeries(values, seq.fs, active_counts=counts)


def contact_area_percent(seq: FrameSequence, noise_floor: float, roi: Roi | None = None) -> float:
    """Percentage of ROI sensels at or above the noise floor, averaged over frames."""
    noise_floor = _check_noise_floor(noise_floor)
    if roi is None:
        roi = Roi.full(seq.shape)
    roi.validate_for(seq.shape)
    fractions = [
        (frame.grid[roi.slices] >= noise_floor).mean() for frame in seq
    ]
    return 100.0 * float(np.mean(fractions))


def trim_transients(seq: FrameSequence, lead_s: float, tail_s: float) -> FrameSequence:
    """Drop loading/off-loading transients at both ends of a record.

    Keeps frames whose time (relative to the first frame) lies in
    [lead_s, duration - tail_s) and re-zeroes timestamps.
    """
    lead_s = float(lead_s)
    tail_s = float(tail_s)
    if lead_s < 0 or tail_s < 0:
        raise ParameterError("trim lengths must be >= 0")
    duration = seq.duration_s
    if lead_s + tail_s >= duration:
        raise EmptyInputError(
            f"trims ({lead_s} + {tail_s} s) exceed record duration {duration:.6g} s"
        )
    t0 = seq.frames[0].timestamp
    kept = [
        frame for frame in seq
        if lead_s <= frame.timestamp - t0 < duration - tail_s
    ]
    if not kept:
        raise EmptyInputError("no frames remain after trimming")
    new_t0 = kept[0].timestamp
    frames = tuple(
        PressureFrame(frame.timestamp - new_t0, frame.grid) for frame in kept
    )
    return FrameSequence(frames, seq.fs)


# ---------------------------------------------------------------------------
# Frame-file formats.
#
# CSV: header line `fs=<float>,rows=<int>,cols=<int>`, then one line per
# frame: optional `t=<float>` first, followed by rows*cols psi values in
# row-major order.  When `t=` is absent timestamps derive from fs.
# JSON mirror: {"fs":..., "rows":..., "cols":..., "frames": [{"t":...,
# "values": [...]}]} with "t" optional.
# ---------------------------------------------------------------------------

GRID_VALUE_FORMAT = "%.6g"


def save_frames(seq: FrameSequence, path) -> Path:
    """Write a frame file; format chosen by extension (.csv or .json)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        payload = {
            "fs": seq.fs,
            "rows": seq.shape[0],
            "cols": seq.shape[1],
            "frames": [
                {"t": frame.timestamp, "values": frame.grid.ravel().tolist()}
                for frame in seq
            ],
        }
        path.write_text(json.dumps(payload))
        return path
    rows, cols = seq.shape
    lines = [f"fs={seq.fs!r},rows={rows},cols={cols}"]
    for frame in seq:
        cells = ",".join(GRID_VALUE_FORMAT % v for v in frame.grid.ravel())
        lines.append(f"t={frame.timestamp!r},{cells}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_header(line: str) -> tuple[float, int, int]:
    fields = {}
    for token in line.strip().split(","):
        if "=" not in token:
            raise FrameParseError(f"malformed header token {token!r}", line=1)
        key, _, raw = token.partition("=")
        fields[key.strip()] = raw.strip()
    try:
        fs = float(fields["fs"])
        rows = int(fields["rows"])
        cols = int(fields["cols"])
    except (KeyError, ValueError) as exc:
        raise FrameParseError(f"header must declare fs, rows, cols: {exc}", line=1)
    if fs <= 0 or rows <= 0 or cols <= 0:
        raise FrameParseError("header fs/rows/cols must be positive", line=1)
    return fs, rows, cols


def _load_frames_csv(path: Path) -> FrameSequence:
    raw_lines = path.read_text().splitlines()
    lines = [(i + 1, line) for i, line in enumerate(raw_lines) if line.strip()]
    if not lines:
        raise EmptyInputError(f"{path} is empty")
    fs, rows, cols = _parse_header(lines[0][1])
    frames = []
    prev_t = None
    for lineno, line in lines[1:]:
        tokens = line.strip().split(",")
        if tokens and tokens[0].startswith("t="):
            try:
                t = float(tokens[0][2:])
            except ValueError:
                raise FrameParseError(f"bad timestamp {tokens[0]!r}", line=lineno)
            tokens = tokens[1:]
        else:
            t = len(frames) / fs
        if len(tokens) != rows * cols:
            raise FrameParseError(
                f"expected {rows * cols} values, got {len(tokens)}", line=lineno
            )
        try:
            values = np.array([float(tok) for tok in tokens])
        except ValueError as exc:
            raise FrameParseError(f"bad pressure value: {exc}", line=lineno)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise FrameParseError("pressure values must be finite and >= 0", line=lineno)
        if prev_t is not None:
            gap = t - prev_t
            if gap <= 0 or abs(gap * fs - 1.0) > TIMESTAMP_RTOL:
                raise FrameParseError(
                    f"timestamp {t!r} does not advance by 1/fs from {prev_t!r}",
                    line=lineno,
                )
        prev_t = t
        frames.append(PressureFrame(t, values.reshape(rows, cols)))
    if not frames:
        raise EmptyInputError(f"{path} declares no frames")
    return FrameSequence(tuple(frames), fs)


def _load_frames_json(path: Path) -> FrameSequence:
    text = path.read_text()
    if not text.strip():
        raise EmptyInputError(f"{path} is empty")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FrameParseError(f"invalid JSON: {exc.msg}", line=exc.lineno)
    try:
        fs = float(payload["fs"])
        rows = int(payload["rows"])
        cols = int(payload["cols"])
        raw_frames = payload["frames"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameParseError(f"frame JSON must declare fs, rows, cols, frames: {exc}")
    if not raw_frames:
        raise EmptyInputError(f"{path} declares no frames")
    frames = []
    for i, entry in enumerate(raw_frames):
        try:
            values = np.asarray(entry["values"], dtype=float)
            t = float(entry.get("t", i / fs))
        except (KeyError, TypeError, ValueError) as exc:
            raise FrameParseError(f"frame {i}: {exc}")
        if values.size != rows * cols:
            raise FrameParseError(
                f"frame {i}: expected {rows * cols} values, got {values.size}"
            )
        frames.append(PressureFrame(t, values.reshape(rows, cols)))
    try:
        return FrameSequence(tuple(frames), fs)
    except ParameterError as exc:
        raise FrameParseError(str(exc))


def load_frames(source) -> FrameSequence:
    """Parse a frame file (CSV or JSON, chosen by extension)."""
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"frame file not found: {path}")
    if path.suffix.lower() == ".json":
        return _load_frames_json(path)
    return _load_frames_csv(path)
