"""Synthetic bench: frame sequences emulating a breathing neonatal
simulator on the mat, and the end-to-end multi-trial experiment.

The generator writes a per-sensel budget: mattress-dependent static load,
a breathing sinusoid (optionally harmonically enriched to emulate
grunting), an additive motion artifact (internal bursts or external slow
excursions) scaled to a declared power ratio versus breathing, plus white
sensel noise, slow random drift and linear creep.  Everything derives
deterministically from the trial seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import DegenerateInputError, DesignError, EmptyInputError, ParameterError
from .frames import FrameSequence, Roi, average_series
from .lmm import Design
from .preprocess import remove_dc, snr_db
from .spectral import estimate_rr, estimate_rr_modified

GRID_SHAPE = (18, 18)

MOTION_KINDS = ("none", "internal", "external")
MATTRESS_KINDS = ("warmer", "crib")
POSITION_KINDS = ("supine", "prone")

# ROI-averaged breathing amplitude (psi) and the derived per-sensel budget
# keep every loaded sensel above the 0.097 psi trial noise floor even at
# motion-power-ratio 10 (worst-case excursion ~0.025 psi).
BREATH_AMPLITUDE_PSI = 0.002
SENSEL_NOISE_PSI = 0.0015
STATIC_SPREAD_PSI = 0.010
DRIFT_FRACTION = 0.003       # stationary sd of the AR(1) drift vs base load
DRIFT_AR_COEFF = 0.98

# base load (psi), creep rate (%/min), extra contact halo ring
MATTRESS_PARAMS = {
    "warmer": {"base": 0.140, "creep_pct_per_min": 0.20, "halo": True},
    "crib": {"base": 0.160, "creep_pct_per_min": 0.30, "halo": False},
}

# external excursions: slow tones (Hz) with these power fractions
EXTERNAL_TONES = ((0.05, 0.50), (0.10, 0.35), (0.15, 0.15))
INTERNAL_CARRIERS = (0.15, 0.20, 0.25)

DURATION_BOUNDS_S = (30.0, 80.0)


@dataclass(frozen=True)
class TrialConfig:
    """One bench trial: gold RR plus the four fixed effects and a seed."""

    gold_rr_bpm: float = 60.0
    duration_s: float = 60.0
    fs: float = 20.0
    motion: str = "none"
    mattress: str = "warmer"
    grunting: bool = False
    position: str = "supine"
    seed: int = 0
    motion_power_ratio: float = 10.0
    snap_to_bin: bool = True
    snap_window_s: float = 20.0
    allow_any_duration: bool = False

    def __post_init__(self):
        if self.motion not in MOTION_KINDS:
            raise ParameterError(f"motion must be one of {MOTION_KINDS}, got {self.motion!r}")
        if self.mattress not in MATTRESS_KINDS:
            raise ParameterError(f"mattress must be one of {MATTRESS_KINDS}")
        if self.position not in POSITION_KINDS:
            raise ParameterError(f"position must be one of {POSITION_KINDS}")
        if self.fs <= 0:
            raise ParameterError("fs must be positive")
        if not 0.0 < self.gold_rr_bpm / 60.0 < self.fs / 2.0:
            raise ParameterError(
                f"gold RR {self.gold_rr_bpm} bpm is outside (0, Nyquist) at fs={self.fs}"
            )
        lo, hi = DURATION_BOUNDS_S
        if not self.allow_any_duration and not lo <= self.duration_s <= hi:
            raise ParameterError(
                f"trial duration must lie in [{lo:g}, {hi:g}] s "
                f"(got {self.duration_s}); set allow_any_duration to override"
            )
        if self.motion != "none" and self.motion_power_ratio <= 0:
            raise ParameterError("motion power ratio must be positive")
        if self.snap_to_bin and self.snap_window_s <= 0:
            raise ParameterError("snap window must be positive")

    @property
    def breathing_hz(self) -> float:
        """Actual generated breathing frequency, bin-snapped when enabled."""
        f = self.gold_rr_bpm / 60.0
        if not self.snap_to_bin:
            return f
        df = 1.0 / self.snap_window_s
        return max(df, round(f / df) * df)

    def to_dict(self) -> dict:
        return {
            "gold_rr_bpm": self.gold_rr_bpm,
            "duration_s": self.duration_s,
            "fs": self.fs,
            "motion": self.motion,
            "mattress": self.mattress,
            "grunting": self.grunting,
            "position": self.position,
            "seed": self.seed,
            "motion_power_ratio": self.motion_power_ratio,
            "snap_to_bin": self.snap_to_bin,
            "snap_window_s": self.snap_window_s,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown trial-config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class SynthTrial:
    """Generated frames with the thorax ROI and the gold label."""

    frames: FrameSequence
    thorax_roi: Roi
    gold_rr_bpm: float
    config: TrialConfig


def _body_layout(position: str, halo: bool):
    """Masks for the contact footprint: thorax ROI plus static-only regions."""
    rows, cols = GRID_SHAPE
    body = np.zeros(GRID_SHAPE, dtype=bool)
    if position == "supine":
        roi = Roi(5, 9, 6, 11)
        head = (slice(2, 4), slice(7, 10))
        hips = (slice(11, 14), slice(7, 11))
    else:
        roi = Roi(6, 10, 6, 11)
        head = (slice(3, 5), slice(7, 10))
        hips = (slice(12, 15), slice(7, 11))
    body[roi.slices] = True
    body[head] = True
    body[hips] = True
    halo_mask = np.zeros(GRID_SHAPE, dtype=bool)
    if halo:
        # softer mattress spreads the load one ring outwards
        padded = np.zeros((rows + 2, cols + 2), dtype=bool)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                padded[1 + dr:rows + 1 + dr, 1 + dc:cols + 1 + dc] |= body
        halo_mask = padded[1:-1, 1:-1] & ~body
    return roi, body, halo_mask


def _breathing_waveform(theta: np.ndarray, grunting: bool) -> np.ndarray:
    if not grunting:
        return np.sin(theta)
    # asymmetric half-cycle: harmonics enrich the spectrum but the
    # fundamental keeps the largest share, so gold RR is unchanged
    return np.sin(theta) + 0.35 * np.sin(2.0 * theta + 0.8) + 0.12 * np.sin(3.0 * theta + 0.4)


def _motion_waveform(config: TrialConfig, t: np.ndarray, rng) -> np.ndarray:
    """Zero-mean artifact scaled to motion_power_ratio times breathing power."""
    if config.motion == "external":
        u = np.zeros_like(t)
        for f, w in EXTERNAL_TONES:
            u += math.sqrt(w) * np.sin(2.0 * math.pi * f * t + rng.uniform(0, 2 * math.pi))
    else:
        carrier = rng.choice(INTERNAL_CARRIERS)
        phase = rng.uniform(0, 2 * math.pi)
        duration = t[-1] + (t[1] - t[0])
        envelope = np.zeros_like(t)
        n_bursts = max(1, int(duration // 20))
        for _ in range(n_bursts):
            center = rng.uniform(0.15, 0.85) * duration
            width = rng.uniform(4.0, 8.0)
            ramp = 1.0
            rise = np.clip((t - (center - width / 2)) / ramp, 0.0, 1.0)
            fall = np.clip(((center + width / 2) - t) / ramp, 0.0, 1.0)
            envelope = np.maximum(envelope, np.minimum(rise, fall))
        u = envelope * np.sin(2.0 * math.pi * carrier * t + phase)
    u = u - u.mean()
    spread = u.std()
    if spread == 0.0:
        raise DegenerateInputError("motion waveform degenerated to a constant")
    sigma = math.sqrt(config.motion_power_ratio) * BREATH_AMPLITUDE_PSI / math.sqrt(2.0)
    return sigma * u / spread


def synth_trial(config: TrialConfig) -> SynthTrial:
    """Generate one deterministic trial's frame sequence."""
    rng = np.random.default_rng(config.seed)
    params = MATTRESS_PARAMS[config.mattress]
    roi, body, halo = _body_layout(config.position, params["halo"])
    n = int(round(config.duration_s * config.fs))
    if n < 2:
        raise ParameterError("trial too short to generate")
    t = np.arange(n) / config.fs

    base = params["base"]
    static = np.zeros(GRID_SHAPE)
    static[body] = base + rng.uniform(-STATIC_SPREAD_PSI, STATIC_SPREAD_PSI, body.sum())
    # halo sits just above the trial noise floor and carries no dynamics
    static[halo] = 0.115 + rng.uniform(-0.003, 0.003, halo.sum())
    background = ~(body | halo)
    static[background] = rng.uniform(0.005, 0.030, background.sum())

    # breathing couples only to the thorax; per-sensel gains average to 1
    # over the ROI so the ROI mean carries exactly the nominal amplitude
    gain = np.zeros(GRID_SHAPE)
    roi_cells = np.zeros(GRID_SHAPE, dtype=bool)
    roi_cells[roi.slices] = True
    g = rng.uniform(0.6, 1.4, roi_cells.sum())
    gain[roi_cells] = g / g.mean()
    amplitude = BREATH_AMPLITUDE_PSI * (0.9 if config.position == "prone" else 1.0)
    theta = 2.0 * math.pi * config.breathing_hz * t
    raw = _breathing_waveform(theta, config.grunting)
    breathing = amplitude / math.sqrt(2.0) * raw / raw.std()

    coupling = np.zeros(GRID_SHAPE)
    h = rng.uniform(0.8, 1.2, body.sum())
    coupling[body] = h
    coupling[roi.slices] /= coupling[roi.slices].mean()
    if config.motion != "none":
        motion = _motion_waveform(config, t, rng)
    else:
        motion = np.zeros(n)

    drift_sd = DRIFT_FRACTION * base
    white = rng.normal(0.0, drift_sd * math.sqrt(1.0 - DRIFT_AR_COEFF**2), n)
    drift = lfilter([1.0], [1.0, -DRIFT_AR_COEFF], white)
    creep = base * (params["creep_pct_per_min"] / 100.0) * (t / 60.0)
    common = drift + creep

    grids = np.broadcast_to(static, (n, *GRID_SHAPE)).copy()
    grids[:, body] += common[:, None]
    grids[:, roi_cells] += breathing[:, None] * gain[roi_cells]
    grids[:, body] += motion[:, None] * coupling[body]
    grids[:, body] += rng.normal(0.0, SENSEL_NOISE_PSI, (n, int(body.sum())))
    np.maximum(grids, 0.0, out=grids)

    frames = FrameSequence.from_grids(grids, config.fs)
    return SynthTrial(frames, roi, config.gold_rr_bpm, config)


@dataclass(frozen=True)
class TrialResult:
    """Estimates and paired differences for one trial."""

    config: TrialConfig
    rr_baseline: float
    rr_modified: float
    diff_baseline: float
    diff_modified: float
    snr_db: float
    error_baseline: str | None = None
    error_modified: str | None = None

    def to_dict(self) -> dict:
        out = self.config.to_dict()
        out.update(
            rr_baseline=self.rr_baseline,
            rr_modified=self.rr_modified,
            diff_baseline=self.diff_baseline,
            diff_modified=self.diff_modified,
            snr_db=self.snr_db,
            error_baseline=self.error_baseline,
            error_modified=self.error_modified,
        )
        return out


@dataclass(frozen=True)
class ExperimentResult:
    """All trial outcomes plus the per-method designs ready for the mixed model."""

    trials: tuple[TrialResult, ...]
    designs: dict
    failures: tuple[tuple[int, str, str], ...] = ()

    def diffs(self, method: str) -> np.ndarray:
        if method not in ("baseline", "modified"):
            raise ParameterError(f"method must be 'baseline' or 'modified', got {method!r}")
        key = f"diff_{method}"
        return np.array([
            getattr(tr, key) for tr in self.trials if not math.isnan(getattr(tr, key))
        ])


def _design_columns(config: TrialConfig, motion_coding: str) -> tuple[list[float], list[str]]:
    if motion_coding == "binary":
        cols = [1.0 if config.motion != "none" else 0.0]
        names = ["motion"]
    elif motion_coding == "type":
        cols = [
            1.0 if config.motion == "internal" else 0.0,
            1.0 if config.motion == "external" else 0.0,
        ]
        names = ["motion[internal]", "motion[external]"]
    else:
        raise ParameterError(f"motion_coding must be 'binary' or 'type', got {motion_coding!r}")
    cols += [
        1.0 if config.mattress == "crib" else 0.0,
        1.0 if config.grunting else 0.0,
        1.0 if config.position == "prone" else 0.0,
    ]
    names += ["mattress", "grunting", "position"]
    return cols, names


def build_design(results, method: str, motion_coding: str = "binary") -> Design:
    """Assemble y/X/groups for one method from successful trials."""
    rows, y, groups = [], [], []
    names = None
    for tr in results:
        diff = tr.diff_baseline if method == "baseline" else tr.diff_modified
        if math.isnan(diff):
            continue
        cols, col_names = _design_columns(tr.config, motion_coding)
        names = ["intercept"] + col_names
        rows.append([1.0] + cols)
        y.append(diff)
        groups.append(tr.config.gold_rr_bpm)
    if not rows:
        raise EmptyInputError(f"no usable trials for method {method!r}")
    return Design(np.array(y), np.array(rows), np.array(groups), names=tuple(names))


def run_experiment(
    manifest,
    noise_floor: float = 0.097,
    window_s: float = 20.0,
    overlap: float = 0.5,
    smooth_window_s: float = 1.5,
    band: tuple[float, float] | None = None,
    n_harmonics: int = 2,
    snr_halfwidth: float = 0.05,
    motion_coding: str = "binary",
) -> ExperimentResult:
    """Run both estimators over every trial and assemble the method designs.

    Trials where an estimator raises are recorded as failures (NaN
    estimates) rather than silently dropped.
    """
    manifest = list(manifest)
    if not manifest:
        raise EmptyInputError("trial manifest is empty")
    if len({cfg.gold_rr_bpm for cfg in manifest}) < 2:
        raise DesignError("need at least 2 distinct gold RR levels for the random effect")

    results = []
    failures = []
    for i, config in enumerate(manifest):
        trial = synth_trial(config)
        series = average_series(trial.frames, trial.thorax_roi, noise_floor)
        estimates = {}
        errors = {"baseline": None, "modified": None}
        for method, runner in (
            ("baseline", lambda s: estimate_rr(s, window_s, overlap, band)),
            ("modified", lambda s: estimate_rr_modified(s, smooth_window_s, window_s, overlap, band)),
        ):
            try:
                estimates[method] = runner(series).rr_bpm
            except Exception as exc:  # noqa: BLE001 - failures are data here
                estimates[method] = math.nan
                errors[method] = f"{type(exc).__name__}: {exc}"
                failures.append((i, method, errors[method]))
        snr = snr_db(remove_dc(series), trial.config.breathing_hz, n_harmonics, snr_halfwidth)
        results.append(
            TrialResult(
                config=config,
                rr_baseline=estimates["baseline"],
                rr_modified=estimates["modified"],
                diff_baseline=estimates["baseline"] - config.gold_rr_bpm,
                diff_modified=estimates["modified"] - config.gold_rr_bpm,
                snr_db=snr,
                error_baseline=errors["baseline"],
                error_modified=errors["modified"],
            )
        )

    designs = {
        method: build_design(results, method, motion_coding)
        for method in ("baseline", "modified")
    }
    return ExperimentResult(tuple(results), designs, tuple(failures))


# ---------------------------------------------------------------------------
# Default 28-trial manifest.  Marginals: 6/15/7 trials at 45/60/75 bpm,
# 18 warmer / 10 crib, 9 grunting, 12 prone, and 13 motion trials
# (6 internal, 7 external).
# ---------------------------------------------------------------------------

_DEFAULT_TRIALS = (
    # (rr, duration_s, motion, mattress, grunting, position)
    (45, 60, "none", "warmer", False, "supine"),
    (45, 40, "external", "warmer", False, "prone"),
    (45, 80, "internal", "crib", True, "supine"),
    (45, 50, "none", "warmer", True, "prone"),
    (45, 60, "external", "crib", False, "supine"),
    (45, 30, "none", "warmer", False, "supine"),
    (60, 60, "none", "crib", False, "supine"),
    (60, 40, "internal", "warmer", False, "prone"),
    (60, 80, "none", "warmer", True, "supine"),
    (60, 50, "external", "warmer", False, "supine"),
    (60, 60, "none", "crib", True, "prone"),
    (60, 70, "internal", "warmer", False, "supine"),
    (60, 30, "none", "warmer", False, "prone"),
    (60, 60, "external", "crib", False, "supine"),
    (60, 40, "none", "warmer", True, "prone"),
    (60, 80, "internal", "warmer", False, "supine"),
    (60, 50, "none", "crib", False, "prone"),
    (60, 60, "external", "warmer", False, "supine"),
    (60, 70, "none", "warmer", False, "prone"),
    (60, 40, "internal", "crib", True, "supine"),
    (60, 60, "none", "warmer", False, "supine"),
    (75, 50, "external", "warmer", False, "prone"),
    (75, 60, "none", "crib", True, "supine"),
    (75, 80, "internal", "warmer", False, "prone"),
    (75, 40, "none", "warmer", True, "supine"),
    (75, 60, "external", "crib", False, "prone"),
    (75, 30, "none", "warmer", False, "supine"),
    (75, 70, "none", "crib", True, "prone"),
)


def default_manifest(base_seed: int = 2000, motion_power_ratio: float = 10.0) -> list[TrialConfig]:
    """The shipped 28-trial manifest emulating the bench composition."""
    return [
        TrialConfig(
            gold_rr_bpm=float(rr),
            duration_s=float(dur),
            motion=motion,
            mattress=mattress,
            grunting=grunt,
            position=position,
            seed=base_seed + i,
            motion_power_ratio=motion_power_ratio,
        )
        for i, (rr, dur, motion, mattress, grunt, position) in enumerate(_DEFAULT_TRIALS)
    ]


_RESULT_FIELDS = (
    "gold_rr_bpm", "duration_s", "fs", "motion", "mattress", "grunting",
    "position", "seed", "motion_power_ratio", "rr_baseline", "rr_modified",
    "diff_baseline", "diff_modified", "snr_db", "error_baseline", "error_modified",
)


def write_results_csv(trials, path) -> None:
    """Delimited TrialResult rows, one per trial."""
    lines = [",".join(_RESULT_FIELDS)]
    for tr in trials:
        row = tr.to_dict()
        cells = []
        for name in _RESULT_FIELDS:
            value = row[name]
            if value is None:
                cells.append("")
            elif isinstance(value, bool):
                cells.append(str(int(value)))
            elif isinstance(value, float):
                cells.append(repr(value))
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_results_json(trials, path) -> None:
    Path(path).write_text(json.dumps([tr.to_dict() for tr in trials], indent=2))


def _result_from_dict(row: dict) -> TrialResult:
    config = TrialConfig(
        gold_rr_bpm=float(row["gold_rr_bpm"]),
        duration_s=float(row["duration_s"]),
        fs=float(row.get("fs", 20.0)),
        motion=row["motion"],
        mattress=row["mattress"],
        grunting=bool(int(row["grunting"])) if not isinstance(row["grunting"], bool)
        else row["grunting"],
        position=row["position"],
        seed=int(row.get("seed", 0)),
        motion_power_ratio=float(row.get("motion_power_ratio", 10.0)),
        allow_any_duration=True,
    )
    def _num(name):
        value = row.get(name, "")
        if value in ("", None):
            return math.nan
        return float(value)

    return TrialResult(
        config=config,
        rr_baseline=_num("rr_baseline"),
        rr_modified=_num("rr_modified"),
        diff_baseline=_num("diff_baseline"),
        diff_modified=_num("diff_modified"),
        snr_db=_num("snr_db"),
        error_baseline=row.get("error_baseline") or None,
        error_modified=row.get("error_modified") or None,
    )


def read_results(path) -> list[TrialResult]:
    """Read TrialResults back from the CSV or JSON form."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text())
        return [_result_from_dict(row) for row in raw]
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise EmptyInputError(f"{path} holds no trial rows")
    header = lines[0].split(",")
    results = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ParameterError(
                f"{path}: row has {len(cells)} fields, header has {len(header)}"
            )
        results.append(_result_from_dict(dict(zip(header, cells))))
    return results


def write_design_csv(design: Design, path) -> None:
    """Design matrix with paired differences and the random-effect group."""
    header = ["y"] + list(design.names) + ["group"]
    lines = [",".join(header)]
    for i in range(design.n):
        cells = [repr(float(design.y[i]))]
        cells += [repr(float(v)) for v in design.X[i]]
        cells.append(str(design.groups[i]))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path) -> list[TrialConfig]:
    """Read a JSON array of trial configs."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"manifest JSON invalid at line {exc.lineno}: {exc.msg}")
    if not isinstance(raw, list):
        raise ParameterError("manifest must be a JSON array of trial configs")
    return [TrialConfig.from_dict(entry) for entry in raw]


def save_manifest(manifest, path) -> None:
    Path(path).write_text(json.dumps([cfg.to_dict() for cfg in manifest], indent=2))
