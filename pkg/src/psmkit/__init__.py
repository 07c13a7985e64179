"""Pressure-sensitive mat metrology and respiratory-rate estimation.

The pipeline runs from per-sensel pressure frames to ROI-averaged series
(:mod:`psmkit.frames`), through instrument-uncertainty figures
(:mod:`psmkit.metrology`), signal conditioning (:mod:`psmkit.preprocess`),
frequency-domain rate estimation (:mod:`psmkit.spectral`) and
mixed-effects limits-of-agreement analysis (:mod:`psmkit.lmm`).  A
synthetic bench (:mod:`psmkit.simbench`) generates full multi-trial
experiments for validation.
"""

from .errors import (
    BoundsError,
    ConvergenceError,
    DegenerateInputError,
    DesignError,
    EmptyInputError,
    FrameParseError,
    InsufficientDataError,
    NoPeakError,
    ParameterError,
    PsmError,
)
from .frames import (
    FrameSequence,
    PressureFrame,
    PressureSeries,
    Roi,
    average_series,
    contact_area_percent,
    load_frames,
    save_frames,
    spatial_average,
    trim_transients,
)
from .metrology import (
    MetrologyReport,
    bootstrap_drift_std,
    creep_percent,
    drift_percent,
    metrology_report,
)
from .preprocess import (
    ConditionedSeries,
    isolate_breathing,
    moving_average,
    remove_dc,
    snr_db,
)
from .spectral import (
    RrEstimate,
    Spectrum,
    estimate_rr,
    estimate_rr_modified,
    peak_frequency,
    periodogram,
)
from .lmm import (
    Design,
    EffectExclusion,
    LoAReport,
    LrtResult,
    MixedFit,
    chi2_sf,
    exclusion_analysis,
    fit_mixed,
    fit_random_intercept,
    likelihood_ratio_test,
    loa_95,
    loglik_mixed,
    pearson_r,
)
from .simbench import (
    ExperimentResult,
    SynthTrial,
    TrialConfig,
    TrialResult,
    build_design,
    default_manifest,
    run_experiment,
    synth_trial,
)

__version__ = "0.1.0"
