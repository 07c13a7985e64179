"""Command-line front end: metrology, estimate, simulate and loa subcommands.

Reports are written into an output directory (``--output``, or the
PSMKIT_OUTDIR environment variable) in text, JSON or CSV form; unless
``--no-figures`` is given the report path also renders matplotlib figures
to files alongside the delimited output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import plots
from .errors import PsmError
from .frames import Roi, average_series, contact_area_percent, load_frames, save_frames
from .lmm import LoAReport, exclusion_analysis
from .metrology import metrology_report
from .preprocess import isolate_breathing, remove_dc
from .spectral import estimate_rr, estimate_rr_modified, peak_frequency, periodogram
from .simbench import (
    build_design,
    default_manifest,
    load_manifest,
    read_results,
    run_experiment,
    save_manifest,
    synth_trial,
    write_design_csv,
    write_results_csv,
    write_results_json,
)

OUTDIR_ENV = "PSMKIT_OUTDIR"

METROLOGY_NOISE_FLOOR = 0.06
TRIAL_NOISE_FLOOR = 0.097


def _round6(value):
    """Reports carry 6 significant digits so text/JSON/CSV agree exactly."""
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, bool) or isinstance(value, int):
        return value
    if math.isnan(value):
        return value
    if math.isinf(value):
        return value
    return float(f"{value:.6g}")


def _round_tree(obj):
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return _round6(obj)


def _parse_roi(text: str) -> Roi:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("ROI must be r0,r1,c0,c1")
    try:
        return Roi(*(int(p) for p in parts))
    except (ValueError, PsmError) as exc:
        raise argparse.ArgumentTypeError(f"bad ROI {text!r}: {exc}")


def _parse_band(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("band must be lo,hi in Hz")
    lo, hi = (float(p) for p in parts)
    if not 0 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"band must satisfy 0 <= lo <= hi, got {text}")
    return (lo, hi)


def _outdir(args) -> Path:
    out = args.output or os.environ.get(OUTDIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_report(outdir: Path, stem: str, fmt: str, text: str, payload, csv_rows=None) -> Path:
    """One report in the chosen format; JSON numbers match the text."""
    if fmt == "json":
        path = outdir / f"{stem}.json"
        path.write_text(json.dumps(_round_tree(payload), indent=2) + "\n")
    elif fmt == "csv":
        path = outdir / f"{stem}.csv"
        if csv_rows is None:
            raise PsmError(f"{stem} has no CSV form")
        lines = [",".join(csv_rows[0])]
        for row in csv_rows[1:]:
            lines.append(",".join("" if v is None else str(_round6(v)) for v in row))
        path.write_text("\n".join(lines) + "\n")
    else:
        path = outdir / f"{stem}.txt"
        path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# metrology
# ---------------------------------------------------------------------------

def _cmd_metrology(args) -> int:
    seq = load_frames(args.input)
    roi = args.roi or Roi.full(seq.shape)
    series = average_series(seq, roi, args.noise_floor)
    area = contact_area_percent(seq, args.noise_floor)
    report = metrology_report(
        series,
        block_size=args.block_size,
        n_boot=args.n_boot,
        seed=args.seed,
        contact_area_pct=area,
    )
    payload = report.to_dict()
    text = (
        "Mat characterization\n"
        f"P_avg (psi)           {_round6(report.p_avg)}\n"
        f"Contact area (%)      {_round6(report.contact_area_pct)}\n"
        f"Creep (%/min)         {_round6(report.creep_pct)}\n"
        f"Drift (%)             {_round6(report.drift_pct)}\n"
        f"Std of drift (%)      {_round6(report.drift_std_pct)}\n"
        f"Samples               {report.n_samples}\n"
        f"fs (frames/s)         {_round6(report.fs)}\n"
    )
    rows = [("field", "value")] + [(k, v) for k, v in payload.items()]
    outdir = _outdir(args)
    path = _write_report(outdir, "metrology", args.format, text, payload, rows)
    if args.figures:
        plots.save_metrology_plot(series, outdir / "metrology_record.png")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

def _cmd_estimate(args) -> int:
    seq = load_frames(args.input)
    roi = args.roi or Roi.full(seq.shape)
    series = average_series(seq, roi, args.noise_floor)
    methods = ("baseline", "modified") if args.method == "both" else (args.method,)
    estimates = {}
    for method in methods:
        if method == "baseline":
            estimates[method] = estimate_rr(series, args.window_s, args.overlap, args.band)
        else:
            estimates[method] = estimate_rr_modified(
                series, args.smooth_s, args.window_s, args.overlap, args.band
            )
    payload = {
        "input": str(args.input),
        "noise_floor": args.noise_floor,
        "methods": {m: est.to_dict() for m, est in estimates.items()},
    }
    lines = ["Respiratory-rate estimates"]
    for m, est in estimates.items():
        lines.append(f"{m:<10} {_round6(est.rr_bpm)} bpm "
                     f"({len(est.per_window_peaks)} windows of {est.window_s:g} s)")
    text = "\n".join(lines) + "\n"
    rows = [("method", "window", "peak_hz", "rr_bpm")]
    for m, est in estimates.items():
        for i, peak in enumerate(est.per_window_peaks):
            rows.append((m, i, peak, est.rr_bpm))
    outdir = _outdir(args)
    path = _write_report(outdir, "estimate", args.format, text, payload, rows)
    if args.figures:
        plots.save_conditioning_plot(series, outdir / "estimate_signal.png", args.smooth_s)
        spec = periodogram(remove_dc(series))
        peak = peak_frequency(spec, band=args.band)
        plots.save_spectrum_plot(spec, outdir / "estimate_spectrum_raw.png",
                                 peak_hz=peak, band=args.band, title="Raw periodogram")
        spec_mod = periodogram(isolate_breathing(series, args.smooth_s))
        peak_mod = peak_frequency(spec_mod, band=args.band)
        plots.save_spectrum_plot(spec_mod, outdir / "estimate_spectrum_suppressed.png",
                                 peak_hz=peak_mod, band=args.band,
                                 title="Motion-suppressed periodogram")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    if args.manifest:
        manifest = load_manifest(args.manifest)
    elif args.default_28:
        manifest = default_manifest(base_seed=args.seed)
    else:
        raise PsmError("simulate needs --manifest FILE or --default-28")
    outdir = _outdir(args)
    save_manifest(manifest, outdir / "manifest.json")
    label_rows = [("trial", "file", "gold_rr_bpm", "duration_s", "motion",
                   "mattress", "grunting", "position", "seed")]
    for i, config in enumerate(manifest):
        trial = synth_trial(config)
        name = f"trial_{i:03d}.csv"
        save_frames(trial.frames, outdir / name)
        label_rows.append((i, name, config.gold_rr_bpm, config.duration_s,
                           config.motion, config.mattress, int(config.grunting),
                           config.position, config.seed))
    labels = "\n".join(",".join(str(c) for c in row) for row in label_rows) + "\n"
    (outdir / "labels.csv").write_text(labels)
    if args.figures:
        first = synth_trial(manifest[0])
        mid = first.frames.frames[len(first.frames) // 2]
        plots.save_frame_heatmap(mid, outdir / "simulate_frame.png", roi=first.thorax_roi)
        series = average_series(first.frames, first.thorax_roi, args.noise_floor)
        plots.save_series_plot(series, outdir / "simulate_series.png",
                               title="Trial 0 thorax average pressure")
    if args.results:
        result = run_experiment(
            manifest,
            noise_floor=args.noise_floor,
            window_s=args.window_s,
            overlap=args.overlap,
            smooth_window_s=args.smooth_s,
            band=args.band,
        )
        write_results_csv(result.trials, outdir / "trial_results.csv")
        write_results_json(result.trials, outdir / "trial_results.json")
        for method, design in result.designs.items():
            write_design_csv(design, outdir / f"design_{method}.csv")
    print(f"wrote {len(manifest)} trials to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# loa
# ---------------------------------------------------------------------------

def _loa_payload(method: str, design) -> dict:
    report, exclusions = exclusion_analysis(design, method=method)
    return {
        "loa": report.to_dict(),
        "exclusions": [row.to_dict() for row in exclusions],
    }


def _cmd_loa(args) -> int:
    trials = read_results(args.input)
    methods = ("baseline", "modified") if args.method == "both" else (args.method,)
    payload = {"input": str(args.input), "methods": {}}
    for method in methods:
        design = build_design(trials, method, motion_coding=args.motion_coding)
        payload["methods"][method] = _loa_payload(method, design)

    lines = ["95% limits of agreement", f"{'method':<10} {'bias':>8} {'sd':>8} "
             f"{'lower':>8} {'upper':>8}"]
    for method, block in payload["methods"].items():
        loa = block["loa"]
        lines.append(f"{method:<10} {_round6(loa['bias']):>8} {_round6(loa['sd']):>8} "
                     f"{_round6(loa['lower']):>8} {_round6(loa['upper']):>8}")
    for method, block in payload["methods"].items():
        lines.append("")
        lines.append(f"Effect exclusions ({method})")
        lines.append(f"{'excluded':<12} {'bias':>8} {'lower':>8} {'upper':>8} "
                     f"{'chi2':>10} {'df':>3} {'p':>8}")
        for row in block["exclusions"]:
            lines.append(
                f"{row['effect']:<12} {_round6(row['bias']):>8} {_round6(row['lower']):>8} "
                f"{_round6(row['upper']):>8} {_round6(row['chi2']):>10} "
                f"{row['df']:>3} {_round6(row['p']):>8}"
            )
    text = "\n".join(lines) + "\n"

    rows = [("method", "section", "effect", "bias", "sd", "lower", "upper", "chi2", "df", "p")]
    for method, block in payload["methods"].items():
        loa = block["loa"]
        rows.append((method, "loa", "", loa["bias"], loa["sd"], loa["lower"],
                     loa["upper"], None, None, None))
        for row in block["exclusions"]:
            rows.append((method, "exclusion", row["effect"], row["bias"], row["sd"],
                         row["lower"], row["upper"], row["chi2"], row["df"], row["p"]))
    outdir = _outdir(args)
    path = _write_report(outdir, "loa", args.format, text, payload, rows)
    if args.figures:
        for method in methods:
            key = "diff_baseline" if method == "baseline" else "diff_modified"
            pairs = [(tr.config.gold_rr_bpm, getattr(tr, key)) for tr in trials
                     if not math.isnan(getattr(tr, key))]
            gold = [g for g, _ in pairs]
            diffs = [d for _, d in pairs]
            loa = payload["methods"][method]["loa"]
            report = LoAReport(bias=loa["bias"], sd=loa["sd"], lower=loa["lower"],
                               upper=loa["upper"], method=method)
            plots.save_agreement_plot(gold, diffs, report, outdir / f"loa_{method}.png")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub, with_input=True):
    if with_input:
        sub.add_argument("--input", required=True, help="input file")
    sub.add_argument("--output", help=f"output directory (default ${OUTDIR_ENV} or .)")
    sub.add_argument("--format", choices=("text", "json", "csv"), default="text")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--no-figures", dest="figures", action="store_false",
                     help="skip rendering PNG figures next to the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psmkit",
        description="Pressure-sensitive-mat metrology and respiratory-rate estimation",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    m = subs.add_parser("metrology", help="drift/creep/bootstrap report for a frame file")
    _add_common(m)
    m.add_argument("--roi", type=_parse_roi, help="r0,r1,c0,c1 (default: whole mat)")
    m.add_argument("--noise-floor", type=float, default=METROLOGY_NOISE_FLOOR)
    m.add_argument("--block-size", type=int, default=100)
    m.add_argument("--n-boot", type=int, default=2000)
    m.set_defaults(func=_cmd_metrology)

    e = subs.add_parser("estimate", help="respiratory-rate estimates for a frame file")
    _add_common(e)
    e.add_argument("--roi", type=_parse_roi, help="r0,r1,c0,c1 (default: whole mat)")
    e.add_argument("--noise-floor", type=float, default=TRIAL_NOISE_FLOOR)
    e.add_argument("--window-s", type=float, default=20.0)
    e.add_argument("--overlap", type=float, default=0.5)
    e.add_argument("--smooth-s", type=float, default=1.5)
    e.add_argument("--band", type=_parse_band,
                   help="peak search band lo,hi in Hz (unrestricted by default; "
                        "0.3,2.5 is a sensible neonatal guard band)")
    e.add_argument("--method", choices=("baseline", "modified", "both"), default="both")
    e.set_defaults(func=_cmd_estimate)

    s = subs.add_parser("simulate", help="generate synthetic bench trials")
    _add_common(s, with_input=False)
    s.add_argument("--manifest", help="JSON manifest of trial configs")
    s.add_argument("--default-28", action="store_true",
                   help="use the shipped 28-trial composition")
    s.add_argument("--results", action="store_true",
                   help="also run both estimators and write trial results + designs")
    s.add_argument("--noise-floor", type=float, default=TRIAL_NOISE_FLOOR)
    s.add_argument("--window-s", type=float, default=20.0)
    s.add_argument("--overlap", type=float, default=0.5)
    s.add_argument("--smooth-s", type=float, default=1.5)
    s.add_argument("--band", type=_parse_band)
    s.set_defaults(func=_cmd_simulate)

    l = subs.add_parser("loa", help="limits-of-agreement analysis of trial results")
    _add_common(l)
    l.add_argument("--method", choices=("baseline", "modified", "both"), default="both")
    l.add_argument("--motion-coding", choices=("binary", "type"), default="binary")
    l.set_defaults(func=_cmd_loa)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PsmError, FileNotFoundError) as exc:
        print(f"psmkit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
