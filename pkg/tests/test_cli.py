import json
import re

import numpy as np
import pytest

from psmkit import FrameSequence, TrialConfig, save_frames, synth_trial
from psmkit.cli import main
from psmkit.simbench import save_manifest

from conftest import constant_frames


@pytest.fixture
def constant_file(tmp_path):
    seq = constant_frames(value=0.14, n=600, shape=(4, 4), fs=20.0)
    return save_frames(seq, tmp_path / "constant.csv")


@pytest.fixture
def ramp_file(tmp_path):
    n = 1200
    values = 1.0 + 0.02 * np.arange(n) / (n - 1)
    grids = np.repeat(values, 4).reshape(n, 2, 2)
    return save_frames(FrameSequence.from_grids(grids, 20.0), tmp_path / "ramp.csv")


@pytest.fixture
def breathing_file(tmp_path):
    trial = synth_trial(TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=9))
    path = save_frames(trial.frames, tmp_path / "breathing.csv")
    return path, trial.thorax_roi


@pytest.fixture
def motion_file(tmp_path):
    trial = synth_trial(TrialConfig(gold_rr_bpm=60.0, duration_s=40.0, seed=10,
                                    motion="external"))
    path = save_frames(trial.frames, tmp_path / "motion.csv")
    return path, trial.thorax_roi


def roi_arg(roi):
    return f"{roi.row0},{roi.row1},{roi.col0},{roi.col1}"


class TestMetrologyCommand:
    def test_constant_file_zero_drift_and_creep(self, constant_file, tmp_path):
        out = tmp_path / "out"
        code = main(["metrology", "--input", str(constant_file),
                     "--output", str(out), "--format", "json"])
        assert code == 0
        payload = json.loads((out / "metrology.json").read_text())
        assert payload["drift_pct"] == 0.0
        assert payload["creep_pct"] == 0.0
        assert payload["drift_std_pct"] == 0.0
        assert payload["p_avg"] == pytest.approx(0.14)
        assert (out / "metrology_record.png").exists()

    def test_ramp_creep(self, ramp_file, tmp_path):
        out = tmp_path / "out"
        code = main(["metrology", "--input", str(ramp_file), "--output", str(out),
                     "--format", "json", "--noise-floor", "0.0", "--no-figures"])
        assert code == 0
        payload = json.loads((out / "metrology.json").read_text())
        assert payload["creep_pct"] == pytest.approx(1.817, abs=1e-3)

    def test_missing_file_exits_nonzero_without_output(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["metrology", "--input", str(tmp_path / "nope.csv"),
                     "--output", str(out)])
        assert code == 1
        assert "error" in capsys.readouterr().err
        assert not list(out.glob("metrology*"))

    def test_text_and_json_numbers_agree(self, constant_file, tmp_path):
        out_json = tmp_path / "j"
        out_text = tmp_path / "t"
        main(["metrology", "--input", str(constant_file), "--output", str(out_json),
              "--format", "json", "--no-figures"])
        main(["metrology", "--input", str(constant_file), "--output", str(out_text),
              "--format", "text", "--no-figures"])
        payload = json.loads((out_json / "metrology.json").read_text())
        text = (out_text / "metrology.txt").read_text()
        for key, label in [("p_avg", "P_avg"), ("drift_pct", "Drift"),
                           ("creep_pct", "Creep")]:
            match = re.search(rf"^{label}.*?(-?[\d.eE+-]+)\s*$", text, re.MULTILINE)
            assert match, f"{label} missing from text report"
            assert float(match.group(1)) == payload[key]


class TestEstimateCommand:
    def test_breathing_fixture_both_methods(self, breathing_file, tmp_path):
        path, roi = breathing_file
        out = tmp_path / "out"
        code = main(["estimate", "--input", str(path), "--roi", roi_arg(roi),
                     "--output", str(out), "--format", "json"])
        assert code == 0
        payload = json.loads((out / "estimate.json").read_text())
        assert payload["methods"]["baseline"]["rr_bpm"] == pytest.approx(60.0)
        assert payload["methods"]["modified"]["rr_bpm"] == pytest.approx(60.0)
        assert (out / "estimate_signal.png").exists()
        assert (out / "estimate_spectrum_raw.png").exists()
        assert (out / "estimate_spectrum_suppressed.png").exists()

    def test_motion_fixture_separates_methods(self, motion_file, tmp_path):
        path, roi = motion_file
        out = tmp_path / "out"
        code = main(["estimate", "--input", str(path), "--roi", roi_arg(roi),
                     "--output", str(out), "--format", "json", "--no-figures"])
        assert code == 0
        payload = json.loads((out / "estimate.json").read_text())
        assert payload["methods"]["baseline"]["rr_bpm"] != pytest.approx(60.0, abs=5.0)
        assert payload["methods"]["modified"]["rr_bpm"] == pytest.approx(60.0, abs=1.5)

    def test_single_method_selection(self, breathing_file, tmp_path):
        path, roi = breathing_file
        out = tmp_path / "out"
        main(["estimate", "--input", str(path), "--roi", roi_arg(roi),
              "--output", str(out), "--format", "json", "--method", "baseline",
              "--no-figures"])
        payload = json.loads((out / "estimate.json").read_text())
        assert list(payload["methods"]) == ["baseline"]

    def test_short_record_exits_nonzero(self, tmp_path, capsys):
        seq = constant_frames(value=0.2, n=100, shape=(2, 2))  # 5 s record
        path = save_frames(seq, tmp_path / "short.csv")
        code = main(["estimate", "--input", str(path), "--output", str(tmp_path / "o")])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_band_flag_guards_peak_search(self, motion_file, tmp_path):
        # restricted to the breathing band, even the baseline method ignores
        # the low-frequency artifact
        path, roi = motion_file
        out = tmp_path / "out"
        code = main(["estimate", "--input", str(path), "--roi", roi_arg(roi),
                     "--output", str(out), "--format", "json", "--band", "0.3,2.5",
                     "--no-figures"])
        assert code == 0
        payload = json.loads((out / "estimate.json").read_text())
        assert payload["methods"]["baseline"]["rr_bpm"] == pytest.approx(60.0, abs=1.5)
        assert payload["methods"]["baseline"]["band_hz"] == [0.3, 2.5]

    def test_csv_format_lists_windows(self, breathing_file, tmp_path):
        path, roi = breathing_file
        out = tmp_path / "out"
        main(["estimate", "--input", str(path), "--roi", roi_arg(roi),
              "--output", str(out), "--format", "csv", "--no-figures"])
        lines = (out / "estimate.csv").read_text().splitlines()
        assert lines[0] == "method,window,peak_hz,rr_bpm"
        assert len(lines) == 1 + 2 * 2  # 30 s record: two 20 s windows per method


class TestSimulateCommand:
    @pytest.fixture
    def manifest_file(self, tmp_path):
        manifest = [
            TrialConfig(gold_rr_bpm=45.0, duration_s=30.0, seed=1),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=2, motion="external"),
            TrialConfig(gold_rr_bpm=75.0, duration_s=30.0, seed=3),
        ]
        path = tmp_path / "manifest.json"
        save_manifest(manifest, path)
        return path

    def test_writes_trials_labels_and_manifest(self, manifest_file, tmp_path):
        out = tmp_path / "sim"
        code = main(["simulate", "--manifest", str(manifest_file),
                     "--output", str(out), "--no-figures"])
        assert code == 0
        assert (out / "manifest.json").exists()
        labels = (out / "labels.csv").read_text().splitlines()
        assert len(labels) == 4
        for i in range(3):
            assert (out / f"trial_{i:03d}.csv").exists()

    def test_same_seed_reproduces_bytes(self, manifest_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--manifest", str(manifest_file), "--output", str(out_a),
              "--no-figures"])
        main(["simulate", "--manifest", str(manifest_file), "--output", str(out_b),
              "--no-figures"])
        for name in ("trial_000.csv", "trial_001.csv", "trial_002.csv"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_results_flag_writes_experiment_outputs(self, manifest_file, tmp_path):
        out = tmp_path / "sim"
        code = main(["simulate", "--manifest", str(manifest_file), "--output", str(out),
                     "--results", "--no-figures"])
        assert code == 0
        for name in ("trial_results.csv", "trial_results.json",
                     "design_baseline.csv", "design_modified.csv"):
            assert (out / name).exists()

    def test_bad_manifest_json_reports_location(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('[{"gold_rr_bpm": 60,]')
        code = main(["simulate", "--manifest", str(path), "--output", str(tmp_path / "o")])
        assert code == 1
        assert "line" in capsys.readouterr().err

    def test_requires_manifest_or_default(self, tmp_path, capsys):
        code = main(["simulate", "--output", str(tmp_path / "o")])
        assert code == 1
        assert "default-28" in capsys.readouterr().err

    def test_figures_rendered(self, manifest_file, tmp_path):
        out = tmp_path / "sim"
        main(["simulate", "--manifest", str(manifest_file), "--output", str(out)])
        assert (out / "simulate_frame.png").exists()
        assert (out / "simulate_series.png").exists()

    def test_default_28_writes_full_bench(self, tmp_path):
        out = tmp_path / "bench"
        code = main(["simulate", "--default-28", "--output", str(out), "--no-figures"])
        assert code == 0
        trials = sorted(out.glob("trial_*.csv"))
        assert len(trials) == 28
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest) == 28

    def test_env_var_supplies_output_dir(self, manifest_file, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("PSMKIT_OUTDIR", str(target))
        code = main(["simulate", "--manifest", str(manifest_file), "--no-figures"])
        assert code == 0
        assert (target / "trial_000.csv").exists()


class TestLoaCommand:
    def make_results(self, tmp_path, manifest):
        out = tmp_path / "sim"
        path = tmp_path / "manifest.json"
        save_manifest(manifest, path)
        main(["simulate", "--manifest", str(path), "--output", str(out),
              "--results", "--no-figures"])
        return out / "trial_results.csv"

    def test_end_to_end_reports(self, tmp_path):
        manifest = [
            TrialConfig(gold_rr_bpm=45.0, duration_s=30.0, seed=21),
            TrialConfig(gold_rr_bpm=45.0, duration_s=30.0, seed=22, motion="external",
                        mattress="crib"),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=23, motion="internal"),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=24, grunting=True),
            TrialConfig(gold_rr_bpm=75.0, duration_s=30.0, seed=25, position="prone"),
            TrialConfig(gold_rr_bpm=75.0, duration_s=30.0, seed=26, motion="external"),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=27, mattress="crib",
                        grunting=True),
            TrialConfig(gold_rr_bpm=45.0, duration_s=30.0, seed=28, position="prone"),
        ]
        results = self.make_results(tmp_path, manifest)
        out = tmp_path / "loa"
        code = main(["loa", "--input", str(results), "--output", str(out),
                     "--format", "json"])
        assert code == 0
        payload = json.loads((out / "loa.json").read_text())
        assert set(payload["methods"]) == {"baseline", "modified"}
        block = payload["methods"]["baseline"]
        assert {r["effect"] for r in block["exclusions"]} == {
            "motion", "mattress", "grunting", "position"
        }
        assert (out / "loa_baseline.png").exists()
        assert (out / "loa_modified.png").exists()

    def test_zero_error_results(self, tmp_path):
        rows = ["gold_rr_bpm,duration_s,fs,motion,mattress,grunting,position,seed,"
                "motion_power_ratio,rr_baseline,rr_modified,diff_baseline,"
                "diff_modified,snr_db,error_baseline,error_modified"]
        for i, gold in enumerate([45.0, 45.0, 60.0, 60.0, 75.0, 75.0, 60.0, 60.0]):
            motion = "external" if i % 2 else "none"
            mattress = "crib" if i % 3 == 0 else "warmer"
            grunting = int(i in (2, 5))
            position = "prone" if i in (1, 4) else "supine"
            rows.append(f"{gold},30.0,20.0,{motion},{mattress},{grunting},"
                        f"{position},{i},10.0,{gold},{gold},0.0,0.0,5.0,,")
        path = tmp_path / "zero.csv"
        path.write_text("\n".join(rows) + "\n")
        out = tmp_path / "loa"
        code = main(["loa", "--input", str(path), "--output", str(out),
                     "--format", "json", "--no-figures", "--method", "modified"])
        assert code == 0
        loa = json.loads((out / "loa.json").read_text())["methods"]["modified"]["loa"]
        assert loa["bias"] == pytest.approx(0.0, abs=1e-6)
        assert loa["lower"] == pytest.approx(0.0, abs=1e-4)
        assert loa["upper"] == pytest.approx(0.0, abs=1e-4)

    def test_single_group_exits_nonzero(self, tmp_path, capsys):
        rows = ["gold_rr_bpm,duration_s,fs,motion,mattress,grunting,position,seed,"
                "motion_power_ratio,rr_baseline,rr_modified,diff_baseline,"
                "diff_modified,snr_db,error_baseline,error_modified"]
        for i in range(4):
            rows.append(f"60.0,30.0,20.0,none,warmer,0,supine,{i},10.0,"
                        f"60.0,60.0,0.5,0.5,5.0,,")
        path = tmp_path / "mono.csv"
        path.write_text("\n".join(rows) + "\n")
        code = main(["loa", "--input", str(path), "--output", str(tmp_path / "o")])
        assert code == 1
        assert "group" in capsys.readouterr().err

    def test_text_and_json_numbers_agree(self, tmp_path):
        manifest = [
            TrialConfig(gold_rr_bpm=45.0, duration_s=30.0, seed=31),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=32, motion="external"),
            TrialConfig(gold_rr_bpm=75.0, duration_s=30.0, seed=33, grunting=True),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=34, position="prone"),
            TrialConfig(gold_rr_bpm=45.0, duration_s=30.0, seed=35, mattress="crib",
                        motion="internal"),
            TrialConfig(gold_rr_bpm=75.0, duration_s=30.0, seed=36, mattress="crib"),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=37, motion="external",
                        grunting=True, position="prone"),
            TrialConfig(gold_rr_bpm=60.0, duration_s=30.0, seed=38),
        ]
        results = self.make_results(tmp_path, manifest)
        out_j, out_t = tmp_path / "j", tmp_path / "t"
        main(["loa", "--input", str(results), "--output", str(out_j),
              "--format", "json", "--no-figures"])
        main(["loa", "--input", str(results), "--output", str(out_t),
              "--format", "text", "--no-figures"])
        payload = json.loads((out_j / "loa.json").read_text())
        text = (out_t / "loa.txt").read_text()
        for method in ("baseline", "modified"):
            loa = payload["methods"][method]["loa"]
            line = next(ln for ln in text.splitlines() if ln.startswith(method))
            cells = line.split()
            assert float(cells[1]) == loa["bias"]
            assert float(cells[2]) == loa["sd"]
            assert float(cells[3]) == loa["lower"]
            assert float(cells[4]) == loa["upper"]
