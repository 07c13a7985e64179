import math

import numpy as np
import pytest

from psmkit import (
    ConditionedSeries,
    DegenerateInputError,
    ParameterError,
    PressureSeries,
    isolate_breathing,
    moving_average,
    remove_dc,
    snr_db,
)

from conftest import make_series, sinusoid_series


class TestRemoveDc:
    def test_hand_example(self):
        out = remove_dc(make_series([1.0, 2.0, 3.0]))
        assert out.values == pytest.approx([-1.0, 0.0, 1.0])
        assert out.kind == "dc-removed"

    def test_constant_becomes_zero(self):
        out = remove_dc(make_series([0.4] * 10))
        assert np.all(out.values == 0.0)

    def test_output_mean_is_zero(self, rng):
        out = remove_dc(make_series(rng.uniform(0.0, 1.0, 333)))
        assert abs(out.values.mean()) <= 1e-9 * np.abs(out.values).max()

    def test_idempotent(self, rng):
        series = make_series(rng.uniform(0.0, 1.0, 100))
        once = remove_dc(series)
        twice = remove_dc(once)
        assert twice.values == pytest.approx(once.values, abs=1e-15)


class TestMovingAverage:
    def test_single_sample_window_is_identity(self, rng):
        series = make_series(rng.uniform(0.0, 1.0, 40))
        out = moving_average(series, window_s=1.0 / series.fs)
        assert out.values == pytest.approx(series.values)

    def test_constant_preserved(self):
        out = moving_average(make_series([0.3] * 20), window_s=0.25)
        assert out.values == pytest.approx([0.3] * 20)

    def test_hand_convolution_with_truncated_edges(self):
        series = PressureSeries([0, 0, 0, 10, 0, 0, 0], fs=1.0)
        out = moving_average(series, window_s=3.0)
        assert out.values == pytest.approx([0, 0, 10 / 3, 10 / 3, 10 / 3, 0, 0])

    def test_even_window_centers_on_earlier_middle(self):
        # w=2 window at index i covers samples [i, i+1]
        series = PressureSeries([1.0, 2.0, 4.0, 8.0], fs=1.0)
        out = moving_average(series, window_s=2.0)
        assert out.values == pytest.approx([1.5, 3.0, 6.0, 8.0])

    def test_linearity(self, rng):
        x = make_series(rng.uniform(0.0, 1.0, 64))
        y = make_series(rng.uniform(0.0, 1.0, 64))
        a, b = 2.5, -0.7
        combined = PressureSeries(a * x.values + b * y.values, x.fs)
        lhs = moving_average(combined, 0.3).values
        rhs = a * moving_average(x, 0.3).values + b * moving_average(y, 0.3).values
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_length_preserved(self, rng):
        series = make_series(rng.uniform(0.0, 1.0, 101))
        assert moving_average(series, 1.5).n == 101

    def test_subsample_window_rejected(self):
        with pytest.raises(ParameterError):
            moving_average(make_series([1.0, 2.0]), window_s=0.001)


class TestIsolateBreathing:
    def test_constant_maps_to_zero(self):
        out = isolate_breathing(make_series([0.5] * 64))
        assert np.all(out.values == 0.0)
        assert out.kind == "motion-suppressed"

    def test_commutes_with_constant_offset(self, rng):
        values = rng.uniform(0.0, 1.0, 128)
        base = isolate_breathing(make_series(values))
        shifted = isolate_breathing(make_series(values + 3.7))
        assert shifted.values == pytest.approx(base.values, abs=1e-12)

    def test_slow_ramp_leaves_near_zero_residual(self):
        # period >> window: residual under 1 % of ramp range away from edges
        n, fs = 1200, 20.0
        ramp = np.linspace(0.0, 1.0, n)
        out = isolate_breathing(PressureSeries(ramp, fs), 1.5).values
        interior = out[40:-40]
        assert np.abs(interior).max() < 0.01

    def test_sinusoid_gain_matches_rectangular_smoother_response(self):
        # closed form for the w-point smoother, evaluated at f = 1 Hz;
        # the even window's half-sample phase keeps this within ~0.2 %
        fs, f, w = 20.0, 1.0, 30
        series = sinusoid_series(f, duration_s=60.0, fs=fs, amplitude=1.0)
        out = isolate_breathing(series, window_s=w / fs).values
        expected = 1.0 - math.sin(math.pi * f * w / fs) / (w * math.sin(math.pi * f / fs))
        measured = math.sqrt(2.0) * out[40:-40].std()
        assert measured == pytest.approx(expected, rel=1e-2)

    def test_length_preserved(self, rng):
        series = make_series(rng.uniform(0.0, 1.0, 97))
        assert isolate_breathing(series).n == 97


class TestSnrDb:
    def test_equal_power_tones_inside_and_outside_band(self):
        fs, n = 20.0, 400
        t = np.arange(n) / fs
        x = np.sin(2 * np.pi * 1.0 * t) + np.sin(2 * np.pi * 2.5 * t + 0.4)
        cond = remove_dc(PressureSeries(x + 2.0, fs))
        # n_harmonics=0: band collects only the 1.0 Hz tone
        assert snr_db(cond, 1.0, n_harmonics=0) == pytest.approx(0.0, abs=0.1)

    def test_pure_in_band_tone_returns_inf(self):
        cond = remove_dc(sinusoid_series(1.0, duration_s=20.0))
        assert snr_db(cond, 1.0, n_harmonics=0) == math.inf

    def test_harmonic_bands_collect_harmonics(self):
        fs, n = 20.0, 400
        t = np.arange(n) / fs
        x = np.sin(2 * np.pi * 1.0 * t) + 0.5 * np.sin(2 * np.pi * 2.0 * t)
        cond = remove_dc(PressureSeries(x + 2.0, fs))
        assert snr_db(cond, 1.0, n_harmonics=1) == math.inf

    def test_out_of_range_f0_rejected(self):
        cond = remove_dc(sinusoid_series(1.0))
        with pytest.raises(ParameterError):
            snr_db(cond, 10.0)

    def test_harmonic_band_beyond_nyquist_rejected(self):
        cond = remove_dc(sinusoid_series(1.0))
        with pytest.raises(ParameterError):
            snr_db(cond, 4.0, n_harmonics=2)  # 12 Hz band > 10 Hz Nyquist

    def test_no_power_rejected(self):
        cond = remove_dc(make_series([0.5] * 100))
        with pytest.raises(DegenerateInputError):
            snr_db(cond, 1.0)


class TestConditionedSeries:
    def test_nonzero_mean_rejected(self):
        with pytest.raises(ParameterError):
            ConditionedSeries(np.array([1.0, 2.0, 3.0]), 20.0)

    def test_unknown_tag_rejected(self):
        with pytest.raises(ParameterError):
            ConditionedSeries(np.array([-1.0, 1.0]), 20.0, kind="mystery")
