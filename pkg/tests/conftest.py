import numpy as np
import pytest

from psmkit import FrameSequence, PressureSeries


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def make_series(values, fs=20.0):
    return PressureSeries(np.asarray(values, dtype=float), fs)


def constant_frames(value=0.14, n=600, shape=(4, 4), fs=20.0):
    grids = np.full((n, *shape), value)
    return FrameSequence.from_grids(grids, fs)


def sinusoid_series(freq_hz, duration_s=60.0, fs=20.0, amplitude=1.0, offset=2.0, phase=0.0):
    t = np.arange(int(round(duration_s * fs))) / fs
    return PressureSeries(offset + amplitude * np.sin(2 * np.pi * freq_hz * t + phase), fs)
