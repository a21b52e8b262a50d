"""Shared builders for small in-memory trials and on-disk datasets."""

from __future__ import annotations

import numpy as np
import pytest

from handover_intent.core_data import (
    Condition,
    RawEeg,
    RawGaze,
    RawMotion,
    TimeSeries,
    TrialRecording,
)


def series(start: float, step: float, values) -> TimeSeries:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return TimeSeries(start, step, values)


def grid_times(start: float, rate_hz: float, end: float) -> np.ndarray:
    n = int(round((end - start) * rate_hz)) + 1
    return start + np.arange(n) / rate_hz


def make_gaze(
    rng=None,
    rate_hz: float = 25.0,
    start: float = -5.0,
    end: float = 6.0,
    gaze=None,
    ref=None,
) -> RawGaze:
    t = grid_times(start, rate_hz, end)
    n = t.shape[0]
    if gaze is None:
        rng = np.random.default_rng(0) if rng is None else rng
        gaze = np.array([960.0, 540.0]) + rng.normal(0, 5, size=(n, 2))
    if ref is None:
        ref = np.tile([960.0, 540.0], (n, 1))
    return RawGaze(rate_hz, np.asarray(gaze, float), np.asarray(ref, float), start)


def make_motion(
    rng=None, rate_hz: float = 5.0, start: float = -5.0, end: float = 6.0, xyz=None
) -> RawMotion:
    t = grid_times(start, rate_hz, end)
    n = t.shape[0]
    if xyz is None:
        rng = np.random.default_rng(1) if rng is None else rng
        xyz = np.array([0.1, -0.3, 0.9]) + rng.normal(0, 0.01, size=(n, 3))
    return RawMotion(rate_hz, np.asarray(xyz, float), start)


def make_eeg(
    rng=None,
    rate_hz: float = 100.0,
    start: float = -5.0,
    end: float = 6.0,
    channels=None,
    samples=None,
) -> RawEeg:
    channels = ["Cz", "C3", "C4", "FC1"] if channels is None else list(channels)
    t = grid_times(start, rate_hz, end)
    if samples is None:
        rng = np.random.default_rng(2) if rng is None else rng
        samples = rng.normal(0, 10, size=(len(channels), t.shape[0]))
    return RawEeg(rate_hz, channels, np.asarray(samples, float), start)


def make_trial(
    participant_id: int = 1,
    trial_id: int = 0,
    condition: Condition = Condition.HANDOVER,
    eeg=None,
    gaze=None,
    motion=None,
) -> TrialRecording:
    return TrialRecording(
        participant_id=participant_id,
        trial_id=trial_id,
        condition=condition,
        onset_time_s=0.0,
        eeg=eeg,
        gaze=gaze,
        motion=motion,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
