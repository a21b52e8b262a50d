"""Per-modality feature sequences, windowing, flattening, and PCA."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_data import (
    EPOCH_END_S,
    EPOCH_START_S,
    Modality,
    TimeSeries,
    TrialRecording,
    epoch,
    label_for,
)
from .dsp import TfSpec, average_channels, default_tf_spec, interpolate_gaps, morlet_tf

# Central/frontal montage subset used for classification features.
DEFAULT_EEG_CHANNELS = [
    "Cz", "C3", "C4", "FC1", "FC2", "FC5", "FC6", "CP1", "CP2", "F3", "F4", "Fz",
]

_FEATURE_DIMS = {Modality.GAZE: 2, Modality.MOTION: 3}


class GridError(ValueError):
    """A window end time is off the configured window grid."""


class ModalityAbsentError(ValueError):
    """The trial does not carry the stream a feature builder needs."""


@dataclass(frozen=True)
class FeatureSequence:
    modality: Modality
    series: TimeSeries
    trial_ref: tuple  # (participant_id, trial_id)
    label: int

    def __post_init__(self):
        expected = _FEATURE_DIMS.get(self.modality)
        if expected is not None and self.series.n_features != expected:
            raise ValueError(
                f"{self.modality.value} features must have D={expected}, "
                f"got {self.series.n_features}"
            )
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def build_gaze_features(trial: TrialRecording) -> FeatureSequence:
    """Reference-corrected gaze: (gaze - reference) per sample, gaps repaired."""
    if trial.gaze is None:
        raise ModalityAbsentError(
            f"trial {(trial.participant_id, trial.trial_id)} has no gaze stream"
        )
    gaze = interpolate_gaps(trial.gaze.gaze_series())
    reference = interpolate_gaps(trial.gaze.reference_series())
    series = TimeSeries(gaze.start_time_s, gaze.step_s, gaze.values - reference.values)
    return FeatureSequence(
        modality=Modality.GAZE,
        series=series,
        trial_ref=(trial.participant_id, trial.trial_id),
        label=label_for(trial.condition),
    )


def build_motion_features(trial: TrialRecording) -> FeatureSequence:
    """Hand x/y/z in the camera frame, untransformed."""
    if trial.motion is None:
        raise ModalityAbsentError(
            f"trial {(trial.participant_id, trial.trial_id)} has no motion stream"
        )
    return FeatureSequence(
        modality=Modality.MOTION,
        series=trial.motion.to_timeseries(),
        trial_ref=(trial.participant_id, trial.trial_id),
        label=label_for(trial.condition),
    )


def build_eeg_features(
    trial: TrialRecording,
    channels: "list[str] | None" = None,
    tf: TfSpec | None = None,
    log_power: bool = False,
) -> FeatureSequence:
    """Channel-averaged Morlet power over the montage subset, (T', F).

    ``log_power`` switches the emitted features to log10(power + eps); the
    default is raw power.
    """
    if trial.eeg is None:
        raise ModalityAbsentError(
            f"trial {(trial.participant_id, trial.trial_id)} has no EEG stream"
        )
    channels = DEFAULT_EEG_CHANNELS if channels is None else list(channels)
    tf = default_tf_spec() if tf is None else tf
    available = trial.eeg.channel_names
    missing = [c for c in channels if c not in available]
    if missing:
        raise ValueError(
            f"channels {missing} not in the recording; available: {available}"
        )
    rows = [available.index(c) for c in channels]
    stream = trial.eeg.to_timeseries()
    subset = TimeSeries(stream.start_time_s, stream.step_s, stream.values[:, rows])
    mean_tf = average_channels(morlet_tf(subset, tf))
    power = mean_tf.power
    if log_power:
        power = np.log10(power + 1e-20)
    times = mean_tf.times_s
    series = TimeSeries(float(times[0]), float(times[1] - times[0]), power)
    return FeatureSequence(
        modality=Modality.EEG,
        series=series,
        trial_ref=(trial.participant_id, trial.trial_id),
        label=label_for(trial.condition),
    )


# ---------------------------------------------------------------------------
# Window grid and windowing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowGrid:
    """Growing-window sweep: ends first..last in increments of step."""

    start_s: float = EPOCH_START_S
    first_end_s: float = -4.75
    last_end_s: float = EPOCH_END_S
    step_s: float = 0.25

    def __post_init__(self):
        if self.step_s <= 0:
            raise ValueError("step_s must be positive")
        if not self.start_s < self.first_end_s <= self.last_end_s:
            raise ValueError(
                f"need start < first_end <= last_end, got "
                f"{self.start_s}, {self.first_end_s}, {self.last_end_s}"
            )
        n = (self.last_end_s - self.first_end_s) / self.step_s
        if abs(n - round(n)) > 1e-9:
            raise ValueError("last_end_s must lie on the end-time grid")

    def end_times(self) -> np.ndarray:
        n = int(round((self.last_end_s - self.first_end_s) / self.step_s)) + 1
        return self.first_end_s + self.step_s * np.arange(n)

    def index_of(self, end_time_s: float) -> int:
        k = (end_time_s - self.first_end_s) / self.step_s
        if abs(k - round(k)) > 1e-9 or not 0 <= round(k) < len(self.end_times()):
            raise GridError(
                f"end time {end_time_s} s is off the window grid "
                f"({self.first_end_s}..{self.last_end_s} step {self.step_s})"
            )
        return int(round(k))


def window_features(
    seq: FeatureSequence, end_time_s: float, grid: WindowGrid | None = None
) -> FeatureSequence:
    """Restrict a sequence to [grid.start, end_time_s); end must be on-grid."""
    grid = WindowGrid() if grid is None else grid
    grid.index_of(end_time_s)  # raises GridError when off the grid
    series = epoch(seq.series, grid.start_s, end_time_s)
    return FeatureSequence(
        modality=seq.modality, series=series, trial_ref=seq.trial_ref, label=seq.label
    )


def flatten(seq: FeatureSequence) -> np.ndarray:
    """Time-major 1-D vector: all D features of t0, then t1, ..."""
    return seq.series.values.reshape(-1)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (D,)
    components: np.ndarray  # (k, D), orthonormal rows
    explained_variance_ratio: np.ndarray  # (k,), nonincreasing


def pca_fit(x: np.ndarray, variance_target: float = 0.99) -> PcaModel:
    """Smallest component count whose cumulative explained variance reaches
    the target; components from the SVD of the mean-centered data (equivalent
    to eigen-decomposing its covariance)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with n >= 2 rows, got shape {x.shape}")
    if not 0.0 < variance_target <= 1.0:
        raise ValueError(f"variance_target must be in (0, 1], got {variance_target}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    variances = svals**2
    total = variances.sum()
    if total <= 0.0:
        # Zero-variance data: one dummy direction carries "all" the variance.
        components = np.zeros((1, x.shape[1]))
        components[0, 0] = 1.0
        return PcaModel(mean=mean, components=components,
                        explained_variance_ratio=np.array([1.0]))
    ratio = variances / total
    # Drop numerically-null directions before thresholding.
    keep = variances > variances[0] * 1e-12
    cumulative = np.cumsum(ratio[keep])
    k = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    k = min(k, int(keep.sum()))
    return PcaModel(
        mean=mean, components=vt[:k], explained_variance_ratio=ratio[:k]
    )


def pca_apply(model: PcaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValueError(
            f"input has {x.shape[-1]} features, model expects {model.mean.shape[0]}"
        )
    return (x - model.mean) @ model.components.T


# ---------------------------------------------------------------------------
# Feature cache (saves re-running the Morlet transform across window sweeps)
# ---------------------------------------------------------------------------

CACHE_VERSION = 1


class FeatureCache:
    """npz-backed store keyed by (participant, trial, modality, parameter key)."""

    def __init__(self, directory: "Path | str"):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, trial_ref: tuple, modality: Modality, param_key: str) -> Path:
        digest = hashlib.sha256(param_key.encode("utf-8")).hexdigest()[:16]
        pid, tid = trial_ref
        return self.directory / f"p{pid:03d}_t{tid:04d}_{modality.value}_{digest}.npz"

    def get(
        self, trial_ref: tuple, modality: Modality, param_key: str, label: int
    ) -> FeatureSequence | None:
        path = self._path(trial_ref, modality, param_key)
        if not path.exists():
            return None
        with np.load(path) as data:
            if int(data["version"]) != CACHE_VERSION or str(data["key"]) != param_key:
                return None
            series = TimeSeries(
                float(data["start_time_s"]), float(data["step_s"]), data["values"]
            )
        return FeatureSequence(
            modality=modality, series=series, trial_ref=trial_ref, label=label
        )

    def put(self, seq: FeatureSequence, param_key: str) -> None:
        path = self._path(seq.trial_ref, seq.modality, param_key)
        np.savez(
            path,
            version=CACHE_VERSION,
            key=param_key,
            start_time_s=seq.series.start_time_s,
            step_s=seq.series.step_s,
            values=seq.series.values,
        )
