"""Synthetic dataset generator for desk-scale verification.

Emits a loadable dataset (manifest + trial CSVs) in which class-discriminative
signal appears only after a configurable injection time: before it, all three
conditions share one distribution; after it, each condition drifts in its own
direction, with the handover direction linearly separable from both others.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core_data import (
    Condition,
    GAZE_COLUMNS,
    Manifest,
    ManifestEntry,
    Modality,
    MOTION_COLUMNS,
    write_manifest,
    write_trial_csv,
)
from .features import DEFAULT_EEG_CHANNELS
from .rng import substream

GAZE_RATE_HZ = 25.0
MOTION_RATE_HZ = 5.0
EEG_RATE_HZ = 250.0

# Post-injection drift directions; handover separates linearly from both
# non-handover conditions.
_GAZE_DIRECTIONS = {
    Condition.HANDOVER: np.array([1.0, -0.5]),
    Condition.SOLO: np.array([-0.4, 0.2]),
    Condition.JOINT: np.array([0.2, 0.4]),
}
_MOTION_DIRECTIONS = {
    Condition.HANDOVER: np.array([0.2, 1.0, -0.2]),
    Condition.SOLO: np.array([-1.0, 0.1, 0.2]),
    Condition.JOINT: np.array([1.0, 0.1, 0.2]),
}


@dataclass(frozen=True)
class SynthProfile:
    participants: int = 8
    trials_per_condition: int = 30
    modalities: tuple = (Modality.GAZE,)
    seed: int = 0
    name: str = "synth"
    gaze_injection_time_s: float = 1.0
    gaze_effect_px: float = 40.0
    gaze_noise_px: float = 5.0
    gaze_gap_fraction: float = 0.01
    motion_injection_time_s: float = 0.0
    motion_effect_m: float = 0.3
    motion_noise_m: float = 0.02
    eeg_injection_time_s: float = 0.0
    eeg_effect: float = 1.0  # relative 10 Hz amplitude boost on handover trials
    eeg_noise_uv: float = 10.0

    def __post_init__(self):
        if self.participants < 1 or self.trials_per_condition < 1:
            raise ValueError("participants and trials_per_condition must be >= 1")
        if not self.modalities:
            raise ValueError("at least one modality is required")
        object.__setattr__(self, "modalities", tuple(Modality(m) for m in self.modalities))


_PROFILE_KEYS = {
    ("synth", "participants"): ("participants", int),
    ("synth", "trials_per_condition"): ("trials_per_condition", int),
    ("synth", "modalities"): (
        "modalities",
        lambda v: tuple(Modality(x.strip().lower()) for x in v.split(",") if x.strip()),
    ),
    ("synth", "seed"): ("seed", int),
    ("synth", "name"): ("name", str),
    ("gaze", "injection_time_s"): ("gaze_injection_time_s", float),
    ("gaze", "effect_px"): ("gaze_effect_px", float),
    ("gaze", "noise_px"): ("gaze_noise_px", float),
    ("gaze", "gap_fraction"): ("gaze_gap_fraction", float),
    ("motion", "injection_time_s"): ("motion_injection_time_s", float),
    ("motion", "effect_m"): ("motion_effect_m", float),
    ("motion", "noise_m"): ("motion_noise_m", float),
    ("eeg", "injection_time_s"): ("eeg_injection_time_s", float),
    ("eeg", "effect"): ("eeg_effect", float),
    ("eeg", "noise_uv"): ("eeg_noise_uv", float),
}


def parse_profile(path: "Path | str") -> SynthProfile:
    """Profile file: [synth]/[gaze]/[motion]/[eeg] sections of key = value."""
    path = Path(path)
    values = {}
    section = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line or section is None:
            raise ValueError(f"{path}:{lineno}: expected '[section]' or 'key = value'")
        key, _, value = line.partition("=")
        spec = _PROFILE_KEYS.get((section, key.strip()))
        if spec is None:
            raise ValueError(f"{path}:{lineno}: unknown key [{section}] {key.strip()}")
        name, convert = spec
        try:
            values[name] = convert(value.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return SynthProfile(**values)


def _grid(rate_hz: float) -> np.ndarray:
    n = int(round((6.0 - -5.0) * rate_hz)) + 1
    return -5.0 + np.arange(n) / rate_hz


def _gaze_trial(profile: SynthProfile, rng, base: np.ndarray, condition: Condition):
    t = _grid(GAZE_RATE_HZ)
    n = t.shape[0]
    center = np.array([960.0, 540.0])
    ref = center + rng.normal(0.0, 0.5, size=(n, 2))
    # Reference-corrected gaze: participant offset + per-trial fixation offset
    # + sample noise; the condition signal drifts in only after injection.
    corrected = (
        (base - center)
        + rng.normal(0.0, 3.0, size=2)
        + rng.normal(0.0, profile.gaze_noise_px, size=(n, 2))
    )
    after = t >= profile.gaze_injection_time_s
    corrected[after] += profile.gaze_effect_px * _GAZE_DIRECTIONS[condition]
    gaze = corrected + ref
    # Blink-like interior gaps.
    if profile.gaze_gap_fraction > 0:
        starts = rng.random(n) < profile.gaze_gap_fraction
        starts[0] = starts[-1] = False
        for i in np.nonzero(starts)[0]:
            run = int(rng.integers(1, 4))
            gaze[i : min(i + run, n - 1)] = np.nan
    return t, np.hstack([gaze, ref])


def _motion_trial(profile: SynthProfile, rng, base: np.ndarray, condition: Condition):
    t = _grid(MOTION_RATE_HZ)
    n = t.shape[0]
    pos = base + rng.normal(0.0, profile.motion_noise_m, size=(n, 3))
    ramp = np.clip((t - profile.motion_injection_time_s) / 1.5, 0.0, 1.0)
    pos += profile.motion_effect_m * np.outer(ramp, _MOTION_DIRECTIONS[condition])
    return t, pos


def _eeg_trial(profile: SynthProfile, rng, condition: Condition, channels):
    t = _grid(EEG_RATE_HZ)
    n = t.shape[0]
    data = rng.normal(0.0, profile.eeg_noise_uv, size=(n, len(channels)))
    amplitude = np.full(n, profile.eeg_noise_uv)
    if condition is Condition.HANDOVER:
        amplitude[t >= profile.eeg_injection_time_s] *= 1.0 + profile.eeg_effect
    phase = rng.uniform(0.0, 2.0 * np.pi)
    osc = amplitude * np.sin(2.0 * np.pi * 10.0 * t + phase)
    data += osc[:, None]
    return t, data


def generate_dataset(profile: SynthProfile, out_dir: "Path | str") -> Path:
    """Write the dataset under ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    channels = list(DEFAULT_EEG_CHANNELS)
    entries = []
    conditions = [Condition.SOLO, Condition.HANDOVER, Condition.JOINT]
    for pid in range(1, profile.participants + 1):
        base_rng = substream(profile.seed, "participant", pid)
        gaze_base = np.array([960.0, 540.0]) + base_rng.uniform(-30.0, 30.0, size=2)
        motion_base = np.array([0.1, -0.3, 0.9]) + base_rng.uniform(-0.05, 0.05, size=3)
        n_trials = 3 * profile.trials_per_condition
        for tid in range(n_trials):
            condition = conditions[tid % 3]
            rng = substream(profile.seed, "trial", pid, tid)
            paths = {}
            if Modality.GAZE in profile.modalities:
                t, cols = _gaze_trial(profile, rng, gaze_base, condition)
                rel = f"gaze/p{pid:02d}_t{tid:03d}.csv"
                write_trial_csv(out / rel, t, cols, GAZE_COLUMNS)
                paths[Modality.GAZE] = rel
            if Modality.MOTION in profile.modalities:
                t, cols = _motion_trial(profile, rng, motion_base, condition)
                rel = f"motion/p{pid:02d}_t{tid:03d}.csv"
                write_trial_csv(out / rel, t, cols, MOTION_COLUMNS)
                paths[Modality.MOTION] = rel
            if Modality.EEG in profile.modalities:
                t, cols = _eeg_trial(profile, rng, condition, channels)
                rel = f"eeg/p{pid:02d}_t{tid:03d}.csv"
                write_trial_csv(out / rel, t, cols, channels)
                paths[Modality.EEG] = rel
            entries.append(
                ManifestEntry(
                    participant_id=pid,
                    trial_id=tid,
                    condition=condition,
                    onset_s=0.0,
                    eeg_path=paths.get(Modality.EEG),
                    gaze_path=paths.get(Modality.GAZE),
                    motion_path=paths.get(Modality.MOTION),
                )
            )
    rates = {}
    if Modality.EEG in profile.modalities:
        rates[Modality.EEG] = EEG_RATE_HZ
    if Modality.GAZE in profile.modalities:
        rates[Modality.GAZE] = GAZE_RATE_HZ
    if Modality.MOTION in profile.modalities:
        rates[Modality.MOTION] = MOTION_RATE_HZ
    manifest = Manifest(
        name=profile.name,
        rates_hz=rates,
        eeg_channels=channels if Modality.EEG in profile.modalities else None,
        entries=entries,
    )
    manifest_path = out / "manifest.txt"
    write_manifest(manifest_path, manifest)
    _write_ground_truth(out / "ground_truth.json", profile)
    return manifest_path


def _write_ground_truth(path: Path, profile: SynthProfile) -> None:
    truth = {
        "seed": profile.seed,
        "participants": profile.participants,
        "trials_per_condition": profile.trials_per_condition,
        "modalities": [m.value for m in profile.modalities],
        "injection_time_s": {
            "gaze": profile.gaze_injection_time_s,
            "motion": profile.motion_injection_time_s,
            "eeg": profile.eeg_injection_time_s,
        },
        "effect_size": {
            "gaze_px": profile.gaze_effect_px,
            "motion_m": profile.motion_effect_m,
            "eeg_relative": profile.eeg_effect,
        },
        "noise": {
            "gaze_px": profile.gaze_noise_px,
            "motion_m": profile.motion_noise_m,
            "eeg_uv": profile.eeg_noise_uv,
        },
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")


def with_seed(profile: SynthProfile, seed: int) -> SynthProfile:
    return replace(profile, seed=seed)
