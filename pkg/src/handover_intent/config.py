"""Experiment configuration: line-oriented ``key = value`` text in sections.

Example::

    [dataset]
    root = ./data

    [experiment]
    modalities = gaze,motion
    model = lda
    seed = 7
    min_trials = 60

    [cv]
    folds = 10
    repeats = 3

    [windows]
    start_s = -5.0
    first_end_s = -4.75
    last_end_s = 6.0
    step_s = 0.25

    [features]
    standardize_all = false
    eeg_pca_target = 0.99

    [fusion]
    modes = early,late
    modalities = gaze,motion

    [output]
    dir = ./out

Only [dataset] root, [experiment] modalities/model/seed, and [output] dir are
required; everything else has the defaults shown by ``default_config_text``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core_data import Modality
from .features import DEFAULT_EEG_CHANNELS, WindowGrid
from .fusion import FusionMode, FusionSpec
from .lda import DEFAULT_SHRINKAGE


class ConfigError(Exception):
    """Malformed or invalid configuration; message carries file:line."""


_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}

_KNOWN_KEYS = {
    ("dataset", "root"),
    ("dataset", "manifest"),
    ("experiment", "modalities"),
    ("experiment", "model"),
    ("experiment", "seed"),
    ("experiment", "min_trials"),
    ("cv", "folds"),
    ("cv", "repeats"),
    ("cv", "inner_folds"),
    ("windows", "start_s"),
    ("windows", "first_end_s"),
    ("windows", "last_end_s"),
    ("windows", "step_s"),
    ("features", "eeg_channels"),
    ("features", "tf_freq_lo_hz"),
    ("features", "tf_freq_hi_hz"),
    ("features", "tf_cycles"),
    ("features", "tf_output_step_s"),
    ("features", "tf_log_power"),
    ("features", "standardize_all"),
    ("features", "eeg_pca_target"),
    ("features", "lda_shrinkage"),
    ("features", "cache_dir"),
    ("fusion", "modes"),
    ("fusion", "modalities"),
    ("fusion", "eeg_pca_target"),
    ("output", "dir"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_root: Path
    manifest_path: Path
    modalities: tuple  # Modality members, single-modality sweeps to run
    model: str  # "lda" | "lstm"
    seed: int
    out_dir: Path
    min_trials: int = 60
    cv_folds: int = 10
    cv_repeats: int = 3
    cv_inner_folds: int = 10
    grid: WindowGrid = field(default_factory=WindowGrid)
    eeg_channels: tuple = tuple(DEFAULT_EEG_CHANNELS)
    tf_freq_lo_hz: int = 5
    tf_freq_hi_hz: int = 40
    tf_cycles: float = 3.0
    tf_output_step_s: float = 0.05
    tf_log_power: bool = False
    standardize_all: bool = False
    eeg_pca_target: float = 0.99
    lda_shrinkage: float = DEFAULT_SHRINKAGE
    cache_dir: Path | None = None
    fusion_modes: tuple = ()  # FusionMode members; empty = no fusion pass
    fusion_modalities: tuple = ()
    fusion_eeg_pca_target: float | None = None

    def fusion_specs(self) -> "list[FusionSpec]":
        target = (
            self.eeg_pca_target
            if self.fusion_eeg_pca_target is None
            else self.fusion_eeg_pca_target
        )
        return [
            FusionSpec(mode=mode, modalities=self.fusion_modalities, eeg_pca_target=target)
            for mode in self.fusion_modes
        ]


def _parse_entries(text: str, origin: str) -> dict:
    entries: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        if section is None:
            raise ConfigError(f"{origin}:{lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if (section, key) not in _KNOWN_KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key [{section}] {key}")
        if (section, key) in entries:
            raise ConfigError(f"{origin}:{lineno}: duplicate key [{section}] {key}")
        entries[(section, key)] = (value.strip(), lineno)
    return entries


class _Reader:
    def __init__(self, entries: dict, origin: str):
        self.entries = entries
        self.origin = origin
        self.used: set = set()

    def raw(self, section: str, key: str, default=None, required: bool = False):
        self.used.add((section, key))
        if (section, key) not in self.entries:
            if required:
                raise ConfigError(f"{self.origin}: missing required key [{section}] {key}")
            return default, None
        return self.entries[(section, key)]

    def typed(self, section, key, convert, default=None, required=False):
        value, lineno = self.raw(section, key, default=None, required=required)
        if value is None:
            return default
        try:
            return convert(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{self.origin}:{lineno}: [{section}] {key}: {exc}") from exc


def _to_bool(value: str) -> bool:
    if value.lower() not in _BOOL:
        raise ValueError(f"expected a boolean, got {value!r}")
    return _BOOL[value.lower()]


def _to_modalities(value: str) -> tuple:
    items = [v.strip().lower() for v in value.split(",") if v.strip()]
    if not items:
        raise ValueError("empty modality list")
    return tuple(Modality(v) for v in items)


def _to_modes(value: str) -> tuple:
    items = [v.strip().lower() for v in value.split(",") if v.strip()]
    return tuple(FusionMode(v) for v in items)


def parse_config_text(text: str, origin: str = "<config>", base_dir: "Path | None" = None) -> ExperimentConfig:
    entries = _parse_entries(text, origin)
    r = _Reader(entries, origin)
    base = Path(".") if base_dir is None else Path(base_dir)

    def to_path(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    root = r.typed("dataset", "root", to_path, required=True)
    manifest = r.typed("dataset", "manifest", to_path, default=root / "manifest.txt")
    modalities = r.typed("experiment", "modalities", _to_modalities, required=True)
    model = r.typed("experiment", "model", str, required=True)
    if model not in ("lda", "lstm"):
        _, lineno = entries[("experiment", "model")]
        raise ConfigError(f"{origin}:{lineno}: [experiment] model must be lda or lstm")
    seed = r.typed("experiment", "seed", int, required=True)
    out_dir = r.typed("output", "dir", to_path, required=True)

    try:
        grid = WindowGrid(
            start_s=r.typed("windows", "start_s", float, default=-5.0),
            first_end_s=r.typed("windows", "first_end_s", float, default=-4.75),
            last_end_s=r.typed("windows", "last_end_s", float, default=6.0),
            step_s=r.typed("windows", "step_s", float, default=0.25),
        )
    except ValueError as exc:
        raise ConfigError(f"{origin}: [windows] {exc}") from exc

    fusion_modes = r.typed("fusion", "modes", _to_modes, default=())
    fusion_modalities = r.typed("fusion", "modalities", _to_modalities, default=())
    if fusion_modes and len(fusion_modalities) < 2:
        raise ConfigError(
            f"{origin}: [fusion] modalities must list at least two modalities"
        )

    cache_raw = r.typed("features", "cache_dir", to_path, default=None)
    cfg = ExperimentConfig(
        dataset_root=root,
        manifest_path=manifest,
        modalities=modalities,
        model=model,
        seed=seed,
        out_dir=out_dir,
        min_trials=r.typed("experiment", "min_trials", int, default=60),
        cv_folds=r.typed("cv", "folds", int, default=10),
        cv_repeats=r.typed("cv", "repeats", int, default=3),
        cv_inner_folds=r.typed("cv", "inner_folds", int, default=10),
        grid=grid,
        eeg_channels=tuple(
            r.typed(
                "features",
                "eeg_channels",
                lambda v: [c.strip() for c in v.split(",") if c.strip()],
                default=list(DEFAULT_EEG_CHANNELS),
            )
        ),
        tf_freq_lo_hz=r.typed("features", "tf_freq_lo_hz", int, default=5),
        tf_freq_hi_hz=r.typed("features", "tf_freq_hi_hz", int, default=40),
        tf_cycles=r.typed("features", "tf_cycles", float, default=3.0),
        tf_output_step_s=r.typed("features", "tf_output_step_s", float, default=0.05),
        tf_log_power=r.typed("features", "tf_log_power", _to_bool, default=False),
        standardize_all=r.typed("features", "standardize_all", _to_bool, default=False),
        eeg_pca_target=r.typed("features", "eeg_pca_target", float, default=0.99),
        lda_shrinkage=r.typed("features", "lda_shrinkage", float, default=DEFAULT_SHRINKAGE),
        cache_dir=cache_raw,
        fusion_modes=fusion_modes,
        fusion_modalities=fusion_modalities,
        fusion_eeg_pca_target=r.typed("fusion", "eeg_pca_target", float, default=None),
    )
    _check_values(cfg, origin)
    return cfg


def _check_values(cfg: ExperimentConfig, origin: str) -> None:
    if cfg.min_trials < 1:
        raise ConfigError(f"{origin}: [experiment] min_trials must be >= 1")
    if cfg.cv_folds < 2 or cfg.cv_inner_folds < 2 or cfg.cv_repeats < 1:
        raise ConfigError(f"{origin}: [cv] folds/inner_folds >= 2 and repeats >= 1")
    if not 0 < cfg.tf_freq_lo_hz <= cfg.tf_freq_hi_hz:
        raise ConfigError(f"{origin}: [features] need 0 < tf_freq_lo_hz <= tf_freq_hi_hz")
    if cfg.tf_cycles <= 0 or cfg.tf_output_step_s <= 0:
        raise ConfigError(f"{origin}: [features] tf_cycles and tf_output_step_s must be > 0")
    if not 0.0 < cfg.eeg_pca_target <= 1.0:
        raise ConfigError(f"{origin}: [features] eeg_pca_target must be in (0, 1]")
    if not 0.0 <= cfg.lda_shrinkage <= 1.0:
        raise ConfigError(f"{origin}: [features] lda_shrinkage must be in [0, 1]")
    if cfg.fusion_modes:
        try:
            cfg.fusion_specs()
        except ValueError as exc:
            raise ConfigError(f"{origin}: [fusion] {exc}") from exc


def parse_config(path: "Path | str") -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config_text(text, origin=str(path), base_dir=path.parent)


def validate_config(cfg: ExperimentConfig) -> None:
    """Checks that need the filesystem: referenced paths must exist."""
    if not cfg.dataset_root.is_dir():
        raise ConfigError(f"[dataset] root does not exist: {cfg.dataset_root}")
    if not cfg.manifest_path.is_file():
        raise ConfigError(f"[dataset] manifest does not exist: {cfg.manifest_path}")


def with_overrides(
    cfg: ExperimentConfig, seed: int | None = None, out_dir: "Path | None" = None
) -> ExperimentConfig:
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=Path(out_dir))
    return cfg


def config_text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
