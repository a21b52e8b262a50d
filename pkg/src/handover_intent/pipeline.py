"""Experiment orchestration: gating, feature build, sweeps, aggregation,
latency tables, and deterministic result emission."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .classifiers import lda_recipe_for, lstm_recipe_for
from .config import ExperimentConfig, config_text_hash
from .core_data import (
    Modality,
    complete_trials,
    gate_participants,
    labeled,
    load_dataset,
    parse_manifest,
)
from .dsp import TfSpec
from .evaluation import (
    AucTimeline,
    CvScheme,
    aggregate_participants,
    detection_latency_table,
    sweep,
    write_aggregate_csv,
    write_latency_csv,
    write_results_csv,
    write_timeline_csv,
)
from .features import (
    FeatureCache,
    build_eeg_features,
    build_gaze_features,
    build_motion_features,
)
from .fusion import run_fusion_sweep
from .rng import derive_seed

DECISION_FLAGS = {
    "std_convention": "population (divide by N); constant columns map to zero",
    "percentile_convention": "linear interpolation between order statistics",
    "auc_formulation": "rank (Mann-Whitney), ties counted 1/2",
    "late_fusion_weight_metric": "training-fold AUC, normalized",
    "anova_grouping_unit": "participants' per-modality sustained times",
    "tf_output_step": "snapped to the nearest integer multiple of the input step",
    "missing_windows": "excluded from sustained-level scanning",
    "eeg_lda_preprocessing": "standardize then PCA, fitted on training folds only",
}


class PipelineError(RuntimeError):
    """Fatal pipeline failure; the message names the failing stage."""


@dataclass
class RunResult:
    out_dir: Path
    timelines: list
    metadata: dict


def _tf_spec(cfg: ExperimentConfig) -> TfSpec:
    return TfSpec(
        freqs_hz=tuple(range(cfg.tf_freq_lo_hz, cfg.tf_freq_hi_hz + 1)),
        n_cycles=cfg.tf_cycles,
        output_step_s=cfg.tf_output_step_s,
    )


def _build_sequences(cfg, trials, modality, cache):
    tf = _tf_spec(cfg)
    out = []
    for lt in trials:
        trial = lt.trial
        if modality is Modality.GAZE:
            out.append(build_gaze_features(trial))
        elif modality is Modality.MOTION:
            out.append(build_motion_features(trial))
        else:
            key = tf.cache_key() + f"_ch{'-'.join(cfg.eeg_channels)}_log{int(cfg.tf_log_power)}"
            ref = (trial.participant_id, trial.trial_id)
            cached = None
            if cache is not None:
                cached = cache.get(ref, Modality.EEG, key, lt.label)
            if cached is None:
                cached = build_eeg_features(
                    trial, list(cfg.eeg_channels), tf, log_power=cfg.tf_log_power
                )
                if cache is not None:
                    cache.put(cached, key)
            out.append(cached)
    return out


def _recipe(cfg: ExperimentConfig, modality: Modality):
    if cfg.model == "lda":
        return lda_recipe_for(
            modality,
            standardize_all=cfg.standardize_all,
            eeg_pca_target=cfg.eeg_pca_target,
            shrinkage=cfg.lda_shrinkage,
        )
    return lstm_recipe_for(modality, standardize_all=cfg.standardize_all)


def _scheme(cfg: ExperimentConfig, *seed_labels) -> CvScheme:
    return CvScheme(
        k=cfg.cv_folds,
        repeats=cfg.cv_repeats,
        nested=cfg.model == "lstm",
        inner_k=cfg.cv_inner_folds,
        seed=derive_seed(cfg.seed, "cv", *seed_labels),
    )


def _safe_tag(tag: str) -> str:
    return tag.replace(":", "-")


def run_experiment(
    cfg: ExperimentConfig, jobs: int = 1, config_text: str = ""
) -> RunResult:
    """Execute gating, feature build, sweeps (plus fusion when configured),
    aggregation, and latency tables; write CSVs and run metadata under
    ``cfg.out_dir``.  Output bytes depend only on (dataset, config, seed)."""
    try:
        manifest = parse_manifest(cfg.manifest_path)
        trials = load_dataset(cfg.dataset_root, manifest)
    except Exception as exc:
        raise PipelineError(f"dataset load: {exc}") from exc
    lts = labeled(trials)
    cache = FeatureCache(cfg.cache_dir) if cfg.cache_dir is not None else None

    out = Path(cfg.out_dir)
    timeline_dir = out / "timelines"
    timelines: list[AucTimeline] = []
    participants_by_tag: dict = {}
    fusion_audits: list = []

    for modality in cfg.modalities:
        gated = sorted(gate_participants(lts, {modality}, cfg.min_trials))
        if not gated:
            raise PipelineError(
                f"gating: no participant has >= {cfg.min_trials} complete "
                f"{modality.value} trials"
            )
        participants_by_tag[modality.value] = gated
        for pid in gated:
            mine = [lt for lt in lts if lt.trial.participant_id == pid]
            usable = complete_trials(mine, {modality})
            try:
                seqs = _build_sequences(cfg, usable, modality, cache)
            except Exception as exc:
                raise PipelineError(
                    f"participant {pid}, {modality.value} features: {exc}"
                ) from exc
            timeline = sweep(
                seqs,
                _recipe(cfg, modality),
                _scheme(cfg, modality.value, pid),
                grid=cfg.grid,
                participant_id=pid,
                tag=modality.value,
                jobs=jobs,
            )
            timelines.append(timeline)

    for spec in cfg.fusion_specs():
        mods = set(spec.modalities)
        gated = sorted(gate_participants(lts, mods, cfg.min_trials))
        if not gated:
            raise PipelineError(
                f"gating: no participant has >= {cfg.min_trials} complete trials "
                f"for {spec.tag()}"
            )
        participants_by_tag[spec.tag()] = gated
        for pid in gated:
            mine = [lt for lt in lts if lt.trial.participant_id == pid]
            usable = complete_trials(mine, mods)
            try:
                by_modality = {
                    m: _build_sequences(cfg, usable, m, cache) for m in spec.modalities
                }
            except Exception as exc:
                raise PipelineError(
                    f"participant {pid}, {spec.tag()} features: {exc}"
                ) from exc
            audit: list = []
            timeline = run_fusion_sweep(
                by_modality,
                spec,
                _scheme(cfg, spec.tag(), pid),
                grid=cfg.grid,
                standardize_all=cfg.standardize_all,
                shrinkage=cfg.lda_shrinkage,
                jobs=1,  # audit collection is ordered; windows stay cheap here
                audit_out=audit,
            )
            fusion_audits.append(
                {"participant": pid, "tag": spec.tag(), "records": _audit_summary(audit)}
            )
            timelines.append(timeline)

    for timeline in timelines:
        name = f"p{timeline.participant_id:03d}_{_safe_tag(timeline.tag)}_{timeline.model}.csv"
        write_timeline_csv(timeline_dir / name, timeline)
    write_results_csv(out / "results.csv", timelines)

    by_tag_model: dict = {}
    for timeline in timelines:
        by_tag_model.setdefault((timeline.tag, timeline.model), []).append(timeline)
    aggregates = [aggregate_participants(tls) for tls in by_tag_model.values()]
    write_aggregate_csv(out / "aggregate.csv", aggregates)

    by_model: dict = {}
    for (tag, model), tls in sorted(by_tag_model.items()):
        by_model.setdefault(model, {})[tag] = tls
    for model, by_tag in by_model.items():
        rows = detection_latency_table(by_tag)
        write_latency_csv(out / f"latency_{model}.csv", rows, sorted(by_tag))

    errors = [
        {
            "participant": t.participant_id,
            "tag": t.tag,
            "window_end_s": end,
            "message": message,
        }
        for t in timelines
        for end, message in t.errors
    ]
    metadata = {
        "package_version": __version__,
        "config_text": config_text,
        "config_sha256": config_text_hash(config_text),
        "seed": cfg.seed,
        "model": cfg.model,
        "participants_by_tag": participants_by_tag,
        "decision_flags": DECISION_FLAGS,
        "fusion_audits": fusion_audits,
        "window_errors": errors,
        "library_versions": _library_versions(),
    }
    with open(out / "run_metadata.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(out_dir=out, timelines=timelines, metadata=metadata)


def _audit_summary(records: list) -> dict:
    """Collapse per-split audit records into compact per-window facts."""
    dims = {}
    fallbacks = 0
    for rec in records:
        if "fused_dim" in rec:
            dims[repr(rec["window_end_s"])] = rec["fused_dim"]
        if rec.get("weight_fallback"):
            fallbacks += 1
    return {"early_fused_dims": dims, "late_weight_fallbacks": fallbacks}


def _library_versions() -> dict:
    import numpy
    import scipy

    return {"numpy": numpy.__version__, "scipy": scipy.__version__}
