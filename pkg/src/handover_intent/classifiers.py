"""Model recipes, the fitted-classifier wrapper, and binary serialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_data import Modality
from .dsp import Standardization, standardize
from .features import PcaModel, pca_apply, pca_fit
from .lda import DEFAULT_SHRINKAGE, LdaModel, lda_fit, lda_predict_proba
from .lstm import LstmModel, LstmSpec, ensemble_predict, lstm_forward


@dataclass(frozen=True)
class LdaRecipe:
    """LDA on flattened windows; optional standardization and PCA."""

    shrinkage: float = DEFAULT_SHRINKAGE
    standardize: bool = False
    pca_variance_target: float | None = None

    name = "lda"


@dataclass(frozen=True)
class LstmRecipe:
    """Sequence classifier; trained per window via nested validation folds."""

    layers: int
    hidden: int
    batch_size: int
    max_epochs: int
    early_stop_after: int | None
    standardize: bool = False

    name = "lstm"

    def spec(self, input_dim: int, seed: int) -> LstmSpec:
        return LstmSpec(
            layers=self.layers,
            hidden=self.hidden,
            input_dim=input_dim,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            early_stop_after=self.early_stop_after,
            seed=seed,
        )


def lda_recipe_for(
    modality: Modality,
    standardize_all: bool = False,
    eeg_pca_target: float = 0.99,
    shrinkage: float = DEFAULT_SHRINKAGE,
) -> LdaRecipe:
    """EEG gets standardization + PCA; gaze/motion stay raw unless the
    standardize-all switch is on."""
    if modality is Modality.EEG:
        return LdaRecipe(shrinkage, standardize=True, pca_variance_target=eeg_pca_target)
    return LdaRecipe(shrinkage, standardize=standardize_all, pca_variance_target=None)


def lstm_recipe_for(modality: Modality, standardize_all: bool = False) -> LstmRecipe:
    if modality is Modality.EEG:
        return LstmRecipe(
            layers=1, hidden=128, batch_size=16, max_epochs=100,
            early_stop_after=None, standardize=True,
        )
    return LstmRecipe(
        layers=2, hidden=10, batch_size=5, max_epochs=200,
        early_stop_after=20, standardize=standardize_all,
    )


@dataclass(frozen=True)
class FittedPreprocessing:
    """Standardization and/or PCA fitted on the training fold only."""

    standardization: Standardization | None = None
    pca: PcaModel | None = None

    def apply_flat(self, x: np.ndarray) -> np.ndarray:
        if self.standardization is not None:
            x = self.standardization.apply(x)
        if self.pca is not None:
            x = pca_apply(self.pca, x)
        return x

    def apply_sequences(self, x: np.ndarray) -> np.ndarray:
        """x: (n, T, D); standardization runs per feature dimension."""
        if self.standardization is not None:
            x = self.standardization.apply(x)
        return x


def fit_flat_preprocessing(x_train: np.ndarray, recipe: LdaRecipe) -> FittedPreprocessing:
    stats = None
    if recipe.standardize:
        x_train, stats = standardize(x_train)
    pca = None
    if recipe.pca_variance_target is not None:
        pca = pca_fit(x_train, recipe.pca_variance_target)
    return FittedPreprocessing(standardization=stats, pca=pca)


def fit_sequence_preprocessing(
    x_train: np.ndarray, recipe: LstmRecipe
) -> FittedPreprocessing:
    stats = None
    if recipe.standardize:
        flat = x_train.reshape(-1, x_train.shape[-1])
        _, stats = standardize(flat)
    return FittedPreprocessing(standardization=stats)


@dataclass(frozen=True)
class TrainedClassifier:
    """An immutable fitted model exposing class-1 probability scoring.

    kind is one of ``lda``, ``lstm``, ``lstm_ensemble``; exactly the matching
    payload field is set.
    """

    kind: str
    preprocessing: FittedPreprocessing
    lda: LdaModel | None = None
    members: tuple | None = None  # ((LstmModel, weight), ...)
    weight_fallback: bool = False  # True when equal weights replaced zero scores

    def __post_init__(self):
        if self.kind not in ("lda", "lstm", "lstm_ensemble"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.kind == "lda" and self.lda is None:
            raise ValueError("lda classifier needs an LdaModel")
        if self.kind in ("lstm", "lstm_ensemble"):
            if not self.members:
                raise ValueError("lstm classifier needs members")
            weights = np.array([w for _, w in self.members], dtype=float)
            if (weights < 0).any() or abs(weights.sum() - 1.0) > 1e-9:
                raise ValueError("member weights must be nonnegative and sum to 1")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """x: (n, D) flattened windows for lda, (n, T, D) sequences otherwise."""
        x = np.asarray(x, dtype=float)
        if self.kind == "lda":
            return lda_predict_proba(self.lda, self.preprocessing.apply_flat(x))
        seqs = self.preprocessing.apply_sequences(x)
        if len(self.members) == 1:
            model = self.members[0][0]
            return np.array([lstm_forward(model, s) for s in seqs])
        return np.array([ensemble_predict(self.members, s) for s in seqs])


def fit_lda_classifier(
    x_train: np.ndarray, y_train: np.ndarray, recipe: LdaRecipe
) -> TrainedClassifier:
    prep = fit_flat_preprocessing(x_train, recipe)
    model = lda_fit(prep.apply_flat(x_train), y_train, recipe.shrinkage)
    return TrainedClassifier(kind="lda", preprocessing=prep, lda=model)


# ---------------------------------------------------------------------------
# Serialization: npz container with magic/version, exact float64 round-trip.
# ---------------------------------------------------------------------------

_MAGIC = "handover-intent-classifier"
_FORMAT_VERSION = 1


def save_classifier(path, clf: TrainedClassifier) -> None:
    payload = {
        "magic": _MAGIC,
        "format_version": _FORMAT_VERSION,
        "kind": clf.kind,
        "weight_fallback": int(clf.weight_fallback),
    }
    prep = clf.preprocessing
    if prep.standardization is not None:
        payload["std_mean"] = prep.standardization.mean
        payload["std_std"] = prep.standardization.std
    if prep.pca is not None:
        payload["pca_mean"] = prep.pca.mean
        payload["pca_components"] = prep.pca.components
        payload["pca_ratio"] = prep.pca.explained_variance_ratio
    if clf.kind == "lda":
        payload["lda_means"] = clf.lda.class_means
        payload["lda_factor"] = clf.lda.covariance_factor
        payload["lda_log_priors"] = clf.lda.log_priors
        payload["lda_shrinkage"] = clf.lda.shrinkage
    else:
        payload["n_members"] = len(clf.members)
        for i, (model, weight) in enumerate(clf.members):
            s = model.spec
            payload[f"member{i}_spec"] = np.array(
                [
                    s.layers,
                    s.hidden,
                    s.input_dim,
                    s.batch_size,
                    s.max_epochs,
                    -1 if s.early_stop_after is None else s.early_stop_after,
                    s.seed,
                ],
                dtype=np.int64,
            )
            payload[f"member{i}_params"] = model.parameters
            payload[f"member{i}_weight"] = float(weight)
    np.savez(path, **payload)


def load_classifier(path) -> TrainedClassifier:
    with np.load(path) as data:
        if str(data["magic"]) != _MAGIC:
            raise ValueError(f"{path}: not a classifier file")
        if int(data["format_version"]) != _FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported format version {int(data['format_version'])}"
            )
        stats = None
        if "std_mean" in data:
            stats = Standardization(mean=data["std_mean"], std=data["std_std"])
        pca = None
        if "pca_mean" in data:
            pca = PcaModel(
                mean=data["pca_mean"],
                components=data["pca_components"],
                explained_variance_ratio=data["pca_ratio"],
            )
        prep = FittedPreprocessing(standardization=stats, pca=pca)
        kind = str(data["kind"])
        if kind == "lda":
            lda = LdaModel(
                class_means=data["lda_means"],
                covariance_factor=data["lda_factor"],
                log_priors=data["lda_log_priors"],
                shrinkage=float(data["lda_shrinkage"]),
            )
            return TrainedClassifier(
                kind=kind,
                preprocessing=prep,
                lda=lda,
                weight_fallback=bool(int(data["weight_fallback"])),
            )
        members = []
        for i in range(int(data["n_members"])):
            raw = data[f"member{i}_spec"]
            spec = LstmSpec(
                layers=int(raw[0]),
                hidden=int(raw[1]),
                input_dim=int(raw[2]),
                batch_size=int(raw[3]),
                max_epochs=int(raw[4]),
                early_stop_after=None if int(raw[5]) < 0 else int(raw[5]),
                seed=int(raw[6]),
            )
            members.append(
                (
                    LstmModel(spec=spec, parameters=data[f"member{i}_params"]),
                    float(data[f"member{i}_weight"]),
                )
            )
        return TrainedClassifier(
            kind=kind,
            preprocessing=prep,
            members=tuple(members),
            weight_fallback=bool(int(data["weight_fallback"])),
        )
