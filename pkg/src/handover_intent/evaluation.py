"""ROC/AUC, cross-validation schemes, window-sweep evaluation, sustained-level
detection latency, and the group statistics used for the summary tables."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sstats
from scipy.stats import rankdata

from .classifiers import (
    LdaRecipe,
    LstmRecipe,
    TrainedClassifier,
    fit_lda_classifier,
    fit_sequence_preprocessing,
)
from .features import FeatureSequence, WindowGrid, flatten, window_features
from .lstm import lstm_forward, lstm_train
from .rng import derive_seed, substream

DEFAULT_AUC_LEVELS = (0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90)
ANOVA_ALPHA = 0.05


class EvaluationError(RuntimeError):
    """A fit/score failure, tagged with the split it occurred in."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn)

    @property
    def fpr(self) -> float:
        return self.fp / (self.fp + self.tn)


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: float


def _check_scored(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be 1-D and aligned")
    present = np.unique(labels)
    if not np.array_equal(present, [0, 1]):
        raise ValueError(f"need both classes 0 and 1, got labels {present.tolist()}")
    return scores, labels


def confusion_at(scores: np.ndarray, labels: np.ndarray, threshold: float) -> ConfusionCounts:
    """Counts when predicting positive for score >= threshold."""
    scores, labels = _check_scored(scores, labels)
    pred = scores >= threshold
    pos = labels == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def roc_curve(scores: np.ndarray, labels: np.ndarray) -> "list[RocPoint]":
    """One point per distinct threshold, descending, from (0,0) to (1,1)."""
    scores, labels = _check_scored(scores, labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.shape[0] - n_pos
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] == 1).astype(int)
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    boundaries = np.concatenate([distinct, [scores.shape[0] - 1]])
    cum_pos = np.cumsum(sorted_pos)
    points = [RocPoint(fpr=0.0, tpr=0.0, threshold=np.inf)]
    for b in boundaries:
        tp = int(cum_pos[b])
        fp = int(b + 1 - tp)
        points.append(
            RocPoint(fpr=fp / n_neg, tpr=tp / n_pos, threshold=float(sorted_scores[b]))
        )
    return points


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank (Mann-Whitney) formulation: the probability a random positive
    outranks a random negative, counting ties as 1/2."""
    scores, labels = _check_scored(scores, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.shape[0] - n_pos
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvScheme:
    """Repeated stratified k-fold; nested mode adds inner train/val folds."""

    k: int = 10
    repeats: int = 3
    nested: bool = False
    inner_k: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.k < 2 or (self.nested and self.inner_k < 2):
            raise ValueError("fold counts must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass(frozen=True)
class Split:
    train_idx: np.ndarray
    test_idx: np.ndarray
    inner: tuple | None = None  # ((fit_idx, val_idx), ...) within train_idx


def _stratified_folds(labels: np.ndarray, k: int, rng) -> "list[np.ndarray]":
    """Disjoint folds covering all indices, class counts within +-1 per fold.

    Classes smaller than k spread one sample per fold over the currently
    least-loaded folds, so k = n degenerates to singleton (leave-one-out
    shaped) folds.
    """
    if labels.shape[0] < k:
        raise ValueError(
            f"only {labels.shape[0]} samples for k={k}; use a smaller k"
        )
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = rng.permutation(np.nonzero(labels == cls)[0])
        base, extra = divmod(idx.shape[0], k)
        by_load = sorted(range(k), key=lambda f: (len(folds[f]), f))
        pos = 0
        for rank, f in enumerate(by_load):
            take = base + (1 if rank < extra else 0)
            folds[f].extend(idx[pos : pos + take].tolist())
            pos += take
    return [np.array(sorted(f), dtype=int) for f in folds]


def make_splits(labels: np.ndarray, scheme: CvScheme) -> "list[Split]":
    """k x repeats outer splits; nested mode adds inner_k (fit, val) folds
    drawn from each outer training set, never touching the outer test fold."""
    labels = np.asarray(labels)
    splits = []
    for repeat in range(scheme.repeats):
        rng = substream(scheme.seed, "cv-outer", repeat)
        folds = _stratified_folds(labels, scheme.k, rng)
        for fold_index, test_idx in enumerate(folds):
            mask = np.ones(labels.shape[0], dtype=bool)
            mask[test_idx] = False
            train_idx = np.nonzero(mask)[0]
            inner = None
            if scheme.nested:
                inner_rng = substream(scheme.seed, "cv-inner", repeat, fold_index)
                inner_folds = _stratified_folds(
                    labels[train_idx], scheme.inner_k, inner_rng
                )
                inner = tuple(
                    (
                        np.setdiff1d(train_idx, train_idx[val_local]),
                        train_idx[val_local],
                    )
                    for val_local in inner_folds
                )
            splits.append(Split(train_idx=train_idx, test_idx=test_idx, inner=inner))
    return splits


# ---------------------------------------------------------------------------
# Window evaluation and sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowScore:
    end_time_s: float
    mean: float
    std: float  # across folds, ddof=1
    stderr: float
    median: float
    q25: float
    q75: float
    split_aucs: tuple


def _window_matrix(sequences, end_time_s: float, grid: WindowGrid) -> np.ndarray:
    return np.stack([flatten(window_features(s, end_time_s, grid)) for s in sequences])


def _window_tensor(sequences, end_time_s: float, grid: WindowGrid) -> np.ndarray:
    return np.stack(
        [window_features(s, end_time_s, grid).series.values for s in sequences]
    )


def _sorted_sequences(sequences) -> "list[FeatureSequence]":
    ordered = sorted(sequences, key=lambda s: s.trial_ref)
    refs = [s.trial_ref for s in ordered]
    if len(set(refs)) != len(refs):
        raise ValueError("duplicate trial_refs in the sequence list")
    return ordered


def _score_stats(end_time_s: float, aucs: "list[float]") -> WindowScore:
    arr = np.asarray(aucs, dtype=float)
    return WindowScore(
        end_time_s=end_time_s,
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)) if arr.shape[0] > 1 else 0.0,
        stderr=(
            float(arr.std(ddof=1) / np.sqrt(arr.shape[0])) if arr.shape[0] > 1 else 0.0
        ),
        median=float(np.percentile(arr, 50)),
        q25=float(np.percentile(arr, 25)),
        q75=float(np.percentile(arr, 75)),
        split_aucs=tuple(arr.tolist()),
    )


def fit_lstm_ensemble(
    x: np.ndarray,
    y: np.ndarray,
    split: "Split",
    recipe: LstmRecipe,
    seed: int,
) -> TrainedClassifier:
    """Train one member per inner (fit, val) fold of ``split``; ensemble
    weights are the members' validation AUCs, normalized (equal weights when
    every AUC is zero).  Preprocessing is fitted on the outer training fold."""
    if split.inner is None:
        raise ValueError("LSTM evaluation needs a nested CvScheme")
    prep = fit_sequence_preprocessing(x[split.train_idx], recipe)
    xp = prep.apply_sequences(x)
    members = []
    val_aucs = []
    for inner_index, (fit_idx, val_idx) in enumerate(split.inner):
        spec = recipe.spec(
            input_dim=x.shape[2], seed=derive_seed(seed, "member", inner_index)
        )
        model = lstm_train(
            spec,
            list(zip(xp[fit_idx], y[fit_idx])),
            list(zip(xp[val_idx], y[val_idx])),
        )
        probs = np.array([lstm_forward(model, s) for s in xp[val_idx]])
        has_both = len(np.unique(y[val_idx])) > 1
        val_aucs.append(auc_roc(probs, y[val_idx]) if has_both else 0.0)
        members.append(model)
    weights = np.asarray(val_aucs, dtype=float)
    fallback = bool(weights.sum() <= 0.0)
    if fallback:
        weights = np.full_like(weights, 1.0 / len(members))
    else:
        weights = weights / weights.sum()
    return TrainedClassifier(
        kind="lstm_ensemble",
        preprocessing=prep,
        members=tuple(zip(members, weights.tolist())),
        weight_fallback=fallback,
    )


def evaluate_window(
    sequences,
    end_time_s: float,
    recipe,
    scheme: CvScheme,
    grid: WindowGrid | None = None,
) -> WindowScore:
    """Fit and score each CV split on one window; aggregate across splits."""
    grid = WindowGrid() if grid is None else grid
    ordered = _sorted_sequences(sequences)
    labels = np.array([s.label for s in ordered])
    splits = make_splits(labels, scheme)
    window_index = grid.index_of(end_time_s)
    is_lda = isinstance(recipe, LdaRecipe)
    try:
        if is_lda:
            x = _window_matrix(ordered, end_time_s, grid)
        else:
            x = _window_tensor(ordered, end_time_s, grid)
    except Exception as exc:
        raise EvaluationError(f"window setup: {exc}") from exc
    aucs = []
    for split_index, split in enumerate(splits):
        try:
            if is_lda:
                clf = fit_lda_classifier(
                    x[split.train_idx], labels[split.train_idx], recipe
                )
            else:
                clf = fit_lstm_ensemble(
                    x,
                    labels,
                    split,
                    recipe,
                    seed=derive_seed(scheme.seed, "lstm", window_index, split_index),
                )
            probs = clf.predict_proba(x[split.test_idx])
            aucs.append(auc_roc(probs, labels[split.test_idx]))
        except Exception as exc:
            raise EvaluationError(f"split {split_index}: {exc}") from exc
    return _score_stats(end_time_s, aucs)


@dataclass(frozen=True)
class AucTimeline:
    participant_id: int
    tag: str  # modality name or fusion tag like "early:eeg+gaze"
    model: str  # "lda" | "lstm"
    window_end_times_s: np.ndarray
    auc: np.ndarray  # mean across splits; nan where the window failed
    auc_std: np.ndarray
    auc_stderr: np.ndarray
    auc_median: np.ndarray
    auc_q25: np.ndarray
    auc_q75: np.ndarray
    n_splits: int
    errors: tuple = ()  # ((window_end_s, message), ...)

    def __post_init__(self):
        n = np.asarray(self.window_end_times_s).shape[0]
        for name in ("auc", "auc_std", "auc_stderr", "auc_median", "auc_q25", "auc_q75"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} misaligned with the window grid")
            object.__setattr__(self, name, arr)
        object.__setattr__(
            self, "window_end_times_s", np.asarray(self.window_end_times_s, dtype=float)
        )
        finite = self.auc[np.isfinite(self.auc)]
        if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
            raise ValueError("AUC values must lie in [0, 1]")


def timeline_from_scores(
    participant_id: int,
    tag: str,
    model: str,
    end_times: np.ndarray,
    scores: "dict[int, WindowScore]",
    n_splits: int,
    errors,
) -> AucTimeline:
    n = end_times.shape[0]
    cols = {name: np.full(n, np.nan) for name in ("mean", "std", "stderr", "median", "q25", "q75")}
    for i, ws in scores.items():
        cols["mean"][i] = ws.mean
        cols["std"][i] = ws.std
        cols["stderr"][i] = ws.stderr
        cols["median"][i] = ws.median
        cols["q25"][i] = ws.q25
        cols["q75"][i] = ws.q75
    return AucTimeline(
        participant_id=participant_id,
        tag=tag,
        model=model,
        window_end_times_s=end_times,
        auc=cols["mean"],
        auc_std=cols["std"],
        auc_stderr=cols["stderr"],
        auc_median=cols["median"],
        auc_q25=cols["q25"],
        auc_q75=cols["q75"],
        n_splits=n_splits,
        errors=tuple(errors),
    )


def sweep(
    sequences,
    recipe,
    scheme: CvScheme,
    grid: WindowGrid | None = None,
    participant_id: int | None = None,
    tag: str | None = None,
    jobs: int = 1,
) -> AucTimeline:
    """Evaluate every window end on the grid.  A failing window is recorded
    and marked missing (nan) instead of aborting the sweep.

    Windows are independent tasks; results are reduced in grid order, so the
    output is identical for any ``jobs`` count.
    """
    grid = WindowGrid() if grid is None else grid
    ordered = _sorted_sequences(sequences)
    end_times = grid.end_times()
    if participant_id is None:
        participant_id = ordered[0].trial_ref[0]
    if tag is None:
        tag = ordered[0].modality.value

    def task(index_and_end):
        _, end = index_and_end
        return evaluate_window(ordered, float(end), recipe, scheme, grid)

    items = list(enumerate(end_times))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_safe(task), items))
    else:
        outcomes = [_safe(task)(item) for item in items]

    scores: dict[int, WindowScore] = {}
    errors = []
    for (i, end), outcome in zip(items, outcomes):
        if isinstance(outcome, WindowScore):
            scores[i] = outcome
        else:
            errors.append((float(end), str(outcome)))
    n_splits = scheme.k * scheme.repeats
    return timeline_from_scores(
        participant_id, tag, recipe.name, end_times, scores, n_splits, errors
    )


def _safe(fn):
    def wrapped(item):
        try:
            return fn(item)
        except EvaluationError as exc:
            return exc

    return wrapped


# ---------------------------------------------------------------------------
# Detection latency and aggregation
# ---------------------------------------------------------------------------


def sustained_level_time(
    timeline: AucTimeline, level: float, run_length: int = 3
) -> float | None:
    """Earliest window end time whose AUC stays >= level for run_length
    consecutive grid steps; None when the level is never sustained.  Missing
    (nan) windows fail the condition rather than being skipped over."""
    if run_length < 1:
        raise ValueError("run_length must be >= 1")
    auc = timeline.auc
    ok = np.isfinite(auc) & (auc >= level)
    for i in range(0, auc.shape[0] - run_length + 1):
        if ok[i : i + run_length].all():
            return float(timeline.window_end_times_s[i])
    return None


@dataclass(frozen=True)
class AggregateTimeline:
    tag: str
    model: str
    window_end_times_s: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    n_participants: int


def aggregate_participants(timelines) -> AggregateTimeline:
    """Per-window median and quartiles (linear interpolation) across
    participants; windows missing for a participant are left out of that
    window's statistics."""
    timelines = list(timelines)
    if not timelines:
        raise ValueError("no timelines to aggregate")
    first = timelines[0]
    for t in timelines[1:]:
        if not np.array_equal(t.window_end_times_s, first.window_end_times_s):
            raise ValueError("window grids do not match across participants")
        if (t.tag, t.model) != (first.tag, first.model):
            raise ValueError("cannot aggregate across different tags/models")
    stack = np.stack([t.auc for t in timelines])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)  # all-nan windows
        median = np.nanpercentile(stack, 50, axis=0)
        q25 = np.nanpercentile(stack, 25, axis=0)
        q75 = np.nanpercentile(stack, 75, axis=0)
    return AggregateTimeline(
        tag=first.tag,
        model=first.model,
        window_end_times_s=first.window_end_times_s,
        median=median,
        q25=q25,
        q75=q75,
        n_participants=len(timelines),
    )


def median_timeline(timelines) -> AucTimeline:
    """The cross-participant median expressed as an AucTimeline (participant 0)."""
    agg = aggregate_participants(timelines)
    n = agg.window_end_times_s.shape[0]
    zeros = np.zeros(n)
    return AucTimeline(
        participant_id=0,
        tag=agg.tag,
        model=agg.model,
        window_end_times_s=agg.window_end_times_s,
        auc=agg.median,
        auc_std=zeros,
        auc_stderr=zeros,
        auc_median=agg.median,
        auc_q25=agg.q25,
        auc_q75=agg.q75,
        n_splits=0,
    )


# ---------------------------------------------------------------------------
# Group statistics
# ---------------------------------------------------------------------------


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t-test; p from the Student t CDF with n-1 dof."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.shape[0] < 2:
        raise ValueError("need two aligned vectors of length >= 2")
    diff = a - b
    sd = diff.std(ddof=1)
    if sd == 0.0:
        raise ValueError("difference variance is zero; t statistic undefined")
    n = diff.shape[0]
    t = diff.mean() / (sd / np.sqrt(n))
    p = 2.0 * sstats.t.sf(abs(t), df=n - 1)
    return float(t), float(p)


def anova_oneway(groups) -> tuple[float, float]:
    """Classic one-way ANOVA: between/within mean-square ratio, p from F."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(g.ndim != 1 or g.shape[0] < 2 for g in groups):
        raise ValueError("need >= 2 groups with >= 2 samples each")
    all_values = np.concatenate(groups)
    grand = all_values.mean()
    ss_between = sum(g.shape[0] * (g.mean() - grand) ** 2 for g in groups)
    ss_within = sum(((g - g.mean()) ** 2).sum() for g in groups)
    df_between = len(groups) - 1
    df_within = all_values.shape[0] - len(groups)
    if ss_within == 0.0:
        raise ValueError("zero within-group variance; F statistic undefined")
    f = (ss_between / df_between) / (ss_within / df_within)
    p = sstats.f.sf(f, df_between, df_within)
    return float(f), float(p)


# ---------------------------------------------------------------------------
# Latency table (sustained times on the median timeline, ANOVA across
# participants' per-modality sustained times)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyRow:
    level: float
    times: dict  # tag -> float | None
    anova_f: float | None
    anova_p: float | None
    significant: bool | None


def detection_latency_table(
    timelines_by_tag: dict,
    levels=DEFAULT_AUC_LEVELS,
    run_length: int = 3,
    alpha: float = ANOVA_ALPHA,
) -> "list[LatencyRow]":
    """One row per AUC level.  The reported time per tag comes from the
    cross-participant median timeline; the ANOVA compares participants'
    individual sustained times across tags (participants that never reach the
    level are left out, and the test is skipped when fewer than two groups
    keep two members)."""
    rows = []
    medians = {tag: median_timeline(tls) for tag, tls in timelines_by_tag.items()}
    for level in levels:
        times = {
            tag: sustained_level_time(med, level, run_length)
            for tag, med in medians.items()
        }
        groups = []
        for tag, tls in timelines_by_tag.items():
            per_participant = [
                t
                for t in (sustained_level_time(tl, level, run_length) for tl in tls)
                if t is not None
            ]
            if len(per_participant) >= 2:
                groups.append(per_participant)
        anova_f = anova_p = None
        significant = None
        if len(groups) >= 2:
            try:
                anova_f, anova_p = anova_oneway(groups)
                significant = bool(anova_p < alpha)
            except ValueError:
                pass
        rows.append(
            LatencyRow(
                level=float(level),
                times=times,
                anova_f=anova_f,
                anova_p=anova_p,
                significant=significant,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV output (byte-stable: repr floats, \n newlines, fixed column order)
# ---------------------------------------------------------------------------

TIMELINE_COLUMNS = [
    "participant",
    "tag",
    "model",
    "window_end_s",
    "auc_mean",
    "auc_dispersion",
    "auc_stderr",
    "auc_median",
    "auc_q25",
    "auc_q75",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def timeline_rows(timeline: AucTimeline) -> "list[list[str]]":
    rows = []
    for i, end in enumerate(timeline.window_end_times_s):
        rows.append(
            [
                str(timeline.participant_id),
                timeline.tag,
                timeline.model,
                _fmt(end),
                _fmt(timeline.auc[i]),
                _fmt(timeline.auc_std[i]),
                _fmt(timeline.auc_stderr[i]),
                _fmt(timeline.auc_median[i]),
                _fmt(timeline.auc_q25[i]),
                _fmt(timeline.auc_q75[i]),
            ]
        )
    return rows


def write_timeline_csv(path, timeline: AucTimeline) -> None:
    _write_csv(path, TIMELINE_COLUMNS, timeline_rows(timeline))


def write_results_csv(path, timelines) -> None:
    rows = []
    for t in sorted(timelines, key=lambda t: (t.model, t.tag, t.participant_id)):
        rows.extend(timeline_rows(t))
    _write_csv(path, TIMELINE_COLUMNS, rows)


def read_timelines_csv(path) -> "list[AucTimeline]":
    """Read one or more timelines back from a results/timeline CSV."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != TIMELINE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        grouped: dict = {}
        for line in fh:
            cells = line.rstrip("\n").split(",")
            key = (int(cells[0]), cells[1], cells[2])
            grouped.setdefault(key, []).append([float(c) for c in cells[3:]])
    out = []
    for (pid, tag, model), rows in grouped.items():
        arr = np.asarray(rows)
        out.append(
            AucTimeline(
                participant_id=pid,
                tag=tag,
                model=model,
                window_end_times_s=arr[:, 0],
                auc=arr[:, 1],
                auc_std=arr[:, 2],
                auc_stderr=arr[:, 3],
                auc_median=arr[:, 4],
                auc_q25=arr[:, 5],
                auc_q75=arr[:, 6],
                n_splits=0,
            )
        )
    return out


def write_latency_csv(path, rows: "list[LatencyRow]", tags: "list[str]") -> None:
    header = ["level"] + list(tags) + ["anova_f", "anova_p", "significant"]
    body = []
    for row in rows:
        cells = [_fmt(row.level)]
        for tag in tags:
            t = row.times.get(tag)
            cells.append("X" if t is None else _fmt(t))
        cells.append("" if row.anova_f is None else _fmt(row.anova_f))
        cells.append("" if row.anova_p is None else _fmt(row.anova_p))
        cells.append("" if row.significant is None else ("yes" if row.significant else "no"))
        body.append(cells)
    _write_csv(path, header, body)


def write_aggregate_csv(path, aggregates) -> None:
    header = ["tag", "model", "window_end_s", "median", "q25", "q75", "n_participants"]
    rows = []
    for agg in sorted(aggregates, key=lambda a: (a.model, a.tag)):
        for i, end in enumerate(agg.window_end_times_s):
            rows.append(
                [
                    agg.tag,
                    agg.model,
                    _fmt(end),
                    _fmt(agg.median[i]),
                    _fmt(agg.q25[i]),
                    _fmt(agg.q75[i]),
                    str(agg.n_participants),
                ]
            )
    _write_csv(path, header, rows)


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
