"""Wiring between modules: datasets, supervised pairing, and trainers.

A sample's information date is the last day its inputs cover; it predicts the
movement flagged on the next candle date (the label date). Training only ever
sees samples whose label date falls strictly before the configured split
date, and that guard is enforced here rather than trusted to callers.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path

import numpy as np

from .config import PipelineConfig, rng_for, seed_int
from .embeddings import EMBED_DIM, pad_stack, read_embedding_file
from .errors import (
    AlignmentError,
    ConfigError,
    DependencyError,
    TrainingError,
    ValidationError,
)
from .features import (
    LabelSet,
    TASKS,
    build_windows,
    make_labels,
    normalize,
)
from .fusion import fit_logistic, fusion_predict_proba_batch
from .indicators import IndicatorConfig, compute_indicator_frame
from .market_data import AlignedPanel, CandleSeries, align_panel, load_asset_series, load_candles
from .neural import FocalLossParams, TrainConfig, train
from .neural.models import ParallelCnnSpec, SequentialCnnSpec, ParallelCnn, SequentialCnn
from .neural.optim import AdamConfig
from .svm import (
    CvReport,
    SvmModel,
    SvmParams,
    grid_search,
    predict_proba_batch,
    train_smo,
)


@dataclass(frozen=True)
class SupervisedSet:
    """Feature rows paired with next-day labels."""

    info_dates: tuple[Date, ...]
    label_dates: tuple[Date, ...]
    x: np.ndarray
    y: np.ndarray  # bool

    def __len__(self) -> int:
        return len(self.info_dates)

    def subset(self, mask: np.ndarray) -> "SupervisedSet":
        idx = np.flatnonzero(mask)
        return SupervisedSet(
            info_dates=tuple(self.info_dates[i] for i in idx),
            label_dates=tuple(self.label_dates[i] for i in idx),
            x=self.x[idx],
            y=self.y[idx],
        )


def assert_no_test_leakage(label_dates, split_date: Date) -> None:
    """Reject any attempt to train on rows whose label date is in the test period."""
    bad = [d for d in label_dates if d >= split_date]
    if bad:
        raise ValidationError(
            f"training set includes {len(bad)} test-period rows (first: {min(bad)})"
        )


def load_inputs(cfg: PipelineConfig) -> tuple[CandleSeries, AlignedPanel]:
    btc = load_candles(cfg.get_path("data", "btc"))
    eth = load_asset_series(cfg.get_path("data", "eth"), "ETH")
    gold = load_asset_series(cfg.get_path("data", "gold"), "GOLD")
    return btc, align_panel(btc, eth, gold)


def indicator_config(cfg: PipelineConfig) -> IndicatorConfig:
    return IndicatorConfig(ema_alpha=cfg.get_float("indicators", "ema_alpha"))


def task_spec(cfg: PipelineConfig):
    task = cfg.get("run", "task")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {sorted(TASKS)}")
    return TASKS[task]


def build_features(cfg: PipelineConfig, panel: AlignedPanel):
    frame = compute_indicator_frame(panel, indicator_config(cfg))
    return frame, normalize(panel, frame)


def build_label_sets(cfg: PipelineConfig, candles: CandleSeries) -> dict[str, LabelSet]:
    source = cfg.get("features", "label_source")
    return {name: make_labels(candles, spec, source=source) for name, spec in TASKS.items()}


def _pair_with_next_label(
    info_dates, candles: CandleSeries, labels: LabelSet
) -> tuple[list[int], list[Date], list[bool]]:
    """Keep samples whose next candle date carries a label."""
    position = {d: i for i, d in enumerate(candles.dates)}
    label_map = labels.as_dict()
    keep: list[int] = []
    label_dates: list[Date] = []
    values: list[bool] = []
    for i, d in enumerate(info_dates):
        pos = position.get(d)
        if pos is None or pos + 1 >= len(candles.dates):
            continue
        target = candles.dates[pos + 1]
        if target not in label_map:
            continue
        keep.append(i)
        label_dates.append(target)
        values.append(label_map[target])
    if not keep:
        raise AlignmentError("no samples could be paired with a next-day label")
    return keep, label_dates, values


def ta_dataset(cfg: PipelineConfig, candles: CandleSeries, panel: AlignedPanel,
               labels: LabelSet) -> SupervisedSet:
    _, features = build_features(cfg, panel)
    windows = build_windows(features, cfg.get_int("features", "window"))
    info_dates = [w.date for w in windows]
    keep, label_dates, values = _pair_with_next_label(info_dates, candles, labels)
    x = np.stack([windows[i].x for i in keep])
    return SupervisedSet(
        info_dates=tuple(info_dates[i] for i in keep),
        label_dates=tuple(label_dates),
        x=x,
        y=np.array(values, dtype=bool),
    )


def stack_dataset(cfg: PipelineConfig, candles: CandleSeries, labels: LabelSet) -> SupervisedSet:
    emb = read_embedding_file(cfg.get_path("data", "embeddings"))
    max_slices = cfg.get_int("neural", "max_slices")
    dtype = np.dtype(cfg.get("neural", "dtype"))
    stacks = {s.date: s for s in emb.stacks}
    info_dates = sorted(stacks)
    keep, label_dates, values = _pair_with_next_label(info_dates, candles, labels)
    x = np.zeros((len(keep), max_slices, EMBED_DIM), dtype=dtype)
    for row, i in enumerate(keep):
        x[row] = pad_stack(stacks[info_dates[i]], max_slices).astype(dtype)
    return SupervisedSet(
        info_dates=tuple(info_dates[i] for i in keep),
        label_dates=tuple(label_dates),
        x=x,
        y=np.array(values, dtype=bool),
    )


def split_sets(data: SupervisedSet, split_date: Date) -> tuple[SupervisedSet, SupervisedSet]:
    mask = np.array([d < split_date for d in data.label_dates])
    return data.subset(mask), data.subset(~mask)


# --- TA model ---------------------------------------------------------------


def train_ta_model(cfg: PipelineConfig, train_set: SupervisedSet,
                   split_date: Date) -> tuple[SvmModel, CvReport]:
    assert_no_test_leakage(train_set.label_dates, split_date)
    report = grid_search(
        train_set.x,
        train_set.y,
        cs=cfg.get_floats("svm", "c_grid"),
        gammas=cfg.get_floats("svm", "gamma_grid"),
        kernel_kind=cfg.get("svm", "kernel"),
        k=cfg.get_int("svm", "folds"),
        seed=seed_int(cfg.seed, "svm-cv"),
        tol=cfg.get_float("svm", "tol"),
        max_passes=cfg.get_int("svm", "max_passes"),
    )
    model = train_smo(train_set.x, train_set.y, report.best)
    return model, report


def oof_ta_probs(cfg: PipelineConfig, train_set: SupervisedSet, params: SvmParams) -> np.ndarray:
    """Out-of-fold probabilities over the training rows (leakage control)."""
    k = cfg.get_int("svm", "folds")
    from .svm import stratified_folds

    rng = rng_for(cfg.seed, "fusion-oof")
    folds = stratified_folds(train_set.y, k, rng)
    probs = np.empty(len(train_set.y))
    all_idx = np.arange(len(train_set.y))
    for fold in folds:
        mask = np.zeros(len(train_set.y), dtype=bool)
        mask[fold] = True
        model = train_smo(train_set.x[all_idx[~mask]], train_set.y[all_idx[~mask]], params)
        probs[fold] = predict_proba_batch(model, train_set.x[fold])
    return probs


# --- Twitter model ----------------------------------------------------------


def build_cnn(cfg: PipelineConfig, arch: str):
    max_slices = cfg.get_int("neural", "max_slices")
    dtype = np.dtype(cfg.get("neural", "dtype"))
    seed = seed_int(cfg.seed, f"cnn-init-{arch}")
    if arch == "parallel":
        spec = ParallelCnnSpec(
            n_slices=max_slices,
            embed_dim=EMBED_DIM,
            n_filters=cfg.get_int("neural", "parallel_filters"),
            dense_widths=cfg.get_ints("neural", "parallel_dense"),
        )
        return ParallelCnn(spec, seed=seed, dtype=dtype)
    if arch == "sequential":
        spec = SequentialCnnSpec(
            n_slices=max_slices,
            embed_dim=EMBED_DIM,
            kernel_sizes=cfg.get_ints("neural", "seq_kernels"),
            channels=cfg.get_ints("neural", "seq_channels"),
            pool_sizes=cfg.get_ints("neural", "seq_pools"),
            dense_widths=cfg.get_ints("neural", "seq_dense"),
        )
        return SequentialCnn(spec, seed=seed, dtype=dtype)
    raise ConfigError(f"unknown twitter architecture {arch!r}")


def resolve_loss(cfg: PipelineConfig, task: str) -> tuple[str, FocalLossParams | None]:
    """Per-task default: focal loss on the rare 5% tasks, BCE on the 2% ones."""
    loss = cfg.get("neural", "loss")
    if loss == "auto":
        loss = "focal" if task.endswith("5") else "bce"
    if loss == "bce":
        return "bce", None
    if loss == "focal":
        return "focal", FocalLossParams(
            alpha=cfg.get_float("neural", "focal_alpha"),
            gamma=cfg.get_float("neural", "focal_gamma"),
        )
    raise ConfigError(f"unknown loss {loss!r}")


def train_twitter_model(cfg: PipelineConfig, arch: str, train_set: SupervisedSet,
                        split_date: Date):
    assert_no_test_leakage(train_set.label_dates, split_date)
    task = cfg.get("run", "task")
    loss, focal = resolve_loss(cfg, task)
    weight_decay = cfg.get_float("neural", "weight_decay") if arch == "sequential" else 0.0
    model = build_cnn(cfg, arch)
    tc = TrainConfig(
        optimizer=AdamConfig(lr=cfg.get_float("neural", "lr"), weight_decay=weight_decay),
        loss=loss,
        focal=focal,
        epochs=cfg.get_int("neural", "epochs"),
        batch_size=cfg.get_int("neural", "batch_size"),
        patience=cfg.get_int("neural", "patience"),
        seed=seed_int(cfg.seed, f"cnn-train-{arch}"),
    )
    result = train(model, train_set.x, train_set.y, tc)
    return model, result


# --- Fusion model -----------------------------------------------------------


def train_fusion_model(
    cfg: PipelineConfig,
    pairs: np.ndarray,
    labels: np.ndarray,
    task: str,
):
    """Fit the configured fusion classifier on (twitter, ta) probability pairs."""
    kind = cfg.get("fusion", "model")
    if kind == "auto":
        kind = "svm-poly" if task == "up5" else "logistic"
    if kind == "logistic":
        return fit_logistic(pairs, labels, l2=cfg.get_float("fusion", "logistic_l2")), kind
    if kind in ("svm-poly", "svm-rbf"):
        kernel_kind = "poly" if kind == "svm-poly" else "rbf"
        minority = min(int(labels.sum()), int((~labels).sum()))
        k = min(cfg.get_int("svm", "folds"), max(2, minority))
        if minority < 2:
            raise TrainingError("fusion training needs at least 2 samples per class")
        report = grid_search(
            pairs,
            labels,
            cs=cfg.get_floats("fusion", "c_grid"),
            gammas=cfg.get_floats("fusion", "gamma_grid"),
            kernel_kind=kernel_kind,
            k=k,
            seed=seed_int(cfg.seed, "fusion-cv"),
            tol=cfg.get_float("svm", "tol"),
            max_passes=cfg.get_int("svm", "max_passes"),
        )
        return train_smo(pairs, labels, report.best), f"{kind} (C={report.best.c:g}, gamma={report.best.kernel.gamma:g})"
    raise ConfigError(f"unknown fusion model {kind!r}")


def fusion_probs(model, p_twitter: np.ndarray, p_ta: np.ndarray) -> np.ndarray:
    pairs = np.stack([p_twitter, p_ta], axis=1)
    return fusion_predict_proba_batch(model, pairs)


def write_probs_csv(path: Path, info_dates, labels, probs, label_dates) -> None:
    """Per-sample probabilities: the info date is the day the inputs end on
    (the buy-signal day); the label date is the day being predicted."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("info_date", "label_date", "label", "prob"))
        for d, ld, y, p in zip(info_dates, label_dates, labels, probs):
            writer.writerow((d.isoformat(), ld.isoformat(), int(y), repr(float(p))))


def read_probs_csv(path: Path, with_label_dates: bool = False):
    import csv

    if not Path(path).exists():
        raise DependencyError(f"missing probability artifact: {path}")
    info_dates, label_dates, labels, probs = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            info_dates.append(Date.fromisoformat(row["info_date"]))
            label_dates.append(Date.fromisoformat(row["label_date"]))
            labels.append(bool(int(row["label"])))
            probs.append(float(row["prob"]))
    labels_arr = np.array(labels, dtype=bool)
    probs_arr = np.array(probs, dtype=float)
    if with_label_dates:
        return info_dates, label_dates, labels_arr, probs_arr
    return info_dates, labels_arr, probs_arr
