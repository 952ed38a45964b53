"""Pairwise-comparison surrogate built from the block training history.

Every ordered pair of fully trained blocks becomes one binary example whose
features concatenate both blocks' parameters and early learning curves, and
whose label says whether the first block reached a strictly higher best
accuracy than the second.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import svm
from .datasets import DatasetDescriptor
from .encoding import BlockSpec
from .evaluator import HistoryStore, StagedStore, TrainingRecord, Trainer, partial_train

DEFAULT_MAX_PAIRS = 2000
DEFAULT_THRESHOLD = 0.90


class SurrogateInactiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    cutting_epoch: int = 10
    include_params: bool = True
    include_losses: bool = True
    include_accuracies: bool = True

    def __post_init__(self):
        if self.cutting_epoch < 1:
            raise ValueError("cutting_epoch must be >= 1")
        if not (self.include_params or self.include_losses or self.include_accuracies):
            raise ValueError("at least one feature group must be enabled")

    def block_length(self, max_layers: int) -> int:
        c = self.cutting_epoch
        return (
            max_layers * self.include_params
            + c * self.include_losses
            + c * self.include_accuracies
        )

    def pair_length(self, max_layers: int) -> int:
        return 2 * self.block_length(max_layers)


@dataclass(frozen=True)
class PairExample:
    features: np.ndarray
    label: int
    first: int  # record ids, kept for grouping and export
    second: int


@dataclass
class SurrogateState:
    model: svm.SvmModel | None = None
    cv_scores: list[float] = field(default_factory=list)
    active: bool = False
    threshold: float = DEFAULT_THRESHOLD
    n_pairs: int = 0

    @property
    def cv_mean(self) -> float:
        return float(np.mean(self.cv_scores)) if self.cv_scores else 0.0


def _cut(values: list[float], c: int) -> list[float]:
    # early-stopped curves are padded with their last value
    head = list(values[:c])
    return head + [head[-1]] * (c - len(head))


def block_features(params: list[int], losses, accuracies, fs: FeatureSpec) -> np.ndarray:
    parts: list[float] = []
    if fs.include_params:
        parts.extend(params)
    if fs.include_losses:
        parts.extend(_cut(losses, fs.cutting_epoch))
    if fs.include_accuracies:
        parts.extend(_cut(accuracies, fs.cutting_epoch))
    return np.asarray(parts, dtype=float)


def record_features(r: TrainingRecord, fs: FeatureSpec) -> np.ndarray:
    return block_features(r.block_vector, r.losses, r.accuracies, fs)


def pair_label(first: TrainingRecord, second: TrainingRecord) -> int:
    return int(first.best_accuracy > second.best_accuracy)


def usable_records(store: HistoryStore, dataset_id: str | None = None) -> list[TrainingRecord]:
    return [
        r for r in store.full_records() if dataset_id is None or r.dataset_id == dataset_id
    ]


def pair_indices(n: int, max_pairs: int | None = None, seed: int = 0) -> list[tuple[int, int]]:
    """Ordered pairs (i, j), i != j, in row-major order; uniformly thinned to ``max_pairs``."""
    total = n * (n - 1)
    if total == 0:
        return []
    if max_pairs is None or total <= max_pairs:
        flat = np.arange(total)
    else:
        rng = np.random.default_rng(seed)
        flat = np.sort(rng.choice(total, size=max_pairs, replace=False))
    i = flat // (n - 1)
    j = flat % (n - 1)
    j = j + (j >= i)
    return list(zip(i.tolist(), j.tolist()))


def pair_matrix(
    records: list[TrainingRecord],
    fs: FeatureSpec,
    max_pairs: int | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """(X, y, index pairs) for the ordered pairs of ``records``."""
    pairs = pair_indices(len(records), max_pairs, seed)
    if not pairs:
        return np.empty((0, 0)), np.empty(0, dtype=int), []
    feats = np.stack([record_features(r, fs) for r in records])
    best = np.array([r.best_accuracy for r in records])
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    X = np.hstack([feats[i], feats[j]])
    y = (best[i] > best[j]).astype(int)
    return X, y, pairs


def build_pair_dataset(
    store: HistoryStore, fs: FeatureSpec, max_pairs: int | None = None, seed: int = 0
) -> list[PairExample]:
    records = usable_records(store)
    X, y, pairs = pair_matrix(records, fs, max_pairs, seed)
    return [
        PairExample(X[k], int(y[k]), records[i].record_id, records[j].record_id)
        for k, (i, j) in enumerate(pairs)
    ]


def export_pairs_csv(examples: list[PairExample], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        if not examples:
            w.writerow(["first", "second", "label"])
            return
        nf = len(examples[0].features)
        w.writerow(["first", "second", "label"] + [f"f{k}" for k in range(nf)])
        for ex in examples:
            w.writerow([ex.first, ex.second, ex.label] + [repr(float(v)) for v in ex.features])


def refresh(
    state: SurrogateState,
    store: HistoryStore,
    fs: FeatureSpec,
    svm_cfg: svm.SvmConfig | None = None,
    *,
    dataset_id: str | None = None,
    max_pairs: int | None = DEFAULT_MAX_PAIRS,
    folds: int = 10,
    seed: int = 0,
) -> SurrogateState:
    """Retrain the surrogate on the current history and re-gate it."""
    svm_cfg = svm_cfg or svm.SvmConfig()
    new = SurrogateState(threshold=state.threshold)
    X, y, _ = pair_matrix(usable_records(store, dataset_id), fs, max_pairs, seed)
    new.n_pairs = len(y)
    if len(y) < 2 or len(np.unique(y)) < 2:
        return new
    new.cv_scores = svm.cross_validate(X, y, svm_cfg, folds=min(folds, len(y)), seed=seed)
    new.model = svm.fit(X, y, svm_cfg)
    new.active = new.cv_mean >= new.threshold
    return new


def block_curve_features(
    spec: BlockSpec,
    trainer: Trainer,
    store: HistoryStore | StagedStore,
    dataset: DatasetDescriptor,
    fs: FeatureSpec,
    seed: int = 0,
) -> np.ndarray:
    """Features of one block, trained for at most ``cutting_epoch`` epochs if unseen."""
    c = fs.cutting_epoch
    hit = store.lookup(spec, dataset.dataset_id, min_epochs=c)
    if hit is None:
        hit = store.lookup(spec, dataset.dataset_id, partial=False)
    if hit is not None:
        losses, accs = hit.losses, hit.accuracies
    else:
        losses, accs = partial_train(spec, dataset, trainer, store, c, seed)
    return block_features(store.vector(spec), losses, accs, fs)


def predict_better(
    state: SurrogateState,
    b1: BlockSpec,
    b2: BlockSpec,
    trainer: Trainer,
    store: HistoryStore | StagedStore,
    dataset: DatasetDescriptor,
    fs: FeatureSpec,
    seed: int = 0,
) -> int:
    """1 if ``b1`` is predicted to beat ``b2``, else 0."""
    if not state.active or state.model is None:
        raise SurrogateInactiveError("surrogate is not active")
    f1 = block_curve_features(b1, trainer, store, dataset, fs, seed)
    f2 = block_curve_features(b2, trainer, store, dataset, fs, seed)
    return int(svm.predict(state.model, np.concatenate([f1, f2])))
