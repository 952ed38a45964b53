"""Post-run diagnostics: PCA of swarm positions, filtering statistics,
surrogate feature ablation, the tenth-epoch baseline and per-layer growth
rate distributions. Everything returns plain rows for CSV/JSON export."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import surrogate as sg
from . import svm
from .evaluator import HistoryStore, TrainingRecord
from .pso import Swarm

ABLATION_COMBINATIONS = {
    "losses": sg.FeatureSpec(include_params=False, include_accuracies=False),
    "accuracies": sg.FeatureSpec(include_params=False, include_losses=False),
    "block_parameters": sg.FeatureSpec(include_losses=False, include_accuracies=False),
    "losses+accuracies": sg.FeatureSpec(include_params=False),
    "losses+accuracies+block_parameters": sg.FeatureSpec(),
}


@dataclass(frozen=True)
class PcaModel:
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray
    feature_means: np.ndarray

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.feature_means) @ self.components.T

    def inverse_transform(self, scores) -> np.ndarray:
        return np.asarray(scores) @ self.components + self.feature_means

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = self._total_variance
        return self.explained_variance / total if total > 0 else np.zeros_like(self.explained_variance)

    _total_variance: float = 0.0


def pca_fit_transform(X, k: int) -> tuple[PcaModel, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    if not 1 <= k <= min(X.shape):
        raise ValueError(f"k must lie in [1, {min(X.shape)}]")
    mean = X.mean(0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    comps = vecs[:, order].T
    # sign convention: the largest-magnitude entry of each component is positive
    pivot = np.abs(comps).argmax(1)
    comps = comps * np.sign(comps[np.arange(len(comps)), pivot])[:, None]
    model = PcaModel(comps[:k], vals[:k], mean, float(vals.sum()))
    return model, Xc @ comps[:k].T


def convergence_trace(checkpoints: Sequence[Swarm | dict]) -> list[dict]:
    """Particle positions of every generation projected onto the first two PCs."""
    swarms = [c if isinstance(c, Swarm) else Swarm.from_dict(c) for c in checkpoints]
    if len(swarms) < 2:
        raise ValueError("need at least two checkpoints")
    rows, X = [], []
    for s in swarms:
        for p in s.particles:
            rows.append((s.generation, p.id))
            X.append(p.position)
    X = np.asarray(X)
    k = min(2, *X.shape)
    _, scores = pca_fit_transform(X, k)
    out = []
    for (gen, pid), sc in zip(rows, scores):
        out.append({"generation": gen, "particle": pid, "pc1": float(sc[0]),
                    "pc2": float(sc[1]) if k > 1 else 0.0})
    return out


def filter_stats(runlog) -> list[dict]:
    return [
        {
            "generation": g.generation,
            "filtered": g.filtered,
            "trained": g.trained,
            "surrogate_active": g.surrogate_active,
            "surrogate_cv_mean": g.surrogate_cv_mean,
            "gbest_fitness": g.gbest_fitness,
            "trainer_epochs": g.trainer_epochs,
        }
        for g in runlog.generations
    ]


def _pair_groups(pairs: list[tuple[int, int]]) -> list[tuple[int, int]]:
    # (i, j) and (j, i) describe the same comparison and must share a fold
    return [(min(i, j), max(i, j)) for i, j in pairs]


def feature_ablation(
    store: HistoryStore,
    svm_cfg: svm.SvmConfig | None = None,
    *,
    cutting_epoch: int = 10,
    max_pairs: int | None = sg.DEFAULT_MAX_PAIRS,
    folds: int = 10,
    seed: int = 0,
    dataset_id: str | None = None,
    group_aware: bool = True,
) -> list[dict]:
    """Mean CV accuracy of the surrogate for each feature combination."""
    records = sg.usable_records(store, dataset_id)
    rows = []
    for name, fs in ABLATION_COMBINATIONS.items():
        fs = sg.FeatureSpec(cutting_epoch, fs.include_params, fs.include_losses, fs.include_accuracies)
        X, y, pairs = sg.pair_matrix(records, fs, max_pairs, seed)
        row = {"features": name, "n_pairs": len(y), "cv_mean": float("nan"), "group_cv_mean": float("nan")}
        if len(y) >= 2 and len(np.unique(y)) == 2:
            row["cv_mean"] = float(np.mean(svm.cross_validate(X, y, svm_cfg, min(folds, len(y)), seed)))
            if group_aware:
                groups = _pair_groups(pairs)
                g_folds = min(folds, len(set(groups)))
                if g_folds >= 2:
                    row["group_cv_mean"] = float(
                        np.mean(svm.cross_validate(X, y, svm_cfg, g_folds, seed, groups=groups))
                    )
        rows.append(row)
    return rows


def tenth_epoch_baseline(store: HistoryStore | Iterable[TrainingRecord], epoch: int = 10) -> float:
    """Pairwise agreement of 'higher accuracy at ``epoch``' with the true labels."""
    records = sg.usable_records(store) if isinstance(store, HistoryStore) else list(store)
    records = [r for r in records if r.epochs_run >= epoch]
    n = len(records)
    if n < 2:
        raise ValueError(f"need two records with at least {epoch} epochs")
    at = np.array([r.accuracies[epoch - 1] for r in records])
    best = np.array([r.best_accuracy for r in records])
    pred = at[:, None] > at[None, :]
    true = best[:, None] > best[None, :]
    off = ~np.eye(n, dtype=bool)
    return float((pred == true)[off].mean())


def growth_rate_stats(store: HistoryStore, bins: int = 20) -> list[dict]:
    """Per-layer histogram, median and quartiles of growth rates over full records."""
    records = store.full_records()
    if not records:
        raise ValueError("history is empty")
    enc = store.enc
    edges = np.linspace(enc.growth_lower, enc.growth_upper, bins + 1)
    rows = []
    for layer in range(enc.max_layers):
        vals = np.array(
            [r.block_vector[layer] for r in records if r.block_vector[layer] > enc.special_value],
            dtype=float,
        )
        if len(vals) == 0:
            rows.append({"layer": layer + 1, "count": 0, "median": float("nan"),
                         "q1": float("nan"), "q3": float("nan"), "histogram": [0] * bins})
            continue
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        hist, _ = np.histogram(vals, bins=edges)
        rows.append({"layer": layer + 1, "count": int(len(vals)), "median": float(med),
                     "q1": float(q1), "q3": float(q3), "histogram": hist.tolist()})
    return rows


def write_csv(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, list) else v for k, v in r.items()})
