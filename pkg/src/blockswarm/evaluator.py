"""Fitness evaluation with adaptive early stopping and the block training history."""
from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .datasets import DatasetDescriptor
from .encoding import BlockSpec, EncodingConfig, block_vector

PATIENCE = 5
DEFAULT_MAX_EPOCHS = 60


class EvaluationError(RuntimeError):
    """Trainer failed mid-evaluation; carries the curves gathered so far."""

    def __init__(self, message: str, losses=(), accuracies=()):
        super().__init__(message)
        self.losses = list(losses)
        self.accuracies = list(accuracies)


class Trainer(Protocol):
    def init(self, spec: BlockSpec, dataset: DatasetDescriptor, seed: int, repeats: int = 1): ...

    def train_epoch(self, state) -> tuple[float, float]: ...

    def close(self, state) -> None: ...


@dataclass
class TrainingRecord:
    record_id: int
    block_vector: list[int]
    losses: list[float]
    accuracies: list[float]
    best_accuracy: float
    best_epoch: int
    epochs_run: int
    dataset_id: str
    partial: bool = False
    timestamp: float = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line: str) -> "TrainingRecord":
        return cls(**json.loads(line))


class HistoryStore:
    """Append-only block training history, optionally mirrored to JSON-Lines.

    ``clock`` supplies record timestamps. The default is a logical clock (the
    append ordinal) so that identical runs write identical files.
    """

    def __init__(
        self,
        enc: EncodingConfig | None = None,
        path: str | Path | None = None,
        clock: Callable[[], float] | None = None,
    ):
        self.enc = enc or EncodingConfig()
        self.path = Path(path) if path is not None else None
        self.clock = clock
        self._records: list[TrainingRecord] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with self.path.open() as fh:
                self._records = [TrainingRecord.from_json(l) for l in fh if l.strip()]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(list(self._records))

    @property
    def records(self) -> list[TrainingRecord]:
        return list(self._records)

    def full_records(self) -> list[TrainingRecord]:
        return [r for r in self._records if not r.partial]

    def vector(self, spec: BlockSpec) -> list[int]:
        return block_vector(spec, self.enc)

    def make_record(self, spec, dataset_id, losses, accuracies, partial) -> TrainingRecord:
        best = max(accuracies)
        return TrainingRecord(
            record_id=-1,
            block_vector=self.vector(spec),
            losses=list(losses),
            accuracies=list(accuracies),
            best_accuracy=best,
            best_epoch=accuracies.index(best) + 1,
            epochs_run=len(accuracies),
            dataset_id=dataset_id,
            partial=partial,
        )

    def append(self, record: TrainingRecord) -> TrainingRecord:
        with self._lock:
            record.record_id = len(self._records)
            record.timestamp = self.clock() if self.clock else record.record_id
            self._records.append(record)
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write(record.to_json() + "\n")
        return record

    def truncate(self, length: int) -> None:
        """Drop records past ``length``; used when resuming from a checkpoint."""
        with self._lock:
            if len(self._records) == length:
                return
            self._records = self._records[:length]
            if self.path is not None:
                write_history(self._records, self.path)

    def lookup(
        self,
        spec: BlockSpec,
        dataset_id: str | None = None,
        *,
        partial: bool | None = None,
        min_epochs: int = 0,
    ) -> TrainingRecord | None:
        """Most recent matching record, or None."""
        vec = self.vector(spec)
        for r in reversed(self._records):
            if r.block_vector != vec or r.epochs_run < min_epochs:
                continue
            if dataset_id is not None and r.dataset_id != dataset_id:
                continue
            if partial is not None and r.partial != partial:
                continue
            return r
        return None

    def stage(self) -> "StagedStore":
        return StagedStore(self)


class StagedStore:
    """Private view of a store: reads see the base plus local appends.

    Concurrent evaluations each write to their own stage; the caller commits
    the stages in a fixed order so the persisted history stays reproducible.
    """

    def __init__(self, base: HistoryStore):
        self.base = base
        self.enc = base.enc
        self.pending: list[TrainingRecord] = []

    def vector(self, spec: BlockSpec) -> list[int]:
        return self.base.vector(spec)

    def make_record(self, *args, **kwargs) -> TrainingRecord:
        return self.base.make_record(*args, **kwargs)

    def append(self, record: TrainingRecord) -> TrainingRecord:
        self.pending.append(record)
        return record

    def lookup(self, spec, dataset_id=None, *, partial=None, min_epochs=0):
        vec = self.vector(spec)
        for r in reversed(self.pending):
            if (
                r.block_vector == vec
                and r.epochs_run >= min_epochs
                and (dataset_id is None or r.dataset_id == dataset_id)
                and (partial is None or r.partial == partial)
            ):
                return r
        return self.base.lookup(spec, dataset_id, partial=partial, min_epochs=min_epochs)

    def commit(self) -> list[TrainingRecord]:
        done = [self.base.append(r) for r in self.pending]
        self.pending = []
        return done


def should_continue(acc: float, best: float, epoch: int, best_epoch: int) -> bool:
    return acc >= best or epoch - best_epoch < PATIENCE


def _close(trainer, state) -> None:
    close = getattr(trainer, "close", None)
    if close is not None:
        close(state)


def run_training(
    spec: BlockSpec,
    dataset: DatasetDescriptor,
    trainer: Trainer,
    seed: int,
    max_epochs: int,
    repeats: int = 1,
) -> tuple[list[float], list[float]]:
    """Train until accuracy has not improved for PATIENCE epochs (or the cap).

    Epochs count from 1. Training goes on while the latest accuracy is at
    least the best so far, or fewer than PATIENCE epochs have passed since
    the best one.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    losses: list[float] = []
    accs: list[float] = []
    best, best_epoch, epoch, acc = 0.0, 0, 0, 0.0
    state = None
    try:
        state = trainer.init(spec, dataset, seed, repeats=repeats)
        while epoch < max_epochs and should_continue(acc, best, epoch, best_epoch):
            loss, acc = trainer.train_epoch(state)
            epoch += 1
            losses.append(float(loss))
            accs.append(float(acc))
            if acc > best:
                best, best_epoch = acc, epoch
    except EvaluationError:
        raise
    except Exception as exc:
        raise EvaluationError(f"trainer failed: {exc}", losses, accs) from exc
    finally:
        if state is not None:
            _close(trainer, state)
    return losses, accs


def evaluate_fitness(
    spec: BlockSpec,
    dataset: DatasetDescriptor,
    trainer: Trainer,
    store: HistoryStore | StagedStore,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    seed: int = 0,
) -> float:
    """Fully train ``spec``, append its record to ``store`` and return the best accuracy."""
    losses, accs = run_training(spec, dataset, trainer, seed, max_epochs)
    record = store.make_record(spec, dataset.dataset_id, losses, accs, partial=False)
    store.append(record)
    return record.best_accuracy


def partial_train(
    spec: BlockSpec,
    dataset: DatasetDescriptor,
    trainer: Trainer,
    store: HistoryStore | StagedStore,
    c: int,
    seed: int = 0,
) -> tuple[list[float], list[float]]:
    """First ``c`` epochs of curves, from history when possible, else by training."""
    if c < 1:
        raise ValueError("c must be >= 1")
    hit = store.lookup(spec, dataset.dataset_id, min_epochs=c)
    if hit is not None:
        return hit.losses[:c], hit.accuracies[:c]
    losses: list[float] = []
    accs: list[float] = []
    state = None
    try:
        state = trainer.init(spec, dataset, seed)
        for _ in range(c):
            loss, acc = trainer.train_epoch(state)
            losses.append(float(loss))
            accs.append(float(acc))
    except Exception as exc:
        raise EvaluationError(f"trainer failed: {exc}", losses, accs) from exc
    finally:
        if state is not None:
            _close(trainer, state)
    store.append(store.make_record(spec, dataset.dataset_id, losses, accs, partial=True))
    return losses, accs


def load_history(path: str | Path, enc: EncodingConfig | None = None) -> HistoryStore:
    return HistoryStore(enc, path)


def write_history(records: Iterable[TrainingRecord], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


@dataclass
class CountingTrainer:
    """Wraps a trainer and counts epochs, for budget accounting and tests."""

    inner: Trainer
    epochs: int = 0
    inits: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def init(self, spec, dataset, seed, repeats=1):
        with self._lock:
            self.inits += 1
        return self.inner.init(spec, dataset, seed, repeats=repeats)

    def train_epoch(self, state):
        with self._lock:
            self.epochs += 1
        return self.inner.train_epoch(state)

    def close(self, state):
        _close(self.inner, state)
