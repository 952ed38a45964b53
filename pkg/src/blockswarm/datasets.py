"""Dataset descriptors and the reduced-cost surrogate dataset.

No pixels live here. A descriptor carries the counts, resolution and split
seed that a trainer needs; shrinking it models sampling a subset and
downsampling the images.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

SURROGATE_SUFFIX = "-surrogate"


class ReductionTooAggressiveError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetDescriptor:
    dataset_id: str
    num_examples: int
    resolution: tuple[int, int] = (32, 32)
    difficulty: float = 0.5
    split_seed: int = 0
    split_fractions: tuple[float, float] = (0.8, 0.2)
    stratified: bool = False

    def __post_init__(self):
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        object.__setattr__(self, "split_fractions", tuple(float(f) for f in self.split_fractions))
        if self.num_examples < 1:
            raise ValueError("num_examples must be positive")
        if min(self.resolution) < 1:
            raise ValueError("resolution must be at least 1x1")
        if not 0.0 < self.difficulty <= 1.0:
            raise ValueError("difficulty must lie in (0, 1]")
        if abs(sum(self.split_fractions) - 1.0) > 1e-12:
            raise ValueError("split fractions must sum to 1")

    @property
    def train_size(self) -> int:
        return int(self.num_examples * self.split_fractions[0])

    @property
    def test_size(self) -> int:
        return self.num_examples - self.train_size

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["resolution"] = list(self.resolution)
        d["split_fractions"] = list(self.split_fractions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetDescriptor":
        d = dict(d)
        d["resolution"] = tuple(d.get("resolution", (32, 32)))
        d["split_fractions"] = tuple(d.get("split_fractions", (0.8, 0.2)))
        return cls(**d)


@dataclass(frozen=True)
class ReductionConfig:
    data_reduction_ratio: float = 10.0  # percent of examples kept
    downsampling_factor: int = 2

    def __post_init__(self):
        if not 0.0 < self.data_reduction_ratio <= 100.0:
            raise ValueError("data_reduction_ratio must lie in (0, 100]")
        if self.downsampling_factor < 1:
            raise ValueError("downsampling_factor must be >= 1")


def cost_factor(r: ReductionConfig) -> float:
    """Per-epoch training cost of the surrogate dataset relative to the original."""
    n = r.downsampling_factor
    return r.data_reduction_ratio / (100 * n * n)


def make_surrogate_dataset(
    d: DatasetDescriptor, r: ReductionConfig, seed: int | None = None
) -> DatasetDescriptor:
    """Descriptor for a uniform p% sample of ``d`` downsampled by ``n``."""
    n = r.downsampling_factor
    num = int(d.num_examples * r.data_reduction_ratio // 100)
    if num < 2:
        raise ReductionTooAggressiveError(
            f"{r.data_reduction_ratio}% of {d.num_examples} examples leaves {num}"
        )
    w, h = d.resolution
    if w // n < 1 or h // n < 1:
        raise ReductionTooAggressiveError(f"downsampling {w}x{h} by {n} leaves no pixels")
    if r.data_reduction_ratio == 100 and n == 1:
        return d
    return dataclasses.replace(
        d,
        dataset_id=d.dataset_id + SURROGATE_SUFFIX,
        num_examples=num,
        resolution=(w // n, h // n),
        split_seed=d.split_seed if seed is None else seed,
    )
