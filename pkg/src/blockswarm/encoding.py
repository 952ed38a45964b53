"""Fixed-length particle vectors <-> variable-length dense block specs.

Each dimension of a position vector holds the growth rate of one layer.
Values that round down to the special value (``growth_lower - 1``) switch
the layer off, which is how a fixed-length vector describes blocks with a
varying number of layers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InvalidSpecError(ValueError):
    """A block spec does not fit the encoding configuration."""


@dataclass(frozen=True)
class EncodingConfig:
    max_layers: int = 16
    growth_lower: int = 12
    growth_upper: int = 32

    def __post_init__(self):
        if self.max_layers < 1:
            raise ValueError("max_layers must be >= 1")
        if not 0 < self.growth_lower < self.growth_upper:
            raise ValueError("need 0 < growth_lower < growth_upper")

    @property
    def special_value(self) -> int:
        return self.growth_lower - 1


@dataclass(frozen=True)
class BlockSpec:
    """Ordered per-layer growth rates of one dense block."""

    growth_rates: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "growth_rates", tuple(int(g) for g in self.growth_rates))

    def __len__(self) -> int:
        return len(self.growth_rates)

    def __iter__(self):
        return iter(self.growth_rates)

    @property
    def num_layers(self) -> int:
        return len(self.growth_rates)

    def validate(self, cfg: EncodingConfig) -> None:
        if not 1 <= len(self.growth_rates) <= cfg.max_layers:
            raise InvalidSpecError(
                f"block has {len(self.growth_rates)} layers, allowed 1..{cfg.max_layers}"
            )
        for g in self.growth_rates:
            if not cfg.growth_lower <= g <= cfg.growth_upper:
                raise InvalidSpecError(
                    f"growth rate {g} outside [{cfg.growth_lower}, {cfg.growth_upper}]"
                )

    def to_json(self) -> str:
        return json.dumps(list(self.growth_rates))

    @classmethod
    def from_json(cls, text: str) -> "BlockSpec":
        values = json.loads(text)
        if not isinstance(values, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in values
        ):
            raise InvalidSpecError("block must be a JSON array of integers")
        return cls(tuple(values))


def round_half_away(x: float) -> int:
    # Python's round() is banker's rounding; the encoding wants 11.5 -> 12.
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def decode(position: Sequence[float], cfg: EncodingConfig) -> BlockSpec:
    """Turn a raw particle position into a block spec.

    Components are clamped to ``[special_value, growth_upper]`` and rounded;
    anything landing on the special value disables that layer. A vector with
    every layer disabled is repaired by enabling its largest component at
    ``growth_lower``, so every position maps to an evaluable block.
    """
    values = np.asarray(position, dtype=float)
    if values.shape != (cfg.max_layers,):
        raise InvalidSpecError(
            f"position has shape {values.shape}, expected ({cfg.max_layers},)"
        )
    clamped = np.clip(values, cfg.special_value, cfg.growth_upper)
    rates = [round_half_away(x) for x in clamped]
    enabled = [g for g in rates if g > cfg.special_value]
    if not enabled:
        # only one layer survives the repair, so its slot does not affect the decoded block
        return BlockSpec((cfg.growth_lower,))
    return BlockSpec(tuple(enabled))


def encode(spec: BlockSpec, cfg: EncodingConfig) -> np.ndarray:
    """Place growth rates in the leading slots and pad with the special value."""
    spec.validate(cfg)
    out = np.full(cfg.max_layers, float(cfg.special_value))
    out[: len(spec)] = spec.growth_rates
    return out


def block_vector(spec: BlockSpec, cfg: EncodingConfig) -> list[int]:
    """Integer form of :func:`encode`, as stored in the training history."""
    return [int(v) for v in encode(spec, cfg)]
