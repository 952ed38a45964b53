"""Channel and parameter bookkeeping for dense blocks and stacked networks."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .encoding import BlockSpec

DEFAULT_STEM_CHANNELS = 24


@dataclass(frozen=True)
class ChannelTrace:
    input_channels: int
    per_layer_inputs: tuple[int, ...]
    block_output_channels: int


@dataclass(frozen=True)
class StackPlan:
    block: BlockSpec
    repeats: int = 1
    compression: float = 0.5
    stem_channels: int = DEFAULT_STEM_CHANNELS

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not 0.0 < self.compression < 1.0:
            raise ValueError("compression must lie in (0, 1)")
        if self.stem_channels < 1:
            raise ValueError("stem_channels must be >= 1")


def channel_trace(spec: BlockSpec, k0: int) -> ChannelTrace:
    """Input width of each layer: the block input plus every earlier layer's output."""
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    inputs = []
    n = k0
    for k in spec.growth_rates:
        inputs.append(n)
        n += k
    return ChannelTrace(k0, tuple(inputs), n)


def transition_channels(n_out: int, compression: float) -> int:
    return max(1, math.floor(compression * n_out))


def block_parameters(spec: BlockSpec, k0: int) -> int:
    # 3x3 conv without bias plus BN scale/shift on the layer input
    trace = channel_trace(spec, k0)
    return sum(9 * n * k + 2 * n for n, k in zip(trace.per_layer_inputs, spec.growth_rates))


def parameter_count(plan: StackPlan) -> int:
    """Weights of ``plan.repeats`` copies of the block joined by 1x1 transitions."""
    total = 0
    k0 = plan.stem_channels
    for i in range(plan.repeats):
        total += block_parameters(plan.block, k0)
        n_out = channel_trace(plan.block, k0).block_output_channels
        if i < plan.repeats - 1:
            k0 = transition_channels(n_out, plan.compression)
            total += n_out * k0 + 2 * n_out
    return total
