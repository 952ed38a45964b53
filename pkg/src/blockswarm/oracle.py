"""Deterministic synthetic trainer with a known ground-truth quality.

The oracle stands in for CNN training so the whole search can run on a
laptop and be checked against the truth. Quality is a closed-form function
of the block: each layer earns a bell-shaped bonus around a preferred growth
rate (middle layers prefer wider layers), enabled layers earn a small depth
reward, and parameters cost a penalty. Learning curves approach that quality
exponentially, with a time constant that grows with model size, and carry
hash-derived noise so partial and full training always agree.
"""
from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

from .blockmodel import StackPlan, parameter_count
from .datasets import DatasetDescriptor
from .encoding import BlockSpec

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class OracleConfig:
    # preferred growth rate per layer: low at both ends, high in the middle
    mu_low: float = 16.0
    mu_high: float = 28.0
    mu_center: float = 0.5  # relative position within the block
    mu_spread: float = 0.22
    sigma: float = 3.0
    layer_weight: float = 0.3
    depth_reward: float = 0.05
    complexity_penalty: float = 0.45  # logit units per 1e5 parameters
    base_logit: float = -1.0
    stem_channels: int = 24
    # learning curves
    curve_time_constant: float = 2.5
    time_constant_growth: float = 0.5  # relative slowdown per 1e5 parameters
    time_constant_jitter: float = 0.5  # log-scale spread of per-block learning speed
    loss_time_constant: float = 4.0
    loss_offset: float = 0.4
    loss_scale: float = 2.0
    noise_amplitude: float = 0.003
    loss_noise_amplitude: float = 0.01
    # dataset fidelity
    reference_examples: int = 50_000
    reference_resolution: int = 32
    examples_exponent: float = 0.02
    resolution_exponent: float = 0.04
    difficulty_weight: float = 0.2
    noise_examples_exponent: float = 0.5
    # response of a stacked network to the number of repeats
    stack_peak: float = 3.0
    stack_gain: float = 0.8
    stack_curvature: float = 0.25


def preferred_growth(layer: int, num_layers: int, cfg: OracleConfig) -> float:
    """Preferred growth rate of 1-based ``layer`` in a block of ``num_layers``."""
    u = (layer - 0.5) / num_layers
    bump = math.exp(-0.5 * ((u - cfg.mu_center) / cfg.mu_spread) ** 2)
    return cfg.mu_low + (cfg.mu_high - cfg.mu_low) * bump


def _plan(spec: BlockSpec, repeats: int, cfg: OracleConfig) -> StackPlan:
    return StackPlan(spec, repeats=repeats, stem_channels=cfg.stem_channels)


def layer_score(spec: BlockSpec, cfg: OracleConfig) -> float:
    L = len(spec)
    return sum(
        cfg.layer_weight
        * math.exp(-0.5 * ((g - preferred_growth(l, L, cfg)) / cfg.sigma) ** 2)
        for l, g in enumerate(spec.growth_rates, start=1)
    )


def quality_logit(spec: BlockSpec, cfg: OracleConfig, repeats: int = 1) -> float:
    L = len(spec)
    layer_term = layer_score(spec, cfg)
    penalty = cfg.complexity_penalty * parameter_count(_plan(spec, 1, cfg)) / 1e5
    stack = cfg.stack_gain - cfg.stack_curvature * (repeats - cfg.stack_peak) ** 2
    return cfg.base_logit + layer_term + cfg.depth_reward * L - penalty + stack


def fidelity_multipliers(d: DatasetDescriptor, cfg: OracleConfig) -> tuple[float, float]:
    """(quality multiplier, noise multiplier) implied by a dataset descriptor."""
    frac_n = min(1.0, d.num_examples / cfg.reference_examples)
    frac_r = min(1.0, min(d.resolution) / cfg.reference_resolution)
    quality = (
        frac_n ** cfg.examples_exponent
        * frac_r ** cfg.resolution_exponent
        * (1.0 - cfg.difficulty_weight * d.difficulty)
    )
    noise = frac_n ** -cfg.noise_examples_exponent
    return quality, noise


def true_quality(
    spec: BlockSpec, d: DatasetDescriptor, cfg: OracleConfig | None = None, repeats: int = 1
) -> float:
    cfg = cfg or OracleConfig()
    z = quality_logit(spec, cfg, repeats)
    return fidelity_multipliers(d, cfg)[0] / (1.0 + math.exp(-z))


def time_constant(spec: BlockSpec, cfg: OracleConfig) -> float:
    # a property of the block alone, so stacking changes only the asymptote
    params = parameter_count(_plan(spec, 1, cfg))
    speed = hash_noise(_digest(spec.growth_rates, 1), 0, 0, 2)
    return (
        cfg.curve_time_constant
        * (1.0 + cfg.time_constant_growth * params / 1e5)
        * math.exp(cfg.time_constant_jitter * speed)
    )


def _digest(*parts: object) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return struct.unpack("<Q", h.digest())[0]


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def hash_noise(key: int, seed: int, epoch: int, channel: int) -> float:
    """Uniform value in [-1, 1) from splitmix64 over the mixed inputs."""
    x = key
    for v in (seed, epoch, channel):
        x = splitmix64(x ^ (v & MASK64))
    return 2.0 * ((x >> 11) / float(1 << 53)) - 1.0


@dataclass(frozen=True)
class CurveModel:
    """Precomputed per-(spec, dataset, seed) constants of the learning curve."""

    quality: float
    tau: float
    loss0: float
    acc_noise: float
    loss_noise: float
    key: int
    seed: int


def curve_model(
    spec: BlockSpec, d: DatasetDescriptor, seed: int, cfg: OracleConfig, repeats: int = 1
) -> CurveModel:
    q = true_quality(spec, d, cfg, repeats)
    noise_mult = fidelity_multipliers(d, cfg)[1]
    return CurveModel(
        quality=q,
        tau=time_constant(spec, cfg),
        loss0=cfg.loss_offset + cfg.loss_scale * (1.0 - q),
        acc_noise=cfg.noise_amplitude * noise_mult,
        loss_noise=cfg.loss_noise_amplitude * noise_mult,
        key=_digest(spec.growth_rates, repeats, d.dataset_id),
        seed=seed,
    )


def curve_point(m: CurveModel, e: int, cfg: OracleConfig) -> tuple[float, float]:
    if e < 1:
        raise ValueError("epochs are numbered from 1")
    acc = m.quality * (1.0 - math.exp(-e / m.tau)) + m.acc_noise * hash_noise(m.key, m.seed, e, 0)
    loss = m.loss0 * math.exp(-e / cfg.loss_time_constant) + m.loss_noise * hash_noise(
        m.key, m.seed, e, 1
    )
    return max(0.0, loss), min(1.0, max(0.0, acc))


def epoch_curve(
    spec: BlockSpec,
    d: DatasetDescriptor,
    seed: int,
    cfg: OracleConfig,
    e: int,
    repeats: int = 1,
) -> tuple[float, float]:
    """(training loss, test accuracy) after epoch ``e``; pure in all arguments."""
    return curve_point(curve_model(spec, d, seed, cfg, repeats), e, cfg)


@dataclass
class OracleState:
    model: CurveModel
    epoch: int = 0


class SyntheticTrainer:
    """Trainer backed by the closed-form oracle."""

    def __init__(self, cfg: OracleConfig | None = None):
        self.cfg = cfg or OracleConfig()

    def init(self, spec: BlockSpec, dataset: DatasetDescriptor, seed: int, repeats: int = 1):
        return OracleState(curve_model(spec, dataset, seed, self.cfg, repeats))

    def train_epoch(self, state: OracleState) -> tuple[float, float]:
        state.epoch += 1
        return curve_point(state.model, state.epoch, self.cfg)

    def close(self, state) -> None:
        pass
