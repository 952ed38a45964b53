"""Global-best particle swarm state and update rules."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoding import EncodingConfig

UNEVALUATED = -1.0


@dataclass(frozen=True)
class PsoConfig:
    inertia_weight: float = 0.7298
    c1: float = 1.49618
    c2: float = 1.49618
    velocity_min: float = -10.5
    velocity_max: float = 10.5
    population_size: int = 30
    generations: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.inertia_weight <= 1.0:
            raise ValueError("inertia_weight must lie in [0, 1]")
        if not self.velocity_min < self.velocity_max:
            raise ValueError("velocity_min must be below velocity_max")
        if self.population_size < 1 or self.generations < 1:
            raise ValueError("population_size and generations must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")


@dataclass
class Particle:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float = UNEVALUATED
    fitness: float = UNEVALUATED

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "position": self.position.tolist(),
            "velocity": self.velocity.tolist(),
            "pbest_position": self.pbest_position.tolist(),
            "pbest_fitness": self.pbest_fitness,
            "fitness": self.fitness,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Particle":
        return cls(
            id=d["id"],
            position=np.asarray(d["position"], dtype=float),
            velocity=np.asarray(d["velocity"], dtype=float),
            pbest_position=np.asarray(d["pbest_position"], dtype=float),
            pbest_fitness=d["pbest_fitness"],
            fitness=d.get("fitness", UNEVALUATED),
        )


@dataclass
class Swarm:
    particles: list[Particle]
    gbest_position: np.ndarray | None = None
    gbest_fitness: float = UNEVALUATED
    generation: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)

    def to_dict(self) -> dict:
        return {
            "generation": self.generation,
            "gbest_position": None if self.gbest_position is None else self.gbest_position.tolist(),
            "gbest_fitness": self.gbest_fitness,
            "particles": [p.to_dict() for p in self.particles],
            "rng_state": self.rng.bit_generator.state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Swarm":
        rng = np.random.default_rng()
        rng.bit_generator.state = d["rng_state"]
        gbest = d["gbest_position"]
        return cls(
            particles=[Particle.from_dict(p) for p in d["particles"]],
            gbest_position=None if gbest is None else np.asarray(gbest, dtype=float),
            gbest_fitness=d["gbest_fitness"],
            generation=d["generation"],
            rng=rng,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "Swarm":
        return cls.from_dict(json.loads(Path(path).read_text()))


def initialize_swarm(cfg: PsoConfig, enc: EncodingConfig) -> Swarm:
    """Uniform random positions in [sv, g_u] and velocities in the velocity range."""
    rng = np.random.default_rng(cfg.rng_seed)
    particles = []
    for i in range(cfg.population_size):
        pos = rng.uniform(enc.special_value, enc.growth_upper, size=enc.max_layers)
        vel = rng.uniform(cfg.velocity_min, cfg.velocity_max, size=enc.max_layers)
        particles.append(Particle(id=i, position=pos, velocity=vel, pbest_position=pos.copy()))
    return Swarm(particles=particles, rng=rng)


def velocity_step(x, v, pbest, gbest, eps1, eps2, cfg: PsoConfig) -> np.ndarray:
    v_new = (
        cfg.inertia_weight * v
        + cfg.c1 * eps1 * (pbest - x)
        + cfg.c2 * eps2 * (gbest - x)
    )
    return np.clip(v_new, cfg.velocity_min, cfg.velocity_max)


def update_particle(
    p: Particle, gbest: np.ndarray, cfg: PsoConfig, rng: np.random.Generator
) -> Particle:
    """Apply one velocity/position update with per-dimension random factors.

    Positions are deliberately left unclamped; decoding handles the range.
    """
    x = np.asarray(p.position, dtype=float)
    gbest = np.asarray(gbest, dtype=float)
    if x.shape != gbest.shape or x.shape != p.velocity.shape:
        raise ValueError("position, velocity and gbest dimensions differ")
    eps1 = rng.random(x.shape)
    eps2 = rng.random(x.shape)
    v_new = velocity_step(x, p.velocity, p.pbest_position, gbest, eps1, eps2, cfg)
    return Particle(
        id=p.id,
        position=x + v_new,
        velocity=v_new,
        pbest_position=p.pbest_position.copy(),
        pbest_fitness=p.pbest_fitness,
        fitness=UNEVALUATED,
    )


def maybe_update_bests(p: Particle, fitness: float, swarm: Swarm) -> tuple[Particle, Swarm]:
    """Record ``fitness`` for ``p``; replace pbest/gbest only on strict improvement."""
    if not 0.0 <= fitness <= 1.0:
        raise ValueError(f"fitness {fitness} outside [0, 1]")
    p.fitness = fitness
    if fitness > p.pbest_fitness:
        p.pbest_fitness = fitness
        p.pbest_position = p.position.copy()
        if fitness > swarm.gbest_fitness:
            swarm.gbest_fitness = fitness
            swarm.gbest_position = p.position.copy()
    return p, swarm
