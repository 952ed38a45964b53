"""Surrogate-assisted PSO over dense blocks, plus stacking of the winner."""
from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import surrogate as sg
from .datasets import DatasetDescriptor, ReductionConfig, make_surrogate_dataset
from .encoding import BlockSpec, EncodingConfig, decode
from .evaluator import (
    DEFAULT_MAX_EPOCHS,
    CountingTrainer,
    HistoryStore,
    Trainer,
    evaluate_fitness,
    run_training,
)
from .oracle import OracleConfig
from .pso import PsoConfig, Swarm, initialize_swarm, maybe_update_bests, update_particle
from .svm import SvmConfig

log = logging.getLogger(__name__)

DEFAULT_DATASET = DatasetDescriptor("cifar10", 50_000, (32, 32), difficulty=0.3)


@dataclass(frozen=True)
class SearchConfig:
    pso: PsoConfig = field(default_factory=PsoConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    feature_spec: sg.FeatureSpec = field(default_factory=sg.FeatureSpec)
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    dataset: DatasetDescriptor = DEFAULT_DATASET
    surrogate_threshold: float = sg.DEFAULT_THRESHOLD
    max_epochs: int = DEFAULT_MAX_EPOCHS
    max_stack: int = 5
    parallel_evaluations: int = 1
    max_pairs: int = sg.DEFAULT_MAX_PAIRS
    cv_folds: int = 10

    def __post_init__(self):
        if self.max_epochs < 1 or self.max_stack < 1 or self.parallel_evaluations < 1:
            raise ValueError("max_epochs, max_stack and parallel_evaluations must be >= 1")

    @property
    def seed(self) -> int:
        return self.pso.rng_seed

    def with_seed(self, seed: int) -> "SearchConfig":
        return dataclasses.replace(self, pso=dataclasses.replace(self.pso, rng_seed=seed))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["dataset"] = self.dataset.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        """Build from a (possibly partial) JSON document; unknown keys are errors."""
        sub = {
            "pso": PsoConfig,
            "encoding": EncodingConfig,
            "feature_spec": sg.FeatureSpec,
            "reduction": ReductionConfig,
            "svm": SvmConfig,
            "oracle": OracleConfig,
        }
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            if key in sub:
                if not isinstance(value, dict):
                    raise ValueError(f"{key} must be an object")
                kwargs[key] = sub[key](**value)
            elif key == "dataset":
                kwargs[key] = DatasetDescriptor.from_dict(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass
class ParticleLog:
    id: int
    block: list[int]
    filtered: bool
    fitness: float
    epochs: int


@dataclass
class GenerationLog:
    generation: int
    gbest_fitness: float
    surrogate_active: bool
    surrogate_cv_mean: float
    surrogate_pairs: int
    filtered: int
    trained: int
    full_evaluations: int
    trainer_epochs: int
    particles: list[ParticleLog]


@dataclass
class RunLog:
    generations: list[GenerationLog] = field(default_factory=list)
    final_block: list[int] | None = None
    gbest_fitness: float | None = None
    stacking_accuracies: list[float] | None = None
    stacking_parameters: list[int] | None = None
    chosen_repeats: int | None = None

    @property
    def full_evaluations(self) -> int:
        return sum(g.full_evaluations for g in self.generations)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunLog":
        gens = [
            GenerationLog(**{**g, "particles": [ParticleLog(**p) for p in g["particles"]]})
            for g in d.get("generations", [])
        ]
        return cls(**{**d, "generations": gens})


@dataclass
class _Outcome:
    fitness: float
    filtered: bool
    epochs: int
    stage: object


def _evaluate_candidate(
    new_block: BlockSpec,
    pbest_block: BlockSpec | None,
    state: sg.SurrogateState,
    cfg: SearchConfig,
    trainer: Trainer,
    store: HistoryStore,
    dataset: DatasetDescriptor,
) -> _Outcome:
    stage = store.stage()
    counted = CountingTrainer(trainer)
    filtered = False
    if state.active and pbest_block is not None:
        flag = sg.predict_better(
            state, new_block, pbest_block, counted, stage, dataset, cfg.feature_spec, cfg.seed
        )
        filtered = flag == 0
    if filtered:
        fitness = 0.0
    else:
        fitness = evaluate_fitness(new_block, dataset, counted, stage, cfg.max_epochs, cfg.seed)
    return _Outcome(fitness, filtered, counted.epochs, stage)


class _Checkpoints:
    def __init__(self, directory: Path | None):
        self.dir = directory
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def path(self, generation: int) -> Path:
        return self.dir / f"gen_{generation:03d}.json"

    def save(self, swarm: Swarm, runlog: RunLog, store: HistoryStore) -> None:
        if self.dir is None:
            return
        doc = {"swarm": swarm.to_dict(), "runlog": runlog.to_dict(), "history_length": len(store)}
        self.path(swarm.generation).write_text(json.dumps(doc, sort_keys=True))

    def latest(self) -> dict | None:
        if self.dir is None:
            return None
        files = sorted(self.dir.glob("gen_*.json"))
        return json.loads(files[-1].read_text()) if files else None


def run_search(
    cfg: SearchConfig,
    trainer: Trainer,
    store: HistoryStore,
    checkpoint_dir: str | Path | None = None,
    resume: bool = False,
    stop_after: int | None = None,
) -> tuple[BlockSpec, RunLog]:
    """Evolve a dense block; returns the decoded global best and the run log.

    Generation 1 trains every initial particle. Each later generation
    retrains the surrogate, moves every particle, and fully trains a moved
    particle only when the surrogate is inactive or predicts it beats the
    particle's best; otherwise its fitness is 0. ``stop_after`` ends the run
    early (after that generation) and is meant for checkpoint tests.
    """
    enc = cfg.encoding
    dataset = make_surrogate_dataset(cfg.dataset, cfg.reduction, seed=cfg.seed)
    ckpt = _Checkpoints(Path(checkpoint_dir) if checkpoint_dir is not None else None)
    snapshot = ckpt.latest() if resume else None
    if snapshot is not None:
        swarm = Swarm.from_dict(snapshot["swarm"])
        runlog = RunLog.from_dict(snapshot["runlog"])
        store.truncate(snapshot["history_length"])
    else:
        swarm = initialize_swarm(cfg.pso, enc)
        runlog = RunLog()

    pool = ThreadPoolExecutor(max_workers=cfg.parallel_evaluations)
    inactive = sg.SurrogateState(threshold=cfg.surrogate_threshold)
    try:
        while swarm.generation < cfg.pso.generations:
            gen = swarm.generation + 1
            if gen == 1:
                state = inactive
                candidates = swarm.particles
                pbest_blocks = [None] * len(candidates)
            else:
                state = sg.refresh(
                    inactive,
                    store,
                    cfg.feature_spec,
                    cfg.svm,
                    dataset_id=dataset.dataset_id,
                    max_pairs=cfg.max_pairs,
                    folds=cfg.cv_folds,
                    seed=cfg.seed * 1000 + gen,
                )
                candidates = [
                    update_particle(p, swarm.gbest_position, cfg.pso, swarm.rng)
                    for p in swarm.particles
                ]
                pbest_blocks = [decode(p.pbest_position, enc) for p in candidates]
            blocks = [decode(p.position, enc) for p in candidates]
            outcomes = list(
                pool.map(
                    lambda k: _evaluate_candidate(
                        blocks[k], pbest_blocks[k], state, cfg, trainer, store, dataset
                    ),
                    range(len(candidates)),
                )
            )
            for out in outcomes:
                out.stage.commit()
            particle_logs = []
            for p, block, out in zip(candidates, blocks, outcomes):
                maybe_update_bests(p, out.fitness, swarm)
                particle_logs.append(
                    ParticleLog(p.id, list(block.growth_rates), out.filtered, out.fitness, out.epochs)
                )
            swarm.particles = candidates
            swarm.generation = gen
            n_filtered = sum(o.filtered for o in outcomes)
            runlog.generations.append(
                GenerationLog(
                    generation=gen,
                    gbest_fitness=swarm.gbest_fitness,
                    surrogate_active=state.active,
                    surrogate_cv_mean=state.cv_mean,
                    surrogate_pairs=state.n_pairs,
                    filtered=n_filtered,
                    trained=len(outcomes) - n_filtered,
                    full_evaluations=len(outcomes) - n_filtered,
                    trainer_epochs=sum(o.epochs for o in outcomes),
                    particles=particle_logs,
                )
            )
            log.info(
                "gen %d gbest %.4f cv %.3f active %s filtered %d",
                gen, swarm.gbest_fitness, state.cv_mean, state.active, n_filtered,
            )
            ckpt.save(swarm, runlog, store)
            if stop_after is not None and gen >= stop_after:
                break
    finally:
        pool.shutdown()

    best = decode(swarm.gbest_position, enc)
    runlog.final_block = list(best.growth_rates)
    runlog.gbest_fitness = swarm.gbest_fitness
    return best, runlog


def stack_and_select(
    block: BlockSpec,
    dataset: DatasetDescriptor,
    trainer: Trainer,
    s_max: int,
    *,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    seed: int = 0,
    parallel: int = 1,
) -> tuple[int, list[float]]:
    """Train the block stacked 1..s_max times; return the best repeat count and all accuracies.

    Ties go to the smaller stack.
    """
    if s_max < 1:
        raise ValueError("s_max must be >= 1")

    def score(t: int) -> float:
        _, accs = run_training(block, dataset, trainer, seed, max_epochs, repeats=t)
        return max(accs)

    with ThreadPoolExecutor(max_workers=parallel) as pool:
        accs = list(pool.map(score, range(1, s_max + 1)))
    best_t = int(np.argmax(accs)) + 1  # argmax keeps the first maximum
    return best_t, accs
