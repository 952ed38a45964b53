import dataclasses
import json

import numpy as np
import pytest

from blockswarm.datasets import make_surrogate_dataset
from blockswarm.encoding import BlockSpec, decode
from blockswarm.evaluator import HistoryStore, evaluate_fitness
from blockswarm.oracle import SyntheticTrainer
from blockswarm.pso import PsoConfig, initialize_swarm, maybe_update_bests, update_particle
from blockswarm.search import RunLog, SearchConfig, run_search, stack_and_select


def small(seed=0, pop=8, gens=6, **kw):
    kw.setdefault("cv_folds", 5)
    kw.setdefault("max_pairs", 300)
    return SearchConfig(pso=PsoConfig(population_size=pop, generations=gens, rng_seed=seed), **kw)


def plain_pso(cfg, trainer):
    """Full-evaluation PSO with the same synchronous update order."""
    swarm = initialize_swarm(cfg.pso, cfg.encoding)
    store = HistoryStore(cfg.encoding)
    data = make_surrogate_dataset(cfg.dataset, cfg.reduction, seed=cfg.seed)

    def fit(p):
        return evaluate_fitness(decode(p.position, cfg.encoding), data, trainer, store,
                                cfg.max_epochs, seed=cfg.seed)

    for p in swarm.particles:
        maybe_update_bests(p, fit(p), swarm)
    trace = [swarm.gbest_fitness]
    for _ in range(cfg.pso.generations - 1):
        moved = [update_particle(p, swarm.gbest_position, cfg.pso, swarm.rng) for p in swarm.particles]
        for p in moved:
            maybe_update_bests(p, fit(p), swarm)
        swarm.particles = moved
        trace.append(swarm.gbest_fitness)
    return trace


def test_unreachable_threshold_is_plain_pso():
    cfg = small(seed=3, surrogate_threshold=1.01)
    trainer = SyntheticTrainer(cfg.oracle)
    _, log = run_search(cfg, trainer, HistoryStore(cfg.encoding))
    assert [g.gbest_fitness for g in log.generations] == plain_pso(cfg, trainer)
    assert all(g.filtered == 0 for g in log.generations)
    assert log.full_evaluations == 8 * 6


@pytest.fixture(scope="module")
def active_run():
    cfg = small(seed=1, pop=10, gens=8, surrogate_threshold=0.6)
    store = HistoryStore(cfg.encoding)
    best, log = run_search(cfg, SyntheticTrainer(cfg.oracle), store)
    return cfg, best, log, store


def test_gbest_is_monotone(active_run):
    _, _, log, _ = active_run
    trace = [g.gbest_fitness for g in log.generations]
    assert all(a <= b for a, b in zip(trace, trace[1:]))


def test_generation_accounting(active_run):
    cfg, best, log, store = active_run
    assert len(log.generations) == cfg.pso.generations
    assert log.generations[0].filtered == 0
    for g in log.generations:
        assert g.filtered + g.trained == cfg.pso.population_size
        for p in g.particles:
            if p.filtered:
                assert p.fitness == 0.0 and p.epochs <= cfg.feature_spec.cutting_epoch
    assert any(g.filtered for g in log.generations)
    assert log.full_evaluations == len(store.full_records())
    assert log.full_evaluations < cfg.pso.population_size * cfg.pso.generations
    assert list(best.growth_rates) == log.final_block


def test_runlog_round_trip(active_run):
    _, _, log, _ = active_run
    assert RunLog.from_dict(json.loads(log.to_json())).to_json() == log.to_json()


def test_resume_is_bit_identical(tmp_path):
    cfg = small(seed=2, surrogate_threshold=0.6)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    a_dir.mkdir()
    b_dir.mkdir()
    trainer = SyntheticTrainer(cfg.oracle)
    _, ref = run_search(cfg, trainer, HistoryStore(cfg.encoding, a_dir / "h.jsonl"), a_dir / "ck")

    run_search(cfg, trainer, HistoryStore(cfg.encoding, b_dir / "h.jsonl"), b_dir / "ck", stop_after=3)
    # simulate a crash that left extra history behind
    store = HistoryStore(cfg.encoding, b_dir / "h.jsonl")
    store.append(store.make_record(BlockSpec((12,)), "junk", [1.0], [0.1], False))
    store = HistoryStore(cfg.encoding, b_dir / "h.jsonl")
    _, resumed = run_search(cfg, trainer, store, b_dir / "ck", resume=True)
    assert resumed.to_json() == ref.to_json()
    assert (a_dir / "h.jsonl").read_bytes() == (b_dir / "h.jsonl").read_bytes()


def test_parallel_matches_serial():
    cfg = small(seed=4, surrogate_threshold=0.6)
    logs, stores = [], []
    for par in (1, 4):
        store = HistoryStore(cfg.encoding)
        _, log = run_search(dataclasses.replace(cfg, parallel_evaluations=par), SyntheticTrainer(), store)
        logs.append(log.to_json())
        stores.append([r.to_json() for r in store.records])
    assert logs[0] == logs[1] and stores[0] == stores[1]


def test_stacking_prefers_three():
    cfg = SearchConfig()
    block = BlockSpec((17, 22, 27, 22, 17))
    t, accs = stack_and_select(block, cfg.dataset, SyntheticTrainer(), 5)
    assert t == 3 and len(accs) == 5


def test_single_stack():
    t, accs = stack_and_select(BlockSpec((20,)), SearchConfig().dataset, SyntheticTrainer(), 1)
    assert t == 1 and len(accs) == 1


def test_stacking_ties_go_to_smaller():
    class Flat:
        def init(self, spec, dataset, seed, repeats=1):
            return None

        def train_epoch(self, state):
            return 0.5, 0.5

        def close(self, state):
            pass

    assert stack_and_select(BlockSpec((20,)), SearchConfig().dataset, Flat(), 4)[0] == 1


def test_config_round_trip_and_unknown_keys():
    cfg = small(seed=9)
    assert SearchConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        SearchConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        SearchConfig(max_stack=0)


def test_filtered_particle_keeps_positive_pbest(active_run):
    _, _, log, _ = active_run
    best = {}
    for g in log.generations:
        for p in g.particles:
            prev = best.get(p.id, -1.0)
            best[p.id] = max(prev, p.fitness)
            if p.filtered:
                assert best[p.id] == prev or prev < 0
    assert np.all(np.array(list(best.values())) > 0)
