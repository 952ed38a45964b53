import dataclasses
import itertools
import math

import numpy as np
import pytest

from blockswarm.datasets import DatasetDescriptor, ReductionConfig, make_surrogate_dataset
from blockswarm.encoding import BlockSpec, EncodingConfig, decode
from blockswarm.evaluator import HistoryStore, evaluate_fitness
from blockswarm.oracle import (
    OracleConfig,
    SyntheticTrainer,
    epoch_curve,
    fidelity_multipliers,
    hash_noise,
    layer_score,
    preferred_growth,
    time_constant,
    true_quality,
)

FULL = DatasetDescriptor("cifar10", 50_000, (32, 32), difficulty=0.3)
SURR = make_surrogate_dataset(FULL, ReductionConfig(10, 2), seed=0)
CFG = OracleConfig()


def test_quality_in_unit_interval():
    rng = np.random.default_rng(0)
    enc = EncodingConfig()
    for _ in range(500):
        q = true_quality(decode(rng.uniform(-20, 60, 16), enc), SURR, CFG)
        assert 0 < q < 1


def test_middle_layers_prefer_larger_growth():
    mus = [preferred_growth(l, 12, CFG) for l in range(1, 13)]
    assert max(mus) == max(mus[4:8])
    assert mus[0] < mus[5] and mus[-1] < mus[6]


def test_matching_the_profile_maximizes_the_layer_term():
    cfg = dataclasses.replace(CFG, mu_low=20.0, mu_high=20.0)
    peak = layer_score(BlockSpec((20, 20, 20)), cfg)
    for rates in itertools.product(range(12, 33), repeat=3):
        assert layer_score(BlockSpec(rates), cfg) <= peak


def test_reduced_dataset_has_lower_quality():
    spec = BlockSpec((16, 20, 26, 28, 22, 17))
    assert true_quality(spec, SURR, CFG) < true_quality(spec, FULL, CFG)
    assert fidelity_multipliers(SURR, CFG)[0] < 1


def test_two_layer_argmax_by_enumeration():
    cfg = dataclasses.replace(CFG, complexity_penalty=0.0)
    best = max(
        itertools.product(range(12, 33), repeat=2),
        key=lambda r: true_quality(BlockSpec(r), SURR, cfg),
    )
    analytic = tuple(round(preferred_growth(l, 2, cfg)) for l in (1, 2))
    assert best == analytic


def test_noise_free_curves_are_monotone():
    cfg = dataclasses.replace(CFG, noise_amplitude=0.0, loss_noise_amplitude=0.0)
    spec = BlockSpec((14, 24, 30, 18))
    pts = [epoch_curve(spec, SURR, 3, cfg, e) for e in range(1, 61)]
    losses, accs = zip(*pts)
    assert all(a < b for a, b in zip(accs, accs[1:]))
    assert all(a > b for a, b in zip(losses, losses[1:]))


def test_noise_free_limit():
    cfg = dataclasses.replace(CFG, noise_amplitude=0.0, loss_noise_amplitude=0.0)
    spec = BlockSpec((14, 24, 30, 18))
    tau = time_constant(spec, cfg)
    _, acc = epoch_curve(spec, SURR, 0, cfg, math.ceil(20 * tau))
    assert acc == pytest.approx(true_quality(spec, SURR, cfg), abs=1e-6)


def test_curves_are_deterministic_and_resumable():
    spec = BlockSpec((12, 31, 20))
    t = SyntheticTrainer(CFG)
    s = t.init(spec, SURR, 9)
    streamed = [t.train_epoch(s) for _ in range(15)]
    direct = [epoch_curve(spec, SURR, 9, CFG, e) for e in range(1, 16)]
    assert streamed == direct
    s2 = t.init(spec, SURR, 9)
    assert [t.train_epoch(s2) for _ in range(15)] == streamed


def test_hash_noise_range_and_spread():
    vals = np.array([hash_noise(12345, 0, e, 0) for e in range(20_000)])
    assert vals.min() >= -1 and vals.max() < 1
    assert abs(vals.mean()) < 0.02
    assert vals.std() == pytest.approx(1 / math.sqrt(3), abs=0.01)


def test_dataset_enters_only_through_fidelity():
    # a larger-than-reference dataset saturates both multipliers at the same values
    a = DatasetDescriptor("a", 60_000, (64, 64), difficulty=0.3, split_seed=1)
    b = DatasetDescriptor("b", 90_000, (40, 48), difficulty=0.3, split_seed=7)
    assert fidelity_multipliers(a, CFG) == fidelity_multipliers(b, CFG)
    spec = BlockSpec((20, 26, 17))
    assert true_quality(spec, a, CFG) == true_quality(spec, b, CFG)


def test_stack_response_peaks_at_three():
    spec = BlockSpec((17, 22, 27, 22, 17))
    qs = [true_quality(spec, FULL, CFG, repeats=t) for t in range(1, 6)]
    assert int(np.argmax(qs)) + 1 == 3


def test_ranking_fidelity():
    """Full early-stopped evaluation orders clearly different blocks like the truth."""
    enc = EncodingConfig()
    rng = np.random.default_rng(42)
    trainer = SyntheticTrainer(CFG)
    store = HistoryStore(enc)
    cache = {}

    def fitness(spec):
        if spec not in cache:
            cache[spec] = evaluate_fitness(spec, SURR, trainer, store, 60, seed=0)
        return cache[spec]

    pool = []
    for _ in range(300):
        # mix full-length random blocks with shorter ones for a wide quality range
        pos = rng.uniform(11, 32, 16)
        pos[rng.random(16) < rng.random()] = 11.0
        spec = decode(pos, enc)
        pool.append((spec, true_quality(spec, SURR, CFG)))
    agree = total = 0
    while total < 1000:
        (s1, q1), (s2, q2) = (pool[k] for k in rng.choice(len(pool), 2, replace=False))
        if abs(q1 - q2) < 0.05:
            continue
        total += 1
        agree += (fitness(s1) > fitness(s2)) == (q1 > q2)
    assert agree / total >= 0.95
