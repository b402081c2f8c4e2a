"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured value next to its threshold."""

import itertools
import math
import statistics
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare

from wcfuzz.engine import EngineConfig, run
from wcfuzz.experiments import (
    RunSpec,
    _epoch_block_size,
    run_experiment,
    run_local_opt,
    run_random_baseline,
)
from wcfuzz.kernels import KernelParams, mh_crossover, mh_mutate
from wcfuzz.population import (
    Group,
    Particle,
    Population,
    ess,
    ess_of_log_weights,
    resample,
)
from wcfuzz.semantics import score_of_tick
from wcfuzz.targets import (
    hash_table_target,
    insertion_sort_target,
    ordered_pairs_target,
    popcount_target,
)


def report(num, desc, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\n[acceptance] criterion {num:02d} {status}: {desc} ({detail})")
    assert ok, f"criterion {num:02d} failed: {desc} ({detail})"


def insertion_ticks_oracle(values):
    """Independent tick count: outer iterations plus inversions."""
    n = len(values)
    return max(0, n - 1) + sum(
        1 for i in range(n) for j in range(i) if values[j] > values[i]
    )


def popcount_law(tilt=1.0):
    ks = np.arange(9)
    w = np.array([math.comb(8, k) for k in ks]) * np.exp(tilt * ks)
    return w / w.sum()


def test_criterion_01_isomorphism_oracle_equivalence():
    t0 = time.monotonic()
    target = insertion_sort_target(4, 0, 3)
    genomes = [bytes(v) for v in itertools.product(range(4), repeat=4)]
    ticks = {g: target.evaluate(g) for g in genomes}
    scores = {g: score_of_tick(t) for g, t in ticks.items()}
    argmax_tick = {g for g, t in ticks.items() if t == max(ticks.values())}
    argmax_score = {g for g, s in scores.items() if s == max(scores.values())}
    oracle_max = max(insertion_ticks_oracle(list(g)) for g in genomes)
    ok = argmax_tick == argmax_score and max(ticks.values()) == oracle_max
    elapsed = time.monotonic() - t0
    report(
        1,
        "tick and log-score argmax sets coincide; max matches brute force",
        ok and elapsed < 1.0,
        f"max={max(ticks.values())}, oracle={oracle_max}, "
        f"|argmax|={len(argmax_tick)}, {elapsed:.2f}s",
    )


def test_criterion_02_paper_anchored_point_value():
    target = insertion_sort_target(5, 1, 5)
    tick = target.evaluate(bytes([4, 3, 2, 1, 0]))  # decodes to [5,4,3,2,1]
    report(2, "insertion sort of [5,4,3,2,1] costs exactly 14", tick == 14.0, f"tick={tick}")


def test_criterion_03_ess_correctness():
    from scipy.special import logsumexp

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        lw = rng.uniform(-200, 200, size=n)
        p = np.exp(lw - logsumexp(lw))
        oracle = 1.0 / float(np.sum(p * p))
        got = ess_of_log_weights(lw)
        worst = max(worst, abs(got - oracle) / oracle)
    uniform_exact = ess_of_log_weights(np.full(37, 4.2)) == 37.0
    dominant = abs(ess_of_log_weights(np.array([0.0, -2000.0, -2000.0])) - 1.0) <= 1e-9
    ok = worst <= 1e-10 and uniform_exact and dominant
    report(3, "ESS matches the direct formula oracle", ok, f"worst rel err={worst:.2e}")


def test_criterion_04_resampling_unbiasedness():
    t0 = time.monotonic()
    probs = np.array([0.5, 0.3, 0.2])
    pop = Population(
        [Particle(bytes([i]), float(np.log(probs[i])), Group.R) for i in range(3)]
    )
    draws = 100_000
    out = resample(pop, draws, np.random.default_rng(99))
    counts = np.bincount([p.genome[0] for p in out.particles], minlength=3)
    stat, p_value = chisquare(counts, f_exp=probs * draws)
    elapsed = time.monotonic() - t0
    report(
        4,
        "categorical resampling passes the chi-square goodness-of-fit test",
        p_value > 0.001 and elapsed < 5.0,
        f"p={p_value:.4f}, counts={counts.tolist()}, {elapsed:.1f}s",
    )


def test_criterion_05_mh_stationarity():
    t0 = time.monotonic()
    target = popcount_target(1)
    params = KernelParams(p_flip=1 / 8)
    rng = np.random.default_rng(7)
    particle = Particle(b"\x00", 0.0, Group.R)
    counts = np.zeros(9)
    for _ in range(1_000_000):
        particle = mh_mutate(particle, target, params, rng)
        counts[int(particle.log_weight)] += 1
    tv = 0.5 * float(np.abs(counts / counts.sum() - popcount_law()).sum())
    elapsed = time.monotonic() - t0
    report(
        5,
        "mutation chain marginal matches the tick-exponential law",
        tv < 0.02 and elapsed < 30.0,
        f"TV={tv:.4f} (<0.02), {elapsed:.1f}s",
    )


def test_criterion_06_crossover_pair_detailed_balance():
    # Pair states live on the low nibbles of two one-byte genomes; crossover
    # conserves bit positions, so zero high nibbles stay zero and the chain
    # is exactly the 4-bit pair kernel on a 256-state space.
    t0 = time.monotonic()
    target = popcount_target(1)
    params = KernelParams(p_flip=0.1, crossover_rate=0.5)
    rng = np.random.default_rng(11)
    n_states = 256
    per_state = 4096

    def tick(v):
        return float(bin(v).count("1"))

    pi = np.array(
        [math.exp(tick(a) + tick(b)) for a in range(16) for b in range(16)]
    )
    pi /= pi.sum()

    transitions = np.zeros((n_states, n_states))
    for s in range(n_states):
        a, b = s >> 4, s & 15
        p1 = Particle(bytes([a]), tick(a), Group.R)
        p2 = Particle(bytes([b]), tick(b), Group.R)
        for _ in range(per_state):
            q1, q2 = mh_crossover(p1, p2, target, params, rng)
            transitions[s, (q1.genome[0] << 4) | q2.genome[0]] += 1
    transitions /= per_state

    flow = pi[:, None] * transitions
    residual = float(np.abs(flow - flow.T).max())
    elapsed = time.monotonic() - t0
    report(
        6,
        "crossover pair kernel satisfies detailed balance",
        residual < 0.01 and elapsed < 60.0,
        f"max residual={residual:.5f} (<0.01), {elapsed:.1f}s",
    )


def test_criterion_07_end_to_end_convergence():
    t0 = time.monotonic()
    target = insertion_sort_target(5, 0, 4)
    hits = 0
    for seed in range(20):
        cfg = EngineConfig(seed=seed, max_evaluations=2000, max_epochs=100)
        best, _ = run(cfg, target)
        hits += best.log_weight == 14.0
    elapsed = time.monotonic() - t0
    report(
        7,
        "default search finds the 5-element worst case within 2000 evaluations",
        hits >= 18 and elapsed < 30.0,
        f"{hits}/20 seeds reached 14, {elapsed:.1f}s",
    )


@pytest.mark.slow
def test_criterion_08_scaled_worst_case_search():
    t0 = time.monotonic()
    target = insertion_sort_target(16, 0, 255)
    bests = []
    for seed in range(10):
        cfg = EngineConfig(seed=seed, max_evaluations=200_000, max_epochs=100)
        best, _ = run(cfg, target)
        bests.append(best.log_weight)
    median = statistics.median(bests)
    elapsed = time.monotonic() - t0
    report(
        8,
        "16-element search reaches 90% of the analytic maximum 135",
        median >= 0.9 * 135 and elapsed < 300.0,
        f"median={median} (>={0.9 * 135}), bests={bests}, {elapsed:.0f}s",
    )


@pytest.mark.slow
def test_criterion_09_baseline_dominance():
    t0 = time.monotonic()
    subjects = {
        "hash-table": lambda: hash_table_target(8, 4),
        "ordered-pairs": lambda: ordered_pairs_target(16, 0, 255),
    }
    details = []
    win_ok = True
    median_ok = False
    for name, make in subjects.items():
        base = EngineConfig(seed=0, max_evaluations=50_000, max_epochs=None)
        block = _epoch_block_size(base.resolved(make().genome_length), make())
        dse, rnd, loc = [], [], []
        for seed in range(10):
            cfg = EngineConfig(seed=seed, max_evaluations=50_000, max_epochs=None)
            dse.append(run(cfg, make())[0].log_weight)
            rnd.append(run_random_baseline(cfg, make(), block)[0].log_weight)
            loc.append(run_local_opt(cfg, make())[0].log_weight)
        wins = sum(d >= r for d, r in zip(dse, rnd))
        win_ok = win_ok and wins >= 8
        if statistics.median(dse) >= statistics.median(loc):
            median_ok = True
        details.append(
            f"{name}: wins {wins}/10, medians dse={statistics.median(dse)}"
            f" local-opt={statistics.median(loc)} random={statistics.median(rnd)}"
        )
    elapsed = time.monotonic() - t0
    report(
        9,
        "search dominates random and matches local-opt on a subject",
        win_ok and median_ok and elapsed < 600.0,
        "; ".join(details) + f", {elapsed:.0f}s",
    )


def test_criterion_10_determinism(tmp_path):
    t0 = time.monotonic()
    outputs = []
    for label in ("first", "second"):
        spec = RunSpec(
            subject="insertion-sort:n=5,lo=0,hi=4",
            algorithm="dse-smc",
            config=EngineConfig(seed=31, max_evaluations=2000, max_epochs=20),
            repetitions=2,
            out_dir=tmp_path / label,
            figures=False,
        )
        run_experiment(spec)
        outputs.append(
            [(tmp_path / label / f"run_{r:03d}.csv").read_bytes() for r in range(2)]
        )
    identical = outputs[0] == outputs[1]
    elapsed = time.monotonic() - t0
    report(
        10,
        "identical seed, config, and subject give byte-identical CSV output",
        identical and elapsed < 60.0,
        f"{sum(len(b) for b in outputs[0])} bytes compared, {elapsed:.1f}s",
    )
