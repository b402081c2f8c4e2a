"""Group management: weight-driven R->K migration, fixed-rate K->R culling.

The migration rate formula compares group average weights against the
largest weight.  Raw linear weights would overflow, so it is evaluated
over the normalized weights (softmax of the ticks); the expression is
scale-free in structure, so normalizing preserves its sign and per-epoch
ordering.  Only group labels ever change here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .population import Group, K_GROUPS, Particle, Population, normalized_weights

__all__ = [
    "MigrationParams",
    "migration_rate_r_to_k",
    "roulette_select",
    "migrate",
]


@dataclass(slots=True)
class MigrationParams:
    k_to_r_rate: float = 0.1
    r_to_k_cap: float = 0.5
    mild_fraction: float = 0.5

    def validate(self) -> None:
        for name in ("k_to_r_rate", "r_to_k_cap", "mild_fraction"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def migration_rate_r_to_k(pop: Population, params: MigrationParams) -> float:
    """Rate (avgP_R - avgP_K) / max p, clamped to [0, r_to_k_cap].

    Returns 0 when either group is empty; a negative raw rate clamps to 0.
    """
    p = normalized_weights(pop)
    r_mask = np.array([pt.group is Group.R for pt in pop.particles])
    k_mask = ~r_mask
    if not r_mask.any() or not k_mask.any():
        return 0.0
    raw = (float(p[r_mask].mean()) - float(p[k_mask].mean())) / float(p.max())
    return min(max(raw, 0.0), params.r_to_k_cap)


def _select_without_replacement(
    weights: np.ndarray, count: int, rng: np.random.Generator
) -> list[int]:
    """Sequential categorical draws over the remaining pool, without replacement."""
    w = np.asarray(weights, dtype=float).copy()
    if count > w.size:
        raise ValueError(f"cannot select {count} from pool of {w.size}")
    chosen: list[int] = []
    for _ in range(count):
        total = w.sum()
        cdf = np.cumsum(w / total)
        i = int(np.searchsorted(cdf, rng.random(), side="right"))
        i = min(i, w.size - 1)
        while w[i] == 0.0:  # guard against landing on an exhausted slot
            i = (i + 1) % w.size
        chosen.append(i)
        w[i] = 0.0
    return chosen


def roulette_select(
    particles: list[Particle], count: int, rng: np.random.Generator
) -> list[int]:
    """Draw ``count`` distinct indices, each categorical by normalized weight."""
    if count > len(particles):
        raise ValueError(f"cannot select {count} from {len(particles)} particles")
    log_w = np.array([p.log_weight for p in particles], dtype=float)
    w = np.exp(log_w - np.max(log_w))
    return _select_without_replacement(w, count, rng)


def _rebalance_k(labels: list[Group], p: np.ndarray, mild_fraction: float) -> None:
    """Relabel K members: top ceil((1 - mild_fraction) * |K|) by weight become
    EXTREME_K, the rest MILD_K.  Ties broken by lowest index."""
    k_idx = [i for i, g in enumerate(labels) if g in K_GROUPS]
    if not k_idx:
        return
    n_extreme = math.ceil((1.0 - mild_fraction) * len(k_idx))
    ranked = sorted(k_idx, key=lambda i: (-p[i], i))
    for rank, i in enumerate(ranked):
        labels[i] = Group.EXTREME_K if rank < n_extreme else Group.MILD_K


def migrate(
    pop: Population, params: MigrationParams, rng: np.random.Generator
) -> Population:
    """Update group labels; genomes and weights are untouched.

    1. R -> EXTREME_K: exactly floor(rate * |R|) members move, picked by
       weight-proportional roulette (heavy particles favored).
    2. K -> R: a Binomial(|K|, k_to_r_rate) head count moves, picked by
       inverse-weight roulette (max_p - p + 1e-9, light particles favored).
    3. If anything moved, the K side is rebalanced into extreme/mild by
       weight.  With no movement the call is the identity on labels.
    """
    labels = [pt.group for pt in pop.particles]
    p = normalized_weights(pop)
    moved = False

    rate = migration_rate_r_to_k(pop, params)
    r_idx = [i for i, g in enumerate(labels) if g is Group.R]
    n_in = math.floor(rate * len(r_idx))
    if n_in > 0:
        pool = [pop.particles[i] for i in r_idx]
        for j in roulette_select(pool, n_in, rng):
            labels[r_idx[j]] = Group.EXTREME_K
        moved = True

    k_idx = [i for i, g in enumerate(labels) if g in K_GROUPS]
    n_out = int(rng.binomial(len(k_idx), params.k_to_r_rate)) if k_idx else 0
    if n_out > 0:
        pk = p[k_idx]
        inv = pk.max() - pk + 1e-9
        for j in _select_without_replacement(inv, n_out, rng):
            labels[k_idx[j]] = Group.R
        moved = True

    if moved:
        _rebalance_k(labels, p, params.mild_fraction)

    particles = [
        Particle(pt.genome, pt.log_weight, g) for pt, g in zip(pop.particles, labels)
    ]
    return Population(particles, pop.epoch, pop.evaluations)
