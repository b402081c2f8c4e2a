"""Particle and population model: weights, ESS, categorical resampling.

Log-weights are kept in log space throughout; normalization uses the
log-sum-exp shift so arbitrarily large tick totals never overflow.
Population values are treated as immutable snapshots: every operation
returns a new population.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .targets import Target

__all__ = [
    "Group",
    "K_GROUPS",
    "Particle",
    "Population",
    "reweight",
    "normalized_weights",
    "ess",
    "ess_of_log_weights",
    "resample",
    "best",
]


class Group(Enum):
    """Reproduction-strategy label carried by each particle."""

    EXTREME_K = "extreme-k"
    MILD_K = "mild-k"
    R = "r"


#: Labels that rejuvenate with the K (exploitation) strategy.
K_GROUPS = (Group.EXTREME_K, Group.MILD_K)


@dataclass(slots=True)
class Particle:
    """One weighted candidate input.

    ``log_weight`` is the tick most recently evaluated for ``genome``, or
    the reset value 0.0 right after a resample.
    """

    genome: bytes
    log_weight: float
    group: Group


@dataclass(slots=True)
class Population:
    """Ordered particle multiset plus epoch index and evaluation counter."""

    particles: list[Particle]
    epoch: int = 0
    evaluations: int = 0

    def __len__(self) -> int:
        return len(self.particles)

    def log_weights(self) -> np.ndarray:
        return np.array([p.log_weight for p in self.particles], dtype=float)


def _require_nonempty(pop: Population) -> None:
    if not pop.particles:
        raise ValueError("population must be non-empty")


def reweight(pop: Population, target: "Target") -> Population:
    """Evaluate every genome and store its tick as the particle log-weight.

    Order is preserved and the evaluation counter grows by one per particle.
    Genome lengths are checked against the target's declared length up front
    so a bad population fails before any evaluation runs.
    """
    for p in pop.particles:
        if len(p.genome) != target.genome_length:
            raise ValueError(
                f"genome length {len(p.genome)} != target length {target.genome_length}"
            )
    particles = [
        Particle(p.genome, float(target.evaluate(p.genome)), p.group)
        for p in pop.particles
    ]
    return Population(particles, pop.epoch, pop.evaluations + len(particles))


def _log_sum_exp(log_w: np.ndarray) -> float:
    m = float(np.max(log_w))
    return m + float(np.log(np.sum(np.exp(log_w - m))))


def normalized_weights(pop: Population) -> np.ndarray:
    """Normalized linear-space weights p_i = exp(lw_i - logsumexp(lw))."""
    _require_nonempty(pop)
    log_w = pop.log_weights()
    return np.exp(log_w - _log_sum_exp(log_w))


def ess_of_log_weights(log_w: np.ndarray) -> float:
    """Effective sample size 1 / sum(p_i^2) of a log-weight vector.

    Evaluated as (sum w)^2 / sum(w^2) after a max-shift, which is exact for
    uniform weights (returns the integer count) and stable for any spread.
    """
    log_w = np.asarray(log_w, dtype=float)
    if log_w.size == 0:
        raise ValueError("population must be non-empty")
    w = np.exp(log_w - np.max(log_w))
    s = float(np.sum(w))
    return s * s / float(np.sum(w * w))


def ess(pop: Population) -> float:
    """Effective sample size of the population's weights, in [1, L]."""
    _require_nonempty(pop)
    return ess_of_log_weights(pop.log_weights())


def resample(pop: Population, l_target: int, rng: np.random.Generator) -> Population:
    """Draw ``l_target`` particles i.i.d. categorically by normalized weight.

    Inverse-CDF sampling over the stable input order, one uniform draw per
    output slot.  Drawn particles copy the parent genome and group label;
    all log-weights reset to 0 (uniform).
    """
    _require_nonempty(pop)
    if l_target < 1:
        raise ValueError(f"l_target must be >= 1, got {l_target}")
    cdf = np.cumsum(normalized_weights(pop))
    u = rng.random(l_target)
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(pop.particles) - 1)
    particles = [
        Particle(pop.particles[i].genome, 0.0, pop.particles[i].group) for i in idx
    ]
    return Population(particles, pop.epoch, pop.evaluations)


def best(pop: Population) -> Particle:
    """Particle with maximal log-weight; ties broken by lowest index."""
    _require_nonempty(pop)
    i = int(np.argmax(pop.log_weights()))
    return pop.particles[i]
