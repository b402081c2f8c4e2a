"""Rejuvenation kernels: MH acceptance, bit-flip mutation, uniform crossover.

Both proposal distributions are symmetric -- a bit-flip pattern inverts
itself, and the mask that produced a crossover maps the children back to
the parents with the same probability -- so acceptance ratios reduce to
tick differences.  A greedy acceptance rule backs the locally-optimal
engine variant; kernels are otherwise pure functions of their inputs and
the supplied random stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .population import Particle

if TYPE_CHECKING:
    from .targets import Target

__all__ = [
    "KernelParams",
    "MH",
    "GREEDY",
    "K_STRATEGY",
    "R_STRATEGY",
    "mh_accept",
    "mutate_proposal",
    "mh_mutate",
    "uniform_crossover_proposal",
    "mh_crossover",
    "k_stop",
    "r_stop",
    "rejuvenate_group",
]

MH = "mh"
GREEDY = "greedy"
K_STRATEGY = "K"
R_STRATEGY = "R"


@dataclass(slots=True)
class KernelParams:
    """Tunables for the rejuvenation kernels.

    ``p_flip=None`` means one expected bit flip per proposal,
    1 / (8 * genome_length); the engine resolves it once the target's
    genome length is known.
    """

    p_flip: float | None = None
    crossover_rate: float = 0.5
    k_neighbors: int = 8
    k_max_iters: int = 64
    r_iters: int = 12
    r_offspring_factor: float = 2.0

    def validate(self) -> None:
        if self.p_flip is not None and not (0.0 < self.p_flip < 1.0):
            raise ValueError(f"p_flip must be in (0, 1), got {self.p_flip}")
        if not (0.0 <= self.crossover_rate <= 1.0):
            raise ValueError(f"crossover_rate must be in [0, 1], got {self.crossover_rate}")
        for name in ("k_neighbors", "k_max_iters", "r_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.r_offspring_factor < 1.0:
            raise ValueError(
                f"r_offspring_factor must be >= 1, got {self.r_offspring_factor}"
            )


def mh_accept(
    log_new: float,
    log_old: float,
    log_q_fwd: float,
    log_q_bwd: float,
    rng: np.random.Generator,
) -> bool:
    """Metropolis-Hastings coin flip in log space.

    Accepts with probability min(1, exp(log_new - log_old + log_q_bwd -
    log_q_fwd)).  Consumes exactly one uniform draw when the ratio is < 1
    and none otherwise, so uphill moves never touch the random stream.
    """
    for v in (log_new, log_old, log_q_fwd, log_q_bwd):
        if not math.isfinite(v):
            raise ValueError(f"mh_accept arguments must be finite, got {v!r}")
    log_ratio = (log_new - log_old) + (log_q_bwd - log_q_fwd)
    if log_ratio >= 0.0:
        return True
    return rng.random() < math.exp(log_ratio)


def mutate_proposal(genome: bytes, p_flip: float, rng: np.random.Generator) -> bytes:
    """Flip each bit of ``genome`` independently with probability ``p_flip``.

    Bits are numbered LSB-first within each byte.
    """
    if not (0.0 < p_flip < 1.0):
        raise ValueError(f"p_flip must be in (0, 1), got {p_flip}")
    arr = np.frombuffer(genome, dtype=np.uint8)
    flips = rng.random(arr.size * 8) < p_flip
    mask = np.packbits(flips, bitorder="little")
    return (arr ^ mask).tobytes()


def uniform_crossover_proposal(
    g1: bytes, g2: bytes, crossover_rate: float, rng: np.random.Generator
) -> tuple[bytes, bytes, bytes]:
    """Swap bit positions between two equal-length genomes under a random mask.

    Each mask bit is 1 with probability ``crossover_rate``; child 1 takes
    masked bits from ``g2`` and vice versa.  Returns (child1, child2, mask)
    so callers can audit the move.
    """
    if len(g1) != len(g2):
        raise ValueError(f"genome lengths differ: {len(g1)} != {len(g2)}")
    a = np.frombuffer(g1, dtype=np.uint8)
    b = np.frombuffer(g2, dtype=np.uint8)
    take = rng.random(a.size * 8) < crossover_rate
    m = np.packbits(take, bitorder="little")
    c1 = (a & ~m) | (b & m)
    c2 = (b & ~m) | (a & m)
    return c1.tobytes(), c2.tobytes(), m.tobytes()


def _mutate_step(
    p: Particle,
    target: "Target",
    params: KernelParams,
    rng: np.random.Generator,
    accept: str = MH,
) -> tuple[Particle, float]:
    """One mutation transition; returns (next particle, proposal tick)."""
    proposal = mutate_proposal(p.genome, params.p_flip, rng)
    tick = float(target.evaluate(proposal))
    if accept == MH:
        take = mh_accept(tick, p.log_weight, 0.0, 0.0, rng)
    else:
        take = tick > p.log_weight
    if take:
        return Particle(proposal, tick, p.group), tick
    return p, tick


def mh_mutate(
    p: Particle, target: "Target", params: KernelParams, rng: np.random.Generator
) -> Particle:
    """Bit-flip proposal accepted by MH; q terms cancel by symmetry.

    Requires ``p.log_weight`` to be the true tick of ``p.genome``.  Costs
    one target evaluation.
    """
    return _mutate_step(p, target, params, rng, MH)[0]


def _crossover_step(
    p1: Particle,
    p2: Particle,
    target: "Target",
    params: KernelParams,
    rng: np.random.Generator,
    accept: str = MH,
) -> tuple[Particle, Particle, bool]:
    """One pair transition; returns (state1, state2, accepted)."""
    c1, c2, _mask = uniform_crossover_proposal(
        p1.genome, p2.genome, params.crossover_rate, rng
    )
    t1 = float(target.evaluate(c1))
    t2 = float(target.evaluate(c2))
    if accept == MH:
        take = mh_accept(t1 + t2, p1.log_weight + p2.log_weight, 0.0, 0.0, rng)
    else:
        take = (t1 + t2) > (p1.log_weight + p2.log_weight)
    if take:
        return Particle(c1, t1, p1.group), Particle(c2, t2, p2.group), True
    return p1, p2, False


def mh_crossover(
    p1: Particle,
    p2: Particle,
    target: "Target",
    params: KernelParams,
    rng: np.random.Generator,
) -> tuple[Particle, Particle]:
    """Uniform-crossover pair proposal accepted or rejected jointly.

    The pair moves iff accepted with log ratio (t_new1 + t_new2) -
    (t_old1 + t_old2); the mask distribution is its own reverse so q terms
    cancel.  Costs two target evaluations.
    """
    a, b, _ = _crossover_step(p1, p2, target, params, rng, MH)
    return a, b


def k_stop(candidate_tick: float, neighbor_ticks: list[float]) -> bool:
    """K-strategy stop rule: candidate at least as good as every probe."""
    if len(neighbor_ticks) == 0:
        raise ValueError("neighbor_ticks must be non-empty")
    return candidate_tick >= max(neighbor_ticks)


def r_stop(iteration: int, params: KernelParams) -> bool:
    """R-strategy stop rule: fixed sweep budget."""
    return iteration >= params.r_iters


def _sample_neighbor_ticks(
    genome: bytes, k: int, target: "Target", rng: np.random.Generator
) -> list[float]:
    """Evaluate k distinct single-bit-flip neighbors, sampled uniformly."""
    nbits = len(genome) * 8
    k = min(k, nbits)
    ticks = []
    for i in rng.choice(nbits, size=k, replace=False):
        nb = bytearray(genome)
        nb[i >> 3] ^= 1 << (i & 7)
        ticks.append(float(target.evaluate(bytes(nb))))
    return ticks


def rejuvenate_group(
    particles: list[Particle],
    strategy: str,
    target: "Target",
    params: KernelParams,
    rng: np.random.Generator,
    accept: str = MH,
    should_stop: Callable[[], bool] | None = None,
    diagnostics: list | None = None,
) -> list[Particle]:
    """Crossover-then-mutate rejuvenation of one strategy group.

    K: random disjoint pairing with in-place pair moves, then a per-particle
    mutation loop that ends at ``k_stop`` (probing ``k_neighbors`` single-bit
    neighbors per iteration, each a counted evaluation) or ``k_max_iters``.
    Output size equals input size.

    R: one crossover pass where accepted child pairs are appended alongside
    their parents, capped at ceil(r_offspring_factor * len(particles)), then
    ``r_iters`` mutation sweeps over the grown group.  Never shrinks.  Each
    sweep appends a row with the sweep's proposal ticks and their standard
    deviation to ``diagnostics`` when given.

    ``should_stop`` is polled between kernel steps so a budget can abort the
    group cleanly while keeping progress made so far.
    """
    if strategy not in (K_STRATEGY, R_STRATEGY):
        raise ValueError(f"unknown strategy {strategy!r}")
    stop = should_stop if should_stop is not None else (lambda: False)
    out = list(particles)

    if strategy == K_STRATEGY:
        if len(out) >= 2:
            order = rng.permutation(len(out))
            for j in range(0, len(order) - 1, 2):
                if stop():
                    return out
                a, b = int(order[j]), int(order[j + 1])
                out[a], out[b], _ = _crossover_step(
                    out[a], out[b], target, params, rng, accept
                )
        # Severe competition: the heaviest candidates get their mutation
        # loops first, so a budget that dies mid-group was spent on the
        # most promising starts.
        by_weight = sorted(range(len(out)), key=lambda i: (-out[i].log_weight, i))
        for i in by_weight:
            if stop():
                break
            p = out[i]
            iters = 0
            while iters < params.k_max_iters and not stop():
                neighbor_ticks = _sample_neighbor_ticks(
                    p.genome, params.k_neighbors, target, rng
                )
                if k_stop(p.log_weight, neighbor_ticks):
                    break
                p, _ = _mutate_step(p, target, params, rng, accept)
                iters += 1
            out[i] = p
        return out

    # R strategy
    cap = math.ceil(params.r_offspring_factor * len(out))
    if len(out) >= 2 and cap > len(out):
        order = rng.permutation(len(out))
        children: list[Particle] = []
        for j in range(0, len(order) - 1, 2):
            if stop() or len(out) + len(children) >= cap:
                break
            a, b = int(order[j]), int(order[j + 1])
            n1, n2, accepted = _crossover_step(
                out[a], out[b], target, params, rng, accept
            )
            if accepted:
                children.append(n1)
                if len(out) + len(children) < cap:
                    children.append(n2)
        out.extend(children)
    it = 0
    while not r_stop(it, params) and not stop():
        sweep_ticks: list[float] = []
        for i in range(len(out)):
            if stop():
                break
            out[i], t = _mutate_step(out[i], target, params, rng, accept)
            sweep_ticks.append(t)
        if diagnostics is not None and sweep_ticks:
            diagnostics.append(
                {
                    "iteration": it,
                    "proposal_ticks": sweep_ticks,
                    "std": float(np.std(sweep_ticks)),
                }
            )
        it += 1
    return out
