"""Main search loop: reweight, migrate, adaptive resample, rejuvenate.

Each epoch reweights the population by evaluating every genome, updates
group labels, resamples when the population exceeds its size threshold or
the effective sample size drops below ESS_min(L) = ceil(f * L), and then
rejuvenates the K and R partitions with their strategies.  Budgets abort
an epoch cleanly between kernel steps.

Determinism: every random decision draws from a stream derived from
(seed, epoch, phase), so a (seed, config, target) triple fixes the whole
run transcript.  The reported answer is the best genome ever evaluated,
including kernel proposals and neighborhood probes, since resampling can
drop the best genome from the population.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, migration as migration_ops, population as population_ops
from .kernels import GREEDY, K_STRATEGY, KernelParams, MH, R_STRATEGY
from .migration import MigrationParams
from .population import Group, K_GROUPS, Particle, Population
from .targets import Target

__all__ = [
    "EngineConfig",
    "EpochStats",
    "init_population",
    "run_epoch",
    "run",
    "rng_stream",
    "PHASE_INIT",
    "PHASE_MIGRATE",
    "PHASE_RESAMPLE",
    "PHASE_REJUVENATE_K",
    "PHASE_REJUVENATE_R",
    "PHASE_BASELINE",
]

log = logging.getLogger(__name__)

(
    PHASE_INIT,
    PHASE_MIGRATE,
    PHASE_RESAMPLE,
    PHASE_REJUVENATE_K,
    PHASE_REJUVENATE_R,
    PHASE_BASELINE,
) = range(6)

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def rng_stream(seed: int, epoch: int, phase: int, index: int = 0) -> np.random.Generator:
    """Independent generator for one (epoch, phase, index) slot of a run."""
    ss = np.random.SeedSequence([seed & _SEED_MASK, epoch, phase, index])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(slots=True)
class EngineConfig:
    """All tunables of the search loop.

    Budgets set to None are disabled; at least one of the three must be
    set.  ``max_wall_ms`` is off by default so that rerunning a seed
    reproduces its output byte for byte.
    """

    L0: int = 64
    L_max: int = 256
    ess_min_fraction: float = 0.5
    kernel: KernelParams = field(default_factory=KernelParams)
    migration: MigrationParams = field(default_factory=MigrationParams)
    max_epochs: int | None = 100
    max_evaluations: int | None = 200_000
    max_wall_ms: int | None = None
    seed: int = 0
    initial_group_split: float = 0.5

    def validate(self) -> None:
        if not (1 <= self.L0 <= self.L_max):
            raise ValueError(f"need 1 <= L0 <= L_max, got L0={self.L0}, L_max={self.L_max}")
        if not (0.0 < self.ess_min_fraction <= 1.0):
            raise ValueError(
                f"ess_min_fraction must be in (0, 1], got {self.ess_min_fraction}"
            )
        if not (0.0 <= self.initial_group_split <= 1.0):
            raise ValueError(
                f"initial_group_split must be in [0, 1], got {self.initial_group_split}"
            )
        if self.max_epochs is None and self.max_evaluations is None and self.max_wall_ms is None:
            raise ValueError("at least one budget must be set")
        for name in ("max_epochs", "max_evaluations", "max_wall_ms"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")
        self.kernel.validate()
        self.migration.validate()

    def resolved(self, genome_length: int) -> "EngineConfig":
        """Copy with p_flip defaulted to one expected bit flip per proposal."""
        kernel = self.kernel
        if kernel.p_flip is None:
            bits = max(1, 8 * genome_length)
            kernel = replace(kernel, p_flip=1.0 / bits if bits > 1 else 0.5)
        return replace(self, kernel=kernel)


@dataclass(slots=True)
class EpochStats:
    """One telemetry row per epoch; ``best_tick`` is best-ever, so it is
    non-decreasing across the stats stream."""

    epoch: int
    evaluations: int
    wall_ms: int
    best_tick: float
    best_genome_hex: str
    ess: float
    pop_size: int
    n_extreme_k: int
    n_mild_k: int
    n_r: int
    resampled: bool
    migration_rate_r_to_k: float


class _CountingTarget:
    """Memoizing pass-through target.

    Deterministic targets let every previously seen genome be answered from
    a cache, so the evaluation counter (and therefore the budget) measures
    actual target executions only.  Also tracks the best genome ever
    evaluated, which a first-time genome alone can improve.
    """

    __slots__ = ("inner", "evaluations", "best_tick", "best_genome", "_cache")

    def __init__(self, inner: Target, evaluations: int = 0):
        self.inner = inner
        self.evaluations = evaluations
        self.best_tick = -math.inf
        self.best_genome: bytes | None = None
        self._cache: dict[bytes, float] = {}

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def genome_length(self) -> int:
        return self.inner.genome_length

    def evaluate(self, genome: bytes) -> float:
        cached = self._cache.get(genome)
        if cached is not None:
            return cached
        tick = self.inner.evaluate(genome)
        self.evaluations += 1
        self._cache[genome] = tick
        if tick > self.best_tick:
            self.best_tick = tick
            self.best_genome = genome
        return tick


class _RunContext:
    """Shared run state: counting wrapper, wall clock, budget checks."""

    def __init__(self, target: Target, cfg: EngineConfig, accept: str = MH):
        self.target = _CountingTarget(target)
        self.cfg = cfg
        self.accept = accept
        self._t0 = time.monotonic()

    def wall_ms(self) -> int:
        # Deterministic output contract: the wall clock is only reported (and
        # enforced) when a wall budget is configured.
        if self.cfg.max_wall_ms is None:
            return 0
        return int((time.monotonic() - self._t0) * 1000)

    def should_stop(self) -> bool:
        cfg = self.cfg
        if cfg.max_evaluations is not None and self.target.evaluations >= cfg.max_evaluations:
            return True
        if cfg.max_wall_ms is not None and self.wall_ms() >= cfg.max_wall_ms:
            return True
        return False


def init_population(cfg: EngineConfig, target: Target, rng: np.random.Generator) -> Population:
    """L0 particles with uniform random genomes and random group labels."""
    particles = []
    for _ in range(cfg.L0):
        genome = rng.integers(0, 256, size=target.genome_length, dtype=np.uint8).tobytes()
        if rng.random() < cfg.initial_group_split:
            group = Group.R
        elif rng.random() < cfg.migration.mild_fraction:
            group = Group.MILD_K
        else:
            group = Group.EXTREME_K
        particles.append(Particle(genome, 0.0, group))
    return Population(particles, epoch=0, evaluations=0)


def _ess_min(cfg: EngineConfig, size: int) -> int:
    return math.ceil(cfg.ess_min_fraction * size)


def run_epoch(
    pop: Population,
    cfg: EngineConfig,
    target: Target,
    _ctx: _RunContext | None = None,
) -> tuple[Population, EpochStats]:
    """Advance the population by one epoch and emit its telemetry row.

    When the budget runs out mid-epoch the current kernel step finishes,
    the remaining work is skipped, and the stats row is still emitted.
    """
    ctx = _ctx if _ctx is not None else _RunContext(target, cfg)
    if _ctx is None:
        ctx.target.evaluations = pop.evaluations
    t = pop.epoch + 1

    pop = population_ops.reweight(pop, ctx.target)
    # Ticks seen this epoch; reused to restore kernel-ready weights after a
    # resample resets them (the target is deterministic, so no re-evaluation).
    tick_by_genome = {p.genome: p.log_weight for p in pop.particles}
    ess_val = population_ops.ess(pop)
    rate = migration_ops.migration_rate_r_to_k(pop, cfg.migration)
    pop = migration_ops.migrate(pop, cfg.migration, rng_stream(cfg.seed, t, PHASE_MIGRATE))

    size = len(pop.particles)
    resampled = size > cfg.L_max or ess_val < _ess_min(cfg, size)
    if resampled:
        pop = population_ops.resample(
            pop, min(size, cfg.L_max), rng_stream(cfg.seed, t, PHASE_RESAMPLE)
        )
        particles = [
            Particle(p.genome, tick_by_genome[p.genome], p.group) for p in pop.particles
        ]
        pop = Population(particles, pop.epoch, pop.evaluations)

    k_parts = [p for p in pop.particles if p.group in K_GROUPS]
    r_parts = [p for p in pop.particles if p.group is Group.R]
    # R goes first: its sweeps are cheap per particle, so exploration is not
    # starved when a tight budget dies inside K's probe-heavy loops.
    if r_parts and not ctx.should_stop():
        diagnostics: list = []
        r_parts = kernels.rejuvenate_group(
            r_parts,
            R_STRATEGY,
            ctx.target,
            cfg.kernel,
            rng_stream(cfg.seed, t, PHASE_REJUVENATE_R),
            accept=ctx.accept,
            should_stop=ctx.should_stop,
            diagnostics=diagnostics,
        )
        if log.isEnabledFor(logging.DEBUG):
            for row in diagnostics:
                log.debug(
                    "epoch %d R sweep %d: proposal-tick std %.6g over %d candidates",
                    t,
                    row["iteration"],
                    row["std"],
                    len(row["proposal_ticks"]),
                )
    if k_parts and not ctx.should_stop():
        k_parts = kernels.rejuvenate_group(
            k_parts,
            K_STRATEGY,
            ctx.target,
            cfg.kernel,
            rng_stream(cfg.seed, t, PHASE_REJUVENATE_K),
            accept=ctx.accept,
            should_stop=ctx.should_stop,
        )

    particles = k_parts + r_parts
    new_pop = Population(particles, epoch=t, evaluations=ctx.target.evaluations)
    best_genome = ctx.target.best_genome or b""
    stats = EpochStats(
        epoch=t,
        evaluations=ctx.target.evaluations,
        wall_ms=ctx.wall_ms(),
        best_tick=ctx.target.best_tick,
        best_genome_hex=best_genome.hex(),
        ess=ess_val,
        pop_size=len(particles),
        n_extreme_k=sum(1 for p in particles if p.group is Group.EXTREME_K),
        n_mild_k=sum(1 for p in particles if p.group is Group.MILD_K),
        n_r=sum(1 for p in particles if p.group is Group.R),
        resampled=resampled,
        migration_rate_r_to_k=rate,
    )
    return new_pop, stats


def run(
    cfg: EngineConfig, target: Target, accept_rule: str = MH
) -> tuple[Particle, list[EpochStats]]:
    """Run epochs until a budget is exhausted.

    Returns the best particle ever observed over all evaluations (not just
    the final population) and the full stats stream.  ``accept_rule`` is
    ``"mh"`` for the standard kernels or ``"greedy"`` for the locally-optimal
    keep-best variant.  The returned particle's group label is EXTREME_K by
    convention and carries no information.
    """
    if accept_rule not in (MH, GREEDY):
        raise ValueError(f"unknown accept rule {accept_rule!r}")
    cfg = cfg.resolved(target.genome_length)
    cfg.validate()
    ctx = _RunContext(target, cfg, accept=accept_rule)
    pop = init_population(cfg, target, rng_stream(cfg.seed, 0, PHASE_INIT))
    stats_rows: list[EpochStats] = []
    epochs_done = 0
    while True:
        if cfg.max_epochs is not None and epochs_done >= cfg.max_epochs:
            break
        if ctx.should_stop():
            break
        pop, row = run_epoch(pop, cfg, target, _ctx=ctx)
        stats_rows.append(row)
        epochs_done += 1
    if ctx.target.best_genome is None:
        # No epoch ran; report the best of the initial population.
        population_ops.reweight(pop, ctx.target)
    best = Particle(ctx.target.best_genome, ctx.target.best_tick, Group.EXTREME_K)
    return best, stats_rows
