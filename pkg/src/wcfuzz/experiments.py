"""Experiment harness: seeded repetitions, baselines, CSV/JSON reports.

Every algorithm spends its budget in target evaluations, counted the same
way, so best-tick curves are directly comparable.  Each repetition writes
one CSV of per-epoch telemetry; a summary JSON collects the best ticks,
their spread, and the fully resolved configuration.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from . import __version__, engine
from .engine import EngineConfig, EpochStats, PHASE_BASELINE, _CountingTarget, rng_stream
from .kernels import GREEDY, KernelParams
from .migration import MigrationParams
from .population import Group, Particle, ess_of_log_weights
from .targets import (
    SubprocessTargetConfig,
    Target,
    make_subject,
    subprocess_target,
)

__all__ = [
    "ALGORITHMS",
    "CSV_COLUMNS",
    "ConfigError",
    "RunSpec",
    "config_from_dict",
    "config_to_dict",
    "run_random_baseline",
    "run_local_opt",
    "run_experiment",
    "write_stats_csv",
    "read_stats_csv",
]

ALGORITHMS = ("dse-smc", "local-opt", "random")

CSV_COLUMNS = [
    "epoch",
    "evaluations",
    "wall_ms",
    "best_tick",
    "ess",
    "pop_size",
    "n_extreme_k",
    "n_mild_k",
    "n_r",
    "resampled",
    "migration_rate_r_to_k",
]


class ConfigError(ValueError):
    """Malformed run specification or configuration file."""


@dataclass(slots=True)
class RunSpec:
    """One experiment: a subject, an algorithm, and seeded repetitions.

    Repetition r runs with seed ``config.seed + r``.  ``subject`` is a
    built-in spec string (see ``targets.SUBJECTS``) or ``"subprocess"``
    together with ``subprocess_config`` and ``genome_length``.
    """

    subject: str
    algorithm: str = "dse-smc"
    config: EngineConfig = field(default_factory=EngineConfig)
    repetitions: int = 1
    out_dir: Path = Path("results")
    figures: bool = True
    subprocess_config: SubprocessTargetConfig | None = None
    genome_length: int | None = None

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}"
            )
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.subject == "subprocess":
            if self.subprocess_config is None or self.genome_length is None:
                raise ConfigError(
                    "subprocess subject needs subprocess_config and genome_length"
                )

    def make_target(self) -> Target:
        if self.subject == "subprocess":
            return subprocess_target(self.subprocess_config, self.genome_length)
        try:
            return make_subject(self.subject)
        except ValueError as e:
            raise ConfigError(str(e)) from e


# --------------------------------------------------------------------------
# Config (de)serialization
# --------------------------------------------------------------------------

def _from_mapping(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(sorted(unknown))}")
    return data


def config_from_dict(data: dict) -> EngineConfig:
    """Build an EngineConfig from a JSON-style mapping; unknown keys rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    kernel = data.pop("kernel", {})
    migration = data.pop("migration", {})
    _from_mapping(EngineConfig, dict(data, kernel=None, migration=None), "config")
    cfg = EngineConfig(
        kernel=KernelParams(**_from_mapping(KernelParams, kernel, "kernel")),
        migration=MigrationParams(**_from_mapping(MigrationParams, migration, "migration")),
        **data,
    )
    try:
        cfg.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return cfg


def config_to_dict(cfg: EngineConfig) -> dict:
    return dataclasses.asdict(cfg)


# --------------------------------------------------------------------------
# CSV I/O
# --------------------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_stats_csv(path: Path, rows: list[EpochStats]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format_cell(getattr(row, col)) for col in CSV_COLUMNS])


def read_stats_csv(path: Path) -> list[EpochStats]:
    """Parse a telemetry CSV back into stats rows, losslessly."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header in {path}: {reader.fieldnames}")
        for rec in reader:
            out.append(
                EpochStats(
                    epoch=int(rec["epoch"]),
                    evaluations=int(rec["evaluations"]),
                    wall_ms=int(rec["wall_ms"]),
                    best_tick=float(rec["best_tick"]),
                    best_genome_hex="",
                    ess=float(rec["ess"]),
                    pop_size=int(rec["pop_size"]),
                    n_extreme_k=int(rec["n_extreme_k"]),
                    n_mild_k=int(rec["n_mild_k"]),
                    n_r=int(rec["n_r"]),
                    resampled=rec["resampled"] == "true",
                    migration_rate_r_to_k=float(rec["migration_rate_r_to_k"]),
                )
            )
    return out


# --------------------------------------------------------------------------
# Baselines
# --------------------------------------------------------------------------

def _epoch_block_size(cfg: EngineConfig, target: Target) -> int:
    """Mean evaluations per epoch of a short dry run of the full engine,
    used to slice the random baseline into comparable epoch blocks."""
    max_epochs = 10 if cfg.max_epochs is None else min(cfg.max_epochs, 10)
    dry_cfg = replace(cfg, max_epochs=max_epochs)
    _, rows = engine.run(dry_cfg, target)
    if not rows:
        return max(1, cfg.L0)
    return max(1, round(rows[-1].evaluations / len(rows)))


def run_random_baseline(
    cfg: EngineConfig, target: Target, block_size: int | None = None
) -> tuple[Particle, list[EpochStats]]:
    """Uniform random search reported in epoch-equivalent blocks.

    Draws genomes uniformly until the evaluation budget is spent; one stats
    row covers ``block_size`` evaluations so curves line up with the engine's
    epochs.  When ``block_size`` is omitted it is calibrated by a dry run
    (the dry run's evaluations do not count against this baseline's budget).
    """
    cfg = cfg.resolved(target.genome_length)
    cfg.validate()
    if block_size is None:
        block_size = _epoch_block_size(cfg, target)
    counter = _CountingTarget(target)
    t0 = time.monotonic()

    def wall_ms() -> int:
        if cfg.max_wall_ms is None:
            return 0
        return int((time.monotonic() - t0) * 1000)

    def exhausted() -> bool:
        if cfg.max_evaluations is not None and counter.evaluations >= cfg.max_evaluations:
            return True
        if cfg.max_wall_ms is not None and wall_ms() >= cfg.max_wall_ms:
            return True
        return False

    rows: list[EpochStats] = []
    epoch = 0
    while not exhausted():
        if cfg.max_epochs is not None and epoch >= cfg.max_epochs:
            break
        epoch += 1
        rng = rng_stream(cfg.seed, epoch, PHASE_BASELINE)
        ticks = []
        for _ in range(block_size):
            if exhausted():
                break
            genome = rng.integers(0, 256, size=target.genome_length, dtype="uint8").tobytes()
            ticks.append(counter.evaluate(genome))
        if not ticks:
            break
        rows.append(
            EpochStats(
                epoch=epoch,
                evaluations=counter.evaluations,
                wall_ms=wall_ms(),
                best_tick=counter.best_tick,
                best_genome_hex=(counter.best_genome or b"").hex(),
                ess=ess_of_log_weights(ticks),
                pop_size=len(ticks),
                n_extreme_k=0,
                n_mild_k=0,
                n_r=len(ticks),
                resampled=False,
                migration_rate_r_to_k=0.0,
            )
        )
    best = Particle(counter.best_genome or b"", counter.best_tick, Group.EXTREME_K)
    return best, rows


def run_local_opt(cfg: EngineConfig, target: Target) -> tuple[Particle, list[EpochStats]]:
    """Engine loop with greedy keep-best rejuvenation instead of MH."""
    return engine.run(cfg, target, accept_rule=GREEDY)


# --------------------------------------------------------------------------
# Experiment driver
# --------------------------------------------------------------------------

_RUNNERS: dict[str, Callable] = {
    "dse-smc": engine.run,
    "local-opt": run_local_opt,
}


def run_experiment(spec: RunSpec) -> dict:
    """Execute seeded repetitions and write the report files.

    Returns a dict with the paths written: one CSV per repetition, one
    summary JSON, and (unless disabled) the rendered figures.
    """
    spec.validate()
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    probe = spec.make_target()
    try:
        resolved = spec.config.resolved(probe.genome_length)
        resolved.validate()
        subject_name = probe.name
    finally:
        probe.close()

    block_size: int | None = None
    if spec.algorithm == "random":
        calib_target = spec.make_target()
        try:
            block_size = _epoch_block_size(
                replace(resolved, seed=spec.config.seed), calib_target
            )
        finally:
            calib_target.close()

    csv_paths: list[Path] = []
    all_rows: list[list[EpochStats]] = []
    best_ticks: list[float] = []
    best_genomes: list[str] = []
    seeds: list[int] = []
    for r in range(spec.repetitions):
        cfg_r = replace(resolved, seed=spec.config.seed + r)
        seeds.append(cfg_r.seed)
        target = spec.make_target()
        try:
            if spec.algorithm == "random":
                best, rows = run_random_baseline(cfg_r, target, block_size)
            else:
                best, rows = _RUNNERS[spec.algorithm](cfg_r, target)
        finally:
            target.close()
        path = out_dir / f"run_{r:03d}.csv"
        write_stats_csv(path, rows)
        csv_paths.append(path)
        all_rows.append(rows)
        best_ticks.append(best.log_weight)
        best_genomes.append(best.genome.hex())

    summary = {
        "tool": "wcfuzz",
        "version": __version__,
        "subject": subject_name,
        "algorithm": spec.algorithm,
        "repetitions": spec.repetitions,
        "seeds": seeds,
        "best_ticks": best_ticks,
        "best_tick_median": statistics.median(best_ticks),
        "best_tick_min": min(best_ticks),
        "best_tick_max": max(best_ticks),
        "best_genomes_hex": best_genomes,
        "random_block_size": block_size,
        "config": config_to_dict(resolved),
        "csv_files": [p.name for p in csv_paths],
    }
    figure_paths: list[Path] = []
    if spec.figures:
        from . import plots

        figure_paths = plots.render_run_curves(all_rows, out_dir)
        summary["figures"] = [p.name for p in figure_paths]
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"csv": csv_paths, "summary": summary_path, "figures": figure_paths}
