"""wcfuzz: black-box worst-case resource-usage input search.

Finds fixed-size inputs that maximize a user-defined resource metric
("ticks") of a black-box program, using a dual-strategy evolutionary
sequential-Monte-Carlo engine whose genetic operators are
Metropolis-Hastings kernels over the induced tick-exponential
distribution.
"""

__version__ = "0.1.0"

from .engine import EngineConfig, EpochStats, run  # noqa: E402
from .kernels import KernelParams  # noqa: E402
from .migration import MigrationParams  # noqa: E402
from .population import Group, Particle, Population  # noqa: E402
from .semantics import score_of_tick, tick_of_score  # noqa: E402
from .targets import (  # noqa: E402
    SubprocessTargetConfig,
    Target,
    TargetError,
    hash_table_target,
    insertion_sort_target,
    make_subject,
    ordered_pairs_target,
    popcount_target,
    quicksort_target,
    subprocess_target,
    tree_sort_target,
)

__all__ = [
    "__version__",
    "EngineConfig",
    "EpochStats",
    "run",
    "KernelParams",
    "MigrationParams",
    "Group",
    "Particle",
    "Population",
    "score_of_tick",
    "tick_of_score",
    "Target",
    "TargetError",
    "SubprocessTargetConfig",
    "subprocess_target",
    "make_subject",
    "insertion_sort_target",
    "ordered_pairs_target",
    "quicksort_target",
    "tree_sort_target",
    "hash_table_target",
    "popcount_target",
]
