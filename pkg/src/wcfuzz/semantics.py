"""Conversions between resource ticks and log-likelihood scores.

A run's accumulated tick total doubles as the exponent of an unnormalized
likelihood: the linear-space score e**tick overflows float64 already around
tick ~ 710, so the exponential is never materialized.  Everything downstream
(ESS, categorical sampling, acceptance ratios) works on log values, which
makes both conversions exact identities guarded by finiteness checks.
"""

import math

__all__ = ["score_of_tick", "tick_of_score"]


def score_of_tick(tick: float) -> float:
    """Log-space score for a tick total.

    The linear-space score would be e**tick; only its logarithm (= the tick
    itself) is ever represented.
    """
    if not math.isfinite(tick):
        raise ValueError(f"tick must be finite, got {tick!r}")
    return float(tick)


def tick_of_score(log_score: float) -> float:
    """Tick total for a log-space score; inverse of :func:`score_of_tick`."""
    if not math.isfinite(log_score):
        raise ValueError(f"log score must be finite, got {log_score!r}")
    return float(log_score)
