"""Window scores for candidate models: regret-normalized gain times a regularizer.

The raw gain over a scoring window shrinks as optimization progresses; dividing
by sqrt((ln T)^(d+1) / T), the shape of the average GP-UCB regret bound at T
cumulative samples, makes windows from different stages of a run comparable.
Length-scale models are then discounted by (1 - lambda * ||theta||) and
monotonicity models boosted by (1 + lambda * ||theta||).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "LENGTH_SCALE",
    "MONOTONICITY",
    "regret_normalizer",
    "length_scale_lambda",
    "monotonicity_lambda",
    "default_lambda",
    "score_model",
]

LENGTH_SCALE = "length_scale"
MONOTONICITY = "monotonicity"
MODES = (LENGTH_SCALE, MONOTONICITY)

THETA_SPAN = 6.0  # |theta| range of a monotonicity component
LENGTH_SCALE_MAX = 0.6


def regret_normalizer(T: int, d: int) -> float:
    """sqrt((ln T)^(d+1) / T); requires T >= 2 so the numerator is positive."""
    if T < 2:
        raise ValueError(f"cumulative sample count must be >= 2, got {T}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return float(np.sqrt(np.log(T) ** (d + 1) / T))


def length_scale_lambda(d: int) -> float:
    """Regularization weight 1 / (0.6 * d) for length-scale search."""
    return 1.0 / (LENGTH_SCALE_MAX * d)


def monotonicity_lambda(d: int) -> float:
    """Regularization weight 1 / (2 * 6 * d) for monotonicity search."""
    return 1.0 / (2.0 * THETA_SPAN * d)


def default_lambda(mode: str, d: int) -> float:
    if mode == LENGTH_SCALE:
        return length_scale_lambda(d)
    if mode == MONOTONICITY:
        return monotonicity_lambda(d)
    raise ValueError(f"unknown mode {mode!r}")


def score_model(gain: float, T: int, d: int, theta, lam: float, mode: str) -> float:
    """Score one completed window of a model.

    gain is the best-so-far improvement over the window (standardized output
    units, never negative); T counts inner samples. Zero gain scores zero
    regardless of T or theta.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if gain < -1e-12:
        raise ValueError(f"gain must be non-negative (best-so-far is monotone), got {gain}")
    if gain <= 0.0:
        return 0.0
    base = gain / regret_normalizer(T, d)
    norm = float(np.linalg.norm(np.asarray(theta, dtype=float)))
    if mode == LENGTH_SCALE:
        return base * (1.0 - lam * norm)
    return base * (1.0 + lam * norm)
