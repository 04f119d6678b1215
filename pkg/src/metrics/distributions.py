"""Shape of a single distribution: temperature sharpening and entropy."""

import dataclasses
from typing import Sequence, Union

import numpy as np

from src.core.exceptions import BadTemperatureError
from src.human.distribution import OpinionDistribution

ArrayOrDistribution = Union[OpinionDistribution, Sequence[float], np.ndarray]


def _scale_probs(probs: np.ndarray, temperature: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logits = np.log(probs) / temperature
    logits = logits - np.max(logits)
    weights = np.exp(logits)
    return weights / weights.sum()


def temperature_scale(dist: ArrayOrDistribution, temperature: float) -> ArrayOrDistribution:
    """Sharpen (T < 1) or flatten (T > 1) a distribution: p_i ∝ p_i^(1/T).

    Computed in log space; zero entries stay zero. Returns the same kind of
    object it was given.
    """
    if not temperature > 0:
        raise BadTemperatureError(f"Temperature must be positive, got {temperature!r}")
    if isinstance(dist, OpinionDistribution):
        scaled = _scale_probs(dist.as_array(), temperature)
        return dataclasses.replace(dist, probs=tuple(scaled.tolist()))
    return _scale_probs(np.asarray(dist, dtype=float), temperature)


def entropy(dist: ArrayOrDistribution) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    probs = dist.as_array() if isinstance(dist, OpinionDistribution) else np.asarray(dist, dtype=float)
    nonzero = probs[probs > 0]
    return float(-np.sum(nonzero * np.log(nonzero)))
