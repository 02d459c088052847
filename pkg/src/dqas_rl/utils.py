# -*- coding: utf-8 -*-

"""Utilities for DQAS-RL."""

from typing import Sequence

import numpy as np

from .constants import VERSION

__all__ = [
    'get_version',
    'make_rng',
    'spawn_seeds',
    'trailing_mean',
]


def get_version() -> str:
    """Get the software version of DQAS-RL."""
    return VERSION


def make_rng(seed: int) -> np.random.Generator:
    """Build the generator used for everything an agent does."""
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, count: int) -> Sequence[int]:
    """Derive ``count`` independent integer seeds from a base seed.

    :param seed: The base seed
    :param count: How many child seeds to derive
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def trailing_mean(values: Sequence[float], window: int) -> float:
    """Average the last ``window`` values, or all of them when fewer exist."""
    if not values:
        return 0.0
    return float(np.mean(values[-window:]))
