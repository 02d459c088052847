# -*- coding: utf-8 -*-

"""Dependency-free CartPole-v0 and FrozenLake-v0.

CartPole integrates the classic pole dynamics with explicit Euler steps. FrozenLake uses the standard 4x4 map
``SFFF/FHFH/FFFH/HFFG`` and is deterministic unless ``slippery`` is requested.

Both environments report time-limit endings separately from terminal states: :func:`step` only flags real
terminations (a fallen pole, a hole, the goal) and :func:`is_truncated` says when the step cap is reached.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .constants import CARTPOLE, ENV_DEFAULTS, ENV_KINDS, FROZENLAKE

__all__ = [
    'CartPoleState',
    'FrozenLakeState',
    'EnvState',
    'Transition',
    'reset',
    'step',
    'is_truncated',
    'n_actions',
    'env_kind_of',
    'FROZENLAKE_MAP',
    'HOLES',
    'GOAL',
]

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLE_MASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
X_THRESHOLD = 2.4
PHI_THRESHOLD = 12 * 2 * math.pi / 360

FROZENLAKE_MAP = ('SFFF', 'FHFH', 'FFFH', 'HFFG')
SIDE = len(FROZENLAKE_MAP)
N_CELLS = SIDE * SIDE
HOLES = frozenset({5, 7, 11, 12})
GOAL = 15

LEFT, DOWN, RIGHT, UP = range(4)


@dataclass(frozen=True)
class CartPoleState:
    """Cart position (m), velocity (m/s), pole angle (rad) and angular velocity (rad/s)."""

    x: float
    x_dot: float
    phi: float
    phi_dot: float
    steps: int = 0

    def as_array(self) -> np.ndarray:
        """Get the four physical components."""
        return np.array([self.x, self.x_dot, self.phi, self.phi_dot])


@dataclass(frozen=True)
class FrozenLakeState:
    """A cell index on the 4x4 map."""

    cell: int
    steps: int = 0

    def __post_init__(self):  # noqa: D105
        if not 0 <= self.cell < N_CELLS:
            raise ValueError(f'frozen lake cell must be in [0, {N_CELLS}), got {self.cell}')


EnvState = Union[CartPoleState, FrozenLakeState]


@dataclass(frozen=True)
class Transition:
    """One observation stored in the replay memory."""

    state: EnvState
    action: int
    reward: float
    next_state: EnvState
    terminal: bool


def n_actions(env_kind: str) -> int:
    """Count the actions of an environment kind."""
    _check_kind(env_kind)
    return ENV_DEFAULTS[env_kind]['n_actions']


def env_kind_of(state: EnvState) -> str:
    """Tell which environment a state belongs to."""
    if isinstance(state, CartPoleState):
        return CARTPOLE
    if isinstance(state, FrozenLakeState):
        return FROZENLAKE
    raise ValueError(f'not an environment state: {state!r}')


def _check_kind(env_kind: str) -> None:
    if env_kind not in ENV_KINDS:
        raise ValueError(f'unknown environment {env_kind!r}, valid environments are {{{", ".join(ENV_KINDS)}}}')


def reset(env_kind: str, rng: np.random.Generator) -> EnvState:
    """Start an episode.

    :param env_kind: ``cartpole`` or ``frozenlake``
    :param rng: Generator used for the cart-pole start state
    """
    _check_kind(env_kind)
    if env_kind == CARTPOLE:
        x, x_dot, phi, phi_dot = rng.uniform(-0.05, 0.05, size=4)
        return CartPoleState(float(x), float(x_dot), float(phi), float(phi_dot))
    return FrozenLakeState(0)


def _step_cartpole(state: CartPoleState, action: int) -> Tuple[CartPoleState, float, bool]:
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    cos_phi = math.cos(state.phi)
    sin_phi = math.sin(state.phi)

    temp = (force + POLE_MASS_LENGTH * state.phi_dot ** 2 * sin_phi) / TOTAL_MASS
    phi_acc = (GRAVITY * sin_phi - cos_phi * temp) / (
        HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_phi ** 2 / TOTAL_MASS)
    )
    x_acc = temp - POLE_MASS_LENGTH * phi_acc * cos_phi / TOTAL_MASS

    next_state = CartPoleState(
        x=state.x + TAU * state.x_dot,
        x_dot=state.x_dot + TAU * x_acc,
        phi=state.phi + TAU * state.phi_dot,
        phi_dot=state.phi_dot + TAU * phi_acc,
        steps=state.steps + 1,
    )
    terminal = abs(next_state.x) > X_THRESHOLD or abs(next_state.phi) > PHI_THRESHOLD
    return next_state, 1.0, terminal


def _move(cell: int, action: int) -> int:
    row, col = divmod(cell, SIDE)
    if action == LEFT:
        col = max(col - 1, 0)
    elif action == DOWN:
        row = min(row + 1, SIDE - 1)
    elif action == RIGHT:
        col = min(col + 1, SIDE - 1)
    else:
        row = max(row - 1, 0)
    return row * SIDE + col


def _step_frozenlake(
    state: FrozenLakeState,
    action: int,
    rng: Optional[np.random.Generator],
    slippery: bool,
) -> Tuple[FrozenLakeState, float, bool]:
    if state.cell in HOLES or state.cell == GOAL:
        return FrozenLakeState(state.cell, state.steps + 1), 0.0, True

    if slippery:
        if rng is None:
            raise ValueError('a slippery lake needs a random generator')
        action = (action + int(rng.integers(-1, 2))) % 4

    cell = _move(state.cell, action)
    reward = 1.0 if cell == GOAL else 0.0
    return FrozenLakeState(cell, state.steps + 1), reward, cell in HOLES or cell == GOAL


def step(
    state: EnvState,
    action: int,
    rng: Optional[np.random.Generator] = None,
    slippery: bool = False,
) -> Tuple[EnvState, float, bool]:
    """Advance an environment by one action.

    :param state: The current state
    :param action: 0/1 (push left/right) for cart-pole, 0-3 (left, down, right, up) for frozen lake
    :param rng: Only needed for a slippery lake
    :param slippery: Move the frozen lake agent perpendicular to the intent two times out of three
    :returns: next state, reward and whether the episode terminated
    :raises ValueError: if the action is not valid for the environment
    """
    kind = env_kind_of(state)
    if not 0 <= action < n_actions(kind):
        raise ValueError(f'invalid action {action} for {kind}')
    if kind == CARTPOLE:
        return _step_cartpole(state, action)
    return _step_frozenlake(state, action, rng, slippery)


def is_truncated(state: EnvState) -> bool:
    """Check if an episode has reached its step cap."""
    return state.steps >= ENV_DEFAULTS[env_kind_of(state)]['max_steps']
