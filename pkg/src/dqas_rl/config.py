# -*- coding: utf-8 -*-

"""Configuration for DQAS-RL training runs and experiments.

Configuration files are flat JSON objects whose keys are the field names of :class:`ExperimentConfig`. Values are
resolved with the precedence command line flags > file > defaults, and environment-dependent defaults (discount,
solve threshold, initial output weight) are filled in from :data:`dqas_rl.constants.ENV_DEFAULTS`.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Mapping, Optional, Union

from .constants import ENV_DEFAULTS, ENV_KINDS, OP4, POOL_NAMES, RESOLVED_CONFIG_NAME, RUNS_DIR
from .noise import NoiseSpec

__all__ = [
    'ConfigError',
    'TrainConfig',
    'ExperimentConfig',
    'parse_config',
    'write_resolved_config',
]

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised when a configuration can not be resolved."""

    def __init__(self, message: str, key: Optional[str] = None):  # noqa: D107
        super().__init__(message)
        self.key = key


@dataclass
class TrainConfig:
    """Everything one agent's training loop needs."""

    env: str = 'cartpole'
    pool: str = OP4
    B: int = 5
    p: int = 4
    search_episodes: int = 300
    tune_episodes: int = 1200
    batch_size: int = 16
    arch_batch_size: int = 8
    lr_theta: float = 0.01
    lr_alpha: float = 0.1
    lr_w_in: float = 0.01
    lr_w_out: float = 0.1
    gamma: Optional[float] = None
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.99
    epsilon_min: float = 0.01
    target_sync_interval: int = 20
    prune_interval: int = 50
    min_active: int = 2
    window: int = 100
    r_max: Optional[float] = None
    w_out_init: Optional[float] = None
    replay_capacity: int = 10000
    share_block_params: bool = False
    slippery: bool = False
    seed: int = 1234

    def __post_init__(self):  # noqa: D105
        if self.env not in ENV_KINDS:
            raise ConfigError(f'unknown env {self.env!r}, valid environments are {{{", ".join(ENV_KINDS)}}}', 'env')
        if self.pool not in POOL_NAMES:
            raise ConfigError(f'unknown pool {self.pool!r}, valid pools are {{{", ".join(POOL_NAMES)}}}', 'pool')
        defaults = ENV_DEFAULTS[self.env]
        if self.gamma is None:
            self.gamma = defaults['gamma']
        if self.r_max is None:
            self.r_max = defaults['r_max']
        if self.w_out_init is None:
            self.w_out_init = defaults['w_out_init']
        self._validate()

    def _validate(self) -> None:
        for key in ('B', 'p', 'batch_size', 'arch_batch_size', 'target_sync_interval', 'prune_interval',
                    'min_active', 'window', 'replay_capacity'):
            if getattr(self, key) < 1:
                raise ConfigError(f'{key} must be at least 1, got {getattr(self, key)}', key)
        for key in ('search_episodes', 'tune_episodes'):
            if getattr(self, key) < 0:
                raise ConfigError(f'{key} must not be negative, got {getattr(self, key)}', key)
        for key in ('lr_theta', 'lr_alpha', 'lr_w_in', 'lr_w_out'):
            if getattr(self, key) <= 0:
                raise ConfigError(f'{key} must be positive, got {getattr(self, key)}', key)
        for key in ('epsilon_start', 'epsilon_decay', 'epsilon_min', 'gamma'):
            if not 0.0 <= getattr(self, key) <= 1.0:
                raise ConfigError(f'{key} must be in [0, 1], got {getattr(self, key)}', key)
        if self.w_out_init < 0:
            raise ConfigError(f'w_out_init must not be negative, got {self.w_out_init}', 'w_out_init')
        if self.search_episodes > 0 and self.arch_batch_size < 2:
            raise ConfigError('the architecture search needs arch_batch_size >= 2', 'arch_batch_size')

    @property
    def total_episodes(self) -> int:
        """Get the search and tuning budgets combined."""
        return self.search_episodes + self.tune_episodes


@dataclass
class ExperimentConfig(TrainConfig):
    """A training configuration plus the multi-agent, ranking and evaluation settings."""

    agents: int = 5
    K: Optional[int] = None
    eval_episodes: int = 100
    noise: Optional[NoiseSpec] = None
    output_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):  # noqa: D105
        super().__post_init__()
        if self.K is None:
            self.K = min(3, self.agents)
        for key in ('agents', 'K', 'eval_episodes', 'jobs'):
            if getattr(self, key) < 1:
                raise ConfigError(f'{key} must be at least 1, got {getattr(self, key)}', key)
        if self.K > self.agents:
            raise ConfigError(f'K={self.K} exceeds the number of agents ({self.agents})', 'K')
        if self.output_dir is None:
            self.output_dir = os.path.join(RUNS_DIR, f'{self.env}_{self.pool}_seed{self.seed}')

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        """Get the training part, optionally with a different seed."""
        values = {f.name: getattr(self, f.name) for f in fields(TrainConfig)}
        if seed is not None:
            values['seed'] = seed
        return TrainConfig(**values)

    def to_json(self) -> Dict[str, Any]:
        """Serialize every effective value."""
        rv = asdict(self)
        rv['noise'] = None if self.noise is None else self.noise.to_json()
        return rv


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _expected_type(key: str) -> Any:
    hint = _TYPES[key]
    for scalar in (bool, int, float, str):
        if hint in (scalar, Optional[scalar]):
            return scalar
    return hint


def _coerce(key: str, value: Any) -> Any:
    if key not in _TYPES:
        raise ConfigError(f'unknown configuration key {key!r}', key)
    if value is None:
        if _TYPES[key] is bool or _TYPES[key] in (int, float, str):
            raise ConfigError(f'{key} must not be null', key)
        return None
    if key == 'noise':
        if isinstance(value, NoiseSpec):
            return value
        if not isinstance(value, Mapping):
            raise ConfigError(f'noise must be an object with p1, p2 and trajectories, got {type(value).__name__}', key)
        try:
            return NoiseSpec.from_json(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f'invalid noise: {e}', key) from None

    expected = _expected_type(key)
    if expected is bool:
        ok = isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(f'{key} must be of type {expected.__name__}, got {type(value).__name__}', key)
    return value


def parse_config(
    path: Union[None, str, os.PathLike] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """Resolve an experiment configuration.

    :param path: Optional JSON file; missing keys take their defaults
    :param overrides: Values from command line flags, which beat the file. ``None`` values are ignored.
    :raises ConfigError: on unknown keys, type mismatches or invalid values
    :raises OSError: if the file can not be read
    """
    values: Dict[str, Any] = {}
    if path is not None:
        with open(path) as file:
            try:
                data = json.load(file)
            except json.JSONDecodeError as e:
                raise ConfigError(f'{path} is not valid JSON: {e}') from None
        if not isinstance(data, dict):
            raise ConfigError(f'{path} must hold a JSON object')
        for key, value in data.items():
            values[key] = _coerce(key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _coerce(key, value)

    cfg = ExperimentConfig(**values)
    logger.debug('resolved configuration: %s', cfg)
    return cfg


def write_resolved_config(cfg: ExperimentConfig, directory: Union[str, os.PathLike]) -> str:
    """Echo every effective value to ``resolved_config.json`` in a directory."""
    path = os.path.join(directory, RESOLVED_CONFIG_NAME)
    with open(path, 'w') as file:
        json.dump(cfg.to_json(), file, indent=2, sort_keys=True)
        file.write('\n')
    return path
