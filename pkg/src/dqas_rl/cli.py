# -*- coding: utf-8 -*-

"""Command line interface for DQAS-RL.

Exit codes: 0 on success, 1 for configuration and usage errors (a bad flag value such as ``--agents abc``) and 2 for
I/O errors.
"""

import functools
import logging
import sys
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterator, Optional

import click

from .config import ConfigError, ExperimentConfig, parse_config
from .constants import ENV_KINDS, POOL_NAMES
from .experiment import evaluate_policy, load_policy, run_experiment
from .noise import NoiseSpec
from .utils import get_version

__all__ = [
    'main',
]

logger = logging.getLogger(__name__)

_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def _parse_noise(text: Optional[str], trajectories: int) -> Optional[NoiseSpec]:
    if text is None:
        return None
    try:
        return NoiseSpec.parse(text, trajectories)
    except ValueError as e:
        raise ConfigError(str(e), 'noise') from None


@contextmanager
def _usage_errors_exit_one() -> Iterator[None]:
    try:
        yield
    except click.UsageError as e:
        e.exit_code = 1
        raise


class _Group(click.Group):
    """A command group whose usage errors share the exit code of configuration errors."""

    def make_context(self, *args, **kwargs):  # noqa: D102
        with _usage_errors_exit_one():
            return super().make_context(*args, **kwargs)

    def invoke(self, ctx):  # noqa: D102
        with _usage_errors_exit_one():
            return super().invoke(ctx)


def _handle_errors(f: Callable[..., Any]) -> Callable[..., Any]:
    """Turn configuration and I/O errors into a message and an exit code."""
    @functools.wraps(f)
    def wrapped(*args, **kwargs):
        verbose = kwargs.pop('verbose')
        logging.basicConfig(level=_LEVELS.get(verbose, logging.DEBUG), format='%(asctime)s %(name)s %(message)s')
        try:
            return f(*args, **kwargs)
        except ConfigError as e:
            click.echo(f'configuration error: {e}', err=True)
            sys.exit(1)
        except OSError as e:
            click.echo(f'I/O error: {e}', err=True)
            sys.exit(2)

    return click.option('-v', '--verbose', count=True, help='Repeat for more logging')(wrapped)


def _experiment_options(f: Callable[..., Any]) -> Callable[..., Any]:
    for option in reversed([
        click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='JSON configuration file'),
        click.option('--env', help=f'Environment, one of {", ".join(ENV_KINDS)}'),
        click.option('--agents', type=int, help='Number of independent agents'),
        click.option('--seed', type=int, help='Base seed; agent i uses seed + i'),
        click.option('--jobs', type=int, help='Agents trained in parallel'),
        click.option('--noise', help='Also evaluate under depolarizing noise, given as p1,p2'),
        click.option('--trajectories', type=int, default=1000, show_default=True, help='Noise trajectories'),
        click.option('--output-dir', type=click.Path(file_okay=False), help='Where results are written'),
        click.option('--progress/--no-progress', default=True, help='Show progress bars'),
    ]):
        f = option(f)
    return f


def _resolve(config_path: Optional[str], noise: Optional[str], trajectories: int, **flags) -> ExperimentConfig:
    overrides: Dict[str, Any] = dict(flags)
    overrides['noise'] = _parse_noise(noise, trajectories)
    cfg = parse_config(config_path, overrides)
    logger.info('writing results to %s', cfg.output_dir)
    return cfg


@click.group(cls=_Group)
@click.version_option(get_version())
def main():
    """Differentiable quantum architecture search for deep Q-learning."""


@main.command()
@_experiment_options
@click.option('--pool', help=f'Operation pool to search, one of {", ".join(POOL_NAMES)}')
@_handle_errors
def run(config_path, env, pool, agents, seed, jobs, noise, trajectories, output_dir, progress):
    """Search architectures with several agents, then rank and evaluate them."""
    cfg = _resolve(
        config_path, noise, trajectories,
        env=env, pool=pool, agents=agents, seed=seed, jobs=jobs, output_dir=output_dir,
    )
    sys.exit(run_experiment(cfg, progress=progress))


@main.command()
@_experiment_options
@_handle_errors
def baseline(config_path, env, agents, seed, jobs, noise, trajectories, output_dir, progress):
    """Train the fixed ry/rz/cz circuit."""
    cfg = _resolve(
        config_path, noise, trajectories,
        env=env, agents=agents, seed=seed, jobs=jobs, output_dir=output_dir,
    )
    sys.exit(run_experiment(cfg, baseline=True, progress=progress))


@main.command()
@_experiment_options
@click.option('--arch', 'arch_path', required=True, type=click.Path(dir_okay=False), help='Architecture JSON')
@_handle_errors
def retrain(config_path, env, agents, seed, jobs, noise, trajectories, output_dir, progress, arch_path):
    """Tune a stored architecture from fresh parameters."""
    sc, arch, net = load_policy(arch_path, env)
    cfg = _resolve(
        config_path, noise, trajectories,
        env=net.spec.env_kind, agents=agents, seed=seed, jobs=jobs, output_dir=output_dir,
    )
    sys.exit(run_experiment(cfg, fixed=(sc, arch), progress=progress))


@main.command(name='eval')
@click.option('--arch', 'arch_path', required=True, type=click.Path(dir_okay=False), help='Architecture JSON')
@click.option('--env', help='Environment; defaults to the one named in the file')
@click.option('--noise', help='Depolarizing rates p1,p2')
@click.option('--trajectories', type=int, default=1000, show_default=True, help='Noise trajectories')
@click.option('--episodes', type=int, default=100, show_default=True, help='Evaluation episodes')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--slippery', is_flag=True, help='Use the slippery lake')
@_handle_errors
def evaluate(arch_path, env, noise, trajectories, episodes, seed, slippery):
    """Evaluate a stored architecture with its greedy policy."""
    if episodes < 1:
        raise ConfigError(f'episodes must be at least 1, got {episodes}', 'episodes')
    report = evaluate_policy(
        arch_path, episodes, env=env, noise=_parse_noise(noise, trajectories), seed=seed, slippery=slippery,
    )
    click.echo(f'mean return over {len(report.returns)} episodes: {report.mean_return:.4f}')


if __name__ == '__main__':
    main()
