# -*- coding: utf-8 -*-

"""Run multi-agent experiments and persist their results.

An experiment trains ``agents`` independent agents (agent ``i`` is seeded with ``seed + i``), ranks them by how
early they solved the environment, evaluates the top ``K`` greedily without noise and, when configured, under
depolarizing noise, and writes everything to the output directory:

- ``resolved_config.json``, every effective configuration value
- ``agent_<i>_train.csv``, one row per training episode
- ``agent_<i>_alpha.csv``, the placeholder probabilities at every snapshot
- ``arch_rank_<r>.json``, the rank ``r`` architecture with its angles and weights (ranks start at 1)
- ``eval_<r>.csv``, its evaluation returns
- ``summary.json``, per-agent and per-rank figures
"""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from tqdm import tqdm

from .config import ConfigError, ExperimentConfig, TrainConfig, write_resolved_config
from .constants import ALPHA_CSV_HEADER, ENV_KINDS, EVAL_CSV_HEADER, SUMMARY_NAME, TRAIN_CSV_HEADER
from .noise import NoiseSpec
from .qdqn import QNetwork, make_network
from .supernet import (
    ArchitectureSample, SuperCircuit, architecture_from_json, architecture_to_json, build_baseline,
)
from .trainer import AgentResult, EvalReport, evaluate, rank_agents, retrain, train_agent
from .utils import make_rng, spawn_seeds

__all__ = [
    'Evaluation',
    'run_experiment',
    'write_outputs',
    'train_eval_correlation',
    'load_policy',
    'evaluate_policy',
]

logger = logging.getLogger(__name__)

_WRITE_CHECK_NAME = '.write_check'


class Evaluation(NamedTuple):
    """The evaluation reports of one ranked agent."""

    rank: int
    result: AgentResult
    reports: List[EvalReport]

    @property
    def mean_return(self) -> float:
        """Get the noiseless mean return."""
        return self.reports[0].mean_return

    @property
    def noisy_mean_return(self) -> Optional[float]:
        """Get the noisy mean return, if a noisy evaluation was made."""
        for report in self.reports:
            if report.noisy:
                return report.mean_return
        return None


class _Task(NamedTuple):
    cfg: TrainConfig
    agent: int
    baseline: bool
    fixed: Optional[Tuple[SuperCircuit, ArchitectureSample]]


def _train(task: _Task) -> AgentResult:
    cfg = task.cfg
    rng = make_rng(cfg.seed)
    if task.fixed is not None:
        sc, arch = task.fixed
        return retrain(cfg, sc, arch, rng, agent=task.agent)
    if task.baseline:
        sc, arch = build_baseline(rng, cfg.B, share_block_params=cfg.share_block_params)
        return train_agent(replace(cfg, search_episodes=0), rng, sc=sc, arch=arch, agent=task.agent)
    return train_agent(cfg, rng, agent=task.agent)


def _check_writable(directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    marker = os.path.join(directory, _WRITE_CHECK_NAME)
    with open(marker, 'w') as file:
        file.write('')
    os.remove(marker)


def _train_all(tasks: Sequence[_Task], jobs: int, progress: bool) -> List[AgentResult]:
    if jobs == 1:
        return [_train(task) for task in tqdm(tasks, desc='agents', disable=not progress)]
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(tqdm(executor.map(_train, tasks), total=len(tasks), desc='agents', disable=not progress))


def _evaluate_ranked(cfg: ExperimentConfig, ranked: Sequence[AgentResult], progress: bool) -> List[Evaluation]:
    evaluations = []
    for rank, result in enumerate(ranked, start=1):
        plain_seed, noisy_seed = spawn_seeds(result.seed, 2)
        reports = [evaluate(
            result.supercircuit, result.architecture, result.network, cfg.eval_episodes,
            rng=make_rng(plain_seed), slippery=cfg.slippery, progress=progress,
        )]
        if cfg.noise is not None:
            reports.append(evaluate(
                result.supercircuit, result.architecture, result.network, cfg.eval_episodes,
                noise=cfg.noise, rng=make_rng(noisy_seed), slippery=cfg.slippery, progress=progress,
            ))
        logger.info('rank %d is agent %d with mean return %.3f', rank, result.agent, reports[0].mean_return)
        evaluations.append(Evaluation(rank, result, reports))
    return evaluations


def run_experiment(
    cfg: ExperimentConfig,
    baseline: bool = False,
    fixed: Optional[Tuple[SuperCircuit, ArchitectureSample]] = None,
    progress: bool = False,
) -> int:
    """Train, rank, evaluate and write every artifact.

    :param cfg: The resolved configuration
    :param baseline: Train the fixed ry/rz/cz circuit instead of searching
    :param fixed: Retrain this architecture from fresh parameters instead of searching
    :param progress: Show progress bars
    :returns: the exit status, 0 on completion
    :raises OSError: if the output directory can not be written, checked before any training
    """
    t = time.time()
    _check_writable(cfg.output_dir)
    write_resolved_config(cfg, cfg.output_dir)

    tasks = [
        _Task(cfg.train_config(seed=cfg.seed + agent), agent, baseline, fixed)
        for agent in range(cfg.agents)
    ]
    results = _train_all(tasks, cfg.jobs, progress)
    logger.info('trained %d agents in %.2f seconds', len(results), time.time() - t)

    evaluations = _evaluate_ranked(cfg, rank_agents(results, cfg.K), progress)
    write_outputs(results, evaluations, cfg.output_dir, env=cfg.env)
    logger.info('finished experiment in %.2f seconds, results in %s', time.time() - t, cfg.output_dir)
    return 0


def train_eval_correlation(evaluations: Sequence[Evaluation]) -> Optional[float]:
    """Compute the Spearman rank correlation between final training returns and evaluation means.

    :returns: ``None`` with fewer than two agents or when either side is constant
    """
    if len(evaluations) < 2:
        return None
    train = [evaluation.result.final_return for evaluation in evaluations]
    test = [evaluation.mean_return for evaluation in evaluations]
    if len(set(train)) < 2 or len(set(test)) < 2:
        return None
    rho, _ = spearmanr(train, test)
    if np.isnan(rho):
        return None
    return float(rho)


def _write_csv(rows: Sequence[Sequence[Any]], header: Sequence[str], path: str) -> None:
    try:
        pd.DataFrame(list(rows), columns=list(header)).to_csv(path, index=False)
    except OSError as e:
        raise OSError(f'could not write {path}: {e}') from e


def _write_json(data: Dict[str, Any], path: str) -> None:
    try:
        with open(path, 'w') as file:
            json.dump(data, file, indent=2)
            file.write('\n')
    except OSError as e:
        raise OSError(f'could not write {path}: {e}') from e


def _alpha_rows(result: AgentResult) -> List[Tuple[int, int, int, str, float]]:
    pool = result.supercircuit.pool
    return [
        (episode, placeholder, op_index, pool.ops[op_index].name, float(probs[placeholder, op_index]))
        for episode, probs in result.alpha_trace
        for placeholder in range(probs.shape[0])
        for op_index in range(probs.shape[1])
    ]


def _summary(results: Sequence[AgentResult], evaluations: Sequence[Evaluation]) -> Dict[str, Any]:
    return {
        'agents': [
            {
                'agent': result.agent,
                'seed': result.seed,
                'episodes': len(result.records),
                'episodes_to_solve': result.episodes_to_solve,
                'final_return': result.final_return,
                'architecture': result.supercircuit.describe(result.architecture),
            }
            for result in results
        ],
        'ranking': [
            {
                'rank': evaluation.rank,
                'agent': evaluation.result.agent,
                'eval_mean': evaluation.mean_return,
                'noisy_eval_mean': evaluation.noisy_mean_return,
            }
            for evaluation in evaluations
        ],
        'train_eval_correlation': train_eval_correlation(evaluations),
    }


def write_outputs(
    results: Sequence[AgentResult],
    evaluations: Sequence[Evaluation],
    output_dir: Union[str, os.PathLike],
    env: Optional[str] = None,
) -> None:
    """Write the training traces, ranked architectures, evaluation returns and summary.

    :param results: Every agent's result, in agent order
    :param evaluations: The evaluated agents, in rank order
    :param output_dir: An existing, writable directory
    :param env: Environment name stored with each architecture; taken from the networks when not given
    :raises OSError: naming the file that could not be written
    """
    for result in results:
        _write_csv(
            [
                (r.episode, r.return_, r.avg_return, r.loss, r.epsilon, r.phase)
                for r in result.records
            ],
            TRAIN_CSV_HEADER,
            os.path.join(output_dir, f'agent_{result.agent}_train.csv'),
        )
        _write_csv(_alpha_rows(result), ALPHA_CSV_HEADER, os.path.join(output_dir, f'agent_{result.agent}_alpha.csv'))

    for evaluation in evaluations:
        result = evaluation.result
        network = result.network
        _write_json(
            architecture_to_json(
                result.supercircuit, result.architecture,
                env=env or network.spec.env_kind, w_in=network.spec.w_in, w_out=network.head.w_out,
            ),
            os.path.join(output_dir, f'arch_rank_{evaluation.rank}.json'),
        )
        _write_csv(
            [
                (episode, value, int(report.noisy))
                for report in evaluation.reports
                for episode, value in enumerate(report.returns, start=1)
            ],
            EVAL_CSV_HEADER,
            os.path.join(output_dir, f'eval_{evaluation.rank}.csv'),
        )

    _write_json(_summary(results, evaluations), os.path.join(output_dir, SUMMARY_NAME))


def load_policy(
    path: Union[str, os.PathLike],
    env: Optional[str] = None,
) -> Tuple[SuperCircuit, ArchitectureSample, QNetwork]:
    """Load an architecture document and rebuild the policy it describes.

    Missing weights take their initial values. An architecture found on another environment keeps its pool, choices
    and angles, but its input weights, output weights and observables are rebuilt for ``env``.

    :param path: An ``arch_rank_<r>.json`` file
    :param env: The environment; defaults to the one stored in the file
    :raises ConfigError: if no environment is known, it is unknown, or the weights have the wrong shape
    :raises OSError: if the file can not be read
    """
    with open(path) as file:
        try:
            data = json.load(file)
        except json.JSONDecodeError as e:
            raise ConfigError(f'{path} is not valid JSON: {e}') from None
    try:
        sc, arch, extras = architecture_from_json(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f'{path} is not an architecture document: {e}') from None

    stored = extras.get('env')
    if env is None:
        env = stored
    if env is None:
        raise ConfigError(f'{path} does not name an environment, pass one explicitly', 'env')
    if env not in ENV_KINDS:
        raise ConfigError(f'unknown env {env!r}, valid environments are {{{", ".join(ENV_KINDS)}}}', 'env')

    net = make_network(sc, env)
    if stored is not None and stored != env:
        logger.warning('%s was found on %s, using fresh input and output weights for %s', path, stored, env)
        return sc, arch, net
    w_in = extras.get('w_in', net.spec.w_in)
    w_out = extras.get('w_out', net.head.w_out)
    if w_in.shape != net.spec.w_in.shape or w_out.shape != net.head.w_out.shape:
        raise ConfigError(f'{path} holds weights of the wrong shape')
    return sc, arch, net.with_values(sc.theta, w_in, w_out)


def evaluate_policy(
    path: Union[str, os.PathLike],
    episodes: int,
    env: Optional[str] = None,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    slippery: bool = False,
) -> EvalReport:
    """Evaluate a stored architecture greedily."""
    sc, arch, net = load_policy(path, env)
    return evaluate(sc, arch, net, episodes, noise=noise, rng=make_rng(seed), slippery=slippery)
