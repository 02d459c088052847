# -*- coding: utf-8 -*-

"""Training, ranking and evaluation of RL-DQAS agents.

One agent first searches: every episode acts with an architecture sampled from the super-circuit, and every
environment step (once the replay memory holds a minibatch) samples a batch of architectures, evaluates the
summed local losses and takes one Adam step on the angles, the architecture parameters and the input/output
weights. Every ``prune_interval`` search episodes the least probable candidate of each placeholder is dropped. When
the search budget is spent the per-placeholder argmax architecture is frozen and only angles and weights are tuned.
Training stops early once the trailing mean return reaches the environment's threshold.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .config import TrainConfig
from .constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, SEARCH_PHASE, TUNE_PHASE
from .envs import Transition, is_truncated, reset, step
from .noise import NoiseSpec, noisy_expectations
from .qdqn import (
    QNetwork, QNetworkPair, loss_and_grads, make_network, policy_circuit, q_values, sync_target,
)
from .supernet import (
    ArchitectureSample, SuperCircuit, argmax_architecture, build_pool, placeholder_probs, prune,
    sample_architecture,
)
from .utils import trailing_mean

__all__ = [
    'ReplayBuffer',
    'AdamState',
    'EpisodeRecord',
    'AgentResult',
    'EvalReport',
    'epsilon_greedy',
    'adam_update',
    'train_agent',
    'retrain',
    'rank_agents',
    'evaluate',
]

logger = logging.getLogger(__name__)


class ReplayBuffer:
    """A bounded first-in first-out memory of transitions."""

    def __init__(self, capacity: int):
        """Build an empty memory.

        :param capacity: The most transitions kept; the oldest is evicted first
        """
        if capacity < 1:
            raise ValueError(f'capacity must be at least 1, got {capacity}')
        self.capacity = capacity
        self._items: List[Transition] = []
        #: position of the oldest transition once the memory is full
        self._start = 0

    def __len__(self) -> int:  # noqa: D105
        return len(self._items)

    @property
    def transitions(self) -> List[Transition]:
        """Get the stored transitions, oldest first."""
        return self._items[self._start:] + self._items[:self._start]

    def push(self, transition: Transition) -> None:
        """Store a transition, overwriting the oldest one when full."""
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._start] = transition
            self._start = (self._start + 1) % self.capacity

    def sample(self, size: int, rng: np.random.Generator) -> List[Transition]:
        """Draw ``size`` distinct transitions uniformly."""
        if size > len(self):
            raise ValueError(f'can not sample {size} transitions from {len(self)}')
        n = len(self._items)
        return [self._items[(self._start + i) % n] for i in rng.choice(n, size=size, replace=False)]


@dataclass(frozen=True)
class AdamState:
    """Moment estimates, step counters and learning rates for named parameter groups."""

    lr: Mapping[str, float]
    m: Mapping[str, np.ndarray]
    v: Mapping[str, np.ndarray]
    t: Mapping[str, int]
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPSILON

    @classmethod
    def create(cls, params: Mapping[str, np.ndarray], lr: Mapping[str, float]) -> 'AdamState':
        """Start with zero moments for every group."""
        return cls(
            lr=dict(lr),
            m={name: np.zeros_like(value, dtype=float) for name, value in params.items()},
            v={name: np.zeros_like(value, dtype=float) for name, value in params.items()},
            t={name: 0 for name in params},
        )


def adam_update(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    st: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Take one bias-corrected Adam step on every group that has a gradient.

    Groups without a gradient keep their value and their moments.

    :param params: Current values by group name
    :param grads: Gradients by group name, a subset of ``params``
    :param st: Optimizer state
    :returns: new values and new optimizer state; the inputs are not modified
    :raises ValueError: if a gradient's shape does not match its parameter or accumulators
    """
    new_params = dict(params)
    m, v, t = dict(st.m), dict(st.v), dict(st.t)
    for name, grad in grads.items():
        value = params[name]
        if grad.shape != value.shape or st.m[name].shape != value.shape:
            raise ValueError(f'shape mismatch in group {name}: {value.shape} vs {grad.shape}')
        t[name] = st.t[name] + 1
        m[name] = st.beta1 * st.m[name] + (1 - st.beta1) * grad
        v[name] = st.beta2 * st.v[name] + (1 - st.beta2) * grad * grad
        m_hat = m[name] / (1 - st.beta1 ** t[name])
        v_hat = v[name] / (1 - st.beta2 ** t[name])
        new_params[name] = value - st.lr[name] * m_hat / (np.sqrt(v_hat) + st.eps)
    return new_params, replace(st, m=m, v=v, t=t)


def epsilon_greedy(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Pick a uniformly random action with probability ``eps``, otherwise the first maximal Q-value."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f'epsilon must be in [0, 1], got {eps}')
    if rng.random() < eps:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


class EpisodeRecord(NamedTuple):
    """One row of a training trace."""

    episode: int
    return_: float
    avg_return: float
    loss: float
    epsilon: float
    phase: str


@dataclass
class AgentResult:
    """What one agent's training produced."""

    agent: int
    seed: int
    window: int
    records: List[EpisodeRecord]
    #: ``(episode, placeholder probabilities)`` snapshots
    alpha_trace: List[Tuple[int, np.ndarray]]
    supercircuit: SuperCircuit
    architecture: ArchitectureSample
    network: QNetwork
    episodes_to_solve: Optional[int] = None
    gradient_steps: int = 0

    @property
    def returns(self) -> List[float]:
        """Get the per-episode returns."""
        return [record.return_ for record in self.records]

    @property
    def losses(self) -> List[float]:
        """Get the per-episode mean global losses."""
        return [record.loss for record in self.records]

    @property
    def final_return(self) -> float:
        """Get the trailing mean return at the end of training."""
        return trailing_mean(self.returns, self.window)


@dataclass
class EvalReport:
    """Returns of greedy evaluation episodes."""

    returns: List[float] = field(default_factory=list)
    noisy: bool = False

    @property
    def mean_return(self) -> float:
        """Average the returns."""
        if not self.returns:
            logger.warning('mean of an empty evaluation report')
            return 0.0
        return float(np.mean(self.returns))


def _gradient_step(
    sc: SuperCircuit,
    pair: QNetworkPair,
    adam: AdamState,
    arch_batch: Sequence[ArchitectureSample],
    minibatch: Sequence[Transition],
    gamma: float,
    searching: bool,
) -> Tuple[SuperCircuit, QNetworkPair, AdamState, float]:
    grads = loss_and_grads(sc, arch_batch, pair, minibatch, gamma, with_alpha=searching)
    params = {'theta': pair.pred.theta, 'w_in': pair.pred.spec.w_in, 'w_out': pair.pred.head.w_out}
    updates = {'theta': grads.theta, 'w_in': grads.w_in, 'w_out': grads.w_out}
    if searching:
        params['alpha'] = sc.alpha
        updates['alpha'] = grads.alpha
    params, adam = adam_update(params, updates, adam)

    pair = replace(pair, pred=pair.pred.with_values(
        params['theta'], params['w_in'], np.maximum(params['w_out'], 0.0),
    ))
    if searching:
        sc = sc.with_alpha(params['alpha'])
    return sc, pair.tick(), adam, grads.total


def train_agent(
    cfg: TrainConfig,
    rng: np.random.Generator,
    sc: Optional[SuperCircuit] = None,
    arch: Optional[ArchitectureSample] = None,
    agent: int = 0,
    progress: bool = False,
) -> AgentResult:
    """Run the architecture search and the tuning phase for one agent.

    :param cfg: Training configuration
    :param rng: The agent's own generator; nothing else draws from it
    :param sc: Start from this super-circuit instead of a fresh one built from ``cfg.pool``
    :param arch: Skip the search and tune this architecture
    :param agent: Index used in logs and the result
    :param progress: Show a progress bar
    """
    t = time.time()
    if sc is None:
        sc = SuperCircuit.create(build_pool(cfg.pool), cfg.p, cfg.B, rng, share_block_params=cfg.share_block_params)
    net = make_network(sc, cfg.env, cfg.w_out_init)
    pair = sync_target(QNetworkPair(pred=net, target=net))
    adam = AdamState.create(
        {'theta': net.theta, 'alpha': sc.alpha, 'w_in': net.spec.w_in, 'w_out': net.head.w_out},
        {'theta': cfg.lr_theta, 'alpha': cfg.lr_alpha, 'w_in': cfg.lr_w_in, 'w_out': cfg.lr_w_out},
    )
    buffer = ReplayBuffer(cfg.replay_capacity)
    search_budget = 0 if arch is not None else cfg.search_episodes
    tuned = arch

    records: List[EpisodeRecord] = []
    returns: List[float] = []
    alpha_trace = [(0, placeholder_probs(sc))]
    epsilon = cfg.epsilon_start
    episodes_to_solve = None
    gradient_steps = 0

    it = tqdm(range(search_budget + cfg.tune_episodes), desc=f'agent {agent}', disable=not progress, leave=False)
    for episode in it:
        searching = episode < search_budget
        if not searching and tuned is None:
            tuned = argmax_architecture(sc)
            if search_budget and alpha_trace[-1][0] != episode:
                alpha_trace.append((episode, placeholder_probs(sc)))
            logger.info('agent %d fixed architecture %s after %d episodes', agent, sc.describe(tuned), episode)
        acting = sample_architecture(sc, rng) if searching else tuned

        state = reset(cfg.env, rng)
        episode_return = 0.0
        losses = []
        while True:
            q = q_values(sc, acting, pair.pred.theta, pair.pred.spec, pair.pred.head, state)
            action = epsilon_greedy(q, epsilon, rng)
            next_state, reward, terminal = step(state, action, rng, cfg.slippery)
            buffer.push(Transition(state, action, reward, next_state, terminal))
            episode_return += reward
            state = next_state

            if len(buffer) >= cfg.batch_size:
                minibatch = buffer.sample(cfg.batch_size, rng)
                if searching:
                    arch_batch = [sample_architecture(sc, rng) for _ in range(cfg.arch_batch_size)]
                else:
                    arch_batch = [acting]
                sc, pair, adam, loss = _gradient_step(sc, pair, adam, arch_batch, minibatch, cfg.gamma, searching)
                losses.append(loss)
                gradient_steps += 1
                if pair.steps_since_sync >= cfg.target_sync_interval:
                    pair = sync_target(pair)

            if terminal or is_truncated(state):
                break

        returns.append(episode_return)
        avg_return = trailing_mean(returns, cfg.window)
        records.append(EpisodeRecord(
            episode=episode + 1,
            return_=episode_return,
            avg_return=avg_return,
            loss=float(np.mean(losses)) if losses else float('nan'),
            epsilon=epsilon,
            phase=SEARCH_PHASE if searching else TUNE_PHASE,
        ))
        logger.debug('agent %d episode %d return %.1f avg %.3f', agent, episode + 1, episode_return, avg_return)
        epsilon = max(cfg.epsilon_min, epsilon * cfg.epsilon_decay)

        if searching and (episode + 1) % cfg.prune_interval == 0:
            sc = prune(sc, cfg.min_active)
            alpha_trace.append((episode + 1, placeholder_probs(sc)))

        if len(returns) >= cfg.window and avg_return >= cfg.r_max:
            episodes_to_solve = episode + 1
            logger.info('agent %d solved %s after %d episodes', agent, cfg.env, episodes_to_solve)
            break

    if tuned is None:
        tuned = argmax_architecture(sc)
        if search_budget and alpha_trace[-1][0] != len(records):
            alpha_trace.append((len(records), placeholder_probs(sc)))

    logger.info('trained agent %d in %.2f seconds (%d episodes, %d gradient steps)',
                agent, time.time() - t, len(records), gradient_steps)
    return AgentResult(
        agent=agent,
        seed=cfg.seed,
        window=cfg.window,
        records=records,
        alpha_trace=alpha_trace,
        supercircuit=sc.with_theta(pair.pred.theta),
        architecture=tuned,
        network=pair.pred,
        episodes_to_solve=episodes_to_solve,
        gradient_steps=gradient_steps,
    )


def retrain(
    cfg: TrainConfig,
    sc: SuperCircuit,
    arch: ArchitectureSample,
    rng: np.random.Generator,
    agent: int = 0,
    progress: bool = False,
) -> AgentResult:
    """Tune a fixed architecture from freshly drawn angles and initial weights."""
    fresh = sc.with_theta(rng.uniform(-np.pi, np.pi, size=sc.theta.shape))
    return train_agent(replace(cfg, search_episodes=0), rng, sc=fresh, arch=arch, agent=agent, progress=progress)


def rank_agents(results: Sequence[AgentResult], K: int) -> List[AgentResult]:
    """Order agents by how early they solved (unsolved last), then by trailing mean return, and keep ``K``.

    Ties keep the input order.

    :raises ValueError: if ``K`` exceeds the number of results
    """
    if K > len(results):
        raise ValueError(f'can not take the top {K} of {len(results)} agents')

    def _key(result: AgentResult):
        solved = result.episodes_to_solve if result.episodes_to_solve is not None else float('inf')
        return solved, -result.final_return

    return sorted(results, key=_key)[:K]


def _policy_q(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    net: QNetwork,
    state,
    noise: Optional[NoiseSpec],
    rng: np.random.Generator,
) -> np.ndarray:
    if noise is None or noise.is_noiseless:
        return q_values(sc, arch, net.theta, net.spec, net.head, state)
    gates = policy_circuit(sc, arch, net, state)
    raw = (noisy_expectations(gates, sc.n, net.head.observables, noise, rng) + 1) / 2
    return net.head.w_out * raw


def evaluate(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    net: QNetwork,
    episodes: int,
    noise: Optional[NoiseSpec] = None,
    rng: Optional[np.random.Generator] = None,
    slippery: bool = False,
    progress: bool = False,
) -> EvalReport:
    """Run the greedy policy of a frozen network.

    :param sc: Super-circuit holding the pool and shape
    :param arch: The architecture to evaluate
    :param net: Angles and weights; its encoding names the environment
    :param episodes: Number of episodes
    :param noise: Evaluate Q-values under depolarizing noise
    :param rng: Generator for start states and noise
    :param slippery: Use the slippery lake
    :param progress: Show a progress bar
    """
    if episodes < 1:
        raise ValueError(f'need at least one episode, got {episodes}')
    if rng is None:
        rng = np.random.default_rng()
    env_kind = net.spec.env_kind
    report = EvalReport(noisy=noise is not None)
    for _ in tqdm(range(episodes), desc='evaluating', disable=not progress, leave=False):
        state = reset(env_kind, rng)
        episode_return = 0.0
        while True:
            action = int(np.argmax(_policy_q(sc, arch, net, state, noise, rng)))
            state, reward, terminal = step(state, action, rng, slippery)
            episode_return += reward
            if terminal or is_truncated(state):
                break
        report.returns.append(episode_return)
    return report
