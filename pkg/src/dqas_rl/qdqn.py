# -*- coding: utf-8 -*-

"""The quantum deep Q-network built on a super-circuit.

Every block re-uploads the environment state: cart-pole applies ``RX(w_in[b][i] * s_i)`` to qubit ``i``,
frozen lake applies ``RX(pi * b_i * w_in[b][i])`` where ``b_i`` is bit ``i`` of the cell index (most significant
first). The Q-value of action ``a`` is ``w_out[a] * (<O_a> + 1) / 2``.

Gradients are exact. Circuit angles and input weights are differentiated with the parameter-shift rule and
chained through the mean squared TD error; output weights are differentiated analytically. The architecture
parameters get a score-function estimate with a batch-mean baseline.
"""

from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .constants import CARTPOLE, ENV_DEFAULTS, FROZENLAKE
from .envs import CartPoleState, EnvState, FrozenLakeState, Transition, n_actions
from .qsim import Gate, GateKind, Observable, expectations, param_shift_jacobian, simulate
from .supernet import ArchitectureSample, SuperCircuit, ThetaRef, placeholder_probs, realize_circuit

__all__ = [
    'EncodingSpec',
    'QHead',
    'QNetwork',
    'QNetworkPair',
    'WInRef',
    'LossGradients',
    'default_observables',
    'make_network',
    'state_features',
    'encode',
    'policy_circuit',
    'q_values',
    'q_values_batch',
    'td_target',
    'local_loss',
    'global_loss',
    'loss_and_grads',
    'grad_theta',
    'grad_alpha',
    'grad_weights',
    'sync_target',
]


class WInRef(NamedTuple):
    """Location of one input weight."""

    block: int
    qubit: int


@dataclass(frozen=True)
class EncodingSpec:
    """How environment states are written into the circuit, with the trainable input weights of shape ``(B, n)``."""

    env_kind: str
    w_in: np.ndarray

    def __post_init__(self):  # noqa: D105
        if self.env_kind not in ENV_DEFAULTS:
            raise ValueError(f'unknown environment {self.env_kind!r}')
        if self.w_in.ndim != 2 or not np.all(np.isfinite(self.w_in)):
            raise ValueError('input weights must be a finite (blocks, qubits) matrix')


@dataclass(frozen=True)
class QHead:
    """One observable and one output weight per action."""

    observables: Tuple[Observable, ...]
    w_out: np.ndarray

    def __post_init__(self):  # noqa: D105
        if len(self.observables) != len(self.w_out):
            raise ValueError(f'{len(self.observables)} observables for {len(self.w_out)} output weights')


@dataclass(frozen=True)
class QNetwork:
    """All trainable values of one Q-network that live outside the architecture distribution."""

    theta: np.ndarray
    spec: EncodingSpec
    head: QHead

    def copy(self) -> 'QNetwork':
        """Deep-copy the arrays."""
        return QNetwork(
            theta=self.theta.copy(),
            spec=replace(self.spec, w_in=self.spec.w_in.copy()),
            head=replace(self.head, w_out=self.head.w_out.copy()),
        )

    def with_values(self, theta: np.ndarray, w_in: np.ndarray, w_out: np.ndarray) -> 'QNetwork':
        """Return a network holding new parameter values."""
        return QNetwork(theta, replace(self.spec, w_in=w_in), replace(self.head, w_out=w_out))


@dataclass(frozen=True)
class QNetworkPair:
    """The predicting network and its periodically refreshed target copy."""

    pred: QNetwork
    target: QNetwork
    steps_since_sync: int = 0

    @property
    def pred_theta(self) -> np.ndarray:  # noqa: D102
        return self.pred.theta

    @property
    def target_theta(self) -> np.ndarray:  # noqa: D102
        return self.target.theta

    def tick(self) -> 'QNetworkPair':
        """Count one gradient step since the last sync."""
        return replace(self, steps_since_sync=self.steps_since_sync + 1)


@dataclass
class LossGradients:
    """Per-architecture local losses and the summed gradients of the global loss."""

    losses: List[float]
    theta: np.ndarray
    w_in: np.ndarray
    w_out: np.ndarray
    alpha: Optional[np.ndarray] = None

    @property
    def total(self) -> float:
        """Get the global loss, the plain sum of local losses."""
        return float(sum(self.losses))


def default_observables(env_kind: str, n: int) -> Tuple[Observable, ...]:
    """Get the per-action observables: ``Z0Z1`` and ``Z2Z3`` for cart-pole, ``Z_a`` for frozen lake."""
    if env_kind == CARTPOLE:
        return Observable.z(n, 0, 1), Observable.z(n, 2, 3)
    if env_kind == FROZENLAKE:
        return tuple(Observable.z(n, a) for a in range(n_actions(FROZENLAKE)))
    raise ValueError(f'unknown environment {env_kind!r}')


def make_network(sc: SuperCircuit, env_kind: str, w_out_init: Optional[float] = None) -> QNetwork:
    """Build a Q-network around a super-circuit's angles with unit input weights."""
    if w_out_init is None:
        w_out_init = ENV_DEFAULTS[env_kind]['w_out_init']
    observables = default_observables(env_kind, sc.n)
    return QNetwork(
        theta=sc.theta.copy(),
        spec=EncodingSpec(env_kind, np.ones((sc.B, sc.n))),
        head=QHead(observables, np.full(len(observables), float(w_out_init))),
    )


def state_features(states: Sequence[EnvState], env_kind: str, n: int) -> np.ndarray:
    """Get the ``(batch, n)`` multipliers of the input weights: the state itself, or ``pi`` times its bits.

    :raises ValueError: if a state does not belong to ``env_kind``
    """
    features = np.zeros((len(states), n))
    for k, state in enumerate(states):
        if env_kind == CARTPOLE:
            if not isinstance(state, CartPoleState):
                raise ValueError(f'not a cart-pole state: {state!r}')
            features[k] = state.as_array()[:n]
        elif env_kind == FROZENLAKE:
            if not isinstance(state, FrozenLakeState):
                raise ValueError(f'not a frozen lake state: {state!r}')
            bits = [(state.cell >> (n - 1 - i)) & 1 for i in range(n)]
            features[k] = np.pi * np.array(bits, dtype=float)
        else:
            raise ValueError(f'unknown environment {env_kind!r}')
    return features


def _encoding_blocks(features: np.ndarray, spec: EncodingSpec, batched: bool) -> List[List[Gate]]:
    blocks = []
    for b in range(spec.w_in.shape[0]):
        angles = spec.w_in[b] * features
        blocks.append([
            Gate(GateKind.RX, (q,), angles[:, q] if batched else float(angles[0, q]), WInRef(b, q))
            for q in range(features.shape[1])
        ])
    return blocks


def encode(env_state: EnvState, spec: EncodingSpec, block: int) -> List[Gate]:
    """Build the encoding gates of one block for one environment state.

    :param env_state: A state of the environment named by ``spec.env_kind``
    :param spec: Encoding with input weights
    :param block: Which block's input weights to use
    """
    n = spec.w_in.shape[1]
    features = state_features([env_state], spec.env_kind, n)
    return _encoding_blocks(features, spec, batched=False)[block]


def policy_circuit(sc: SuperCircuit, arch: ArchitectureSample, net: QNetwork, env_state: EnvState) -> List[Gate]:
    """Build the full circuit evaluated for one state."""
    features = state_features([env_state], net.spec.env_kind, sc.n)
    return realize_circuit(sc, arch, _encoding_blocks(features, net.spec, batched=False), theta=net.theta)


def _batch_circuit(sc: SuperCircuit, arch: ArchitectureSample, net: QNetwork, features: np.ndarray) -> List[Gate]:
    return realize_circuit(sc, arch, _encoding_blocks(features, net.spec, batched=True), theta=net.theta)


def _raw_batch(sc: SuperCircuit, arch: ArchitectureSample, net: QNetwork, features: np.ndarray) -> np.ndarray:
    psi = simulate(_batch_circuit(sc, arch, net, features), sc.n, batch=len(features))
    return (expectations(psi, net.head.observables) + 1) / 2


def q_values(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    theta: np.ndarray,
    spec: EncodingSpec,
    head: QHead,
    env_state: EnvState,
) -> np.ndarray:
    """Compute the Q-value of every action in one state.

    :param sc: The super-circuit
    :param arch: The architecture to evaluate
    :param theta: Circuit angles shaped like ``sc.theta``
    :param spec: Encoding and input weights
    :param head: Observables and output weights
    :param env_state: The environment state
    """
    net = QNetwork(theta, spec, head)
    return q_values_batch(sc, arch, net, [env_state])[0]


def q_values_batch(sc: SuperCircuit, arch: ArchitectureSample, net: QNetwork, states: Sequence[EnvState]) -> np.ndarray:
    """Compute a ``(batch, actions)`` array of Q-values."""
    features = state_features(states, net.spec.env_kind, sc.n)
    return net.head.w_out * _raw_batch(sc, arch, net, features)


def td_target(transition: Transition, target_q: np.ndarray, gamma: float) -> float:
    """Compute ``r`` on terminal transitions and ``r + gamma * max(target_q)`` otherwise."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f'gamma must be in [0, 1], got {gamma}')
    if transition.terminal:
        return float(transition.reward)
    return float(transition.reward + gamma * np.max(target_q))


def _targets(sc, arch, pair: QNetworkPair, minibatch: Sequence[Transition], gamma: float) -> np.ndarray:
    next_q = q_values_batch(sc, arch, pair.target, [t.next_state for t in minibatch])
    return np.array([td_target(t, q, gamma) for t, q in zip(minibatch, next_q)])


def _check_minibatch(minibatch: Sequence[Transition]) -> None:
    if not minibatch:
        raise ValueError('minibatch is empty')


def local_loss(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    pair: QNetworkPair,
    minibatch: Sequence[Transition],
    gamma: float,
) -> float:
    """Compute the mean squared TD error of one architecture.

    Predictions use ``pair.pred`` and targets use ``pair.target``, both under ``arch``.

    :raises ValueError: if the minibatch is empty
    """
    _check_minibatch(minibatch)
    targets = _targets(sc, arch, pair, minibatch, gamma)
    predicted = q_values_batch(sc, arch, pair.pred, [t.state for t in minibatch])
    actions = np.array([t.action for t in minibatch])
    errors = predicted[np.arange(len(minibatch)), actions] - targets
    return float(np.mean(errors ** 2))


def global_loss(
    sc: SuperCircuit,
    arch_batch: Sequence[ArchitectureSample],
    pair: QNetworkPair,
    minibatch: Sequence[Transition],
    gamma: float,
) -> float:
    """Sum the local losses of a batch of architectures; duplicates count once per occurrence."""
    return float(sum(local_loss(sc, arch, pair, minibatch, gamma) for arch in arch_batch))


def _local_loss_and_grads(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    pair: QNetworkPair,
    minibatch: Sequence[Transition],
    gamma: float,
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    net = pair.pred
    size = len(minibatch)
    rows = np.arange(size)
    actions = np.array([t.action for t in minibatch])
    features = state_features([t.state for t in minibatch], net.spec.env_kind, sc.n)

    targets = _targets(sc, arch, pair, minibatch, gamma)
    raw = _raw_batch(sc, arch, net, features)
    predicted = net.head.w_out[actions] * raw[rows, actions]
    errors = predicted - targets
    loss = float(np.mean(errors ** 2))
    d_loss_d_q = 2 * errors / size

    g_theta = np.zeros_like(net.theta)
    g_w_in = np.zeros_like(net.spec.w_in)
    g_w_out = np.zeros_like(net.head.w_out)
    np.add.at(g_w_out, actions, d_loss_d_q * raw[rows, actions])

    gates = _batch_circuit(sc, arch, net, features)
    locations, jacobian = param_shift_jacobian(gates, sc.n, net.head.observables, batch=size)
    coefficient = d_loss_d_q * net.head.w_out[actions] / 2
    for location, d_expectation in zip(locations, jacobian):
        per_row = coefficient * d_expectation[rows, actions]
        source = gates[location].source
        if isinstance(source, ThetaRef):
            g_theta[source] += per_row.sum()
        elif isinstance(source, WInRef):
            g_w_in[source] += (per_row * features[:, source.qubit]).sum()
    return loss, g_theta, g_w_in, g_w_out


def loss_and_grads(
    sc: SuperCircuit,
    arch_batch: Sequence[ArchitectureSample],
    pair: QNetworkPair,
    minibatch: Sequence[Transition],
    gamma: float,
    with_alpha: bool = True,
) -> LossGradients:
    """Evaluate the global loss and every gradient for one minibatch in a single pass.

    :param sc: The super-circuit, whose ``alpha`` and mask define the architecture distribution
    :param arch_batch: Architectures sampled from the distribution
    :param pair: Predicting and target networks
    :param minibatch: Transitions from the replay memory
    :param gamma: Discount factor
    :param with_alpha: Also estimate the architecture gradient (needs at least two architectures)
    """
    _check_minibatch(minibatch)
    result = LossGradients(
        losses=[],
        theta=np.zeros_like(pair.pred.theta),
        w_in=np.zeros_like(pair.pred.spec.w_in),
        w_out=np.zeros_like(pair.pred.head.w_out),
    )
    for arch in arch_batch:
        loss, g_theta, g_w_in, g_w_out = _local_loss_and_grads(sc, arch, pair, minibatch, gamma)
        result.losses.append(loss)
        result.theta += g_theta
        result.w_in += g_w_in
        result.w_out += g_w_out
    if with_alpha:
        result.alpha = grad_alpha(sc, arch_batch, result.losses)
    return result


def grad_theta(
    sc: SuperCircuit,
    arch_batch: Sequence[ArchitectureSample],
    pair: QNetworkPair,
    minibatch: Sequence[Transition],
    gamma: float,
) -> np.ndarray:
    """Differentiate the global loss with respect to the predicting network's angles."""
    return loss_and_grads(sc, arch_batch, pair, minibatch, gamma, with_alpha=False).theta


def grad_weights(
    sc: SuperCircuit,
    arch_batch: Sequence[ArchitectureSample],
    pair: QNetworkPair,
    minibatch: Sequence[Transition],
    gamma: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Differentiate the global loss with respect to the input and output weights."""
    result = loss_and_grads(sc, arch_batch, pair, minibatch, gamma, with_alpha=False)
    return result.w_in, result.w_out


def grad_alpha(
    sc: SuperCircuit,
    arch_batch: Sequence[ArchitectureSample],
    per_arch_losses: Sequence[float],
) -> np.ndarray:
    """Estimate the gradient of the expected local loss with respect to ``alpha``.

    Each sampled architecture contributes ``(L_k - b) * grad log P(arch_k)`` where ``b`` is the batch mean, and
    ``grad log P`` for placeholder ``i`` is the one-hot of its choice minus the softmax row. The sum is divided by
    ``m - 1``, which equals averaging with a leave-one-out baseline and keeps the estimate unbiased.

    :raises ValueError: if fewer than two architectures are given or the lengths differ
    """
    m = len(arch_batch)
    if m < 2:
        raise ValueError(f'the baseline needs at least two architectures, got {m}')
    if len(per_arch_losses) != m:
        raise ValueError(f'{len(per_arch_losses)} losses for {m} architectures')

    losses = np.asarray(per_arch_losses, dtype=float)
    if np.all(losses == losses[0]):
        return np.zeros_like(sc.alpha)
    advantages = losses - losses.mean()

    probs = placeholder_probs(sc)
    placeholders = np.arange(sc.p)
    grad = np.zeros_like(sc.alpha)
    for arch, advantage in zip(arch_batch, advantages):
        score = -probs.copy()
        score[placeholders, list(arch.choices)] += 1.0
        grad += advantage * score
    grad[~sc.active_mask] = 0.0
    return grad / (m - 1)


def sync_target(pair: QNetworkPair) -> QNetworkPair:
    """Copy the predicting network into the target network."""
    return QNetworkPair(pred=pair.pred, target=pair.pred.copy(), steps_since_sync=0)
