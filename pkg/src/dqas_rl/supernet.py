# -*- coding: utf-8 -*-

"""The super-circuit: operation pools, the architecture distribution, sampling, realization and pruning.

A super-circuit stacks ``B`` identical parameterized blocks of ``p`` placeholders. Each placeholder picks one
operation from the pool; the choice is shared by all blocks, the angles are not (unless ``share_block_params``).
The architecture distribution is a product over placeholders of a softmax over the still-active candidates.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .constants import BASELINE_POOL, N_QUBITS, OP3, OP4, POOL_NAMES
from .qsim import Gate, GateKind

__all__ = [
    'PoolOperation',
    'OperationPool',
    'SuperCircuit',
    'ArchitectureSample',
    'ThetaRef',
    'build_pool',
    'get_pool',
    'build_baseline',
    'placeholder_probs',
    'architecture_prob',
    'sample_architecture',
    'expand_operation',
    'realize_circuit',
    'prune',
    'argmax_architecture',
    'architecture_to_json',
    'architecture_from_json',
]

logger = logging.getLogger(__name__)

POOL_KINDS = frozenset({GateKind.RY, GateKind.RZ, GateKind.CZ, GateKind.CNOT, GateKind.IDENTITY})


@dataclass(frozen=True)
class PoolOperation:
    """A gate type together with the 1-based qubit labels it works on."""

    kind: GateKind
    working_range: Tuple[int, ...]

    def __post_init__(self):  # noqa: D105
        if self.kind not in POOL_KINDS:
            raise ValueError(f'{self.kind.value} can not be used as a pool operation')
        if not self.working_range:
            raise ValueError('working range must not be empty')
        if len(set(self.working_range)) != len(self.working_range):
            raise ValueError(f'working range labels must be distinct: {self.working_range}')
        if min(self.working_range) < 1:
            raise ValueError(f'working range labels are 1-based: {self.working_range}')

    @property
    def n_params(self) -> int:
        """Count the angles this operation consumes."""
        return len(self.working_range) if self.kind.is_parameterized else 0

    @property
    def name(self) -> str:
        """Get a short label like ``ry_123``."""
        return '{}_{}'.format(self.kind.value, ''.join(map(str, self.working_range)))

    def to_json(self) -> Dict[str, Any]:
        """Serialize to JSON."""
        return {'kind': self.kind.value, 'working_range': list(self.working_range)}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> 'PoolOperation':
        """Deserialize from JSON."""
        return cls(GateKind(data['kind']), tuple(data['working_range']))


@dataclass(frozen=True)
class OperationPool:
    """A named, ordered set of candidate operations."""

    name: str
    ops: Tuple[PoolOperation, ...]

    def __post_init__(self):  # noqa: D105
        if not self.ops:
            raise ValueError(f'pool {self.name} is empty')
        if not any(op.kind.is_parameterized for op in self.ops):
            raise ValueError(f'pool {self.name} has no parameterized operation')

    @property
    def size(self) -> int:
        """Get the number of candidates, ``s``."""
        return len(self.ops)

    @property
    def max_params(self) -> int:
        """Get the largest parameter count of any candidate, ``l``."""
        return max(1, max(op.n_params for op in self.ops))

    def index(self, op: PoolOperation) -> int:
        """Find the position of an operation in this pool."""
        try:
            return self.ops.index(op)
        except ValueError:
            raise ValueError(f'{op.name} is not in pool {self.name}') from None


def _full_range(n: int) -> Tuple[int, ...]:
    return tuple(range(1, n + 1))


def _build_op3(n: int) -> Tuple[PoolOperation, ...]:
    full = _full_range(n)
    ops = [
        PoolOperation(GateKind.RY, full),
        PoolOperation(GateKind.RZ, full),
        PoolOperation(GateKind.CZ, full),
        PoolOperation(GateKind.CNOT, full),
        PoolOperation(GateKind.IDENTITY, full),
    ]
    for working_range in [(1, 2, 3), (2, 3, 4), (1, 2), (2, 3), (3, 4)]:
        ops.append(PoolOperation(GateKind.RY, working_range))
        ops.append(PoolOperation(GateKind.RZ, working_range))
    return tuple(ops)


def _build_op4(n: int) -> Tuple[PoolOperation, ...]:
    full = _full_range(n)
    ops = [
        PoolOperation(GateKind.RY, full),
        PoolOperation(GateKind.RZ, full),
        PoolOperation(GateKind.CNOT, full),
        PoolOperation(GateKind.IDENTITY, full),
    ]
    for working_range in [(1, 2, 3), (2, 3, 4)]:
        ops.append(PoolOperation(GateKind.RY, working_range))
        ops.append(PoolOperation(GateKind.RZ, working_range))
    return tuple(ops)


def _build_baseline_ops(n: int) -> Tuple[PoolOperation, ...]:
    full = _full_range(n)
    return (
        PoolOperation(GateKind.RY, full),
        PoolOperation(GateKind.RZ, full),
        PoolOperation(GateKind.CZ, full),
    )


_POOL_BUILDERS = {
    OP3: _build_op3,
    OP4: _build_op4,
}


def build_pool(name: str, n: int = N_QUBITS) -> OperationPool:
    """Build one of the search-space operation pools.

    :param name: Either ``op3`` or ``op4``
    :param n: Number of qubits; the pools are defined for four
    :raises ValueError: if the name is unknown or ``n`` is not four
    """
    if name not in _POOL_BUILDERS:
        raise ValueError(f'unknown pool {name!r}, valid pools are {{{", ".join(POOL_NAMES)}}}')
    if n != N_QUBITS:
        raise ValueError(f'pool {name} is defined on {N_QUBITS} qubits, got {n}')
    return OperationPool(name, _POOL_BUILDERS[name](n))


def get_pool(name: str, n: int = N_QUBITS) -> OperationPool:
    """Look up a pool by name, including the internal baseline pool."""
    if name == BASELINE_POOL:
        return OperationPool(BASELINE_POOL, _build_baseline_ops(n))
    return build_pool(name, n)


class ArchitectureSample(NamedTuple):
    """One pool index per placeholder."""

    choices: Tuple[int, ...]


class ThetaRef(NamedTuple):
    """Location of one angle in a super-circuit's ``theta`` tensor."""

    block: int
    placeholder: int
    op: int
    slot: int


@dataclass(frozen=True)
class SuperCircuit:
    """The search space together with its architecture and circuit parameters.

    ``alpha`` has shape ``(p, s)``, ``theta`` has shape ``(B, p, s, l)`` and ``active_mask`` has shape ``(p, s)``.
    """

    pool: OperationPool
    p: int
    B: int
    alpha: np.ndarray
    theta: np.ndarray
    active_mask: np.ndarray
    n: int = N_QUBITS
    share_block_params: bool = False

    def __post_init__(self):  # noqa: D105
        s, l = self.pool.size, self.pool.max_params
        if self.p < 1 or self.B < 1:
            raise ValueError(f'need at least one placeholder and one block, got p={self.p} B={self.B}')
        if self.alpha.shape != (self.p, s):
            raise ValueError(f'alpha must have shape {(self.p, s)}, got {self.alpha.shape}')
        if self.theta.shape != (self.B, self.p, s, l):
            raise ValueError(f'theta must have shape {(self.B, self.p, s, l)}, got {self.theta.shape}')
        if self.active_mask.shape != (self.p, s):
            raise ValueError(f'active mask must have shape {(self.p, s)}, got {self.active_mask.shape}')
        if not self.active_mask.any(axis=1).all():
            raise ValueError('every placeholder needs at least one active candidate')
        for op in self.pool.ops:
            if max(op.working_range) > self.n:
                raise ValueError(f'{op.name} exceeds {self.n} qubits')

    @classmethod
    def create(
        cls,
        pool: OperationPool,
        p: int,
        B: int,
        rng: np.random.Generator,
        n: int = N_QUBITS,
        share_block_params: bool = False,
    ) -> 'SuperCircuit':
        """Initialize with a uniform architecture distribution and angles drawn uniformly from ``[-pi, pi)``."""
        s, l = pool.size, pool.max_params
        return cls(
            pool=pool,
            p=p,
            B=B,
            alpha=np.zeros((p, s)),
            theta=rng.uniform(-np.pi, np.pi, size=(B, p, s, l)),
            active_mask=np.ones((p, s), dtype=bool),
            n=n,
            share_block_params=share_block_params,
        )

    @property
    def s(self) -> int:
        """Get the pool size."""
        return self.pool.size

    def with_alpha(self, alpha: np.ndarray) -> 'SuperCircuit':
        """Return a copy holding new architecture parameters."""
        return replace(self, alpha=alpha)

    def with_theta(self, theta: np.ndarray) -> 'SuperCircuit':
        """Return a copy holding new circuit parameters."""
        return replace(self, theta=theta)

    def check(self, arch: ArchitectureSample) -> None:
        """Raise if an architecture does not fit this super-circuit."""
        if len(arch.choices) != self.p:
            raise ValueError(f'architecture has {len(arch.choices)} choices for {self.p} placeholders')
        for i, choice in enumerate(arch.choices):
            if not 0 <= choice < self.s or not self.active_mask[i, choice]:
                raise ValueError(f'choice {choice} is not active in placeholder {i}')

    def describe(self, arch: ArchitectureSample) -> List[str]:
        """Name the operation chosen in each placeholder."""
        return [self.pool.ops[choice].name for choice in arch.choices]


def placeholder_probs(sc: SuperCircuit) -> np.ndarray:
    """Compute the per-placeholder softmax of ``alpha`` over the active candidates.

    Inactive candidates get probability exactly zero.
    """
    logits = np.where(sc.active_mask, sc.alpha, -np.inf)
    logits = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def architecture_prob(sc: SuperCircuit, arch: ArchitectureSample) -> float:
    """Compute the probability of an architecture as the product of its placeholder probabilities.

    :raises ValueError: if a choice is inactive
    """
    sc.check(arch)
    probs = placeholder_probs(sc)
    return float(np.prod(probs[np.arange(sc.p), list(arch.choices)]))


def sample_architecture(sc: SuperCircuit, rng: np.random.Generator) -> ArchitectureSample:
    """Draw each placeholder's choice independently from its probability row."""
    probs = placeholder_probs(sc)
    return ArchitectureSample(tuple(int(rng.choice(sc.s, p=row)) for row in probs))


def _pairs(working_range: Tuple[int, ...], n: int) -> List[Tuple[int, int]]:
    pairs = list(zip(working_range[:-1], working_range[1:]))
    if len(working_range) > 2 and tuple(sorted(working_range)) == _full_range(n):
        pairs.append((working_range[-1], working_range[0]))
    return pairs


def expand_operation(
    op: PoolOperation, angles: Sequence[float], n: int, refs: Optional[Sequence[Any]] = None,
) -> List[Gate]:
    """Expand one pool operation into gates on 0-based qubits.

    Rotations put one gate on each qubit of the working range, reading consecutive angles. Two-qubit operations
    connect consecutive labels as a chain, closed into a ring when the range covers all qubits.
    """
    if op.kind is GateKind.IDENTITY:
        return []
    if op.kind.is_parameterized:
        return [
            Gate(op.kind, (label - 1,), float(angles[j]), refs[j] if refs is not None else None)
            for j, label in enumerate(op.working_range)
        ]
    return [Gate(op.kind, (a - 1, b - 1)) for a, b in _pairs(op.working_range, n)]


def realize_circuit(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    encoding_per_block: Sequence[Sequence[Gate]],
    theta: Optional[np.ndarray] = None,
) -> List[Gate]:
    """Build the concrete circuit of an architecture.

    Each block contributes its encoding gates followed by the expansion of every placeholder's chosen operation.
    Rotation gates carry a :class:`ThetaRef` as their ``source``.

    :param sc: The super-circuit
    :param arch: The architecture to realize
    :param encoding_per_block: One list of encoding gates per block
    :param theta: Angles to use instead of ``sc.theta``, e.g. the target network's copy
    """
    if len(encoding_per_block) != sc.B:
        raise ValueError(f'expected {sc.B} encoding blocks, got {len(encoding_per_block)}')
    sc.check(arch)
    if theta is None:
        theta = sc.theta

    gates: List[Gate] = []
    for b, encoding in enumerate(encoding_per_block):
        gates.extend(encoding)
        storage = 0 if sc.share_block_params else b
        for i, choice in enumerate(arch.choices):
            op = sc.pool.ops[choice]
            refs = [ThetaRef(storage, i, choice, slot) for slot in range(op.n_params)]
            gates.extend(expand_operation(op, theta[storage, i, choice], sc.n, refs))
    return gates


def prune(sc: SuperCircuit, min_active: int) -> SuperCircuit:
    """Mask out the least probable active candidate of every placeholder that has more than ``min_active``.

    Ties on the lowest probability remove the highest index, so the argmax (which prefers the lowest index) is kept.
    """
    if min_active < 1:
        raise ValueError(f'min_active must be at least 1, got {min_active}')
    probs = placeholder_probs(sc)
    mask = sc.active_mask.copy()
    for i in range(sc.p):
        active = np.flatnonzero(mask[i])
        if len(active) <= min_active:
            continue
        lowest = probs[i, active].min()
        victim = active[probs[i, active] == lowest][-1]
        mask[i, victim] = False
        logger.debug('pruned %s from placeholder %d (p=%.4f)', sc.pool.ops[victim].name, i, lowest)
    return replace(sc, active_mask=mask)


def argmax_architecture(sc: SuperCircuit) -> ArchitectureSample:
    """Pick the most probable active candidate per placeholder, preferring the lowest index on ties."""
    probs = placeholder_probs(sc)
    return ArchitectureSample(tuple(int(i) for i in np.argmax(probs, axis=1)))


def build_baseline(
    rng: np.random.Generator,
    B: int,
    n: int = N_QUBITS,
    share_block_params: bool = False,
) -> Tuple[SuperCircuit, ArchitectureSample]:
    """Build the hand-designed circuit whose blocks are one ry, one rz and one cz column over all qubits."""
    sc = SuperCircuit.create(get_pool(BASELINE_POOL, n), 3, B, rng, n=n, share_block_params=share_block_params)
    return sc, ArchitectureSample((0, 1, 2))


def architecture_to_json(
    sc: SuperCircuit,
    arch: ArchitectureSample,
    env: Optional[str] = None,
    w_in: Optional[np.ndarray] = None,
    w_out: Optional[np.ndarray] = None,
) -> Dict[str, Any]:
    """Serialize an architecture with its angles and, optionally, the weights of the policy using it."""
    sc.check(arch)
    rv = {
        'pool_name': sc.pool.name,
        'p': sc.p,
        'B': sc.B,
        'n': sc.n,
        'share_block_params': sc.share_block_params,
        'choices': [sc.pool.ops[choice].to_json() for choice in arch.choices],
        'theta': sc.theta.tolist(),
    }
    if env is not None:
        rv['env'] = env
    if w_in is not None:
        rv['w_in'] = np.asarray(w_in).tolist()
    if w_out is not None:
        rv['w_out'] = np.asarray(w_out).tolist()
    return rv


def architecture_from_json(data: Mapping[str, Any]) -> Tuple[SuperCircuit, ArchitectureSample, Dict[str, Any]]:
    """Deserialize what :func:`architecture_to_json` produced.

    :returns: the super-circuit (uniform alpha, nothing masked), the architecture, and a dictionary holding any of
        ``env``, ``w_in`` and ``w_out`` that were present
    """
    n = data.get('n', N_QUBITS)
    pool = get_pool(data['pool_name'], n)
    theta = np.array(data['theta'], dtype=float)
    sc = SuperCircuit(
        pool=pool,
        p=data['p'],
        B=data['B'],
        alpha=np.zeros((data['p'], pool.size)),
        theta=theta,
        active_mask=np.ones((data['p'], pool.size), dtype=bool),
        n=n,
        share_block_params=data.get('share_block_params', False),
    )
    arch = ArchitectureSample(tuple(pool.index(PoolOperation.from_json(choice)) for choice in data['choices']))
    extras: Dict[str, Any] = {}
    if 'env' in data:
        extras['env'] = data['env']
    for key in ('w_in', 'w_out'):
        if key in data:
            extras[key] = np.array(data[key], dtype=float)
    return sc, arch, extras
