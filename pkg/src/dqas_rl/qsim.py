# -*- coding: utf-8 -*-

"""Dense statevector simulation of few-qubit circuits.

Qubit 0 is the most significant bit of a basis-state index, so for two qubits the label ``|10>`` is index 2.
Rotations follow ``R(theta) = exp(-i theta P / 2)``, hence ``<Z>`` after ``RY(theta)|0>`` is ``cos(theta)``.

Two entry points are offered. The scalar API (:func:`apply_gate`, :func:`run_circuit`, :func:`expectation`,
:func:`param_shift_grad`) works on one :class:`State` at a time. The batched API (:func:`simulate`, :func:`evolve`,
:func:`expectations`, :func:`param_shift_jacobian`) evolves a ``(batch, 2 ** n)`` array, and gates may carry one
angle per row, which is how a minibatch of differently encoded environment states runs through one circuit.
"""

import enum
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

__all__ = [
    'GateKind',
    'Gate',
    'State',
    'Observable',
    'MAX_QUBITS',
    'gate_matrix',
    'apply_matrix',
    'apply_gate',
    'expectation',
    'run_circuit',
    'param_shift_grad',
    'simulate',
    'evolve',
    'expectations',
    'param_shift_jacobian',
]

MAX_QUBITS = 8

Angle = Union[float, np.ndarray]


class GateKind(enum.Enum):
    """Gate kinds understood by the simulator."""

    RX = 'rx'
    RY = 'ry'
    RZ = 'rz'
    CZ = 'cz'
    CNOT = 'cnot'
    X = 'x'
    IDENTITY = 'identity'

    @property
    def is_parameterized(self) -> bool:
        """Check if gates of this kind take a rotation angle."""
        return self in _ROTATIONS

    @property
    def arity(self) -> int:
        """Count the qubits a gate of this kind acts on."""
        return 2 if self in _TWO_QUBIT else 1


_ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})
_TWO_QUBIT = frozenset({GateKind.CZ, GateKind.CNOT})


@dataclass(frozen=True)
class Gate:
    """One gate placed on specific qubits.

    Two-qubit gates list the control first. ``angle`` is a float for a single circuit or a 1-d array holding one
    angle per batch row. ``source`` is opaque bookkeeping used by callers to map an angle back to the parameter
    that produced it; it never influences simulation.
    """

    kind: GateKind
    qubits: Tuple[int, ...]
    angle: Optional[Angle] = None
    source: Any = field(default=None, compare=False)

    def __post_init__(self):  # noqa: D105
        if len(self.qubits) != self.kind.arity:
            raise ValueError(f'{self.kind.value} acts on {self.kind.arity} qubit(s), got {self.qubits}')
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f'qubits of one gate must be distinct: {self.qubits}')
        if any(q < 0 for q in self.qubits):
            raise ValueError(f'negative qubit index in {self.qubits}')
        if self.kind.is_parameterized and self.angle is None:
            raise ValueError(f'{self.kind.value} needs an angle')
        if not self.kind.is_parameterized and self.angle is not None:
            raise ValueError(f'{self.kind.value} takes no angle')

    def shifted(self, delta: float) -> 'Gate':
        """Return a copy of this rotation with ``delta`` added to its angle."""
        if not self.kind.is_parameterized:
            raise ValueError(f'{self.kind.value} is not a parameterized rotation')
        return Gate(self.kind, self.qubits, self.angle + delta, self.source)


@dataclass(frozen=True)
class State:
    """A normalized ``n``-qubit pure state."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):  # noqa: D105
        amplitudes = np.array(self.amplitudes)
        if amplitudes.shape != (2 ** self.n,):
            raise ValueError(f'expected {2 ** self.n} amplitudes for {self.n} qubits, got {amplitudes.shape}')
        amplitudes.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def zero(cls, n: int) -> 'State':
        """Build ``|0...0>`` on ``n`` qubits."""
        _check_qubit_count(n)
        amplitudes = np.zeros(2 ** n, dtype=complex)
        amplitudes[0] = 1.0
        return cls(amplitudes, n)

    @property
    def norm_squared(self) -> float:
        """Sum of squared amplitude magnitudes."""
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class Observable:
    """A tensor product of ``Z`` and ``I`` factors, one per qubit."""

    factors: Tuple[str, ...]

    def __post_init__(self):  # noqa: D105
        bad = set(self.factors) - {'Z', 'I'}
        if bad:
            raise ValueError(f'observable factors must be Z or I, got {sorted(bad)}')

    @classmethod
    def z(cls, n: int, *qubits: int) -> 'Observable':
        """Build the product of ``Z`` on ``qubits`` and identity elsewhere."""
        if any(not 0 <= q < n for q in qubits):
            raise ValueError(f'qubits {qubits} out of range for {n} qubits')
        return cls(tuple('Z' if q in qubits else 'I' for q in range(n)))

    @property
    def n(self) -> int:
        """Count the qubits."""
        return len(self.factors)

    def signs(self) -> np.ndarray:
        """Get the eigenvalue (+1 or -1) of every computational basis state."""
        index = np.arange(2 ** self.n)
        parity = np.zeros(2 ** self.n, dtype=int)
        for qubit, factor in enumerate(self.factors):
            if factor == 'Z':
                parity ^= (index >> (self.n - 1 - qubit)) & 1
        return 1.0 - 2.0 * parity


_CNOT = np.array([
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_I = np.eye(2, dtype=complex)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Get the unitary of a gate.

    Returns a ``(2, 2)`` or ``(4, 4)`` array, or ``(batch, 2, 2)`` when a rotation carries one angle per row.
    """
    kind = gate.kind
    if kind is GateKind.CNOT:
        return _CNOT
    if kind is GateKind.CZ:
        return _CZ
    if kind is GateKind.X:
        return _X
    if kind is GateKind.IDENTITY:
        return _I

    half = np.asarray(gate.angle, dtype=float) / 2
    c, s = np.cos(half), np.sin(half)
    zero = np.zeros_like(c)
    if kind is GateKind.RX:
        rows = [[c + 0j, -1j * s], [-1j * s, c + 0j]]
    elif kind is GateKind.RY:
        rows = [[c + 0j, -s + 0j], [s + 0j, c + 0j]]
    else:
        rows = [[np.exp(-1j * half), zero + 0j], [zero + 0j, np.exp(1j * half)]]
    matrix = np.array(rows, dtype=complex)
    if matrix.ndim == 3:
        return np.moveaxis(matrix, -1, 0)
    return matrix


def _check_qubit_count(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f'qubit count must be in [1, {MAX_QUBITS}], got {n}')


def _check_gate(gate: Gate, n: int) -> None:
    if any(q >= n for q in gate.qubits):
        raise ValueError(f'{gate.kind.value} on qubits {gate.qubits} is out of range for {n} qubits')


def _apply(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Apply one gate to a ``(batch, 2 ** n)`` array of amplitudes."""
    if gate.kind is GateKind.IDENTITY:
        return psi
    return apply_matrix(psi, gate_matrix(gate), gate.qubits, n)


def apply_matrix(psi: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply a ``2 ** k`` square matrix (or one per row) to ``k`` qubits of a ``(batch, 2 ** n)`` array."""
    batch = psi.shape[0]
    k = len(qubits)
    axes = [q + 1 for q in qubits]
    tail = list(range(n + 1 - k, n + 1))

    tensor = np.moveaxis(psi.reshape((batch,) + (2,) * n), axes, tail)
    moved_shape = tensor.shape
    flat = tensor.reshape(batch, -1, 2 ** k)
    if matrix.ndim == 2:
        flat = flat @ matrix.T
    else:
        if matrix.shape[0] != batch:
            raise ValueError(f'{matrix.shape[0]} angles given for a batch of {batch}')
        flat = np.einsum('bij,bmj->bmi', matrix, flat)
    tensor = np.moveaxis(flat.reshape(moved_shape), tail, axes)
    return tensor.reshape(batch, 2 ** n)


def apply_gate(state: State, gate: Gate) -> State:
    """Apply a gate to a state, returning a new state.

    :param state: The input state, left untouched
    :param gate: A gate whose qubit indices are valid for ``state.n`` and whose angle is a scalar
    :raises ValueError: if a qubit index is out of range
    """
    _check_gate(gate, state.n)
    psi = _apply(state.amplitudes[np.newaxis, :], gate, state.n)
    return State(psi[0].copy(), state.n)


def expectation(state: State, obs: Observable) -> float:
    """Compute the exact expectation of a Z-type observable.

    :param state: A state on ``n`` qubits
    :param obs: An observable on the same number of qubits
    :raises ValueError: if the qubit counts differ
    """
    if obs.n != state.n:
        raise ValueError(f'observable on {obs.n} qubits used with a {state.n}-qubit state')
    probabilities = np.abs(state.amplitudes) ** 2
    return float(probabilities @ obs.signs())


def run_circuit(gates: Sequence[Gate], n: int) -> State:
    """Apply gates in order to ``|0...0>``.

    :param gates: The circuit
    :param n: Number of qubits
    """
    state = State.zero(n)
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def param_shift_grad(gates: Sequence[Gate], param_location: int, obs: Observable) -> float:
    """Differentiate an expectation with respect to one rotation angle by the parameter-shift rule.

    The result is ``(E(theta + pi / 2) - E(theta - pi / 2)) / 2``, which is exact for RX, RY and RZ.

    :param gates: The circuit
    :param param_location: Index into ``gates`` of the rotation to differentiate
    :param obs: The measured observable, which also fixes the qubit count
    :raises ValueError: if the gate at ``param_location`` is not a rotation
    """
    gate = gates[param_location]
    if not gate.kind.is_parameterized:
        raise ValueError(f'gate {param_location} ({gate.kind.value}) has no parameter to shift')

    values = []
    for delta in (np.pi / 2, -np.pi / 2):
        shifted = list(gates)
        shifted[param_location] = gate.shifted(delta)
        values.append(expectation(run_circuit(shifted, obs.n), obs))
    return (values[0] - values[1]) / 2


def simulate(gates: Sequence[Gate], n: int, batch: int = 1) -> np.ndarray:
    """Run a circuit on ``batch`` copies of ``|0...0>`` and return the ``(batch, 2 ** n)`` amplitudes."""
    _check_qubit_count(n)
    psi = np.zeros((batch, 2 ** n), dtype=complex)
    psi[:, 0] = 1.0
    return evolve(psi, gates, n)


def evolve(psi: np.ndarray, gates: Sequence[Gate], n: int) -> np.ndarray:
    """Apply gates in order to a batch of amplitude rows."""
    for gate in gates:
        _check_gate(gate, n)
        psi = _apply(psi, gate, n)
    return psi


def expectations(psi: np.ndarray, observables: Sequence[Observable]) -> np.ndarray:
    """Evaluate every observable on every row, returning a ``(batch, len(observables))`` array."""
    signs = np.stack([obs.signs() for obs in observables], axis=1)
    return (np.abs(psi) ** 2) @ signs


def param_shift_jacobian(
    gates: Sequence[Gate],
    n: int,
    observables: Sequence[Observable],
    batch: int = 1,
) -> Tuple[List[int], np.ndarray]:
    """Differentiate every observable with respect to every rotation angle of a circuit.

    Intermediate states are cached so each shifted evaluation only replays the gates after the shifted one.

    :param gates: The circuit; rotation angles may be per-row arrays
    :param n: Number of qubits
    :param observables: The measured observables
    :param batch: Number of rows
    :returns: the gate indices of the rotations and an array of shape ``(len(indices), batch, len(observables))``
        whose entry ``j`` holds the derivatives with respect to the angle of ``gates[indices[j]]``
    """
    _check_qubit_count(n)
    psi = np.zeros((batch, 2 ** n), dtype=complex)
    psi[:, 0] = 1.0

    history = []
    for gate in gates:
        _check_gate(gate, n)
        history.append(psi)
        psi = _apply(psi, gate, n)

    locations = [i for i, gate in enumerate(gates) if gate.kind.is_parameterized]
    jacobian = np.zeros((len(locations), batch, len(observables)))
    for j, location in enumerate(locations):
        gate = gates[location]
        rest = gates[location + 1:]
        plus = evolve(_apply(history[location], gate.shifted(np.pi / 2), n), rest, n)
        minus = evolve(_apply(history[location], gate.shifted(-np.pi / 2), n), rest, n)
        jacobian[j] = (expectations(plus, observables) - expectations(minus, observables)) / 2
    return locations, jacobian
