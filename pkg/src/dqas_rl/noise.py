# -*- coding: utf-8 -*-

"""Depolarizing noise by Monte-Carlo trajectories.

After every physical gate, each touched qubit of a single-qubit gate suffers a uniformly random Pauli with
probability ``p1``; a two-qubit gate suffers an error with probability ``p2``, in which case both of its qubits get an
independent uniformly random Pauli. Averaged over trajectories this is the channel
``rho -> (1 - p) rho + p / 3 (X rho X + Y rho Y + Z rho Z)`` per affected qubit. Identity placeholders are not
physical gates and inject nothing.
"""

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Sequence

import numpy as np

from .qsim import Gate, GateKind, Observable, apply_matrix, expectation, expectations, evolve, run_circuit

__all__ = [
    'NoiseSpec',
    'trajectory_expectations',
    'noisy_expectations',
    'noisy_expectation',
]

_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class NoiseSpec:
    """Depolarizing rates for single- and two-qubit gates and the number of trajectories per estimate."""

    p1: float = 0.001
    p2: float = 0.01
    trajectories: int = 1000

    def __post_init__(self):  # noqa: D105
        for name in ('p1', 'p2'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f'{name} must be in [0, 1], got {value}')
        if self.trajectories < 1:
            raise ValueError(f'need at least one trajectory, got {self.trajectories}')

    @property
    def is_noiseless(self) -> bool:
        """Check if both rates are zero."""
        return self.p1 == 0.0 and self.p2 == 0.0

    @classmethod
    def parse(cls, text: str, trajectories: int = 1000) -> 'NoiseSpec':
        """Parse ``"p1,p2"`` as given on the command line."""
        try:
            p1, p2 = (float(part) for part in text.split(','))
        except ValueError:
            raise ValueError(f'noise must look like "p1,p2", got {text!r}') from None
        return cls(p1, p2, trajectories)

    def to_json(self) -> Dict[str, Any]:
        """Serialize to JSON."""
        return dict(p1=self.p1, p2=self.p2, trajectories=self.trajectories)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> 'NoiseSpec':
        """Deserialize from JSON."""
        return cls(**data)


def _depolarize(
    psi: np.ndarray, qubits: Sequence[int], hit: np.ndarray, n: int, rng: np.random.Generator,
) -> np.ndarray:
    if not hit.any():
        return psi
    psi = psi.copy()
    for qubit in qubits:
        which = rng.integers(0, 3, size=len(psi))
        for k, pauli in enumerate(_PAULIS):
            rows = hit & (which == k)
            if rows.any():
                psi[rows] = apply_matrix(psi[rows], pauli, (qubit,), n)
    return psi


def trajectory_expectations(
    gates: Sequence[Gate],
    n: int,
    observables: Sequence[Observable],
    spec: NoiseSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run every trajectory and return a ``(trajectories, len(observables))`` array of expectations."""
    size = spec.trajectories
    psi = np.zeros((size, 2 ** n), dtype=complex)
    psi[:, 0] = 1.0
    for gate in gates:
        psi = evolve(psi, [gate], n)
        if gate.kind is GateKind.IDENTITY:
            continue
        if gate.kind.arity == 1:
            psi = _depolarize(psi, gate.qubits, rng.random(size) < spec.p1, n, rng)
        else:
            psi = _depolarize(psi, gate.qubits, rng.random(size) < spec.p2, n, rng)
    return expectations(psi, observables)


def noisy_expectations(
    gates: Sequence[Gate],
    n: int,
    observables: Sequence[Observable],
    spec: NoiseSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Estimate every observable under depolarizing noise.

    With both rates at zero the noiseless simulator is used directly and ``rng`` is not touched.
    """
    if spec.is_noiseless:
        state = run_circuit(gates, n)
        return np.array([expectation(state, obs) for obs in observables])
    return trajectory_expectations(gates, n, observables, spec, rng).mean(axis=0)


def noisy_expectation(
    gates: Sequence[Gate],
    n: int,
    obs: Observable,
    spec: NoiseSpec,
    rng: np.random.Generator,
) -> float:
    """Estimate one observable under depolarizing noise.

    :param gates: The circuit, with scalar angles
    :param n: Number of qubits
    :param obs: The observable
    :param spec: Rates and trajectory count
    :param rng: Generator for error locations and Pauli choices
    """
    return float(noisy_expectations(gates, n, [obs], spec, rng)[0])
