"""Parity projection by a CNOT ladder onto an ancilla and post-selection.

Convention: qubit state |0> has sigma^z = +1, and P(z) = (-1)^(sum_i z_i).
The ladder CNOT(i -> ancilla), i = 0..N-1, writes sum_i z_i mod 2 into the
ancilla, so outcome 0 <-> even (prod_i sigma_i^z = +1) and outcome 1 <-> odd.
Cat states follow suit: prod_i sigma_i^z maps |->_x>^N to |<-_x>^N, hence
(|->>^N + |<->^N)/sqrt 2 is even and the minus combination is odd.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional

import numpy as np

from .operators import (
    MAX_DENSE_DIM,
    DensityOperator,
    DimensionCapError,
    HilbertSpace,
    Operator,
    expectation,
    pauli_string,
)
from .spins import coherent_spin_ket

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
EMPTY_PROBABILITY = 1e-14


@dataclass(frozen=True, eq=False)
class CircuitOutcome:
    post_state: Optional[DensityOperator]  # None when the branch has zero probability
    outcome_bit: int
    probability: float

    @property
    def empty(self) -> bool:
        return self.post_state is None


def cnot(control: int, target: int, n_qubits: int) -> Operator:
    """Controlled-NOT as a permutation matrix; qubit 0 is the leftmost factor."""
    if control == target:
        raise ValueError("control and target must differ")
    for q in (control, target):
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit {q} out of range for {n_qubits} qubits")
    if 2**n_qubits > 2 * MAX_DENSE_DIM:
        raise DimensionCapError("register too large")
    d = 2**n_qubits
    idx = np.arange(d)
    cbit = (idx >> (n_qubits - 1 - control)) & 1
    out = idx ^ (cbit << (n_qubits - 1 - target))
    U = np.zeros((d, d))
    U[out, idx] = 1.0
    return Operator(U, HilbertSpace.spin_register(n_qubits), True)


def parity_ladder(N: int) -> Operator:
    """CNOT(i -> N) for i = 0..N-1 on N data qubits plus the ancilla N."""
    return reduce(lambda acc, i: cnot(i, N, N + 1) @ acc,
                  range(N), Operator(np.eye(2 ** (N + 1)), HilbertSpace.spin_register(N + 1)))


def _hadamard_all(N: int) -> np.ndarray:
    return reduce(np.kron, [HADAMARD] * N)


def parity_extraction(rho: DensityOperator, basis: str = "z") -> tuple:
    """Run the ladder on rho x |0><0|, measure the ancilla, post-select both outcomes.

    Returns (even, odd) CircuitOutcomes. ``basis='x'`` conjugates the data
    qubits with Hadamards so that the x parity is extracted instead.
    """
    if basis not in ("z", "x"):
        raise ValueError("basis must be 'z' or 'x'")
    N = int(round(np.log2(rho.dim)))
    if 2**N != rho.dim:
        raise ValueError("input must be a qubit register")
    r = rho.matrix
    if basis == "x":
        Hn = _hadamard_all(N)
        r = Hn @ r @ Hn
    anc0 = np.zeros((2, 2))
    anc0[0, 0] = 1.0
    full = np.kron(r, anc0)
    U = parity_ladder(N).matrix
    full = U @ full @ U.T
    t = full.reshape(2**N, 2, 2**N, 2)
    outcomes = []
    for bit in (0, 1):
        # project the ancilla on |bit> and trace it out
        block = t[:, bit, :, bit]
        prob = float(np.trace(block).real)
        if prob < EMPTY_PROBABILITY:
            outcomes.append(CircuitOutcome(None, bit, max(prob, 0.0)))
            continue
        post = block / prob
        if basis == "x":
            post = Hn @ post @ Hn
        outcomes.append(CircuitOutcome(DensityOperator(post, rho.space, check_positive=False), bit, prob))
    return tuple(outcomes)


def cat_state(N: int, sign: str = "+") -> DensityOperator:
    """(|->_x>^N + s |<-_x>^N)/sqrt 2; '+' is z-parity even, '-' is odd."""
    if N < 1:
        raise ValueError("N must be positive")
    s = {"+": 1.0, "-": -1.0, 1: 1.0, -1: -1.0}[sign]
    psi = coherent_spin_ket("x", N) + s * coherent_spin_ket("-x", N)
    return DensityOperator.from_ket(psi, HilbertSpace.spin_register(N))


@dataclass(frozen=True)
class CorrelationRow:
    i: int
    j: int
    before: float
    after: float
    even: Optional[float]
    odd: Optional[float]

    @property
    def delta(self) -> float:
        return abs(self.after - self.before)


def correlation_preservation_report(rho: DensityOperator,
                                    pairs: Optional[Iterable[tuple]] = None) -> list:
    """<sigma_i^x sigma_j^x> before the projection and after it (weighted over branches).

    Defaults to all pairs i < j.
    """
    N = int(round(np.log2(rho.dim)))
    if pairs is None:
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    even, odd = parity_extraction(rho)
    rows = []
    for i, j in pairs:
        O = pauli_string({i: "x", j: "x"}, N)
        before = expectation(rho, O).real
        branch = [None if o.empty else expectation(o.post_state, O).real for o in (even, odd)]
        after = sum(o.probability * v for o, v in zip((even, odd), branch) if v is not None)
        rows.append(CorrelationRow(i, j, before, after, branch[0], branch[1]))
    return rows
