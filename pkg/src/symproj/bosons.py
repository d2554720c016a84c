"""Two sets of bosonic modes a_1..a_N, b_1..b_N at fixed boson numbers.

The universe is a direct sum of blocks (N_A + k, N_B - k); by default
k in {-1, 0, 1}, which is exactly closed for one application of the
tunneling generator to the central block. Inside a block the basis is the
lexicographically ascending list of occupation vectors
(n_a1..n_aN, n_b1..n_bN); blocks are ordered by increasing k.

Operators are assembled sparse (scipy) and only densified on request, below
``MAX_DENSE_DIM``; dense eigensolves above a few thousand states are too slow
to be useful here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from math import comb, factorial
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .metrology import qfi, qfi_low_rank
from .operators import (
    MAX_DENSE_DIM,
    DensityOperator,
    DimensionCapError,
    HilbertSpace,
    NotHermitianError,
    Operator,
)
from .symmetry import SectorProjector

MAX_FOCK_DIM = 20_000


def compositions(total: int, parts: int) -> list:
    """All occupation vectors of ``parts`` modes summing to ``total``, ascending lexicographic."""
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        out.extend((first,) + rest for rest in compositions(total - first, parts - 1))
    return out


def block_dimension(N: int, NA: int, NB: int) -> int:
    return comb(NA + N - 1, N - 1) * comb(NB + N - 1, N - 1)


@dataclass(frozen=True)
class FockBlock:
    N: int
    NA: int
    NB: int

    @cached_property
    def basis(self) -> list:
        return [a + b for a, b in product(compositions(self.NA, self.N), compositions(self.NB, self.N))]

    @property
    def dimension(self) -> int:
        return block_dimension(self.N, self.NA, self.NB)


class FockUniverse:
    """Direct sum of blocks (N_A + k, N_B - k) for k in ``ks`` (negative totals skipped)."""

    def __init__(self, N: int, NA: int, NB: int, k_max: int = 1):
        if N < 1:
            raise ValueError("need at least one mode pair")
        if NA < 0 or NB < 0:
            raise ValueError("boson numbers must be non-negative")
        if k_max < 1:
            raise ValueError("k_max must be >= 1 so that G maps the central block into the universe")
        self.N, self.NA, self.NB, self.k_max = N, NA, NB, k_max
        self.blocks = [FockBlock(N, NA + k, NB - k) for k in range(-k_max, k_max + 1)
                       if NA + k >= 0 and NB - k >= 0]
        self.dimension = sum(b.dimension for b in self.blocks)
        if self.dimension > MAX_FOCK_DIM:
            raise DimensionCapError(f"Fock universe dimension {self.dimension} exceeds {MAX_FOCK_DIM}")
        self.offsets = {}
        off = 0
        for b in self.blocks:
            self.offsets[b.NA] = off
            off += b.dimension
        self.space = HilbertSpace.fock_block(N, tuple((b.NA, b.NB) for b in self.blocks), self.dimension)

    @cached_property
    def states(self) -> np.ndarray:
        return np.array([s for b in self.blocks for s in b.basis], dtype=np.int64).reshape(-1, 2 * self.N)

    @cached_property
    def _keys(self) -> tuple:
        # mixed-radix encoding of occupation vectors; radix exceeds any occupation
        radix = self.NA + self.NB + 2
        weights = radix ** np.arange(2 * self.N - 1, -1, -1, dtype=np.int64)
        keys = self.states @ weights
        order = np.argsort(keys, kind="stable")
        return weights, keys[order], order

    def lookup(self, states: np.ndarray) -> np.ndarray:
        """Basis index of each occupation vector (row), -1 when absent."""
        weights, sorted_keys, order = self._keys
        k = np.asarray(states, dtype=np.int64) @ weights
        pos = np.clip(np.searchsorted(sorted_keys, k), 0, len(sorted_keys) - 1)
        found = sorted_keys[pos] == k
        return np.where(found, order[pos], -1)

    @cached_property
    def index(self) -> dict:
        return {tuple(s): i for i, s in enumerate(self.states.tolist())}

    def block_slice(self, NA: int) -> slice:
        if NA not in self.offsets:
            raise ValueError(f"no block with N_A = {NA}")
        blk = next(b for b in self.blocks if b.NA == NA)
        return slice(self.offsets[NA], self.offsets[NA] + blk.dimension)

    @property
    def central(self) -> slice:
        return self.block_slice(self.NA)

    def hop(self, src: int, dst: int) -> sp.csr_matrix:
        """c_dst^dagger c_src with modes numbered a_1..a_N, b_1..b_N as 0..2N-1."""
        S = self.states
        d = self.dimension
        if src == dst:
            return sp.diags(S[:, src].astype(float), format="csr")
        cols = np.flatnonzero(S[:, src] > 0)
        T = S[cols].copy()
        amp = np.sqrt(T[:, src].astype(float))
        T[:, src] -= 1
        amp *= np.sqrt(T[:, dst] + 1.0)
        T[:, dst] += 1
        rows = self.lookup(T)
        keep = rows >= 0
        return sp.csr_matrix((amp[keep], (rows[keep], cols[keep])), shape=(d, d))

    def densify(self, M) -> Operator:
        if self.dimension > MAX_DENSE_DIM:
            raise DimensionCapError(f"dense Fock operators are capped at {MAX_DENSE_DIM} states")
        return Operator(M.toarray() if sp.issparse(M) else M, self.space, True)


def tunneling_matrix(universe: FockUniverse) -> sp.csr_matrix:
    """G = -1/2 sum_i (a_i^+ b_i + b_i^+ a_i) as a sparse matrix."""
    N = universe.N
    G = sp.csr_matrix((universe.dimension, universe.dimension))
    for i in range(N):
        G = G + universe.hop(N + i, i) + universe.hop(i, N + i)
    return (-0.5 * G).tocsr()


def tunneling_generator(universe: FockUniverse) -> Operator:
    return universe.densify(tunneling_matrix(universe))


def number_projector(universe: FockUniverse, NA: int) -> SectorProjector:
    """Diagonal projector onto the block with N_A bosons in the a modes."""
    sl = universe.block_slice(NA)
    diag = np.zeros(universe.dimension)
    diag[sl] = 1.0
    if universe.dimension > MAX_DENSE_DIM:
        raise DimensionCapError(f"dense Fock operators are capped at {MAX_DENSE_DIM} states")
    return SectorProjector(Operator(np.diag(diag), universe.space, True), "boson-number", NA)


def _condensate_amplitudes(comps: list, orbital: np.ndarray) -> np.ndarray:
    """Amplitudes of (sum_i c_i a_i^+)^M |vac> on occupation vectors ``comps`` (unnormalized)."""
    amps = []
    for n in comps:
        # M!/prod n_i! prod c_i^n_i sqrt(n_i!) = M! prod c_i^n_i / sqrt(n_i!)
        a = 1.0 + 0j
        for c, k in zip(orbital, n):
            a *= c**k / np.sqrt(factorial(k))
        amps.append(a)
    return np.array(amps)


def bec_ket(universe: FockUniverse, orbital_a: Optional[Sequence] = None,
            orbital_b: Optional[Sequence] = None) -> np.ndarray:
    """Product of two condensates in the central block, normalized.

    Default orbitals are uniform, 1/sqrt(N) on every mode.
    """
    N = universe.N
    uni = np.full(N, 1 / np.sqrt(N))
    oa = uni if orbital_a is None else np.asarray(orbital_a, dtype=complex)
    ob = uni if orbital_b is None else np.asarray(orbital_b, dtype=complex)
    ca = compositions(universe.NA, N)
    cb = compositions(universe.NB, N)
    amp = np.kron(_condensate_amplitudes(ca, oa), _condensate_amplitudes(cb, ob))
    psi = np.zeros(universe.dimension, dtype=complex)
    psi[universe.central] = amp / np.linalg.norm(amp)
    return psi


def ideal_bec_state(N: int, NA: int, NB: int) -> DensityOperator:
    """Pure state of two uniform condensates, as a dense density matrix."""
    u = FockUniverse(N, NA, NB)
    if u.dimension > MAX_DENSE_DIM:
        raise DimensionCapError(f"dense Fock states are capped at {MAX_DENSE_DIM} states; use bec_ket")
    return DensityOperator.from_ket(bec_ket(u), u.space)


@dataclass(frozen=True, eq=False)
class FockEnsemble:
    """State in eigen-form: orthonormal columns ``vectors`` with weights summing to 1."""

    universe: FockUniverse
    vectors: np.ndarray
    weights: np.ndarray

    @classmethod
    def pure(cls, universe: FockUniverse, psi) -> "FockEnsemble":
        psi = np.asarray(psi, dtype=complex)
        return cls(universe, (psi / np.linalg.norm(psi))[:, None], np.ones(1))

    def density(self) -> DensityOperator:
        if self.universe.dimension > MAX_DENSE_DIM:
            raise DimensionCapError("too large to densify")
        V = self.vectors.toarray() if sp.issparse(self.vectors) else self.vectors
        return DensityOperator((V * self.weights) @ V.conj().T, self.universe.space, check_positive=False)


def fock_mixture(universe: FockUniverse, weights_a: dict, weights_b: dict) -> FockEnsemble:
    """rho_A x rho_B diagonal in the occupation basis of the central block.

    The eigenvectors are unit vectors and are kept as a sparse matrix.
    ``weights_a`` maps occupation tuples of the a modes to probabilities.
    """
    cols, w = [], []
    for na, pa in weights_a.items():
        for nb, pb in weights_b.items():
            if pa * pb > 0:
                cols.append(universe.index[tuple(na) + tuple(nb)])
                w.append(pa * pb)
    V = sp.csc_matrix((np.ones(len(cols)), (cols, np.arange(len(cols)))),
                      shape=(universe.dimension, len(cols)))
    w = np.array(w)
    return FockEnsemble(universe, V, w / w.sum())


def uniform_fock_mixture(universe: FockUniverse) -> FockEnsemble:
    """Equal-weight mixture of all occupation states: diagonal SPDM with n_i = N_A / N."""
    ca = compositions(universe.NA, universe.N)
    cb = compositions(universe.NB, universe.N)
    return fock_mixture(universe, {c: 1 / len(ca) for c in ca}, {c: 1 / len(cb) for c in cb})


def _as_ensemble(state, universe: FockUniverse) -> FockEnsemble:
    if isinstance(state, FockEnsemble):
        return state
    if isinstance(state, DensityOperator):
        lam, V = np.linalg.eigh(state.matrix)
        keep = lam > 1e-14
        return FockEnsemble(universe, V[:, keep], lam[keep])
    return FockEnsemble.pure(universe, state)


def spdm(state, universe: FockUniverse, side: str = "a") -> np.ndarray:
    """Single-particle density matrix <c_i^+ c_j> for side 'a' or 'b'."""
    ens = _as_ensemble(state, universe)
    N = universe.N
    off = 0 if side == "a" else N
    out = np.zeros((N, N), dtype=complex)
    V, w = ens.vectors, ens.weights
    for i in range(N):
        for j in range(N):
            # c_i^+ c_j moves a boson from j to i
            M = universe.hop(off + j, off + i)
            out[i, j] = np.sum(w * _column_overlaps(V, M @ V))
    return out


def _column_overlaps(V, W) -> np.ndarray:
    """<V_k|W_k> for every column k; dense or sparse inputs."""
    if sp.issparse(V) or sp.issparse(W):
        V = V if sp.issparse(V) else sp.csc_matrix(V)
        return np.asarray(V.conj().multiply(W).sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", V.conj(), W)


def _check_spdm(s: np.ndarray, name: str) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"{name} must be square")
    if np.max(np.abs(s - s.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(s))):
        raise NotHermitianError(f"{name} is not Hermitian")
    if np.linalg.eigvalsh(s)[0] < -1e-10:
        raise ValueError(f"{name} is not positive semidefinite")
    return s


def qfi_closed_form(spdm_a, spdm_b) -> float:
    """N_A + N_B + sum_ij (<a_i^+ a_j><b_j^+ b_i> + c.c.) for a product of fixed-number states."""
    A = _check_spdm(spdm_a, "spdm_a")
    B = _check_spdm(spdm_b, "spdm_b")
    if A.shape != B.shape:
        raise ValueError("SPDMs must have the same size")
    cross = np.sum(A * B.T)
    return float(np.trace(A).real + np.trace(B).real + 2.0 * cross.real)


def ideal_bec_qfi(N: int, n_a: float, n_b: float) -> float:
    """N (n_A + n_B) + 2 N^2 n_A n_B for uniform condensates."""
    return N * (n_a + n_b) + 2 * N**2 * n_a * n_b


def separable_bound(N: int, n_a: float, n_b: float) -> float:
    """Largest QFI of mode-separable states with uniform densities: N (n_A + n_B + 2 n_A n_B)."""
    return N * (n_a + n_b + 2 * n_a * n_b)


def coherence_witness(spdm_a, NB: int, N: int, tol: float = 1e-10) -> tuple:
    """sum_{i != j} Re <a_i^+ a_j> and whether it is positive.

    Meaningful when the b modes hold a uniform ideal condensate; then
    F_Q = F_sep + 2 (N_B / N) * statistic for uniform a densities.
    """
    A = np.asarray(spdm_a, dtype=complex)
    stat = float(np.sum(A.real) - np.trace(A).real)
    return stat, bool(stat > tol)


def brute_force_qfi(state, G, universe: Optional[FockUniverse] = None) -> float:
    """QFI of a Fock-space state straight from the spectral formula.

    ``state`` is a DensityOperator (dense path, full eigensolve), a
    FockEnsemble, or a ket (support-only path with sparse ``G``).
    Raises RuntimeError when the universe is too small for G^2 on the state
    (weight on a boundary block that G would carry outside).
    """
    if isinstance(state, DensityOperator):
        Gop = G if isinstance(G, Operator) else Operator(G.toarray() if sp.issparse(G) else G,
                                                          state.space, True)
        if universe is not None:
            _closure_check(_as_ensemble(state, universe))
        return qfi(state, Gop)
    if universe is None:
        raise ValueError("universe required for kets and ensembles")
    ens = _as_ensemble(state, universe)
    Gm = G.matrix if isinstance(G, Operator) else G
    _closure_check(ens)
    return qfi_low_rank(ens.weights, ens.vectors, Gm)


def _closure_check(ens: FockEnsemble, G=None, tol: float = 1e-10) -> None:
    """Reject states with weight on an outermost block whose neighbour exists.

    G applied to such a block leaves the universe, so the truncated G^2 would
    differ from the true one.
    """
    u = ens.universe
    total = u.NA + u.NB
    V, w = ens.vectors, ens.weights
    for blk in u.blocks:
        k = blk.NA - u.NA
        if abs(k) < u.k_max:
            continue
        outer = blk.NA + (1 if k > 0 else -1)
        if not 0 <= outer <= total:
            continue
        sl = u.block_slice(blk.NA)
        leak = float(np.sum(w * _column_overlaps(V[sl], V[sl]).real))
        if leak > tol:
            raise RuntimeError(f"truncation insufficient: weight {leak:.3e} on boundary block N_A={blk.NA}")
