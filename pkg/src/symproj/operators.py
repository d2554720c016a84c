"""Dense Hilbert-space algebra: labeled spaces, operators, density matrices.

Everything is stored as a dense complex matrix. Matrices are copied on
construction and marked read-only, so instances can be shared freely.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import reduce
from math import comb
from pathlib import Path
from typing import Union

import numpy as np

HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10
TRACE_TOL = 1e-10

# dimension cap for full-register work (N <= 12 spins)
MAX_DENSE_DIM = 4096
FIDELITY_CUTOFF = 1e-14

SPACE_KINDS = ("spin-register", "dicke-sector", "fock-block", "generic")

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionMismatchError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class DimensionCapError(ValueError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    kind: str
    dimension: int
    metadata: tuple = ()

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")

    @property
    def meta(self) -> dict:
        return dict(self.metadata)

    @classmethod
    def spin_register(cls, N: int) -> "HilbertSpace":
        return cls("spin-register", 2**N, (("N", N),))

    @classmethod
    def dicke_sector(cls, N: int) -> "HilbertSpace":
        return cls("dicke-sector", N + 1, (("N", N),))

    @classmethod
    def fock_block(cls, N: int, blocks: tuple, dimension: int) -> "HilbertSpace":
        """Direct sum of fixed-number blocks; ``blocks`` holds (N_A, N_B) pairs."""
        expected = sum(
            comb(na + N - 1, N - 1) * comb(nb + N - 1, N - 1) for na, nb in blocks
        )
        if expected != dimension:
            raise ValueError(f"fock dimension {dimension} != enumerated {expected}")
        return cls("fock-block", dimension, (("N", N), ("blocks", tuple(blocks))))

    @classmethod
    def generic(cls, dimension: int) -> "HilbertSpace":
        return cls("generic", dimension)

    @property
    def n_spins(self) -> int:
        if self.kind not in ("spin-register", "dicke-sector"):
            raise ValueError(f"{self.kind} space has no spin count")
        return self.meta["N"]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermiticity_residual(a: np.ndarray) -> float:
    return _max_abs(a - a.conj().T)


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix living on a :class:`HilbertSpace`.

    Setting ``hermitian=True`` verifies the claim (max entry of A - A^dagger
    at most 1e-12, scaled by the largest entry when that exceeds 1).
    """

    matrix: np.ndarray
    space: HilbertSpace = None
    hermitian: bool = False

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        if self.space is None:
            object.__setattr__(self, "space", HilbertSpace.generic(m.shape[0]))
        elif self.space.dimension != m.shape[0]:
            raise DimensionMismatchError(
                f"matrix dimension {m.shape[0]} does not match space {self.space.dimension}"
            )
        if self.hermitian:
            res = hermiticity_residual(m)
            if res > HERMITIAN_TOL * max(1.0, _max_abs(m)):
                raise NotHermitianError(f"operator flagged Hermitian but |A - A^+| = {res:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return hermiticity_residual(self.matrix) <= tol * max(1.0, _max_abs(self.matrix))

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.space, self.hermitian)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def _other(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            check_same_space(self, other)
            return other.matrix
        raise TypeError(f"cannot combine Operator with {type(other).__name__}")

    def __add__(self, other):
        if np.isscalar(other):
            return Operator(self.matrix + other * np.eye(self.dim), self.space,
                            self.hermitian and np.isreal(other))
        herm = self.hermitian and isinstance(other, Operator) and other.hermitian
        return Operator(self.matrix + self._other(other), self.space, herm)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1) * other

    def __rsub__(self, other):
        return (-1) * self + other

    def __neg__(self):
        return (-1) * self

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return Operator(c * self.matrix, self.space, self.hermitian and np.isreal(c))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            return Operator(self.matrix @ self._other(other), self.space)
        return self.matrix @ np.asarray(other)

    def __pow__(self, k: int):
        return Operator(np.linalg.matrix_power(self.matrix, k), self.space, self.hermitian)

    def __repr__(self):
        return f"Operator(kind={self.space.kind!r}, dim={self.dim}, hermitian={self.hermitian})"


def check_same_space(a: Operator, b: Operator) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def _dm_checks(m: np.ndarray, check_positive: bool, tol_pos: float) -> None:
    res = hermiticity_residual(m)
    if res > HERMITIAN_TOL:
        raise NotHermitianError(f"density matrix not Hermitian (residual {res:.3e})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace {tr!r} != 1")
    if check_positive:
        lam_min = np.linalg.eigvalsh(m)[0]
        if lam_min < -tol_pos:
            raise ValueError(f"density matrix has negative eigenvalue {lam_min:.3e}")


class DensityOperator(Operator):
    """Hermitian, positive semidefinite, unit-trace operator.

    The matrix is symmetrized as ``(A + A^dagger)/2`` after the Hermiticity
    check, so downstream code can rely on exact Hermiticity. Pass
    ``check_positive=False`` when positivity holds by construction (it costs a
    full eigenvalue solve).
    """

    def __init__(self, matrix, space: HilbertSpace | None = None, *,
                 check_positive: bool = True, positivity_tol: float = POSITIVITY_TOL):
        m = np.asarray(matrix, dtype=complex)
        _dm_checks(m, check_positive, positivity_tol)
        super().__init__(0.5 * (m + m.conj().T), space, True)

    @classmethod
    def from_ket(cls, psi, space: HilbertSpace | None = None) -> "DensityOperator":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), space, check_positive=False)

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace) -> "DensityOperator":
        d = space.dimension
        return cls(np.eye(d) / d, space, check_positive=False)

    def purity(self) -> float:
        # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        return float(np.sum(np.abs(self.matrix) ** 2))

    def __repr__(self):
        return f"DensityOperator(kind={self.space.kind!r}, dim={self.dim})"


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    space: HilbertSpace = field(default=None)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def function(self, f) -> np.ndarray:
        """Matrix ``V f(lambda) V^dagger`` for a vectorized scalar function ``f``."""
        V = self.eigenvectors
        return (V * f(self.eigenvalues)) @ V.conj().T

    def unitary(self, t: float) -> np.ndarray:
        return self.function(lambda lam: np.exp(-1j * t * lam))


def spectral_decompose(A: Operator) -> SpectralDecomposition:
    if not A.is_hermitian():
        raise NotHermitianError("spectral_decompose requires a Hermitian operator")
    m = A.matrix
    if not np.iscomplexobj(m) or not np.any(m.imag):
        lam, V = np.linalg.eigh(m.real)
        V = V.astype(complex)
    else:
        lam, V = np.linalg.eigh(m)
    lam.setflags(write=False)
    V.setflags(write=False)
    return SpectralDecomposition(lam, V, A.space)


def tensor(A: Operator, B: Operator) -> Operator:
    sa, sb = A.space, B.space
    if sa.kind == sb.kind == "spin-register":
        space = HilbertSpace.spin_register(sa.n_spins + sb.n_spins)
    else:
        space = HilbertSpace.generic(A.dim * B.dim)
    return Operator(np.kron(A.matrix, B.matrix), space, A.hermitian and B.hermitian)


def identity(space: HilbertSpace) -> Operator:
    return Operator(np.eye(space.dimension), space, True)


def _check_register(N: int) -> None:
    if N < 1:
        raise ValueError("need at least one spin")
    if 2**N > MAX_DENSE_DIM:
        raise DimensionCapError(f"N={N} exceeds the dense cap of {MAX_DENSE_DIM} states")


def pauli_on_site(axis: str, site: int, N: int) -> Operator:
    """Pauli matrix on ``site``; site 0 is the leftmost (most significant) factor."""
    _check_register(N)
    if not 0 <= site < N:
        raise IndexError(f"site {site} out of range for N={N}")
    mats = [np.eye(2)] * N
    mats[site] = PAULI[axis]
    return Operator(reduce(np.kron, mats), HilbertSpace.spin_register(N), True)


def pauli_string(axes: dict, N: int) -> Operator:
    """Product of Paulis, e.g. ``{0: 'x', 3: 'x'}``."""
    _check_register(N)
    mats = [PAULI[axes[i]] if i in axes else np.eye(2) for i in range(N)]
    return Operator(reduce(np.kron, mats), HilbertSpace.spin_register(N), True)


def collective_spin(axis: str, N: int) -> Operator:
    """J^a = sum_i sigma_i^a / 2 on the full 2^N register."""
    _check_register(N)
    # diagonal shortcut for z; x and y via sums of site operators
    if axis == "z":
        bits = (np.arange(2**N)[:, None] >> np.arange(N)[::-1]) & 1
        diag = 0.5 * (N - 2 * bits.sum(axis=1))
        return Operator(np.diag(diag), HilbertSpace.spin_register(N), True)
    total = sum(pauli_on_site(axis, i, N).matrix for i in range(N))
    return Operator(0.5 * total, HilbertSpace.spin_register(N), True)


def _check_rho_op(rho: Operator, O: Operator) -> None:
    if rho.dim != O.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} vs operator dim {O.dim}")


def expectation(rho: DensityOperator, O: Operator) -> complex:
    _check_rho_op(rho, O)
    # Tr(rho O) = sum_ij rho_ij O_ji
    return complex(np.sum(rho.matrix * O.matrix.T))


def variance(rho: DensityOperator, O: Operator) -> float:
    _check_rho_op(rho, O)
    mean = expectation(rho, O).real
    centered = O.matrix - mean * np.eye(O.dim)
    return float(np.sum(rho.matrix * (centered @ centered).T).real)


def evolve(rho: DensityOperator, H: Union[Operator, SpectralDecomposition], t: float) -> DensityOperator:
    """exp(-iHt) rho exp(+iHt), using the spectral decomposition of ``H``.

    ``H`` may be passed pre-decomposed to reuse the eigensolve across times.
    """
    dec = H if isinstance(H, SpectralDecomposition) else spectral_decompose(H)
    if dec.eigenvectors.shape[0] != rho.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} vs Hamiltonian dim {dec.eigenvectors.shape[0]}")
    if t == 0:
        return rho
    V = dec.eigenvectors
    phases = np.exp(-1j * t * dec.eigenvalues)
    # work in the eigenbasis: rho' = V (phase_i conj(phase_j) (V^+ rho V)_ij) V^+
    r = V.conj().T @ rho.matrix @ V
    r = r * np.outer(phases, phases.conj())
    out = V @ r @ V.conj().T
    return DensityOperator(out, rho.space, check_positive=False)


def evolve_ket(psi: np.ndarray, dec: SpectralDecomposition, t: float) -> np.ndarray:
    V = dec.eigenvectors
    return V @ (np.exp(-1j * t * dec.eigenvalues) * (V.conj().T @ psi))


def random_density_in_sector(P, rank: int, seed: int) -> DensityOperator:
    """Seeded mixed state P X X^+ P / Tr(...) with X a d x rank complex Gaussian.

    ``P`` is a :class:`symproj.symmetry.SectorProjector` (or any projector
    Operator). The generator is numpy's PCG64 seeded with ``seed``.
    """
    op = getattr(P, "op", P)
    sector_rank = int(round(op.trace().real))
    if not 1 <= rank <= sector_rank:
        raise ValueError(f"rank {rank} not in [1, {sector_rank}]")
    rng = np.random.default_rng(seed)
    d = op.dim
    X = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    Y = op.matrix @ X
    m = Y @ Y.conj().T
    m = m / np.trace(m).real
    return DensityOperator(m, op.space, check_positive=False)


def random_density(space: HilbertSpace, rank: int, seed: int) -> DensityOperator:
    rng = np.random.default_rng(seed)
    d = space.dimension
    X = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = X @ X.conj().T
    return DensityOperator(m / np.trace(m).real, space, check_positive=False)


def random_hermitian(space: HilbertSpace, seed: int, scale: float = 1.0) -> Operator:
    rng = np.random.default_rng(seed)
    d = space.dimension
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return Operator(scale * 0.5 * (X + X.conj().T), space, True)


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    check_same_space(rho, sigma)
    lam, V = np.linalg.eigh(rho.matrix)
    # work on the support of rho: square roots of roundoff-level eigenvalues
    # would otherwise add O(sqrt(eps)) to the result
    keep = lam > FIDELITY_CUTOFF
    W = V[:, keep] * np.sqrt(lam[keep])
    inner = W.conj().T @ sigma.matrix @ W
    mu = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    mu = mu[mu > FIDELITY_CUTOFF]
    return float(np.sum(np.sqrt(mu)) ** 2)


# -- serialization -----------------------------------------------------------
#
# JSON: {"kind", "dimension", "metadata", "hermitian",
#        "entries": [[re, im], ...]}  (row-major, dimension**2 pairs)
# Binary: b"SPOP", uint32 version (1), uint64 dimension, then dimension**2
#         (re, im) float64 pairs in row-major order; little-endian throughout.

_MAGIC = b"SPOP"


def operator_to_json(op: Operator) -> str:
    flat = op.matrix.ravel()
    return json.dumps({
        "kind": op.space.kind,
        "dimension": op.dim,
        "metadata": [list(kv) for kv in op.space.metadata],
        "hermitian": bool(op.hermitian),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    })


def _meta_from_json(items) -> tuple:
    def freeze(v):
        return tuple(freeze(x) for x in v) if isinstance(v, list) else v
    return tuple((k, freeze(v)) for k, v in items)


def operator_from_json(text: str) -> Operator:
    d = json.loads(text)
    n = d["dimension"]
    e = np.asarray(d["entries"], dtype=float)
    m = (e[:, 0] + 1j * e[:, 1]).reshape(n, n)
    space = HilbertSpace(d["kind"], n, _meta_from_json(d.get("metadata", [])))
    return Operator(m, space, d.get("hermitian", False))


def save_binary(op: Operator, path) -> None:
    m = np.ascontiguousarray(op.matrix, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<IQ", 1, op.dim))
        fh.write(m.tobytes(order="C"))


def load_binary(path) -> Operator:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError("not a symproj operator file")
    version, n = struct.unpack("<IQ", raw[4:16])
    if version != 1:
        raise ValueError(f"unsupported version {version}")
    m = np.frombuffer(raw[16:], dtype="<c16")
    if m.size != n * n:
        raise ValueError("truncated operator file")
    return Operator(m.reshape(n, n))
