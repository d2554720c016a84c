"""Sector projectors and the support / off-diagonality checks.

Parity convention: the even sector is the +1 eigenspace of prod_i sigma_i^a.
For spin 1/2, (-1)^(N S - J^z) equals prod_i sigma_i^z, so "parity-z" is the
magnetization parity.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import NamedTuple, Optional

import numpy as np

from .operators import (
    HERMITIAN_TOL,
    DensityOperator,
    HilbertSpace,
    Operator,
    check_same_space,
    collective_spin,
    pauli_string,
)

DEFAULT_TOL = 1e-10
EMPTY_WEIGHT = 1e-14

SECTOR_VALUES = {"even": +1, "odd": -1, +1: +1, -1: -1}


@dataclass(frozen=True, eq=False)
class SectorProjector:
    op: Operator
    kind: str
    value: object

    def __post_init__(self):
        m = self.op.matrix
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m @ m - m)) > HERMITIAN_TOL * scale:
            raise ValueError("projector is not idempotent")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * scale:
            raise ValueError("projector is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - round(tr)) > 1e-8:
            raise ValueError(f"projector trace {tr} is not an integer")

    @property
    def label(self) -> tuple:
        return (self.kind, self.value)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.op.matrix).real))

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix

    @property
    def space(self) -> HilbertSpace:
        return self.op.space

    @property
    def dim(self) -> int:
        return self.op.dim

    def complement(self) -> "SectorProjector":
        q = np.eye(self.dim) - self.op.matrix
        return SectorProjector(Operator(q, self.space, True), self.kind, ("not", self.value))

    def basis(self) -> np.ndarray:
        """Orthonormal columns spanning the sector (eigenvectors with eigenvalue 1)."""
        lam, V = np.linalg.eigh(self.op.matrix)
        return V[:, lam > 0.5]


def _sector_sign(sector) -> int:
    try:
        return SECTOR_VALUES[sector]
    except KeyError:
        raise ValueError(f"sector must be even/odd or +1/-1, got {sector!r}") from None


def parity_operator(axis: str, N: int) -> Operator:
    return pauli_string({i: axis for i in range(N)}, N)


def parity_projector(axis: str, sector, N: int) -> SectorProjector:
    """P = (1 + s prod_i sigma_i^axis)/2 with s = +1 (even) or -1 (odd)."""
    if axis not in ("x", "z"):
        raise ValueError("parity axis must be 'x' or 'z'")
    if N < 1:
        raise ValueError("need at least one spin")
    s = _sector_sign(sector)
    A = parity_operator(axis, N).matrix
    P = 0.5 * (np.eye(2**N) + s * A)
    return SectorProjector(Operator(P, HilbertSpace.spin_register(N), True),
                           f"parity-{axis}", "even" if s > 0 else "odd")


def magnetization_projector(m: float, N: int) -> SectorProjector:
    """Projector onto the J^z = m eigenspace of N spins 1/2."""
    k = N / 2 + m
    if abs(k - round(k)) > 1e-12 or not 0 <= round(k) <= N:
        raise ValueError(f"m={m} is not a J^z eigenvalue for N={N}")
    jz = np.diag(collective_spin("z", N).matrix).real
    P = np.diag((np.abs(jz - m) < 1e-9).astype(float))
    proj = SectorProjector(Operator(P, HilbertSpace.spin_register(N), True), "magnetization", m)
    assert proj.rank == comb(N, int(round(k)))
    return proj


class SupportCheck(NamedTuple):
    supported: bool
    residual: float


class OffDiagonalCheck(NamedTuple):
    off_diagonal: bool
    diagonal_residual: float
    complement_residual: float


def is_supported_in_sector(rho: DensityOperator, P: SectorProjector,
                           tol: float = DEFAULT_TOL) -> SupportCheck:
    """max |P rho P - rho| <= tol."""
    check_same_space(rho, P.op)
    p = P.matrix
    res = float(np.max(np.abs(p @ rho.matrix @ p - rho.matrix)))
    return SupportCheck(res <= tol, res)


def is_off_diagonal(G: Operator, P: SectorProjector, tol: float = DEFAULT_TOL) -> OffDiagonalCheck:
    """P G P = 0 and P G Q + Q G P = G, both to ``tol`` (max entry)."""
    check_same_space(G, P.op)
    if not G.is_hermitian():
        raise ValueError("generator must be Hermitian")
    p = P.matrix
    q = np.eye(P.dim) - p
    g = G.matrix
    r_diag = float(np.max(np.abs(p @ g @ p)))
    r_comp = float(np.max(np.abs(p @ g @ q + q @ g @ p - g)))
    return OffDiagonalCheck(r_diag <= tol and r_comp <= tol, r_diag, r_comp)


class SectorSplit(NamedTuple):
    rho_even: Optional[DensityOperator]
    w_even: float
    rho_odd: Optional[DensityOperator]
    w_odd: float


def sector_split(rho: DensityOperator, P: SectorProjector) -> SectorSplit:
    """P rho P / w and Q rho Q / w'. A branch with weight below 1e-14 is None."""
    check_same_space(rho, P.op)
    p = P.matrix
    q = np.eye(P.dim) - p
    out = []
    for proj in (p, q):
        block = proj @ rho.matrix @ proj
        w = float(np.trace(block).real)
        if w < EMPTY_WEIGHT:
            out.extend([None, max(w, 0.0)])
        else:
            out.extend([DensityOperator(block / w, rho.space, check_positive=False), w])
    return SectorSplit(*out)


def block_spectral_decompose(H: Operator, P: SectorProjector):
    """Eigen-decompose a Hermitian ``H`` commuting with ``P`` sector by sector.

    Returns (eigenvalues, eigenvectors, sector_index) with eigenvectors lying
    in P's range (index 0) or its complement (index 1) to rounding precision,
    even when levels of the two sectors are nearly degenerate.
    """
    check_same_space(H, P.op)
    lam_all, vec_all, idx_all = [], [], []
    for i, proj in enumerate((P, P.complement())):
        B = proj.basis()
        if B.shape[1] == 0:
            continue
        h = B.conj().T @ H.matrix @ B
        lam, U = np.linalg.eigh(0.5 * (h + h.conj().T))
        lam_all.append(lam)
        vec_all.append(B @ U)
        idx_all.append(np.full(lam.size, i))
    lam = np.concatenate(lam_all)
    order = np.argsort(lam, kind="stable")
    return lam[order], np.hstack(vec_all)[:, order], np.concatenate(idx_all)[order]
