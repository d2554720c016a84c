"""Quantum Fisher information, signal-to-noise ratios and the projector theorem."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .operators import (
    DensityOperator,
    NotHermitianError,
    Operator,
    SpectralDecomposition,
    expectation,
    spectral_decompose,
    variance,
    _check_rho_op,
)
from .symmetry import (
    DEFAULT_TOL,
    SectorProjector,
    is_off_diagonal,
    is_supported_in_sector,
)

EIG_CUTOFF = 1e-12
THETA_STAR = 1e-4
THEOREM_TOL = 1e-8
XI_TOL = 1e-6
CHAIN_SLACK = 1e-8


class UndefinedSignalError(ArithmeticError):
    """Var(O) vanishes in the rotated state, so the signal-to-noise ratio is 0/0."""


def _require_hermitian(G: Operator, name: str = "G") -> None:
    if not G.is_hermitian():
        raise NotHermitianError(f"{name} must be Hermitian")


def qfi_from_eigensystem(p: np.ndarray, V: np.ndarray, G: np.ndarray,
                         eig_cutoff: float = EIG_CUTOFF) -> float:
    """2 sum_nm (p_n - p_m)^2/(p_n + p_m) |<n|G|m>|^2 over pairs with p_n + p_m > cutoff."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    g = V.conj().T @ G @ V
    s = p[:, None] + p[None, :]
    diff2 = (p[:, None] - p[None, :]) ** 2
    keep = s > eig_cutoff
    w = np.zeros_like(s)
    w[keep] = diff2[keep] / s[keep]
    return float(2.0 * np.sum(w * np.abs(g) ** 2))


def qfi_low_rank(p: np.ndarray, U, G, eig_cutoff: float = EIG_CUTOFF) -> float:
    """Same sum as :func:`qfi_from_eigensystem`, given only the support of rho.

    ``U`` holds orthonormal eigenvectors with nonzero weights ``p``; the pairs
    (support, kernel) are summed in closed form as 4 sum_n p_n <n|G Pi_ker G|n>.
    ``U`` and ``G`` may be dense arrays or scipy sparse matrices.
    """
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    GU = G @ U
    g = U.conj().T @ GU
    if sp.issparse(g):
        g = g.tocoo()
        rows, cols, vals = g.row, g.col, np.abs(g.data) ** 2
        gcol = np.bincount(cols, weights=vals, minlength=p.size)
        GU2 = np.asarray(abs(GU).power(2).sum(axis=0)).ravel() if sp.issparse(GU) \
            else np.sum(np.abs(GU) ** 2, axis=0)
    else:
        ii, jj = np.indices(g.shape)
        rows, cols, vals = ii.ravel(), jj.ravel(), (np.abs(g) ** 2).ravel()
        gcol = np.sum(np.abs(g) ** 2, axis=0)
        GU2 = np.sum(np.abs(GU) ** 2, axis=0)
    s = p[rows] + p[cols]
    keep = s > eig_cutoff
    inner = 2.0 * np.sum((p[rows] - p[cols])[keep] ** 2 / s[keep] * vals[keep])
    to_kernel = GU2 - gcol
    mask = p > eig_cutoff
    return float(inner + 4.0 * np.sum(p[mask] * to_kernel[mask]))


def qfi(rho: DensityOperator, G: Operator, eig_cutoff: float = EIG_CUTOFF) -> float:
    """Quantum Fisher information of ``rho`` for rotations generated by ``G``."""
    _check_rho_op(rho, G)
    _require_hermitian(G)
    dec = spectral_decompose(rho)
    return qfi_from_eigensystem(dec.eigenvalues, dec.eigenvectors, G.matrix, eig_cutoff)


def commutator(A: Operator, B: Operator) -> Operator:
    return A @ B - B @ A


class RotatedState:
    """rho rotated by exp(-i theta G), kept as rho + Delta.

    With K = exp(-i theta G) - 1 evaluated through expm1, the increment
    Delta = K rho + rho K^+ + K rho K^+ carries full relative precision even
    for tiny theta, so expectation values of order theta^2 are not swamped by
    rounding of the O(1) entries of rho.
    """

    def __init__(self, rho: DensityOperator, G_dec: SpectralDecomposition, theta: float):
        self.rho = rho.matrix
        K = G_dec.function(lambda lam: np.expm1(-1j * theta * lam))
        Kr = K @ self.rho
        self.delta = Kr + Kr.conj().T + Kr @ K.conj().T

    def expectation(self, O: np.ndarray) -> complex:
        Ot = O.T
        return complex(np.sum(self.rho * Ot) + np.sum(self.delta * Ot))

    def density(self) -> np.ndarray:
        return self.rho + self.delta


def signal_to_noise(rho: DensityOperator, O, G: Operator, theta: float,
                    G_dec: Optional[SpectralDecomposition] = None) -> float:
    """|<[O, G]>_theta|^2 / Var(O)_theta in the state rotated by exp(-i theta G).

    ``O`` may be a SectorProjector; its variance is then evaluated as
    <P>_theta <Q>_theta (exact for P^2 = P) with <Q>_theta computed directly.
    Raises UndefinedSignalError when the variance vanishes.
    """
    is_proj = isinstance(O, SectorProjector)
    op = O.op if is_proj else O
    _check_rho_op(rho, op)
    _require_hermitian(op, "O")
    _require_hermitian(G)
    rot = RotatedState(rho, G_dec if G_dec is not None else spectral_decompose(G), theta)
    signal = abs(rot.expectation(commutator(op, G).matrix)) ** 2
    if is_proj:
        p = rot.expectation(op.matrix).real
        q = rot.expectation(np.eye(op.dim) - op.matrix).real
        var = p * q
    else:
        m = rot.expectation(op.matrix).real
        var = rot.expectation(op.matrix @ op.matrix).real - m * m
    scale = max(1.0, float(np.max(np.abs(op.matrix)))) ** 2
    if var <= 1e-28 * scale:
        raise UndefinedSignalError(f"Var(O) = {var:.3e} at theta = {theta}")
    return signal / var


def richardson_xi(rho: DensityOperator, O, G: Operator,
                  theta_star: float = THETA_STAR) -> float:
    """theta -> 0 limit of the signal-to-noise ratio from theta*, theta*/2.

    For a sector state with an off-diagonal generator the ratio is even in
    theta, so the leading error is O(theta^2) and the combination
    (4 xi(theta/2) - xi(theta)) / 3 cancels it.
    """
    dec = spectral_decompose(G)
    x1 = signal_to_noise(rho, O, G, theta_star, dec)
    x2 = signal_to_noise(rho, O, G, theta_star / 2, dec)
    return (4.0 * x2 - x1) / 3.0


@dataclass(frozen=True)
class SensitivityCurve:
    thetas: np.ndarray
    p_values: np.ndarray
    curvature_estimate: float
    q_values: np.ndarray  # <Q>_theta = 1 - <P>_theta, computed directly


class HypothesisViolation(ValueError):
    def __init__(self, msg, sector_residual, offdiag_residuals):
        super().__init__(msg)
        self.sector_residual = sector_residual
        self.offdiag_residuals = offdiag_residuals


def _check_hypotheses(rho, P, G, tol):
    sup = is_supported_in_sector(rho, P, tol)
    off = is_off_diagonal(G, P, tol)
    return sup, off


def projector_sensitivity_curve(rho: DensityOperator, P: SectorProjector, G: Operator,
                                thetas: Sequence[float], tol: float = DEFAULT_TOL) -> SensitivityCurve:
    """<P>_theta = Tr(U^+ P U rho) on a grid, with U = exp(-i theta G).

    ``curvature_estimate`` is (1 - <P>_theta)/theta^2 at the smallest nonzero
    theta, which approaches <G^2>.
    """
    sup, off = _check_hypotheses(rho, P, G, tol)
    if not (sup.supported and off.off_diagonal):
        raise HypothesisViolation(
            f"theorem hypotheses fail: sector residual {sup.residual:.3e}, "
            f"off-diagonal residuals ({off.diagonal_residual:.3e}, {off.complement_residual:.3e})",
            sup.residual, (off.diagonal_residual, off.complement_residual))
    thetas = np.asarray(thetas, dtype=float)
    dec = spectral_decompose(G)
    q = np.eye(P.dim) - P.matrix
    pv, qv = [], []
    for th in thetas:
        rot = RotatedState(rho, dec, th)
        pv.append(rot.expectation(P.matrix).real)
        qv.append(rot.expectation(q).real)
    pv, qv = np.array(pv), np.array(qv)
    nz = np.flatnonzero(thetas != 0)
    if nz.size:
        i = nz[np.argmin(np.abs(thetas[nz]))]
        curv = qv[i] / thetas[i] ** 2
    else:
        curv = float("nan")
    return SensitivityCurve(thetas, pv, float(curv), qv)


@dataclass(frozen=True)
class TheoremReport:
    qfi: float
    four_G2: float
    four_var: float
    xi_P_inv2: float
    sector_residual: float
    diagonal_residual: float
    complement_residual: float
    passed: bool
    tol: float
    xi_tol: float
    hypothesis_tol: float

    @property
    def hypothesis_residuals(self) -> tuple:
        return (self.sector_residual, max(self.diagonal_residual, self.complement_residual))

    def to_dict(self) -> dict:
        return asdict(self)


def check_theorem(rho: DensityOperator, P: SectorProjector, G: Operator,
                  tol: float = THEOREM_TOL, xi_tol: float = XI_TOL,
                  hypothesis_tol: float = DEFAULT_TOL,
                  theta_star: float = THETA_STAR) -> TheoremReport:
    """Evaluate xi_P^-2, 4<G^2>, 4Var(G) and F_Q(G) independently and compare.

    Hypothesis failures do not raise; they show up as residuals and
    ``passed = False``. When the hypotheses fail the xi_P^-2 entry may be
    nan (the rotated projector can have zero variance).
    """
    sup, off = _check_hypotheses(rho, P, G, hypothesis_tol)
    F = qfi(rho, G)
    g2 = expectation(rho, G @ G).real
    four_G2 = 4.0 * g2
    four_var = 4.0 * variance(rho, G)
    try:
        xi = richardson_xi(rho, P, G, theta_star)
    except UndefinedSignalError:
        xi = float("nan")
    ok = (
        sup.supported
        and off.off_diagonal
        and abs(F - four_G2) <= tol * max(1.0, four_G2)
        and abs(xi - F) <= xi_tol * max(1.0, F)
    )
    return TheoremReport(F, four_G2, four_var, xi, sup.residual, off.diagonal_residual,
                         off.complement_residual, bool(ok), tol, xi_tol, hypothesis_tol)


class WitnessResult(NamedTuple):
    qfi: float
    bound: float
    entangled: bool
    # reduced criterion <G^2> > sum_i <G_i^2>, only when P G_i P = 0 for every i
    reduced_lhs: Optional[float] = None
    reduced_rhs: Optional[float] = None
    reduced_entangled: Optional[bool] = None


def local_site(op: Operator, tol: float = 1e-10) -> int:
    """Site on which a register operator acts nontrivially; ValueError if none or several.

    An operator proportional to the identity is assigned site 0.
    """
    N = op.space.n_spins if op.space.kind == "spin-register" else int(round(np.log2(op.dim)))
    if 2**N != op.dim:
        raise ValueError("local operators must act on a qubit register")
    m = op.matrix
    t = m.reshape([2] * (2 * N))
    for site in range(N):
        # partial trace over every other site, then rebuild I x g x I
        g = np.trace(np.moveaxis(t, (site, N + site), (0, 1)).reshape(2, 2, 2**(N - 1), 2**(N - 1)),
                     axis1=2, axis2=3) / 2**(N - 1)
        rebuilt = np.kron(np.kron(np.eye(2**site), g), np.eye(2**(N - site - 1)))
        if np.max(np.abs(rebuilt - m)) <= tol:
            return site
    raise ValueError("operator is not supported on a single site")


def separability_witness(rho: DensityOperator, G_locals: Sequence[Operator],
                         P: Optional[SectorProjector] = None,
                         slack: float = CHAIN_SLACK) -> WitnessResult:
    """F_Q(sum_i G_i) against the separable bound 4 sum_i Var(G_i).

    With a sector projector ``P`` for which every P G_i P vanishes, the reduced
    form <G^2> > sum_i <G_i^2> is reported as well.
    """
    sites = [local_site(g) for g in G_locals]
    if len(set(sites)) != len(sites):
        raise ValueError("local generators must act on distinct sites")
    G = G_locals[0]
    for g in G_locals[1:]:
        G = G + g
    F = qfi(rho, G)
    bound = 4.0 * sum(variance(rho, g) for g in G_locals)
    lhs = rhs = red = None
    if P is not None and all(np.max(np.abs(P.matrix @ g.matrix @ P.matrix)) <= DEFAULT_TOL
                             for g in G_locals):
        lhs = expectation(rho, G @ G).real
        rhs = sum(expectation(rho, g @ g).real for g in G_locals)
        red = bool(lhs > rhs + slack)
    return WitnessResult(F, bound, bool(F > bound + slack), lhs, rhs, red)
