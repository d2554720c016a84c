"""Spin-1/2 models: XYZ Hamiltonians, Dicke sector, one-axis twisting, ramps.

Register conventions: basis state |b> with bit i of site i stored at
position N-1-i (site 0 is the leftmost tensor factor); bit 0 means
sigma^z = +1. Pair couplings are counted once per unordered pair, i.e.
H_int = -sum_{i<j} sum_a J^a_ij sigma_i^a sigma_j^a with symmetric J^a.

Dicke sector basis: index k = number of down spins, m = N/2 - k, so
J^z = diag(j, j-1, ..., -j).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .operators import (
    MAX_DENSE_DIM,
    DensityOperator,
    DimensionCapError,
    HilbertSpace,
    Operator,
    collective_spin,
    expectation,
)
from .symmetry import (
    SectorProjector,
    block_spectral_decompose,
    is_supported_in_sector,
    parity_projector,
)

FAMILIES = ("ising", "xy", "xxz", "field", "oat", "custom-xyz")
AXES = ("x", "y", "z")
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    family: str
    N: int
    couplings: dict = field(default_factory=dict)  # axis -> (N, N) symmetric array
    fields: Optional[np.ndarray] = None  # Omega_i, transverse field along x
    chi: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.N < 1:
            raise ValueError("N must be positive")
        cpl = {}
        for a in AXES:
            J = np.asarray(self.couplings.get(a, np.zeros((self.N, self.N))), dtype=float)
            if J.shape != (self.N, self.N):
                raise ValueError(f"J^{a} must be {self.N}x{self.N}")
            if not np.allclose(J, J.T, atol=1e-14, rtol=0):
                raise ValueError(f"J^{a} must be symmetric")
            if np.any(np.diag(J) != 0):
                raise ValueError(f"J^{a} must have zero diagonal")
            J.setflags(write=False)
            cpl[a] = J
        object.__setattr__(self, "couplings", cpl)
        f = np.zeros(self.N) if self.fields is None else np.asarray(self.fields, dtype=float)
        if f.ndim == 0:
            f = np.full(self.N, float(f))
        if f.shape != (self.N,):
            raise ValueError("fields must have one entry per site")
        f.setflags(write=False)
        object.__setattr__(self, "fields", f)
        self._check_family()

    def _check_family(self):
        Jx, Jy, Jz = (self.couplings[a] for a in AXES)
        zero = lambda J: not np.any(J)
        fam = self.family
        ok = {
            "ising": zero(Jx) and zero(Jy),
            "xy": np.array_equal(Jx, Jy) and zero(Jz),
            "xxz": np.array_equal(Jx, Jy),
            "field": zero(Jx) and zero(Jy) and zero(Jz),
            "oat": zero(Jx) and zero(Jy) and zero(Jz) and not np.any(self.fields),
            "custom-xyz": True,
        }[fam]
        if not ok:
            raise ValueError(f"couplings inconsistent with family {fam!r}")
        if fam != "oat" and self.chi != 0:
            raise ValueError("chi is only meaningful for the oat family")

    def with_fields(self, fields) -> "HamiltonianSpec":
        return HamiltonianSpec(self.family, self.N, self.couplings, fields, self.chi)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "N": self.N,
            "couplings": {a: self.couplings[a].tolist() for a in AXES if np.any(self.couplings[a])},
            "fields": self.fields.tolist(),
            "chi": self.chi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        return cls(d["family"], d["N"], {a: np.asarray(v) for a, v in d.get("couplings", {}).items()},
                   d.get("fields"), d.get("chi", 0.0))


def chain_couplings(N: int, J: float = 1.0, periodic: bool = False) -> np.ndarray:
    """Nearest-neighbour couplings on an open (or periodic) chain."""
    M = np.zeros((N, N))
    for i in range(N - 1):
        M[i, i + 1] = M[i + 1, i] = J
    if periodic and N > 2:
        M[0, N - 1] = M[N - 1, 0] = J
    return M


def power_law_couplings(N: int, J: float = 1.0, alpha: float = 3.0) -> np.ndarray:
    """J / |i - j|^alpha on an open chain."""
    r = np.abs(np.arange(N)[:, None] - np.arange(N)[None, :]).astype(float)
    with np.errstate(divide="ignore"):
        M = np.where(r > 0, J / r**alpha, 0.0)
    return M


def ising(J: np.ndarray, omega=0.0) -> HamiltonianSpec:
    J = np.asarray(J, dtype=float)
    return HamiltonianSpec("ising", J.shape[0], {"z": J}, omega)


def xy(J: np.ndarray, omega=0.0) -> HamiltonianSpec:
    J = np.asarray(J, dtype=float)
    return HamiltonianSpec("xy", J.shape[0], {"x": J, "y": J}, omega)


def xxz(J: np.ndarray, omega=0.0, Jz=None) -> HamiltonianSpec:
    """x = y couplings J; z couplings default to -J (the SU(2)-symmetric sign pattern)."""
    J = np.asarray(J, dtype=float)
    Jz = -J if Jz is None else np.asarray(Jz, dtype=float)
    return HamiltonianSpec("xxz", J.shape[0], {"x": J, "y": J, "z": Jz}, omega)


def field(N: int, omega) -> HamiltonianSpec:
    return HamiltonianSpec("field", N, {}, omega)


def oat(N: int, chi: float) -> HamiltonianSpec:
    return HamiltonianSpec("oat", N, {}, None, chi)


def _bits(N: int) -> np.ndarray:
    return (np.arange(2**N)[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1


def build_hamiltonian(spec: HamiltonianSpec) -> Operator:
    """Dense H_int + H_field (or chi J_z^2 / N for the oat family) on 2^N states."""
    N = spec.N
    d = 2**N
    if d > MAX_DENSE_DIM:
        raise DimensionCapError(f"N={N} exceeds the dense cap")
    bits = _bits(N)
    zsign = 1 - 2 * bits  # sigma^z eigenvalue per site
    idx = np.arange(d)
    H = np.zeros((d, d), dtype=complex)
    if spec.family == "oat":
        jz = 0.5 * zsign.sum(axis=1)
        H[idx, idx] = spec.chi * jz**2 / N
        return Operator(H, HilbertSpace.spin_register(N), True)
    Jx, Jy, Jz = (spec.couplings[a] for a in AXES)
    diag = np.zeros(d)
    for i in range(N):
        for j in range(i + 1, N):
            zz = zsign[:, i] * zsign[:, j]
            if Jz[i, j]:
                diag -= Jz[i, j] * zz
            if Jx[i, j] or Jy[i, j]:
                flipped = idx ^ ((1 << (N - 1 - i)) | (1 << (N - 1 - j)))
                # sigma^y sigma^y |b> = -(z_i z_j) |b flipped>
                H[flipped, idx] += -Jx[i, j] + Jy[i, j] * zz
    H[idx, idx] += diag
    for i in range(N):
        if spec.fields[i]:
            flipped = idx ^ (1 << (N - 1 - i))
            H[flipped, idx] -= spec.fields[i]
    return Operator(H, HilbertSpace.spin_register(N), True)


# -- Dicke sector ------------------------------------------------------------

def dicke_operators(N: int) -> tuple:
    """(J^x, J^y, J^z) for total spin j = N/2 on the N+1 symmetric states."""
    if N < 1:
        raise ValueError("N must be positive")
    j = N / 2
    m = j - np.arange(N + 1)
    # J^+ |j, m> = sqrt(j(j+1) - m(m+1)) |j, m+1>, i.e. index k -> k-1
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    jm = jp.conj().T
    space = HilbertSpace.dicke_sector(N)
    Jx = Operator(0.5 * (jp + jm), space, True)
    Jy = Operator(-0.5j * (jp - jm), space, True)
    Jz = Operator(np.diag(m), space, True)
    return Jx, Jy, Jz


def dicke_embedding(N: int) -> np.ndarray:
    """Isometry W (2^N x (N+1)) whose column k is the normalized symmetric state with k down spins."""
    if 2**N > MAX_DENSE_DIM:
        raise DimensionCapError(f"N={N} exceeds the dense cap")
    k = _bits(N).sum(axis=1)
    W = np.zeros((2**N, N + 1))
    for kk in range(N + 1):
        W[k == kk, kk] = 1.0 / np.sqrt(comb(N, kk))
    return W


def dicke_parity_x(N: int) -> Operator:
    """prod_i sigma_i^x restricted to the symmetric sector, exp(i pi (j - J^x))."""
    Jx = dicke_operators(N)[0]
    lam, V = np.linalg.eigh(Jx.matrix)
    signs = (-1.0) ** np.rint(N / 2 - lam)
    return Operator((V * signs) @ V.conj().T, Jx.space, True)


def dicke_parity_projector(N: int, sector="even") -> SectorProjector:
    s = {"even": 1, "odd": -1, 1: 1, -1: -1}[sector]
    A = dicke_parity_x(N)
    P = 0.5 * (np.eye(N + 1) + s * A.matrix)
    return SectorProjector(Operator(P, A.space, True), "parity-x", "even" if s > 0 else "odd")


_SPINORS = {
    "x": (1 / np.sqrt(2), 1 / np.sqrt(2)),
    "-x": (1 / np.sqrt(2), -1 / np.sqrt(2)),
    "y": (1 / np.sqrt(2), 1j / np.sqrt(2)),
    "-y": (1 / np.sqrt(2), -1j / np.sqrt(2)),
    "z": (1.0, 0.0),
    "-z": (0.0, 1.0),
}


def coherent_spin_ket(axis: str, N: int, representation: str = "full") -> np.ndarray:
    if axis not in _SPINORS:
        raise ValueError(f"axis must be one of {sorted(_SPINORS)}")
    a, b = _SPINORS[axis]
    if representation == "full":
        if 2**N > MAX_DENSE_DIM:
            raise DimensionCapError(f"N={N} exceeds the dense cap")
        psi = np.array([1.0 + 0j])
        for _ in range(N):
            psi = np.kron(psi, np.array([a, b], dtype=complex))
        return psi
    if representation == "dicke":
        # log-space binomial weights: sqrt(C(N, k)) overflows a double near N = 1000
        k = np.arange(N + 1)
        log_amp = 0.5 * (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1))
        out = np.zeros(N + 1, dtype=complex)
        for c, power in ((a, N - k), (b, k)):
            if abs(c) == 0:
                log_amp = np.where(power > 0, -np.inf, log_amp)
            else:
                log_amp = log_amp + power * np.log(abs(c))
        ok = np.isfinite(log_amp)
        pa = complex(a) / abs(a) if abs(a) else 1.0
        pb = complex(b) / abs(b) if abs(b) else 1.0
        out[ok] = np.exp(log_amp[ok]) * pa ** (N - k[ok]) * pb ** k[ok]
        return out
    raise ValueError("representation must be 'full' or 'dicke'")


def coherent_spin_state(axis: str, N: int, representation: str = "full") -> DensityOperator:
    """Product state with every spin polarized along ``axis`` (e.g. 'x', '-z')."""
    psi = coherent_spin_ket(axis, N, representation)
    space = HilbertSpace.spin_register(N) if representation == "full" else HilbertSpace.dicke_sector(N)
    return DensityOperator.from_ket(psi, space)


def oat_ket(N: int, chi: float, t: float, initial_axis: str = "x") -> np.ndarray:
    psi0 = coherent_spin_ket(initial_axis, N, "dicke")
    m = N / 2 - np.arange(N + 1)
    return np.exp(-1j * chi * t * m**2 / N) * psi0


def oat_evolve(N: int, chi: float, t: float, initial_axis: str = "x") -> DensityOperator:
    """exp(-i chi t J_z^2 / N) applied to a coherent spin state, Dicke representation."""
    if N < 2:
        raise ValueError("one-axis twisting needs N >= 2")
    return DensityOperator.from_ket(oat_ket(N, chi, t, initial_axis), HilbertSpace.dicke_sector(N))


def squeezing_parameter(rho: DensityOperator, J: tuple) -> float:
    """Wineland parameter N min Var(J_perp) / |<J>|^2 over directions normal to <J>."""
    N = 2 * float(np.max(np.abs(np.linalg.eigvalsh(J[2].matrix))))
    mean = np.array([expectation(rho, Ja).real for Ja in J])
    n = mean / np.linalg.norm(mean)
    e1 = np.cross(n, [0.0, 0.0, 1.0] if abs(n[2]) < 0.9 else [1.0, 0.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    ops = [sum(e[a] * J[a].matrix for a in range(3)) for e in (e1, e2)]
    means = [np.sum(rho.matrix * o.T).real for o in ops]
    cov = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            sym = 0.5 * (ops[a] @ ops[b] + ops[b] @ ops[a])
            cov[a, b] = np.sum(rho.matrix * sym.T).real - means[a] * means[b]
    return N * float(np.linalg.eigvalsh(cov)[0]) / float(mean @ mean)


# -- ramps ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RampSchedule:
    """Linear ramp of a uniform x field from ``omega_from`` to ``omega_to``.

    ``interaction`` carries the field-free couplings; per step the field is
    evaluated at the step midpoint.
    """

    T: float
    steps: int
    omega_from: float
    omega_to: float
    interaction: HamiltonianSpec

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.T < 0:
            raise ValueError("duration must be non-negative")
        if np.any(self.interaction.fields):
            raise ValueError("interaction spec must not carry fields")

    def omega(self, t: float) -> float:
        s = t / self.T if self.T > 0 else 1.0
        return self.omega_from + (self.omega_to - self.omega_from) * s

    def midpoints(self) -> np.ndarray:
        dt = self.T / self.steps
        return (np.arange(self.steps) + 0.5) * dt

    def hamiltonian(self, omega: float) -> Operator:
        return build_hamiltonian(self.interaction.with_fields(omega))

    def to_dict(self) -> dict:
        return {"T": self.T, "steps": self.steps, "omega_from": self.omega_from,
                "omega_to": self.omega_to, "interaction": self.interaction.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RampSchedule":
        return cls(d["T"], d["steps"], d["omega_from"], d["omega_to"],
                   HamiltonianSpec.from_dict(d["interaction"]))


@dataclass(frozen=True)
class RampStep:
    t: float
    omega: float
    energy_density: float  # (<H> - E_gs) / N, ground state taken in the state's sector
    parity: float  # <P_x> for the sector of the initial state
    four_Jz2: float
    gs_fidelity: float


@dataclass(frozen=True, eq=False)
class RampResult:
    final: DensityOperator
    trajectory: list
    projector: SectorProjector
    final_hamiltonian: Operator


def _sector_of(rho: DensityOperator, N: int, tol: float) -> SectorProjector:
    for sector in ("even", "odd"):
        P = parity_projector("x", sector, N)
        if is_supported_in_sector(rho, P, tol).supported:
            return P
    raise ValueError("initial state is not supported in a P_x sector")


def quasi_adiabatic_ramp(schedule: RampSchedule, initial: DensityOperator,
                         record_every: int = 1, tol: float = 1e-10) -> RampResult:
    """Piecewise-constant evolution under H_int + H_field(Omega(t_mid)).

    Each step's Hamiltonian is diagonalized sector by sector, so the
    propagator is unitary and parity preserving to rounding precision.
    """
    N = schedule.interaction.N
    P = _sector_of(initial, N, tol)
    Jz = collective_spin("z", N)
    Jz2 = Jz @ Jz
    dt = schedule.T / schedule.steps
    rho = initial.matrix
    traj = []
    H = None
    for n, tm in enumerate(schedule.midpoints()):
        om = schedule.omega(tm)
        H = schedule.hamiltonian(om)
        lam, V, sec = block_spectral_decompose(H, P)
        ph = np.exp(-1j * dt * lam)
        r = V.conj().T @ rho @ V
        rho = V @ (r * np.outer(ph, ph.conj())) @ V.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        if (n + 1) % record_every == 0 or n + 1 == schedule.steps:
            in_sector = sec == 0
            e_gs = lam[in_sector][0]
            gs = V[:, in_sector][:, 0]
            energy = np.sum(rho * H.matrix.T).real
            traj.append(RampStep(
                t=(n + 1) * dt,
                omega=om,
                energy_density=(energy - e_gs) / N,
                parity=float(np.sum(rho * P.matrix.T).real),
                four_Jz2=4.0 * float(np.sum(rho * Jz2.matrix.T).real),
                gs_fidelity=float(np.real(gs.conj() @ rho @ gs)),
            ))
    final = DensityOperator(rho, initial.space, check_positive=False)
    return RampResult(final, traj, P, H)


def diagonal_ensemble(final: DensityOperator, H_final: Operator,
                      projector: Optional[SectorProjector] = None,
                      degeneracy_tol: float = DEGENERACY_TOL) -> DensityOperator:
    """sum_n Pi_n rho Pi_n over eigenprojectors of ``H_final``.

    Adjacent eigenvalues within ``degeneracy_tol`` share a projector. With a
    ``projector`` commuting with ``H_final``, the eigenbasis is built sector by
    sector so that the result stays in the sector even across near-degenerate
    levels of opposite parity.
    """
    if projector is not None:
        lam, V, sec = block_spectral_decompose(H_final, projector)
    else:
        lam, V = np.linalg.eigh(H_final.matrix)
        sec = np.zeros(lam.size, dtype=int)
    labels = np.empty(lam.size, dtype=int)
    nxt = 0
    for s in np.unique(sec):
        idx = np.flatnonzero(sec == s)
        order = idx[np.argsort(lam[idx], kind="stable")]
        gaps = np.diff(lam[order]) > degeneracy_tol
        labels[order] = nxt + np.concatenate([[0], np.cumsum(gaps)])
        nxt = labels[order].max() + 1
    r = V.conj().T @ final.matrix @ V
    r = np.where(labels[:, None] == labels[None, :], r, 0)
    return DensityOperator(V @ r @ V.conj().T, final.space, check_positive=False)
