from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symproj import spins
from symproj.metrology import check_theorem, qfi
from symproj.operators import (
    PAULI,
    DensityOperator,
    collective_spin,
    evolve,
    expectation,
    variance,
)
from symproj.symmetry import block_spectral_decompose, is_supported_in_sector, parity_projector


def kron_site(axis, i, N):
    ops = [np.eye(2)] * N
    ops[i] = PAULI[axis]
    return reduce(np.kron, ops)


def oracle_hamiltonian(spec):
    """Independent oracle: explicit Kronecker products, -sum_{i<j} J sigma sigma - sum Omega sigma^x."""
    N = spec.N
    H = np.zeros((2**N, 2**N), complex)
    for a in "xyz":
        J = spec.couplings[a]
        for i in range(N):
            for j in range(i + 1, N):
                H -= J[i, j] * kron_site(a, i, N) @ kron_site(a, j, N)
    for i in range(N):
        H -= spec.fields[i] * kron_site("x", i, N)
    return H


def random_couplings(N, rng):
    M = rng.normal(size=(N, N))
    M = M + M.T
    np.fill_diagonal(M, 0)
    return M


class TestSpec:
    def test_rejects_asymmetric(self):
        J = np.zeros((3, 3))
        J[0, 1] = 1
        with pytest.raises(ValueError):
            spins.ising(J)

    def test_rejects_diagonal(self):
        with pytest.raises(ValueError):
            spins.ising(np.eye(3))

    def test_family_constraints(self):
        J = spins.chain_couplings(3)
        with pytest.raises(ValueError):
            spins.HamiltonianSpec("ising", 3, {"x": J})
        with pytest.raises(ValueError):
            spins.HamiltonianSpec("xy", 3, {"x": J, "y": 2 * J})
        with pytest.raises(ValueError):
            spins.HamiltonianSpec("xxz", 3, {"x": J, "y": -J, "z": J})
        with pytest.raises(ValueError):
            spins.HamiltonianSpec("ising", 3, {"z": J}, chi=1.0)

    def test_xxz_default_sign(self):
        J = spins.chain_couplings(3)
        spec = spins.xxz(J)
        assert np.array_equal(spec.couplings["z"], -J)
        assert np.array_equal(spins.xxz(J, Jz=0.5 * J).couplings["z"], 0.5 * J)

    def test_round_trip(self):
        spec = spins.xy(spins.power_law_couplings(4, 1.0, 1.5), [0.1, 0.2, 0.3, 0.4])
        back = spins.HamiltonianSpec.from_dict(spec.to_dict())
        assert np.allclose(spins.build_hamiltonian(back).matrix, spins.build_hamiltonian(spec).matrix)

    def test_power_law(self):
        M = spins.power_law_couplings(4, 2.0, 2.0)
        assert M[0, 2] == pytest.approx(0.5) and M[1, 1] == 0


class TestBuildHamiltonian:
    @pytest.mark.parametrize("N", [1, 3, 5])
    def test_field_ground_state(self, N):
        H = spins.build_hamiltonian(spins.field(N, 0.7))
        lam, V = np.linalg.eigh(H.matrix)
        assert lam[0] == pytest.approx(-0.7 * N)
        psi = spins.coherent_spin_ket("x", N)
        assert abs(V[:, 0].conj() @ psi) == pytest.approx(1.0)

    def test_ising_pair(self):
        H = spins.build_hamiltonian(spins.ising(spins.chain_couplings(2)))
        assert np.allclose(np.linalg.eigvalsh(H.matrix), [-1, -1, 1, 1])

    @pytest.mark.parametrize("family", ["ising", "xy", "xxz", "custom-xyz"])
    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_matches_kron_oracle(self, family, N):
        rng = np.random.default_rng(N)
        J = random_couplings(N, rng)
        fields = rng.normal(size=N)
        if family == "custom-xyz":
            spec = spins.HamiltonianSpec(family, N, {a: random_couplings(N, rng) for a in "xyz"}, fields)
        else:
            spec = getattr(spins, family)(J, fields)
        assert np.allclose(spins.build_hamiltonian(spec).matrix, oracle_hamiltonian(spec), atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.sampled_from(["ising", "xy", "xxz", "custom-xyz"]),
           st.integers(0, 2**32 - 1))
    def test_commutes_with_parity(self, N, family, seed):
        rng = np.random.default_rng(seed)
        fields = rng.normal(size=N)  # staggered / random fields
        if family == "custom-xyz":
            spec = spins.HamiltonianSpec(family, N, {a: random_couplings(N, rng) for a in "xyz"}, fields)
        else:
            spec = getattr(spins, family)(random_couplings(N, rng), fields)
        H = spins.build_hamiltonian(spec).matrix
        P = parity_projector("x", "even", N).matrix
        assert np.max(np.abs(H @ P - P @ H)) <= 1e-12 * max(1, np.max(np.abs(H)))

    def test_oat_matches_collective(self):
        N = 5
        Jz = collective_spin("z", N).matrix
        H = spins.build_hamiltonian(spins.oat(N, 1.3))
        assert np.allclose(H.matrix, 1.3 * Jz @ Jz / N)

    def test_oat_as_all_to_all_ising(self):
        # chi J_z^2 / N = chi / 4 - sum_{i<j} (-chi / 2N) sigma^z sigma^z
        N, chi = 4, 0.9
        J = np.full((N, N), -chi / (2 * N))
        np.fill_diagonal(J, 0)
        H_ising = spins.build_hamiltonian(spins.ising(J)).matrix
        H_oat = spins.build_hamiltonian(spins.oat(N, chi)).matrix
        assert np.allclose(H_oat, H_ising + chi / 4 * np.eye(2**N))


class TestCoherentStates:
    @pytest.mark.parametrize("axis, a", [("x", 0), ("y", 1), ("z", 2)])
    @pytest.mark.parametrize("rep", ["full", "dicke"])
    def test_mean(self, axis, a, rep):
        N = 5
        rho = spins.coherent_spin_state(axis, N, rep)
        J = spins.dicke_operators(N) if rep == "dicke" else [collective_spin(c, N) for c in "xyz"]
        assert expectation(rho, J[a]).real == pytest.approx(N / 2)

    def test_transverse_variance(self):
        rho = spins.coherent_spin_state("x", 4)
        assert variance(rho, collective_spin("y", 4)) == pytest.approx(1.0)
        assert variance(rho, collective_spin("z", 4)) == pytest.approx(1.0)

    @pytest.mark.parametrize("N", range(1, 9))
    @pytest.mark.parametrize("axis", ["x", "-y", "z"])
    def test_representations_agree(self, N, axis):
        full = spins.coherent_spin_state(axis, N)
        dk = spins.coherent_spin_state(axis, N, "dicke")
        Jd = spins.dicke_operators(N)
        for a, c in enumerate("xyz"):
            Jf = collective_spin(c, N)
            for k in range(1, 5):
                assert expectation(full, Jf**k).real == pytest.approx(expectation(dk, Jd[a] ** k).real, abs=1e-9)

    def test_large_n_normalized(self):
        psi = spins.coherent_spin_ket("y", 3000, "dicke")
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)


class TestDicke:
    def test_jz(self):
        assert np.allclose(spins.dicke_operators(2)[2].matrix, np.diag([1, 0, -1]))

    @pytest.mark.parametrize("N", [1, 2, 7, 20])
    def test_algebra_and_casimir(self, N):
        Jx, Jy, Jz = (J.matrix for J in spins.dicke_operators(N))
        assert np.max(np.abs(Jx @ Jy - Jy @ Jx - 1j * Jz)) <= 1e-12 * N
        j = N / 2
        assert np.allclose(Jx @ Jx + Jy @ Jy + Jz @ Jz, j * (j + 1) * np.eye(N + 1))

    def test_ladder_band(self):
        Jx, Jy, _ = (J.matrix for J in spins.dicke_operators(5))
        jp = Jx + 1j * Jy
        assert np.allclose(jp, np.diag(np.diag(jp, 1), 1))

    @pytest.mark.parametrize("N", [1, 2, 5, 8])
    def test_embedding_and_parity(self, N):
        W = spins.dicke_embedding(N)
        assert np.allclose(W.T @ W, np.eye(N + 1))
        for a, c in enumerate("xyz"):
            assert np.allclose(W.T @ collective_spin(c, N).matrix @ W, spins.dicke_operators(N)[a].matrix)
        prod_x = reduce(np.kron, [PAULI["x"]] * N)
        assert np.allclose(W.T @ prod_x @ W, spins.dicke_parity_x(N).matrix, atol=1e-12)


class TestOAT:
    def test_initial(self):
        rho = spins.oat_evolve(6, 1.0, 0.0)
        assert np.allclose(rho.matrix, spins.coherent_spin_state("x", 6, "dicke").matrix)

    def test_rejects_single_spin(self):
        with pytest.raises(ValueError):
            spins.oat_evolve(1, 1.0, 1.0)

    @pytest.mark.parametrize("N", [4, 6, 8])
    def test_cat_time(self, N):
        rho = spins.oat_evolve(N, 1.0, np.pi * N / 2)
        assert qfi(rho, spins.dicke_operators(N)[0]) == pytest.approx(N**2, rel=1e-6)

    @pytest.mark.parametrize("N", [2, 4, 8])
    def test_matches_full_register(self, N):
        chi = 0.8
        H = spins.build_hamiltonian(spins.oat(N, chi))
        Jd = spins.dicke_operators(N)
        for t in np.linspace(0, np.pi * N / (2 * chi), 7):
            full = evolve(spins.coherent_spin_state("x", N), H, t)
            dk = spins.oat_evolve(N, chi, t)
            for a, c in enumerate("xyz"):
                Jf = collective_spin(c, N)
                for k in (1, 2):
                    assert expectation(full, Jf**k).real == pytest.approx(
                        expectation(dk, Jd[a] ** k).real, abs=1e-9)

    @pytest.mark.parametrize("N", [6, 10])
    def test_theorem_along_trajectory(self, N):
        P = spins.dicke_parity_projector(N)
        Jy = spins.dicke_operators(N)[1]
        A = spins.dicke_parity_x(N)
        for t in np.linspace(0, np.pi * N / 2, 9):
            rho = spins.oat_evolve(N, 1.0, t)
            assert expectation(rho, A).real == pytest.approx(1.0, abs=1e-9)
            rep = check_theorem(rho, P, Jy)
            assert rep.passed, rep

    @pytest.mark.parametrize("N", [16, 32, 64])
    def test_squeezing_time(self, N):
        J = spins.dicke_operators(N)
        ts = np.linspace(0.05, 4 * N ** (1 / 3), 160)
        xi2 = np.array([spins.squeezing_parameter(spins.oat_evolve(N, 1.0, t), J) for t in ts])
        assert xi2.min() < 1
        t_best = ts[np.argmin(xi2)]
        assert N ** (1 / 3) / 3 <= t_best <= 3 * N ** (1 / 3)

    def test_css_not_squeezed(self):
        N = 10
        rho = spins.coherent_spin_state("x", N, "dicke")
        assert spins.squeezing_parameter(rho, spins.dicke_operators(N)) == pytest.approx(1.0)


def ising_schedule(N, T, steps, omega_from=5.0, omega_to=0.1):
    return spins.RampSchedule(T, steps, omega_from, omega_to, spins.ising(spins.chain_couplings(N)))


class TestRamp:
    def test_schedule(self):
        s = ising_schedule(4, 10.0, 5)
        assert s.omega(0) == 5.0 and s.omega(10.0) == pytest.approx(0.1)
        assert np.allclose(s.midpoints(), [1, 3, 5, 7, 9])
        assert spins.RampSchedule.from_dict(s.to_dict()).to_dict() == s.to_dict()
        with pytest.raises(ValueError):
            spins.RampSchedule(1.0, 0, 1, 0, spins.ising(spins.chain_couplings(3)))

    def test_requires_sector_state(self):
        rho = spins.coherent_spin_state("z", 3)
        with pytest.raises(ValueError):
            spins.quasi_adiabatic_ramp(ising_schedule(3, 1.0, 10), rho)

    def test_adiabatic_limit(self):
        N = 6
        sched = ising_schedule(N, 100.0, 1000)
        P = parity_projector("x", "even", N)
        lam, V, idx = block_spectral_decompose(sched.hamiltonian(5.0), P)
        ground = DensityOperator.from_ket(V[:, np.flatnonzero(idx == 0)[0]])
        res = spins.quasi_adiabatic_ramp(sched, ground, record_every=100)
        assert res.trajectory[-1].gs_fidelity > 0.99
        assert all(abs(s.parity - 1) <= 1e-9 for s in res.trajectory)

    def test_fast_ramp_diagonal_ensemble(self):
        N = 6
        res = spins.quasi_adiabatic_ramp(ising_schedule(N, 2.0, 100), spins.coherent_spin_state("x", N),
                                         record_every=10)
        assert all(abs(s.parity - 1) <= 1e-9 for s in res.trajectory)
        de = spins.diagonal_ensemble(res.final, res.final_hamiltonian, res.projector)
        assert de.purity() <= res.final.purity() + 1e-12
        assert de.purity() < 0.9
        assert is_supported_in_sector(de, res.projector).residual <= 1e-10
        rep = check_theorem(de, res.projector, collective_spin("z", N))
        assert rep.passed, rep
        assert rep.four_G2 == pytest.approx(rep.qfi, rel=1e-8)


class TestDiagonalEnsemble:
    def test_eigenstate_unchanged(self):
        N = 4
        H = spins.build_hamiltonian(spins.ising(spins.chain_couplings(N), 0.5))
        lam, V = np.linalg.eigh(H.matrix)
        rho = DensityOperator.from_ket(V[:, 3])
        assert np.allclose(spins.diagonal_ensemble(rho, H).matrix, rho.matrix, atol=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_purity_decreases(self, seed):
        from symproj.operators import random_density
        N = 3
        rho = random_density(spins.coherent_spin_state("x", N).space, 2, seed)
        H = spins.build_hamiltonian(spins.xy(spins.chain_couplings(N), 0.3))
        assert spins.diagonal_ensemble(rho, H).purity() <= rho.purity() + 1e-12

    def test_degenerate_levels_grouped(self):
        # at zero field the Ising chain is doubly degenerate; coherences inside a level survive
        N = 3
        H = spins.build_hamiltonian(spins.ising(spins.chain_couplings(N)))
        psi = np.zeros(8)
        psi[0] = psi[7] = 1
        rho = DensityOperator.from_ket(psi)
        assert np.allclose(spins.diagonal_ensemble(rho, H).matrix, rho.matrix)
