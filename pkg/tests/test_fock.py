import itertools
import math

import numpy as np
import pytest

from polaronlab.fock import (
    FockModel,
    OperatorMatrix,
    Propagator,
    build_T,
    build_free_hamiltonian,
    build_hamiltonian,
    classical_flow,
    coherent_state,
    correspondence_experiment,
    dress_hamiltonian,
    dressed_comparison,
    expect,
    klmn_check,
    mode_expectations,
    unitary_from_generator,
    vacuum,
    weyl_operator,
)


@pytest.fixture(scope="module")
def toy():
    """3 particle modes on a momentum chain, 2 phonon modes, small cutoffs."""
    return FockModel(particle_momenta=[0.0, 1.0, 2.0],
                     phonon_momenta=[1.0, 2.0], dk=0.5, eps=0.5,
                     n_max_particles=4, n_max_phonons=4, sigma0=1.5)


class TestModel:
    def test_dimension_and_cap(self, toy):
        # C(7,3) * C(6,2) occupation tuples
        assert toy.dim == 35 * 15
        with pytest.raises(ValueError):
            FockModel([0.0], [1.0], dk=1.0, eps=0.5, n_max_particles=200,
                      n_max_phonons=200, sigma0=0.5, max_dim=100)

    def test_ccr_away_from_ceiling(self, toy):
        # [a, a*] = eps on the sub-basis that cannot touch the cutoff
        n2 = toy.occupancy[:, 3:].sum(axis=1)
        interior = np.where(n2 <= toy.n_max_phonons - 1)[0]
        for j in range(toy.n_phonon_modes):
            a = toy.a(j)
            comm = a @ a.conj().T - a.conj().T @ a
            block = comm[np.ix_(interior, interior)]
            assert np.max(np.abs(block - toy.eps * np.eye(len(interior)))) \
                < 1e-12

    def test_number_operators(self, toy):
        for sector in ("particles", "phonons"):
            n = toy.number_operator(sector)
            assert np.max(np.abs(n - np.diag(np.diag(n)))) == 0.0
            vals = np.diag(n).real
            assert np.min(vals) >= 0.0
            steps = np.unique(np.round(vals / toy.eps).astype(int))
            assert set(steps).issubset(set(range(0, 5)))

    def test_gamma_restriction_scaling(self, toy):
        # Gamma(M) on a one-particle basis state equals eps * M
        m = np.array([[0.3, 0.7, 0.0], [0.7, -0.2, 0.1], [0.0, 0.1, 0.5]],
                     dtype=complex)
        gm = toy.gamma(m)
        for i in range(3):
            occ = [0, 0, 0, 0, 0]
            occ[i] = 1
            col = toy.index[tuple(occ)]
            for j in range(3):
                occ2 = [0, 0, 0, 0, 0]
                occ2[j] = 1
                row = toy.index[tuple(occ2)]
                assert gm[row, col] == pytest.approx(toy.eps * m[j, i],
                                                     abs=1e-14)


class TestHamiltonians:
    def test_free_spectrum(self, toy):
        h0 = build_free_hamiltonian(toy)
        occ = toy.occupancy
        expected = toy.eps * (occ[:, :3] @ (toy.p[:, 0] ** 2)
                              + occ[:, 3:].sum(axis=1))
        assert np.max(np.abs(np.diag(h0.matrix).real - expected)) < 1e-13
        off = h0.matrix - np.diag(np.diag(h0.matrix))
        assert np.max(np.abs(off)) == 0.0

    def test_hermitian_and_number_conserving(self, toy):
        h = build_hamiltonian(toy)
        t = build_T(toy)
        n1 = toy.number_operator("particles")
        for op in (h, t):
            assert op.hermitian
            assert np.linalg.norm(op.matrix @ n1 - n1 @ op.matrix) < 1e-10

    def test_ground_state_against_kronecker_oracle(self):
        # independent construction: explicit matrix elements on an
        # independently enumerated occupation basis
        dk, eps, f1 = 0.5, 0.5, 1.0
        model = FockModel(particle_momenta=[0.0, 1.0], phonon_momenta=[1.0],
                          dk=dk, eps=eps, n_max_particles=2, n_max_phonons=4,
                          sigma0=0.5)
        h = build_hamiltonian(model)

        states = [(n0, n1, m) for n0 in range(3) for n1 in range(3)
                  for m in range(5) if n0 + n1 <= 2]
        index = {s: i for i, s in enumerate(states)}
        dim = len(states)
        oracle = np.zeros((dim, dim))
        c = math.sqrt(dk) * f1
        for (n0, n1, m), col in index.items():
            oracle[col, col] = eps * (0.0 * n0 + 1.0 * n1 + m)
            # a* psi0* psi1: (n0, n1, m) -> (n0+1, n1-1, m+1)
            if n1 >= 1 and m + 1 <= 4:
                tgt = index[(n0 + 1, n1 - 1, m + 1)]
                amp = c * math.sqrt(eps * (m + 1)) * eps \
                    * math.sqrt(n1 * (n0 + 1))
                oracle[tgt, col] += amp
                oracle[col, tgt] += amp
        ev_oracle = np.linalg.eigvalsh(oracle)
        ev_model = np.linalg.eigvalsh(h.matrix)
        assert model.dim == dim
        assert ev_model[0] == pytest.approx(ev_oracle[0], abs=1e-12)
        assert np.max(np.abs(np.sort(ev_model) - np.sort(ev_oracle))) < 1e-10

    def test_operator_matrix_validation(self):
        with pytest.raises(AssertionError):
            OperatorMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]), hermitian=True)
        with pytest.raises(ValueError):
            OperatorMatrix(np.zeros((2, 3)))


class TestDressing:
    def test_trivial_generator(self):
        # sigma0 above every phonon momentum: B = 0, T = 0, U H U* = H
        model = FockModel(particle_momenta=[0.0, 1.0], phonon_momenta=[1.0],
                          dk=0.5, eps=0.5, n_max_particles=2,
                          n_max_phonons=3, sigma0=1.5)
        assert not np.any(build_T(model).matrix)
        h = build_hamiltonian(model)
        hd = dress_hamiltonian(model, h, build_T(model))
        assert np.max(np.abs(hd.matrix - h.matrix)) < 1e-12

    def test_unitarity(self, toy):
        t = build_T(toy)
        u = unitary_from_generator(t.matrix, 1.0 / toy.eps)
        assert np.linalg.norm(u @ u.conj().T - np.eye(toy.dim)) < 1e-10

    def test_restricted_expansion_matches(self):
        model = FockModel(particle_momenta=[0.0, 1.0, 2.0],
                          phonon_momenta=[1.0, 2.0], dk=1e-6, eps=0.5,
                          n_max_particles=4, n_max_phonons=4, sigma0=1.5)
        rep = dressed_comparison(model)
        assert rep["restricted_diff_norm"] < 1e-6
        # the comparison is not vacuous: first-order dressed structure is
        # orders of magnitude above the gate
        sel = model.low_occupancy_indices(rep["n_cut"])
        drift = rep["parts"]["drift"][np.ix_(sel, sel)]
        assert np.linalg.norm(drift, 2) > 1e-4

    def test_conjugation_preserves_spectrum(self, toy):
        h = build_hamiltonian(toy)
        hd = dress_hamiltonian(toy, h, build_T(toy))
        ev = np.linalg.eigvalsh(h.matrix)
        evd = np.linalg.eigvalsh(hd.matrix)
        assert np.max(np.abs(ev - evd)) < 1e-9


class TestCoherentStates:
    def test_zero_is_vacuum(self, toy):
        psi = coherent_state(toy, [0, 0, 0], [0, 0])
        assert np.max(np.abs(psi - vacuum(toy))) < 1e-14

    def test_mode_expectations(self, toy):
        amps = np.array([0.2, 0.1, 0.0, 0.15, 0.1])
        psi = coherent_state(toy, amps[:3], amps[3:])
        got = mode_expectations(toy, psi)
        assert np.max(np.abs(got - amps)) < 1e-6

    def test_phonon_number_poisson(self, toy):
        alpha = [0.2, 0.1]
        psi = coherent_state(toy, [0, 0, 0], alpha)
        n2 = toy.number_operator("phonons")
        # equality up to the Poisson tail cut off at n_max
        assert expect(n2, psi).real == pytest.approx(
            sum(a * a for a in alpha), abs=1e-6)

    def test_margin_rule(self, toy):
        # |z|^2 / eps must stay below n_max / 3
        with pytest.raises(ValueError):
            coherent_state(toy, [math.sqrt(0.5 * toy.n_max_particles), 0, 0],
                           [0, 0])

    def test_weyl_relation(self):
        # two modes with a deep truncation so the composition law is clean
        # away from the ceiling
        model = FockModel(particle_momenta=[0.0], phonon_momenta=[1.0],
                          dk=0.5, eps=0.5, n_max_particles=8,
                          n_max_phonons=8, sigma0=0.5)
        rng = np.random.default_rng(3)
        f = 0.15 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        g = 0.15 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        wf = weyl_operator(model, f)
        wg = weyl_operator(model, g)
        wfg = weyl_operator(model, f + g)
        phase = np.exp(-0.5j * model.eps * np.imag(np.vdot(f, g)))
        lhs = wf @ wg
        rhs = wfg * phase
        sel = model.low_occupancy_indices(3)
        diff = (lhs - rhs)[np.ix_(sel, sel)]
        assert np.max(np.abs(diff)) < 1e-8


class TestEvolution:
    def test_propagator_unitary(self, toy):
        h = build_hamiltonian(toy)
        prop = Propagator(h, toy.eps)
        psi = coherent_state(toy, [0.2, 0.1, 0.0], [0.1, 0.1])
        psi_t = prop.apply(psi, 0.7)
        assert abs(np.linalg.norm(psi_t) - 1.0) < 1e-10

    def test_energy_expectation_constant(self, toy):
        h = build_hamiltonian(toy)
        hd = dress_hamiltonian(toy, h, build_T(toy))
        prop = Propagator(hd, toy.eps)
        psi = coherent_state(toy, [0.2, 0.1, 0.0], [0.1, 0.1])
        e0 = expect(hd.matrix, psi).real
        e1 = expect(hd.matrix, prop.apply(psi, 1.3)).real
        assert abs(e1 - e0) < 1e-10 * (1 + abs(e0))

    def test_n1_conserved_under_both(self, toy):
        h = build_hamiltonian(toy)
        hd = dress_hamiltonian(toy, h, build_T(toy))
        n1 = toy.number_operator("particles")
        psi = coherent_state(toy, [0.2, 0.1, 0.0], [0.1, 0.1])
        for op in (h, hd):
            prop = Propagator(op, toy.eps)
            v0 = expect(n1, psi).real
            v1 = expect(n1, prop.apply(psi, 0.9)).real
            assert abs(v1 - v0) < 1e-10 * (1 + abs(v0))

    def test_undressed_route_via_conjugation(self, toy):
        # e^{-itH/eps} equals U* e^{-it UHU*/eps} U
        h = build_hamiltonian(toy)
        t_op = build_T(toy)
        hd = dress_hamiltonian(toy, h, t_op)
        u = unitary_from_generator(t_op.matrix, 1.0 / toy.eps)
        psi = coherent_state(toy, [0.2, 0.1, 0.0], [0.1, 0.1])
        t = 0.4
        direct = Propagator(h, toy.eps).apply(psi, t)
        routed = u.conj().T @ Propagator(hd, toy.eps).apply(u @ psi, t)
        assert np.max(np.abs(direct - routed)) < 1e-9


class TestCorrespondence:
    def test_free_theory_follows_classical_flow(self):
        # couplings switched off by the ultraviolet cutoff: exact Gaussian
        # dynamics, quantum expectations track the free classical flow
        def factory(eps):
            return FockModel(particle_momenta=[0.0, 1.0],
                             phonon_momenta=[1.0], dk=0.5, eps=eps,
                             n_max_particles=6, n_max_phonons=6,
                             sigma0=0.25, sigma=0.5)

        res = correspondence_experiment(factory, [0.5, 0.25], [0.1, 0.05],
                                        [0.05], 0.5, n_times=3)
        for errs in res["errors"].values():
            assert max(errs) < 1e-8

    def test_vacuum_is_stationary(self, toy):
        h = build_hamiltonian(toy)
        prop = Propagator(h, toy.eps)
        psi0 = vacuum(toy)
        psi_t = prop.apply(psi0, 0.5)
        assert np.max(np.abs(mode_expectations(toy, psi_t))) < 1e-12

    def test_classical_flow_conserves_symbol_energy(self, toy):
        phi0 = np.array([0.2, 0.1, 0.05], dtype=complex)
        alp0 = np.array([0.15, 0.1], dtype=complex)
        times = np.linspace(0.0, 0.5, 5)
        traj = classical_flow(toy, phi0, alp0, times)

        def energy(z):
            phi, alp = z[:3], z[3:]
            e = float(np.sum(toy.p[:, 0] ** 2 * np.abs(phi) ** 2)
                      + np.sum(np.abs(alp) ** 2))
            for j in range(2):
                c = math.sqrt(toy.dk) * toy.f[j]
                e += 2.0 * c * np.real(np.conj(alp[j])
                                       * np.vdot(phi, toy.E[j] @ phi))
            return e

        e0 = energy(traj[0])
        assert all(abs(energy(traj[i]) - e0) < 1e-9 * (1 + abs(e0))
                   for i in range(len(times)))

    def test_error_decreases_with_eps(self):
        def factory(eps):
            return FockModel(particle_momenta=[0.0, 1.0, 2.0],
                             phonon_momenta=[1.0, 2.0], dk=0.5, eps=eps,
                             n_max_particles=5, n_max_phonons=5, sigma0=1.5)

        res = correspondence_experiment(factory, [0.5, 0.25], [0.2, 0.1, 0.0],
                                        [0.15, 0.1], 0.5, n_times=3)
        final = [res["errors"][e][-1] for e in (0.5, 0.25)]
        assert final[1] <= 1.1 * final[0]


class TestKLMN:
    def test_vacuum_interaction_vanishes(self, toy):
        h = build_hamiltonian(toy)
        hd = dress_hamiltonian(toy, h, build_T(toy))
        h0 = build_free_hamiltonian(toy)
        psi0 = vacuum(toy)
        val = expect(hd.matrix - h0.matrix, psi0)
        assert abs(val) < 1e-12

    def test_form_bound_exists(self, toy):
        rep = klmn_check(toy, n_samples=200, seed=9)
        assert rep["satisfied"]
        assert rep["a"] <= 0.9
        assert rep["norm_kB_sq"] <= 1.0 / (toy.eps * toy.n_max_particles)
