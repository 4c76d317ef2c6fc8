import numpy as np
import pytest

from polaronlab.dressing import (
    cancellation_residual,
    dressing_apply,
    symplectic_pairing_defect,
    verify_conjugation,
    verify_dressed_identity,
)
from polaronlab.dynamics import EvolutionConfig
from polaronlab.hamiltonians import h_dressed, h_undressed, kinetic_energy
from polaronlab.initial_data import random_smooth_state
from polaronlab.spectral import PhasePoint


def random_tangent(grid, rng):
    v = PhasePoint(grid,
                   rng.standard_normal(grid.shape)
                   + 1j * rng.standard_normal(grid.shape),
                   rng.standard_normal(grid.shape)
                   + 1j * rng.standard_normal(grid.shape), check=False)
    return v.scaled(1.0 / v.norm())


class TestDressingFlow:
    def test_theta_zero_is_identity(self, ff16, smooth_state):
        z = dressing_apply(smooth_state, 0.0, ff16)
        assert z.distance(smooth_state) < 1e-15

    def test_inverse_flow(self, ff16, smooth_state):
        z = dressing_apply(dressing_apply(smooth_state, 1.0, ff16), -1.0, ff16)
        assert z.distance(smooth_state) < 1e-10

    def test_u_zero_unchanged(self, grid16, ff16, rng):
        alpha = rng.standard_normal(grid16.shape) + 0j
        z = PhasePoint(grid16, np.zeros(grid16.shape, dtype=complex), alpha)
        zd = dressing_apply(z, 1.0, ff16)
        assert zd.distance(z) == 0.0

    def test_pure_phase_preserves_modulus(self, ff16, smooth_state):
        zd = dressing_apply(smooth_state, 1.0, ff16)
        assert np.max(np.abs(np.abs(zd.u) - np.abs(smooth_state.u))) < 1e-14
        assert zd.mass() == pytest.approx(smooth_state.mass(), rel=1e-14)

    def test_group_property(self, ff16, smooth_state, rng):
        for t1, t2 in ((0.4, 0.6), (-0.3, 1.3), (0.25, -0.75)):
            za = dressing_apply(dressing_apply(smooth_state, t1, ff16),
                                t2, ff16)
            zb = dressing_apply(smooth_state, t1 + t2, ff16)
            assert za.distance(zb) < 1e-10

    def test_cancellation_residual(self, ff16, smooth_state):
        assert cancellation_residual(smooth_state, ff16) < 1e-10

    def test_h1_propagation(self, grid16, ff16, smooth_state):
        kin0 = kinetic_energy(smooth_state)
        zd = dressing_apply(smooth_state, 1.0, ff16)
        kin1 = kinetic_energy(zd)
        assert np.isfinite(kin1)
        # bounded growth: the phase multiplication shifts derivatives by
        # the bounded field grad(phase)
        assert kin1 < 10.0 * (kin0 + 1.0)

    def test_symplectic_pairing(self, grid16, ff16, smooth_state, rng):
        defects = {}
        for h in (1e-3, 1e-4):
            worst = 0.0
            rng_local = np.random.default_rng(7)
            for _ in range(5):
                v = random_tangent(grid16, rng_local)
                w = random_tangent(grid16, rng_local)
                worst = max(worst, symplectic_pairing_defect(
                    smooth_state, v, w, ff16, h))
            defects[h] = worst
        assert defects[1e-3] <= 1.0 * 1e-3
        assert defects[1e-4] <= 1.0 * 1e-4


class TestDressedIdentity:
    def test_alpha_only_exact(self, grid16, ff16, rng):
        alpha = rng.standard_normal(grid16.shape) + 0j
        z = PhasePoint(grid16, np.zeros(grid16.shape, dtype=complex), alpha)
        assert verify_dressed_identity(z, ff16) == 0.0

    def test_u_only(self, grid16, ff16):
        z0 = random_smooth_state(grid16, seed=21, u_amp=0.5, alpha_amp=0.0,
                                 k_cut=0.5)
        assert verify_dressed_identity(z0, ff16) < 1e-9

    def test_random_smooth_states(self, grid16, ff16):
        worst = 0.0
        for seed in range(20):
            z = random_smooth_state(grid16, seed=seed, u_amp=0.5,
                                    alpha_amp=0.3, k_cut=0.5)
            worst = max(worst, verify_dressed_identity(z, ff16))
        assert worst < 1e-9

    def test_identity_statement(self, ff16, smooth_state):
        lhs = h_dressed(smooth_state, ff16).total
        rhs = h_undressed(dressing_apply(smooth_state, 1.0, ff16)).total
        assert abs(lhs - rhs) / (1 + abs(lhs)) < 1e-9


class TestConjugation:
    def test_zero_at_t0(self, grid16, ff16, smooth_state):
        cfg = EvolutionConfig(dt=1e-2, t_final=0.1, record_every=1)
        times, errors = verify_conjugation(smooth_state, 0.1, cfg, ff16)
        assert times[0] == 0.0
        assert errors[0] < 1e-12

    def test_u_zero_invariant_for_all_t(self, grid16, ff16, rng):
        alpha = (rng.standard_normal(grid16.shape)
                 + 1j * rng.standard_normal(grid16.shape))
        z = PhasePoint(grid16, np.zeros(grid16.shape, dtype=complex), alpha)
        cfg = EvolutionConfig(dt=1e-2, t_final=0.2, record_every=5)
        times, errors = verify_conjugation(z, 0.2, cfg, ff16)
        assert np.max(errors) < 1e-12

    def test_error_drops_fourfold(self, grid16, ff16):
        z = random_smooth_state(grid16, seed=11, u_amp=0.4, alpha_amp=0.25,
                                k_cut=0.35)
        ends = []
        for dt in (2e-2, 1e-2):
            cfg = EvolutionConfig(dt=dt, t_final=0.5, record_every=10**6)
            _, errors = verify_conjugation(z, 0.5, cfg, ff16)
            ends.append(errors[-1])
        assert 3.0 <= ends[0] / ends[1] <= 5.0
