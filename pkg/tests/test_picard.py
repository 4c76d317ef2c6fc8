import numpy as np
import pytest

from polaronlab.dynamics import EvolutionConfig, free_flow, lp_evolve
from polaronlab.initial_data import random_smooth_state
from polaronlab.picard import (
    MeshTrajectory,
    PicardDivergenceError,
    duhamel_map,
    find_contraction_time,
    interpolation_residual,
    measure_contraction,
    picard_solve,
    picard_vs_strang,
    strichartz_report,
)
from polaronlab.spectral import PhasePoint, build_grid


@pytest.fixture(scope="module")
def small_state(grid16):
    return random_smooth_state(grid16, seed=11, u_amp=0.2, alpha_amp=0.12,
                               k_cut=0.5)


class TestDuhamelMap:
    def test_zero_fixed_point(self, grid16):
        z0 = PhasePoint.zero(grid16)
        cand = MeshTrajectory.from_free_flow(z0, 0.2, 17)
        out = duhamel_map(cand, z0)
        assert out.sup_distance(cand) == 0.0

    def test_free_flow_exact_when_u0_zero(self, grid16, rng):
        alpha = (rng.standard_normal(grid16.shape)
                 + 1j * rng.standard_normal(grid16.shape))
        z0 = PhasePoint(grid16, np.zeros(grid16.shape, dtype=complex), alpha)
        cand = MeshTrajectory.from_free_flow(z0, 0.3, 33)
        out = duhamel_map(cand, z0)
        assert out.sup_distance(cand) < 1e-13

    def test_contraction_on_small_horizon(self, small_state):
        ratios = measure_contraction(small_state, 0.2, n_nodes=65)
        assert len(ratios) >= 5
        assert all(r <= 0.5 for r in ratios[:5])

    def test_iterates_stay_bounded(self, small_state):
        # ball-invariance monitor: iterates from the free flow never leave
        # a fixed multiple of the data norm
        z0 = small_state
        current = MeshTrajectory.from_free_flow(z0, 0.2, 65)
        zero = MeshTrajectory(grid=current.grid, times=current.times,
                              u=np.zeros_like(current.u),
                              alpha=np.zeros_like(current.alpha))
        bound = 4.0 * (z0.norm() + 1.0)
        for _ in range(8):
            current = duhamel_map(current, z0)
            assert current.sup_distance(zero) < bound


class TestPicardSolve:
    def test_zero_data_one_iteration(self, grid16):
        res = picard_solve(PhasePoint.zero(grid16), 0.2, n_nodes=17)
        assert res.converged
        assert res.iterations == 1

    def test_endpoint_matches_strang(self, grid16, ff16, small_state):
        gap = picard_vs_strang(small_state, 0.1, ff16, n_nodes=401, dt=2.5e-4)
        assert gap < 1e-6

    def test_divergence_abort(self, grid16):
        big = random_smooth_state(grid16, seed=2, u_amp=40.0, alpha_amp=25.0,
                                  k_cut=0.5)
        with pytest.raises(PicardDivergenceError):
            picard_solve(big, 2.0, n_nodes=33, max_iter=40)

    def test_contraction_time_shrinks_with_norm(self, grid16, small_state):
        t1 = find_contraction_time(small_state, t_start=0.4, n_nodes=65,
                                   bisect_steps=4)
        t2 = find_contraction_time(small_state.scaled(2.0), t_start=0.4,
                                   n_nodes=65, bisect_steps=4)
        assert t2 <= t1


class TestStrichartz:
    def test_zero_field_all_zero(self, grid16, ff16):
        cfg = EvolutionConfig(dt=1e-2, t_final=0.1, record_every=2)
        traj = lp_evolve(PhasePoint.zero(grid16), cfg, ff16)
        rep = strichartz_report(traj)
        assert rep["applicable"]
        assert all(v == 0.0 for k, v in rep.items() if isinstance(v, float))

    def test_free_gaussian_norms_finite(self, grid16, ff16):
        from polaronlab.initial_data import gaussian_u

        z0 = PhasePoint(grid16, gaussian_u(grid16, amplitude=0.5),
                        np.zeros(grid16.shape, dtype=complex))
        from polaronlab.dynamics import Trajectory
        from polaronlab.diagnostics import diagnostics_row

        traj = Trajectory()
        for i, t in enumerate(np.linspace(0.0, 0.5, 11)):
            zt = free_flow(z0, float(t))
            traj.append(float(t), zt, diagnostics_row(zt, ff16, float(t)))
        rep = strichartz_report(traj)
        for key, val in rep.items():
            if isinstance(val, float):
                assert np.isfinite(val) and val > 0

    def test_not_applicable_below_d3(self):
        from polaronlab.dynamics import Trajectory

        g = build_grid(1, 8, 10.0)
        traj = Trajectory()
        traj.append(0.0, PhasePoint.zero(g), None)
        rep = strichartz_report(traj)
        assert rep == {"applicable": False, "dimension": 1}

    def test_interpolation_residual_nonnegative(self, grid16, rng):
        worst = np.inf
        for i in range(100):
            z = random_smooth_state(grid16, seed=500 + i, u_amp=1.5,
                                    alpha_amp=0.0, k_cut=1.0)
            worst = min(worst, interpolation_residual(grid16, z.u))
        assert worst >= -1e-10

    def test_interpolation_rejects_low_dimension(self):
        g = build_grid(2, 8, 10.0)
        with pytest.raises(ValueError):
            interpolation_residual(g, np.ones(g.shape, dtype=complex))
