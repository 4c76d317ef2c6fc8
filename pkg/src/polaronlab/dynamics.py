"""Time integrators: free flow, Landau-Pekar flow, dressed flow, and the
interaction-picture vector field.

The free flow is exact (frequency multipliers of modulus one).  The
Landau-Pekar stepper is a Strang splitting whose potential stage uses the
phonon field advanced to the half step, which keeps second order without an
implicit solve.  The dressed stepper splits off the same free part exactly
and integrates the interaction gradient with one classical RK4 substage per
step (the dressed interaction is not a multiplication operator because of
its drift term).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticsRow, diagnostics_row
from .hamiltonians import (
    GradientPair,
    grad_dressed_interaction,
    pair_convolution,
)
from .spectral import (
    FormFactorSet,
    PhasePoint,
    SpectralGrid,
    field_A,
    field_A_half,
)

BLOWUP_FACTOR = 1e6


class BlowUpError(RuntimeError):
    """Numerical blow-up: the L2 theory guarantees global solutions, so
    runaway field growth signals integrator failure, not physics."""

    def __init__(self, step: int, t: float, peak: float, initial_peak: float):
        self.step = step
        self.t = t
        self.peak = peak
        self.initial_peak = initial_peak
        super().__init__(
            f"field blow-up at step {step} (t = {t:.6g}): max|u| = {peak:.3e} "
            f"exceeds {BLOWUP_FACTOR:.0e} x initial {initial_peak:.3e}")


@dataclass
class EvolutionConfig:
    dt: float
    t_final: float
    scheme: str = "strang-split"
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.t_final}")
        if self.record_every < 1:
            raise ValueError(f"record stride must be >= 1, got {self.record_every}")
        if self.scheme not in ("strang-split", "rk4-on-gradient"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_final / self.dt))
        if abs(n * self.dt - self.t_final) > 1e-9 * max(1.0, self.t_final):
            raise ValueError("t_final must be an integer multiple of dt")
        return n


@dataclass
class Trajectory:
    """Recorded time series: states every `record_every` steps plus their
    diagnostics rows.  First entry is always t = 0."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, t: float, z: PhasePoint, row: DiagnosticsRow | None):
        if self.times and t <= self.times[-1]:
            raise ValueError("trajectory times must increase strictly")
        self.times.append(t)
        self.states.append(z)
        self.rows.append(row)

    def final(self) -> PhasePoint:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.times)


# -- free flow ------------------------------------------------------------------


def free_flow(z: PhasePoint, t: float) -> PhasePoint:
    """Exact free evolution (e^{it Laplacian} u, e^{-it} alpha)."""
    g = z.grid
    u = g.inverse(np.exp(-1j * t * g.k_sq) * g.fourier(z.u))
    alpha = cmath.exp(-1j * t) * z.alpha
    return PhasePoint(g, u, alpha, check=False)


# -- Landau-Pekar splitting -------------------------------------------------------


def _half_kinetic_multiplier(grid: SpectralGrid, dt: float) -> np.ndarray:
    return np.exp(-0.5j * dt * grid.k_sq)


def lp_step(z: PhasePoint, dt: float,
            _mult: np.ndarray | None = None) -> PhasePoint:
    """One Strang step of the Landau-Pekar flow.

    Half kinetic step, then an exact potential/phonon stage with the source
    f F(|u|^2) frozen (|u| is constant there) and the potential phase
    evaluated at the half-step phonon field, then the second kinetic half.
    """
    g = z.grid
    mult = _half_kinetic_multiplier(g, dt) if _mult is None else _mult
    u = g.inverse(mult * g.fourier(z.u))

    w = u.real**2 + u.imag**2
    source = g.f_inf * g.fourier_dx(w)
    phase_half = cmath.exp(-0.5j * dt)
    alpha_mid = phase_half * z.alpha + (phase_half - 1.0) * source
    a_mid = field_A(g, alpha_mid, g.f_inf)
    u = np.exp(-1j * dt * a_mid) * u
    phase_full = cmath.exp(-1j * dt)
    alpha = phase_full * z.alpha + (phase_full - 1.0) * source

    u = g.inverse(mult * g.fourier(u))
    return PhasePoint(g, u, alpha, check=False)


# -- dressed splitting -------------------------------------------------------------


def _rk4_increment(z: PhasePoint, dt: float, rhs) -> PhasePoint:
    """One RK4 step for dz/dt = rhs(z) on phase points."""
    k1 = rhs(z)
    k2 = rhs(z.add(k1, 0.5 * dt))
    k3 = rhs(z.add(k2, 0.5 * dt))
    k4 = rhs(z.add(k3, dt))
    incr_u = (dt / 6.0) * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u)
    incr_a = (dt / 6.0) * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha)
    return PhasePoint(z.grid, z.u + incr_u, z.alpha + incr_a, check=False)


def _interaction_stage(grid: SpectralGrid, ff: FormFactorSet, u: np.ndarray,
                       alpha: np.ndarray, dt: float):
    """Strang-split interaction stage: half phonon update, full implicit
    electron update, half phonon update.

    The electron substage freezes the phonon field and solves the implicit
    midpoint equation for i du/dt = M(u) u with hermitian M, so the mass
    ||u||^2 is preserved to solver tolerance (an explicit stage here loses
    it at O(dt^4) per unit time, far above the conservation budget on fine
    grids).  The phonon substages leave u untouched, so they cannot move
    the mass at all.
    """
    alpha = _alpha_substep(grid, ff, u, alpha, 0.5 * dt)
    u = _u_substep(grid, ff, u, alpha, dt)
    alpha = _alpha_substep(grid, ff, u, alpha, 0.5 * dt)
    return u, alpha


def _alpha_substep(grid: SpectralGrid, ff: FormFactorSet, u: np.ndarray,
                   alpha: np.ndarray, h: float) -> np.ndarray:
    """Explicit midpoint step for the phonon component of the interaction
    gradient with the electron field frozen (the source splits into an
    alpha-independent part and a term linear in the quadratic field)."""
    g = grid
    kb = ff.kB_stack
    uk = g.fourier(u)
    du_d = g.inverse(np.stack([kc * uk for kc in g.k_comps]))
    w = u.real**2 + u.imag**2
    src = ff.f_ir * g.fourier_dx(w)
    src = src - 2.0 * np.einsum("j...,j...->...", kb,
                                g.fourier_dx(np.conj(u) * du_d))

    def rhs(a):
        p = field_A_half(g, a, kb)
        quad = np.einsum("j...,j...->...", kb,
                         g.fourier_dx(2.0 * p.real * w))
        return -1j * (src + 2.0 * quad)

    k1 = rhs(alpha)
    k2 = rhs(alpha + 0.5 * h * k1)
    return alpha + h * k2


def _u_substep(grid: SpectralGrid, ff: FormFactorSet, u: np.ndarray,
               alpha: np.ndarray, h: float, tol: float = 1e-8,
               max_iter: int = 12) -> np.ndarray:
    """Electron substage with the phonon field frozen, split once more into
    exact multiplication phases around an implicit-midpoint drift step.

    The multiplication part (infrared coupling + pair potential + quadratic
    field) leaves |u| pointwise invariant, so its self-consistent flow is an
    exact phase, like the potential stage of the undressed splitting.  The
    drift part is linear and hermitian at frozen phonons; the midpoint rule
    is its norm-preserving one-step approximation, fixed-point solved."""
    g = grid
    kb = ff.kB_stack
    p = field_A_half(g, alpha, kb)
    pbar = np.conj(p)
    static = field_A(g, alpha, ff.f_ir) + ((2.0 * p.real) ** 2).sum(axis=0)

    def mult_phase(v, tau):
        w = v.real**2 + v.imag**2
        conv = pair_convolution(ff, w)
        return np.exp(-1j * tau * (static + 2.0 * conv)) * v

    def drift(v):
        vk = g.fourier(v)
        dv = g.inverse(np.stack([kc * vk for kc in g.k_comps]))
        pv_k = g.fourier(pbar * v)
        dp = g.inverse(sum(kc * pv_k[j] for j, kc in enumerate(g.k_comps)))
        return 2.0j * (np.einsum("j...,j...->...", p, dv) + dp)

    u = mult_phase(u, 0.5 * h)
    # fixed-point for the midpoint equation; the map contracts at rate
    # (h/2)||drift||.  Iterating to the h^2-scaled tolerance keeps the
    # fixed-point residual below the scheme's own error; the norm
    # projection afterwards removes the residual's mass defect exactly,
    # perturbing the step at a higher order than the splitting error.
    norm_in = float(np.linalg.norm(u.ravel()))
    scale = max(norm_in, 1e-30)
    mid = u + 0.5 * h * drift(u)
    for _ in range(max_iter):
        new_mid = u + 0.5 * h * drift(mid)
        delta = float(np.linalg.norm((new_mid - mid).ravel()))
        mid = new_mid
        if delta <= tol * scale:
            break
    u = 2.0 * mid - u
    norm_out = float(np.linalg.norm(u.ravel()))
    if norm_out > 0.0:
        u *= norm_in / norm_out
    return mult_phase(u, 0.5 * h)


def _interaction_rhs(ff: FormFactorSet):
    def rhs(z: PhasePoint) -> PhasePoint:
        grad = grad_dressed_interaction(z, ff)
        return PhasePoint(z.grid, -1j * grad.du, -1j * grad.dalpha, check=False)

    return rhs


def dressed_step(z: PhasePoint, dt: float, ff: FormFactorSet,
                 _mult: np.ndarray | None = None) -> PhasePoint:
    """One Strang step of the dressed flow: exact free halves around the
    split interaction stage.

    The interaction is not a pure multiplication operator (drift term), so
    the middle stage cannot be an exact phase; it is itself Strang-split
    into phonon / electron / phonon substages, with the electron substage
    solved by the implicit midpoint rule (see _interaction_stage for why
    that choice carries the mass invariant).
    """
    g = z.grid
    mult = _half_kinetic_multiplier(g, dt) if _mult is None else _mult
    half_phase = cmath.exp(-0.5j * dt)
    u = g.inverse(mult * g.fourier(z.u))
    u, alpha = _interaction_stage(g, ff, u, half_phase * z.alpha, dt)
    u = g.inverse(mult * g.fourier(u))
    return PhasePoint(g, u, half_phase * alpha, check=False)


# -- generic full-gradient RK4 scheme ----------------------------------------------


def _full_rhs(grad_fn):
    def rhs(z: PhasePoint) -> PhasePoint:
        grad: GradientPair = grad_fn(z)
        return PhasePoint(z.grid, -1j * grad.du, -1j * grad.dalpha, check=False)

    return rhs


# -- evolution loops ----------------------------------------------------------------


def _evolve(z0: PhasePoint, cfg: EvolutionConfig, ff: FormFactorSet,
            stepper, collect: bool = True) -> Trajectory:
    g = z0.grid
    traj = Trajectory()
    z = z0.copy()
    initial_peak = float(np.max(np.abs(z.u)))
    traj.append(0.0, z.copy(),
                diagnostics_row(z, ff, 0.0) if collect else None)
    n = cfg.n_steps
    for step in range(1, n + 1):
        z = stepper(z)
        t = step * cfg.dt
        peak = float(np.max(np.abs(z.u)))
        if not math.isfinite(peak) or (
                initial_peak > 0 and peak > BLOWUP_FACTOR * initial_peak):
            raise BlowUpError(step, t, peak, initial_peak)
        if step % cfg.record_every == 0 or step == n:
            traj.append(t, z.copy(),
                        diagnostics_row(z, ff, t) if collect else None)
    return traj


def lp_evolve(z0: PhasePoint, cfg: EvolutionConfig, ff: FormFactorSet,
              collect: bool = True) -> Trajectory:
    """Evolve the Landau-Pekar equations, recording diagnostics."""
    g = z0.grid
    if cfg.scheme == "strang-split":
        mult = _half_kinetic_multiplier(g, cfg.dt)
        stepper = lambda z: lp_step(z, cfg.dt, _mult=mult)
    else:
        from .hamiltonians import grad_undressed

        rhs = _full_rhs(grad_undressed)
        stepper = lambda z: _rk4_increment(z, cfg.dt, rhs)
    return _evolve(z0, cfg, ff, stepper, collect)


def dressed_evolve(z0: PhasePoint, cfg: EvolutionConfig, ff: FormFactorSet,
                   collect: bool = True) -> Trajectory:
    """Evolve the dressed Hamilton equations."""
    g = z0.grid
    if cfg.scheme == "strang-split":
        mult = _half_kinetic_multiplier(g, cfg.dt)
        stepper = lambda z: dressed_step(z, cfg.dt, ff, _mult=mult)
    else:
        from .hamiltonians import grad_dressed

        rhs = _full_rhs(lambda z: grad_dressed(z, ff))
        stepper = lambda z: _rk4_increment(z, cfg.dt, rhs)
    return _evolve(z0, cfg, ff, stepper, collect)


# -- interaction picture -------------------------------------------------------------


def interaction_field_X(t: float, w: PhasePoint, ff: FormFactorSet) -> PhasePoint:
    """Time-dependent field X(t, .) = -i phi0_{-t} grad_zbar hhat_I phi0_t.

    The free flow is linear and unitary, so it acts on gradient vectors the
    same way it acts on states.
    """
    zt = free_flow(w, t)
    grad = grad_dressed_interaction(zt, ff)
    gvec = PhasePoint(w.grid, grad.du, grad.dalpha, check=False)
    back = free_flow(gvec, -t)
    return PhasePoint(w.grid, -1j * back.u, -1j * back.alpha, check=False)


def evolve_interaction_picture(z0: PhasePoint, cfg: EvolutionConfig,
                               ff: FormFactorSet) -> PhasePoint:
    """Integrate w' = X(t, w) by RK4 and map back with the free flow.

    Equivalent route to the dressed endpoint, used as a cross-integrator
    consistency check.
    """
    w = z0.copy()
    dt = cfg.dt
    for step in range(cfg.n_steps):
        t = step * dt
        k1 = interaction_field_X(t, w, ff)
        k2 = interaction_field_X(t + 0.5 * dt, w.add(k1, 0.5 * dt), ff)
        k3 = interaction_field_X(t + 0.5 * dt, w.add(k2, 0.5 * dt), ff)
        k4 = interaction_field_X(t + dt, w.add(k3, dt), ff)
        incr_u = (dt / 6.0) * (k1.u + 2 * k2.u + 2 * k3.u + k4.u)
        incr_a = (dt / 6.0) * (k1.alpha + 2 * k2.alpha + 2 * k3.alpha + k4.alpha)
        w = PhasePoint(w.grid, w.u + incr_u, w.alpha + incr_a, check=False)
    return free_flow(w, cfg.t_final)
