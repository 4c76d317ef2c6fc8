"""Classical energy functionals and their Wirtinger gradients.

The undressed Hamiltonian is

    h(u, alpha) = ||grad u||^2 + ||alpha||^2 + int A_{alpha,f} |u|^2 dx,

and the dressed Hamiltonian replaces the singular coupling by its
infrared part plus an effective pair potential, a quadratic field term and
a drift term (the image of h under the Gross dressing at theta = 1).

Gradients are Wirtinger derivatives with respect to the weighted inner
products, so that i dz/dt = grad_zbar h is the Hamilton equation and

    d/dh f(z + h v) |_{h=0} = 2 Re < grad_zbar f, v >.

Every analytic gradient here is certified against central finite
differences of the corresponding functional (see the test suite); the
dressed gradient terms are derived by hand and the finite-difference gate
is their correctness contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .spectral import (
    FormFactorSet,
    GridMismatchError,
    PhasePoint,
    field_A,
    field_A_half,
)

_REALITY_TOL = 1e-12


@dataclass
class EnergyBreakdown:
    """Itemized energy: kinetic + phonon + named interaction terms."""

    kinetic: float
    phonon: float
    interaction: dict
    total: float

    @classmethod
    def assemble(cls, kinetic: float, phonon: float,
                 interaction: dict) -> "EnergyBreakdown":
        total = kinetic + phonon + sum(interaction.values())
        return cls(kinetic=kinetic, phonon=phonon,
                   interaction=dict(interaction), total=total)

    def as_dict(self, prefix: str = "") -> dict:
        out = {f"{prefix}total": self.total,
               f"{prefix}kinetic": self.kinetic,
               f"{prefix}phonon": self.phonon}
        for name, val in self.interaction.items():
            out[f"{prefix}{name}"] = val
        return out


@dataclass
class GradientPair:
    """Wirtinger gradient components (d/d u-bar on x-lattice, d/d alpha-bar
    on k-lattice)."""

    du: np.ndarray
    dalpha: np.ndarray

    def pairing(self, v: PhasePoint) -> complex:
        g = v.grid
        return g.inner_x(self.du, v.u) + g.inner_k(self.dalpha, v.alpha)


def _real(x: complex, scale: float, what: str) -> float:
    if abs(x.imag) > _REALITY_TOL * (1.0 + scale):
        raise AssertionError(
            f"{what} has imaginary residue {x.imag:.3e} (scale {scale:.3e})")
    return float(x.real)


def kinetic_energy(z: PhasePoint) -> float:
    g = z.grid
    uk = g.fourier(z.u)
    return float(np.sum(g.k_sq * (uk.real**2 + uk.imag**2)) * g.dk)


def phonon_energy(z: PhasePoint) -> float:
    return float(np.vdot(z.alpha, z.alpha).real) * z.grid.dk


# -- undressed ------------------------------------------------------------------


def h_undressed(z: PhasePoint) -> EnergyBreakdown:
    """Energy of the Landau-Pekar system, itemized."""
    g = z.grid
    a = field_A(g, z.alpha, g.f_inf)
    w = z.u.real**2 + z.u.imag**2
    coupling = float(np.sum(a * w) * g.dx)
    return EnergyBreakdown.assemble(kinetic_energy(z), phonon_energy(z),
                                    {"coupling": coupling})


def grad_undressed(z: PhasePoint) -> GradientPair:
    """grad_zbar h: the right-hand sides (-Delta u + A u, alpha + f F(|u|^2))."""
    g = z.grid
    a = field_A(g, z.alpha, g.f_inf)
    uk = g.fourier(z.u)
    du = g.inverse(g.k_sq * uk) + a * z.u
    w = z.u.real**2 + z.u.imag**2
    dalpha = z.alpha + g.f_inf * g.fourier_dx(w)
    return GradientPair(du=du, dalpha=dalpha)


# -- dressed --------------------------------------------------------------------


def _require_full_range(ff: FormFactorSet) -> None:
    if np.isfinite(ff.sigma):
        raise ValueError(
            "the dressed Hamiltonian needs form factors with sigma = inf "
            f"(got sigma = {ff.sigma})")


def _dressed_fields(z: PhasePoint, ff: FormFactorSet):
    """Shared precomputation for the dressed energy and gradient."""
    g = z.grid
    if not g.same_as(ff.grid):
        raise GridMismatchError("form factors built on a different grid")
    w = z.u.real**2 + z.u.imag**2
    # P_j(x) = <alpha, k_j B e^{-ik.x}>, stacked over components
    kb = ff.kB_stack
    p = field_A_half(g, z.alpha, kb)
    big_w = 2.0 * p.real
    uk = g.fourier(z.u)
    du_d = g.inverse(np.stack([kc * uk for kc in g.k_comps]))
    return w, p, big_w, du_d, uk


def pair_convolution(ff: FormFactorSet, w: np.ndarray,
                     w_hat: np.ndarray | None = None) -> np.ndarray:
    """(V * w)(x) by transform-based circular convolution of real fields."""
    g = ff.grid
    if w_hat is None:
        w_hat = sfft.rfftn(w)
    return sfft.irfftn(ff.V_hat * w_hat, s=g.shape) * g.dx


def h_dressed(z: PhasePoint, ff: FormFactorSet) -> EnergyBreakdown:
    """Dressed energy: infrared coupling, pair potential, quadratic field
    term, and the drift term pairing the phonon field with D_x = -i grad."""
    _require_full_range(ff)
    g = z.grid
    w, p, big_w, du_d, uk = _dressed_fields(z, ff)

    a_ir = field_A(g, z.alpha, ff.f_ir)
    coupling_ir = float(np.sum(a_ir * w) * g.dx)

    pair = float(np.sum(w * pair_convolution(ff, w)) * g.dx)

    quad = float(np.sum((big_w**2).sum(axis=0) * w) * g.dx)

    # -2 int conj(u) [ P . D + D . conj(P) ] u dx, D applied spectrally
    term1 = np.vdot(z.u, (p * du_d).sum(axis=0)) * g.dx
    pbar_u = np.conj(p) * z.u
    pbar_u_k = g.fourier(pbar_u)
    d_of = g.inverse(sum(kc * pbar_u_k[j]
                         for j, kc in enumerate(g.k_comps)))
    term2 = np.vdot(z.u, d_of) * g.dx
    drift_c = -2.0 * (term1 + term2)
    drift = _real(drift_c, abs(drift_c), "drift term")

    return EnergyBreakdown.assemble(
        kinetic_energy(z), phonon_energy(z),
        {"coupling_ir": coupling_ir, "pair": pair,
         "quadratic": quad, "drift": drift})


def dressed_term_gradients(z: PhasePoint, ff: FormFactorSet) -> dict:
    """Per-term Wirtinger gradients of the dressed interaction, keyed like
    the EnergyBreakdown items (each one individually finite-difference
    certified in the tests)."""
    _require_full_range(ff)
    g = z.grid
    w, p, big_w, du_d, uk = _dressed_fields(z, ff)
    kb = ff.kB_stack
    zero_k = np.zeros(g.shape, dtype=np.complex128)
    w_hat = sfft.rfftn(w)
    w_dx = g.fourier_dx(w)

    a_ir = field_A(g, z.alpha, ff.f_ir)
    out = {"coupling_ir": GradientPair(du=a_ir * z.u,
                                       dalpha=ff.f_ir * w_dx)}

    out["pair"] = GradientPair(
        du=2.0 * pair_convolution(ff, w, w_hat=w_hat) * z.u, dalpha=zero_k)

    quad_da = 2.0 * (kb * g.fourier_dx(big_w * w)).sum(axis=0)
    out["quadratic"] = GradientPair(du=(big_w**2).sum(axis=0) * z.u,
                                    dalpha=quad_da)

    pbar_u_k = g.fourier(np.conj(p) * z.u)
    d_of = g.inverse(sum(kc * pbar_u_k[j]
                         for j, kc in enumerate(g.k_comps)))
    drift_du = -2.0 * ((p * du_d).sum(axis=0) + d_of)
    drift_da = -2.0 * (kb * g.fourier_dx(np.conj(z.u) * du_d)).sum(axis=0)
    out["drift"] = GradientPair(du=drift_du, dalpha=drift_da)
    return out


def grad_dressed_interaction(z: PhasePoint, ff: FormFactorSet) -> GradientPair:
    """Wirtinger gradient of the dressed interaction terms only."""
    terms = dressed_term_gradients(z, ff)
    du = sum(t.du for t in terms.values())
    dalpha = sum(t.dalpha for t in terms.values())
    return GradientPair(du=du, dalpha=dalpha)


def grad_dressed(z: PhasePoint, ff: FormFactorSet) -> GradientPair:
    """grad_zbar of the full dressed Hamiltonian."""
    g = z.grid
    gi = grad_dressed_interaction(z, ff)
    du = g.inverse(g.k_sq * g.fourier(z.u)) + gi.du
    dalpha = z.alpha + gi.dalpha
    return GradientPair(du=du, dalpha=dalpha)


def grad_undressed_interaction(z: PhasePoint) -> GradientPair:
    """Gradient of the cubic coupling term of h alone."""
    g = z.grid
    a = field_A(g, z.alpha, g.f_inf)
    w = z.u.real**2 + z.u.imag**2
    return GradientPair(du=a * z.u, dalpha=g.f_inf * g.fourier_dx(w))


def directional_derivative(breakdown_grad: GradientPair,
                           v: PhasePoint) -> float:
    """2 Re <grad, v> with the weighted pairing (for gradient checks)."""
    return 2.0 * breakdown_grad.pairing(v).real
