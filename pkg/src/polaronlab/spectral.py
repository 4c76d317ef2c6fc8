"""Periodic-box spectral discretization, transforms, and form-factor tables.

Everything downstream works on a d-dimensional torus [0, L)^d sampled on N
points per axis.  The discrete Fourier pair is the unitary one,

    F(u)(k)  = (2pi)^{-d/2} sum_x u(x) e^{-i k.x} dx,
    F'(v)(x) = (2pi)^{-d/2} sum_k v(k) e^{+i k.x} dk,

with quadrature weights dx = (L/N)^d and dk = (2pi/L)^d, so Parseval holds
exactly.  Physical-space fields carry the dx-weighted L2 inner product,
frequency-space fields the dk-weighted one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

_TWO_PI = 2.0 * math.pi


class GridMismatchError(ValueError):
    """Raised when fields from different grids are combined."""


class SpectralGrid:
    """Uniform periodic grid with its dual frequency lattice.

    Parameters
    ----------
    d : spatial dimension, 1 to 3.
    n : points per axis, even and >= 4 (powers of two are fastest).
    length : box side L > 0.
    """

    def __init__(self, d: int, n: int, length: float):
        if d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
        if n < 4 or n % 2 != 0:
            raise ValueError(f"points per axis must be even and >= 4, got {n}")
        if not length > 0:
            raise ValueError(f"box length must be positive, got {length}")
        self.d = d
        self.n = int(n)
        self.length = float(length)
        self.shape = (self.n,) * d
        self.size = self.n**d
        self.dx = (self.length / self.n) ** d
        self.dk = (_TWO_PI / self.length) ** d
        self.x_axis = np.arange(self.n) * (self.length / self.n)
        # FFT-natural ordering: {0, 1, ..., N/2-1, -N/2, ..., -1} * 2pi/L
        self.k_axis = _TWO_PI * sfft.fftfreq(self.n, d=self.length / self.n)
        # broadcastable per-axis frequency arrays, shape e.g. (N,1,1), (1,N,1), ...
        self.k_comps = tuple(
            self.k_axis.reshape((1,) * i + (self.n,) + (1,) * (d - 1 - i))
            for i in range(d)
        )
        self.k_sq = sum(kc**2 for kc in self.k_comps)
        self.k_mag = np.sqrt(self.k_sq)
        self._norm_fwd = (_TWO_PI) ** (-d / 2.0) * self.dx
        self._norm_inv = (_TWO_PI) ** (-d / 2.0) * self.dk * self.size
        self._f_inf = None

    # -- transforms ---------------------------------------------------------

    def _workers(self, a: np.ndarray) -> int | None:
        # batched component stacks benefit from a second thread; single
        # transforms at these sizes do not
        return 2 if a.ndim > self.d else None

    def fourier(self, u: np.ndarray) -> np.ndarray:
        """Unitary forward transform of a spatial field."""
        return sfft.fftn(u, axes=self._axes(u),
                         workers=self._workers(u)) * self._norm_fwd

    def inverse(self, v: np.ndarray) -> np.ndarray:
        """Unitary inverse transform of a frequency field."""
        return sfft.ifftn(v, axes=self._axes(v),
                          workers=self._workers(v)) * self._norm_inv

    def fourier_dx(self, u: np.ndarray) -> np.ndarray:
        """dx-weighted transform sum_x u e^{-ik.x} dx (no 2pi normalization).

        This is the transform appearing in the phonon source f * F(|u|^2) and
        in every frequency-side Wirtinger gradient.
        """
        return sfft.fftn(u, axes=self._axes(u),
                         workers=self._workers(u)) * self.dx

    def inverse_dk(self, v: np.ndarray) -> np.ndarray:
        """dk-weighted sum sum_k v e^{+ik.x} dk, inverse partner of fourier_dx."""
        return sfft.ifftn(v, axes=self._axes(v),
                          workers=self._workers(v)) * (self.dk * self.size)

    def _axes(self, a: np.ndarray) -> tuple:
        # allow one leading stacking axis (e.g. the d components of a vector)
        if a.ndim == self.d and a.shape == self.shape:
            return tuple(range(self.d))
        if a.ndim == self.d + 1 and a.shape[1:] == self.shape:
            return tuple(range(1, self.d + 1))
        raise GridMismatchError(f"field of shape {a.shape} does not live on {self}")

    # -- calculus -----------------------------------------------------------

    def gradient_d(self, u: np.ndarray) -> np.ndarray:
        """D u = -i grad u, returned as a (d, N, ..., N) stack (multiplier k)."""
        uk = self.fourier(u)
        stack = np.stack([kc * uk for kc in self.k_comps])
        return self.inverse(stack)

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return -self.inverse(self.k_sq * self.fourier(u))

    # -- inner products and norms -------------------------------------------

    def inner_x(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.vdot(a, b) * self.dx)

    def inner_k(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.vdot(a, b) * self.dk)

    def norm_x(self, a: np.ndarray) -> float:
        return math.sqrt(float(np.vdot(a, a).real) * self.dx)

    def norm_k(self, a: np.ndarray) -> float:
        return math.sqrt(float(np.vdot(a, a).real) * self.dk)

    def lq_norm_x(self, a: np.ndarray, q: float) -> float:
        """Discrete L^q norm (sum |a|^q dx)^(1/q)."""
        return float(np.sum(np.abs(a) ** q) * self.dx) ** (1.0 / q)

    # -- misc ----------------------------------------------------------------

    @property
    def f_inf(self) -> np.ndarray:
        """Coupling table 1/|k|^{(d-1)/2} with the zero mode set to 0."""
        if self._f_inf is None:
            self._f_inf = form_factor_f(self.k_mag, self.d, math.inf)
        return self._f_inf

    def same_as(self, other: "SpectralGrid") -> bool:
        return (
            self.d == other.d and self.n == other.n and self.length == other.length
        )

    def check_field(self, a: np.ndarray) -> None:
        if a.shape != self.shape:
            raise GridMismatchError(
                f"field of shape {a.shape} does not match grid shape {self.shape}"
            )

    def __repr__(self) -> str:
        return f"SpectralGrid(d={self.d}, n={self.n}, length={self.length})"


def build_grid(d: int, n: int, length: float) -> SpectralGrid:
    return SpectralGrid(d, n, length)


# -- phase points -------------------------------------------------------------


class PhasePoint:
    """Classical state z = (u, alpha): electron field on the x-lattice and
    phonon field on the k-lattice of one grid."""

    __slots__ = ("grid", "u", "alpha")

    def __init__(self, grid: SpectralGrid, u: np.ndarray, alpha: np.ndarray,
                 check: bool = True):
        u = np.asarray(u, dtype=np.complex128)
        alpha = np.asarray(alpha, dtype=np.complex128)
        if check:
            grid.check_field(u)
            grid.check_field(alpha)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(alpha))):
                raise ValueError("phase point contains non-finite entries")
        self.grid = grid
        self.u = u
        self.alpha = alpha

    @classmethod
    def zero(cls, grid: SpectralGrid) -> "PhasePoint":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128),
                   np.zeros(grid.shape, dtype=np.complex128), check=False)

    def copy(self) -> "PhasePoint":
        return PhasePoint(self.grid, self.u.copy(), self.alpha.copy(), check=False)

    def mass(self) -> float:
        """||u||^2 in the dx-weighted L2 norm."""
        return float(np.vdot(self.u, self.u).real) * self.grid.dx

    def norm(self) -> float:
        """L2 (+) L2 norm of the pair."""
        return math.sqrt(self.grid.norm_x(self.u) ** 2
                         + self.grid.norm_k(self.alpha) ** 2)

    def distance(self, other: "PhasePoint") -> float:
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("phase points live on different grids")
        du = self.grid.norm_x(self.u - other.u)
        da = self.grid.norm_k(self.alpha - other.alpha)
        return math.sqrt(du**2 + da**2)

    def scaled(self, c: complex) -> "PhasePoint":
        return PhasePoint(self.grid, c * self.u, c * self.alpha, check=False)

    def add(self, other: "PhasePoint", c: complex = 1.0) -> "PhasePoint":
        return PhasePoint(self.grid, self.u + c * other.u,
                          self.alpha + c * other.alpha, check=False)

    def pairing(self, other: "PhasePoint") -> complex:
        """Weighted complex inner product on L2 (+) L2."""
        return (self.grid.inner_x(self.u, other.u)
                + self.grid.inner_k(self.alpha, other.alpha))


# -- form factors --------------------------------------------------------------


def form_factor_f(k_mag: np.ndarray, d: int, sigma: float) -> np.ndarray:
    """Electron-phonon coupling 1_{|k|<=sigma} / |k|^{(d-1)/2}, zero at k = 0."""
    k = np.asarray(k_mag, dtype=np.float64)
    out = np.zeros(k.shape)
    nz = k > 0
    out[nz] = k[nz] ** (-(d - 1) / 2.0)
    if math.isfinite(sigma):
        out[k > sigma] = 0.0
    return out


def gross_generator_b(k_mag: np.ndarray, d: int, sigma0: float,
                      sigma: float) -> np.ndarray:
    """Dressing symbol -1_{sigma0<=|k|<=sigma} / ((1+|k|^2)|k|^{(d-1)/2})."""
    k = np.asarray(k_mag, dtype=np.float64)
    out = np.zeros(k.shape)
    sel = (k >= sigma0) & (k > 0)
    if math.isfinite(sigma):
        sel &= k <= sigma
    out[sel] = -1.0 / ((1.0 + k[sel] ** 2) * k[sel] ** ((d - 1) / 2.0))
    return out


@dataclass
class FormFactorSet:
    """Precomputed coupling tables on one grid's frequency lattice."""

    grid: SpectralGrid
    sigma0: float
    sigma: float
    f: np.ndarray          # f_sigma
    f_ir: np.ndarray       # f_{sigma0}, the infrared part kept by the dressing
    B: np.ndarray
    kB: tuple              # d arrays, k_j * B
    kB_stack: np.ndarray   # the same as one (d, ...) array
    pair_symbol: np.ndarray  # |B|^2 + 2 B f, the symbol generating V
    V: np.ndarray          # effective pair potential on the x-lattice
    V_hat: np.ndarray      # raw rfftn(V), cached for the convolution kernel
    sigma0_below_first_shell: bool = field(default=False)


def build_form_factors(grid: SpectralGrid, sigma0: float,
                       sigma: float = math.inf) -> FormFactorSet:
    """Tabulate f_sigma, B_sigma, k B_sigma and the pair potential V_sigma.

    sigma = inf means no ultraviolet cutoff beyond the lattice itself.  The
    pair potential is the dk-quadrature of Re (|B|^2 + 2 B f) e^{-ik.x}.
    """
    if not 0 < sigma0 < sigma:
        raise ValueError(f"cutoffs must satisfy 0 < sigma0 < sigma, got "
                         f"({sigma0}, {sigma})")
    k = grid.k_mag
    nonzero = k[k > 0]
    first_shell = float(nonzero.min())
    below = sigma0 < first_shell
    if below:
        warnings.warn(
            f"sigma0 = {sigma0} sits below the first lattice shell "
            f"{first_shell:.6g}; B starts at that shell", stacklevel=2)
    for name, cut in (("sigma0", sigma0), ("sigma", sigma)):
        if math.isfinite(cut) and np.any(np.abs(k - cut) < 1e-9):
            warnings.warn(
                f"{name} = {cut} coincides with a lattice shell; the cutoff "
                "indicator is ambiguous there, prefer a generic value",
                stacklevel=2)
    f = form_factor_f(k, grid.d, sigma)
    B = gross_generator_b(k, grid.d, sigma0, sigma)
    kB = tuple(kc * B for kc in grid.k_comps)
    f_ir = form_factor_f(k, grid.d, sigma0)
    s = B * B + 2.0 * B * f
    v_complex = grid.inverse_dk(s)
    resid = float(np.max(np.abs(v_complex.imag)))
    if resid > 1e-12 * (1.0 + float(np.max(np.abs(v_complex.real)))):
        raise AssertionError(f"pair potential has imaginary residue {resid}")
    v = v_complex.real
    return FormFactorSet(grid=grid, sigma0=float(sigma0), sigma=float(sigma),
                         f=f, f_ir=f_ir, B=B, kB=kB,
                         kB_stack=np.stack(kB), pair_symbol=s,
                         V=v, V_hat=sfft.rfftn(v),
                         sigma0_below_first_shell=below)


# -- the auxiliary field A ------------------------------------------------------


def field_A(grid: SpectralGrid, alpha: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Evaluate A_{alpha,g}(x) = 2 Re sum_k conj(alpha) g e^{-ik.x} dk.

    g is a table on the k-lattice: real (the couplings f), purely imaginary
    (the dressing generator iB), or a (d, ...) stack for vector couplings like
    k B.  One inverse transform per component; the result is exactly real.
    """
    grid.check_field(alpha)
    w = grid.inverse_dk(alpha * np.conj(g))
    return 2.0 * w.real


def field_A_half(grid: SpectralGrid, alpha: np.ndarray,
                 g: np.ndarray) -> np.ndarray:
    """The half-pairing P(x) = sum_k conj(alpha) g e^{-ik.x} dk (complex).

    field_A = 2 Re field_A_half; the complex half is what the dressed drift
    term pairs with D_x.
    """
    return np.conj(grid.inverse_dk(alpha * np.conj(g)))
