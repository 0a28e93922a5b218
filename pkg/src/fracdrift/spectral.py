"""Discrete Fourier representation of periodic fields and multiplier operators.

Fields live on a uniform grid over the periodic box [0, L)^dim.  Sample
``values[i0, i1]`` corresponds to the point ``x = (i0*dx, i1*dx)`` (axis 0 is
the first coordinate).  The spectral twin uses the real-to-complex
half-spectrum layout of ``rfftn`` (last axis halved) with the *forward*
normalization, so the coefficient at wavevector zero equals the field mean.

Wavevector components are ``xi_j = (2*pi/L) * k_j`` with integer mode index
``k_j``; for ``L = 2*pi`` the wavevector equals the mode index.  All operators
here are pure functions: input fields are never mutated, and arrays inside a
Field are marked read-only.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import fft as _fft

from .errors import GridError, ParameterError, SymbolSymmetryError

__all__ = [
    "Grid",
    "Field",
    "Multiplier",
    "transform",
    "apply_multiplier",
    "fractional_laplacian",
    "riesz_transform",
    "semigroup_step",
    "divergence_of_product",
    "dealias",
    "dealias_mask",
    "wavevectors",
    "coordinates",
    "field_from_values",
    "field_from_function",
    "constant_field",
    "inner_product",
    "spectral_l2_norm_sq",
    "mode_weights",
]


def fft_workers() -> int:
    """Worker count for the FFT backend, capped by FRACDRIFT_THREADS."""
    try:
        return max(1, int(os.environ.get("FRACDRIFT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of the periodic box [0, box_length)^dim."""

    dim: int
    points_per_axis: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        n = self.points_per_axis
        if n < 8 or (n & (n - 1)) != 0:
            raise GridError(
                f"points_per_axis must be a power of two >= 8, got {n}"
            )
        if not (self.box_length > 0):
            raise GridError(f"box_length must be positive, got {self.box_length}")

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def spectral_shape(self) -> tuple:
        n = self.points_per_axis
        return (n,) * (self.dim - 1) + (n // 2 + 1,)


@dataclass(frozen=True)
class Field:
    """Scalar field on a Grid, in physical samples or spectral coefficients."""

    grid: Grid
    values: np.ndarray
    representation: str  # "physical" | "spectral"

    def __post_init__(self):
        if self.representation not in ("physical", "spectral"):
            raise ParameterError(f"unknown representation {self.representation!r}")
        expected = (
            self.grid.shape if self.representation == "physical" else self.grid.spectral_shape
        )
        if self.values.shape != expected:
            raise GridError(
                f"{self.representation} values shape {self.values.shape} does not "
                f"match grid shape {expected}"
            )
        self.values.setflags(write=False)

    def to_physical(self) -> "Field":
        return self if self.representation == "physical" else transform(self, "inverse")

    def to_spectral(self) -> "Field":
        return self if self.representation == "spectral" else transform(self, "forward")


@dataclass(frozen=True)
class Multiplier:
    """Fourier multiplier: symbol maps per-axis wavevector arrays to factors.

    ``symbol`` receives a tuple of broadcastable float arrays (one per axis,
    components of xi) and must return the multiplier values; it must be finite
    at xi = 0 and conjugate-symmetric (symbol(-xi) == conj(symbol(xi))) so
    real fields map to real fields.
    """

    name: str
    symbol: Callable[..., np.ndarray]


# -- grid-derived arrays (cached; grids are small hashable values) ----------


@lru_cache(maxsize=64)
def _mode_indices(grid: Grid) -> tuple:
    n = grid.points_per_axis
    full = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., -1 ordering
    half = np.arange(n // 2 + 1, dtype=float)
    axes = []
    for ax in range(grid.dim):
        k = half if ax == grid.dim - 1 else full
        shape = [1] * grid.dim
        shape[ax] = k.size
        axes.append(k.reshape(shape))
    return tuple(axes)


def wavevectors(grid: Grid) -> tuple:
    """Per-axis wavevector arrays (broadcastable) for the half-spectrum."""
    scale = 2.0 * np.pi / grid.box_length
    return tuple(scale * k for k in _mode_indices(grid))


@lru_cache(maxsize=64)
def _xi_magnitude(grid: Grid) -> np.ndarray:
    xs = wavevectors(grid)
    mag = np.sqrt(sum(x**2 for x in xs))
    mag.setflags(write=False)
    return mag


@lru_cache(maxsize=64)
def dealias_mask(grid: Grid) -> np.ndarray:
    """Boolean mask keeping modes with every |k_axis| <= (2/3)*(N/2)."""
    cutoff = (2.0 / 3.0) * (grid.points_per_axis / 2.0)
    mask = np.ones(grid.spectral_shape, dtype=bool)
    for k in _mode_indices(grid):
        mask &= np.abs(k) <= cutoff
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=64)
def mode_weights(grid: Grid) -> np.ndarray:
    """Multiplicity of each half-spectrum mode in the full spectrum.

    Weight 2 for modes whose mirror along the halved axis is not stored,
    1 for the self-conjugate columns (k_last = 0 and Nyquist).
    """
    n = grid.points_per_axis
    w = np.full(grid.spectral_shape, 2.0)
    w[..., 0] = 1.0
    w[..., n // 2] = 1.0
    w.setflags(write=False)
    return w


def coordinates(grid: Grid) -> tuple:
    """Per-axis coordinate arrays (broadcastable) of the physical samples."""
    x = np.arange(grid.points_per_axis) * grid.spacing
    out = []
    for ax in range(grid.dim):
        shape = [1] * grid.dim
        shape[ax] = x.size
        out.append(x.reshape(shape))
    return tuple(out)


# -- constructors ------------------------------------------------------------


def field_from_values(grid: Grid, values: np.ndarray, representation: str = "physical") -> Field:
    arr = np.array(values, dtype=complex if representation == "spectral" else float, copy=True)
    return Field(grid, arr, representation)


def field_from_function(grid: Grid, fn: Callable[..., np.ndarray]) -> Field:
    """Sample ``fn(x1[, x2])`` on the grid."""
    vals = np.broadcast_to(fn(*coordinates(grid)), grid.shape).astype(float)
    return Field(grid, vals.copy(), "physical")


def constant_field(grid: Grid, value: float) -> Field:
    return Field(grid, np.full(grid.shape, float(value)), "physical")


# -- transforms --------------------------------------------------------------


def transform(f: Field, direction: str) -> Field:
    """Forward (physical -> spectral) or inverse (spectral -> physical) FFT."""
    if direction == "forward":
        if f.representation != "physical":
            raise ParameterError("forward transform expects a physical field")
        coeff = _fft.rfftn(f.values, norm="forward", workers=fft_workers())
        return Field(f.grid, coeff, "spectral")
    if direction == "inverse":
        if f.representation != "spectral":
            raise ParameterError("inverse transform expects a spectral field")
        vals = _fft.irfftn(
            f.values, s=f.grid.shape, norm="forward", workers=fft_workers()
        )
        return Field(f.grid, vals, "physical")
    raise ParameterError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _symbol_array(grid: Grid, m: Multiplier) -> np.ndarray:
    """Evaluate and validate a multiplier symbol on the half-spectrum lattice."""
    xs = wavevectors(grid)
    sym = np.asarray(m.symbol(*xs), dtype=complex)
    sym = np.broadcast_to(sym, grid.spectral_shape)
    if not np.all(np.isfinite(sym)):
        raise SymbolSymmetryError(f"multiplier {m.name!r} is not finite on the lattice")
    # Conjugate symmetry: evaluate at -xi and compare.  Mirroring -xi back into
    # the stored lattice only changes signs, so one extra evaluation suffices.
    neg = np.asarray(m.symbol(*tuple(-x for x in xs)), dtype=complex)
    neg = np.broadcast_to(neg, grid.spectral_shape)
    scale = np.max(np.abs(sym)) or 1.0
    if np.max(np.abs(neg - np.conj(sym))) > 1e-12 * scale:
        raise SymbolSymmetryError(
            f"multiplier {m.name!r} breaks conjugate symmetry; output would not be real"
        )
    return sym


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Multiply each spectral coefficient by the symbol value at its wavevector."""
    sym = _symbol_array(f.grid, m)
    spec = f.to_spectral()
    out = Field(f.grid, spec.values * sym, "spectral")
    return out if f.representation == "spectral" else out.to_physical()


# -- concrete operators ------------------------------------------------------


def _nyquist_zero_mask(grid: Grid, axis: int) -> np.ndarray:
    """Mask that is 0 on the Nyquist plane of ``axis``, 1 elsewhere.

    Odd symbols (derivatives, Riesz) are zeroed there: the Nyquist mode of a
    real field carries no resolvable phase, and keeping an imaginary factor
    would break conjugate symmetry.
    """
    k = _mode_indices(grid)[axis]
    return np.where(np.abs(k) == grid.points_per_axis // 2, 0.0, 1.0)


@lru_cache(maxsize=256)
def _dissipation_symbol(grid: Grid, two_alpha: float, epsilon_visc: float) -> np.ndarray:
    mag = _xi_magnitude(grid)
    sym = np.zeros(grid.spectral_shape)
    nz = mag > 0
    sym[nz] = mag[nz] ** two_alpha
    if epsilon_visc:
        sym += epsilon_visc * mag**2
    sym.setflags(write=False)
    return sym


def fractional_laplacian(f: Field, two_alpha: float) -> Field:
    """Apply |xi|^{two_alpha}, sending the mean to zero."""
    if not (0.0 < two_alpha <= 2.0):
        raise ParameterError(f"two_alpha must lie in (0, 2], got {two_alpha}")
    sym = _dissipation_symbol(f.grid, float(two_alpha), 0.0)
    spec = f.to_spectral()
    out = Field(f.grid, spec.values * sym, "spectral")
    return out if f.representation == "spectral" else out.to_physical()


@lru_cache(maxsize=64)
def _riesz_symbol(grid: Grid, axis: int) -> np.ndarray:
    mag = _xi_magnitude(grid)
    xi_j = np.broadcast_to(wavevectors(grid)[axis], grid.spectral_shape)
    sym = np.zeros(grid.spectral_shape, dtype=complex)
    nz = mag > 0
    sym[nz] = -1j * xi_j[nz] / mag[nz]
    sym *= _nyquist_zero_mask(grid, axis)
    sym.setflags(write=False)
    return sym


def riesz_transform(f: Field, j: int) -> Field:
    """Riesz transform with symbol -i*xi_j/|xi|; zero at xi = 0."""
    if f.grid.dim != 2:
        raise GridError("riesz_transform requires dim = 2")
    if j not in (1, 2):
        raise ParameterError(f"axis index j must be 1 or 2, got {j}")
    sym = _riesz_symbol(f.grid, j - 1)
    spec = f.to_spectral()
    out = Field(f.grid, spec.values * sym, "spectral")
    return out if f.representation == "spectral" else out.to_physical()


def semigroup_step(f: Field, tau: float, two_alpha: float, epsilon_visc: float = 0.0) -> Field:
    """Multiply by exp(-tau*(|xi|^{two_alpha} + epsilon_visc*|xi|^2))."""
    if tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {tau}")
    if epsilon_visc < 0:
        raise ParameterError(f"epsilon_visc must be nonnegative, got {epsilon_visc}")
    sym = np.exp(-tau * _dissipation_symbol(f.grid, float(two_alpha), float(epsilon_visc)))
    spec = f.to_spectral()
    out = Field(f.grid, spec.values * sym, "spectral")
    return out if f.representation == "spectral" else out.to_physical()


@lru_cache(maxsize=64)
def _derivative_symbol(grid: Grid, axis: int) -> np.ndarray:
    xi_j = np.broadcast_to(wavevectors(grid)[axis], grid.spectral_shape)
    sym = 1j * xi_j * _nyquist_zero_mask(grid, axis)
    sym.setflags(write=False)
    return sym


def divergence_of_product(v: Sequence[Field], f: Field) -> Field:
    """sum_j d/dx_j (v_j * f): pointwise product, spectral derivative, dealiased."""
    grid = f.grid
    if len(v) != grid.dim:
        raise GridError(f"velocity has {len(v)} components for dim {grid.dim}")
    for comp in v:
        if comp.grid != grid:
            raise GridError("velocity component grid does not match field grid")
    fp = f.to_physical().values
    mask = dealias_mask(grid)
    acc = np.zeros(grid.spectral_shape, dtype=complex)
    for ax, comp in enumerate(v):
        prod = comp.to_physical().values * fp
        spec = _fft.rfftn(prod, norm="forward", workers=fft_workers())
        acc += _derivative_symbol(grid, ax) * (spec * mask)
    out = Field(grid, acc, "spectral")
    return out if f.representation == "spectral" else out.to_physical()


def dealias(f: Field) -> Field:
    """Zero all coefficients with any |k_axis| above the 2/3 cutoff."""
    spec = f.to_spectral()
    out = Field(f.grid, spec.values * dealias_mask(f.grid), "spectral")
    return out if f.representation == "spectral" else out.to_physical()


# -- inner products and quadrature -------------------------------------------


def inner_product(f: Field, g: Field) -> float:
    """Grid quadrature of the L^2 pairing: sum f*g * cell volume."""
    if f.grid != g.grid:
        raise GridError("inner_product requires matching grids")
    return float(np.sum(f.to_physical().values * g.to_physical().values) * f.grid.cell_volume)


def spectral_l2_norm_sq(f: Field) -> float:
    """||f||_2^2 from the half-spectrum (Parseval): L^dim * sum w |coeff|^2."""
    spec = f.to_spectral()
    w = mode_weights(f.grid)
    vol = f.grid.box_length**f.grid.dim
    return float(vol * np.sum(w * np.abs(spec.values) ** 2))
