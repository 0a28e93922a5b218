"""Discrete function-space norms and inequality checkers.

Balls are replaced by axis-aligned cubes (bmo) and by periodic shift sets
(Hoelder/Besov seminorms); the resulting values differ from their continuum
counterparts by fixed geometric factors only, which the empirical constants
in the chain reports absorb.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import spectral as sp
from .errors import ParameterError
from .spectral import Field, Grid

__all__ = [
    "NormReport",
    "lp_norm",
    "holder_seminorm",
    "besov_seminorm",
    "sobolev_alpha_energy",
    "dissipation_functional",
    "bmo_norm",
    "bmo_branches",
    "BesovChainReport",
    "check_besov_chain",
    "check_distance_power_lemma",
    "range_monitor",
    "norm_report",
]


def lp_norm(f: Field, p: float) -> float:
    """(sum |f_i|^p * cellvol)^(1/p); p = inf gives the grid max of |f|."""
    vals = f.to_physical().values
    if p == np.inf or p == float("inf"):
        return float(np.max(np.abs(vals)))
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if p == 1:
        return float(np.sum(np.abs(vals)) * f.grid.cell_volume)
    if p == 2:
        return float(np.sqrt(np.sum(vals * vals) * f.grid.cell_volume))
    return float((np.sum(np.abs(vals) ** p) * f.grid.cell_volume) ** (1.0 / p))


# -- shift sets ----------------------------------------------------------------


@lru_cache(maxsize=32)
def _holder_shifts(grid: Grid) -> tuple:
    """Index offsets with 0 < |h| <= L/4.

    Full (j, k) lattice for N <= 128, index-subsampled dyadically above, plus
    all axis-aligned and diagonal magnitudes at any resolution.
    """
    n = grid.points_per_axis
    rmax = n / 4.0  # |h| <= L/4 in index units
    shifts = set()
    if grid.dim == 1:
        for m in range(1, int(rmax) + 1):
            shifts.add((m,))
        return tuple(sorted(shifts))
    stride = max(1, n // 128)
    jmax = int(rmax)
    for j in range(0, jmax + 1, stride):
        for k in range(-jmax, jmax + 1, stride):
            if j == 0 and k <= 0:
                continue
            if j * j + k * k <= rmax * rmax:
                shifts.add((j, k))
    for m in range(1, jmax + 1):
        shifts.add((m, 0))
        shifts.add((0, m))
        if 2 * m * m <= rmax * rmax:
            shifts.add((m, m))
            shifts.add((m, -m))
    return tuple(sorted(shifts))


@lru_cache(maxsize=32)
def _besov_shifts(grid: Grid) -> tuple:
    """(offsets, measure): nonzero min-image offsets with |h| <= L/2.

    Index-subsampled by max(1, N // 128); the h-space measure per kept offset
    is (stride * dx)^dim.
    """
    n = grid.points_per_axis
    stride = max(1, n // 128)
    rmax = n / 2.0
    offs = []
    if grid.dim == 1:
        for j in range(-n // 2 + stride, n // 2 + 1, stride):
            if j != 0 and abs(j) <= rmax:
                offs.append((j,))
    else:
        for j in range(-n // 2 + stride, n // 2 + 1, stride):
            for k in range(-n // 2 + stride, n // 2 + 1, stride):
                if (j, k) != (0, 0) and j * j + k * k <= rmax * rmax:
                    offs.append((j, k))
    measure = (stride * grid.spacing) ** grid.dim
    return tuple(offs), measure


def holder_seminorm(f: Field, gamma: float) -> float:
    """sup over the shift set of ||f(.+h) - f||_inf / |h|^gamma."""
    if not (0.0 < gamma < 1.0):
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    vals = f.to_physical().values
    dx = f.grid.spacing
    best = 0.0
    for off in _holder_shifts(f.grid):
        rolled = np.roll(vals, off, axis=tuple(range(f.grid.dim)))
        diff = float(np.max(np.abs(rolled - vals)))
        hlen = dx * math.sqrt(sum(o * o for o in off))
        best = max(best, diff / hlen**gamma)
    return best


def besov_seminorm(f: Field, s: float, p: float) -> float:
    """Difference-quotient Besov seminorm.

    (sum over lattice shifts 0 < |h| <= L/2 of ||f(.+h) - f||_p^p / |h|^{n+sp}
    times the h-measure)^(1/p).
    """
    if not (0.0 < s < 1.0):
        raise ParameterError(f"s must lie in (0, 1), got {s}")
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if not (0.0 < s * p < 2.0):
        raise ParameterError(f"s*p must lie in (0, 2), got {s * p}")
    grid = f.grid
    vals = f.to_physical().values
    dx = grid.spacing
    offs, measure = _besov_shifts(grid)
    cell = grid.cell_volume
    exponent = grid.dim + s * p
    total = 0.0
    axes = tuple(range(grid.dim))
    for off in offs:
        rolled = np.roll(vals, off, axis=axes)
        hlen = dx * math.sqrt(sum(o * o for o in off))
        dpow = np.abs(rolled - vals) ** p if p != 2 else (rolled - vals) ** 2
        total += float(np.sum(dpow)) * cell / hlen**exponent * measure
    return total ** (1.0 / p)


def sobolev_alpha_energy(f: Field, alpha: float) -> float:
    """<f, Lambda^{2 alpha} f> as the spectral sum of |xi|^{2 alpha} |f_hat|^2."""
    spec = f.to_spectral()
    sym = sp._dissipation_symbol(f.grid, 2.0 * alpha, 0.0)
    w = sp.mode_weights(f.grid)
    vol = f.grid.box_length**f.grid.dim
    return float(vol * np.sum(w * sym * np.abs(spec.values) ** 2))


def dissipation_functional(f: Field, p: float, alpha: float) -> float:
    """int |f|^{p-2} f Lambda^{2 alpha} f dx by pointwise product and quadrature."""
    if p < 2:
        raise ParameterError(f"p must be >= 2, got {p}")
    phys = f.to_physical()
    lam = sp.fractional_laplacian(phys, 2.0 * alpha).values
    vals = phys.values
    if p == 2:
        integrand = vals * lam
    else:
        integrand = np.abs(vals) ** (p - 2) * vals * lam
    return float(np.sum(integrand) * f.grid.cell_volume)


def bmo_branches(f: Field) -> tuple:
    """(oscillation branch, large-cube average branch) of the bmo constant.

    Cubes are dyadic multiples of the cell, anchored on a half-overlapping
    lattice.  Cubes of volume <= 1 contribute their mean oscillation, larger
    cubes their mean of |f|; either branch is 0 when no cube size hits it.
    """
    grid = f.grid
    vals = f.to_physical().values
    n = grid.points_per_axis
    dx = grid.spacing
    osc_best, avg_best = 0.0, 0.0
    m = 1
    while m <= n:
        stride = max(1, m // 2)
        vol = (m * dx) ** grid.dim
        if grid.dim == 1:
            padded = np.pad(vals, (0, m - 1), mode="wrap")
            win = sliding_window_view(padded, m)[::stride]
            means = win.mean(axis=-1)
            if vol <= 1.0:
                osc = np.abs(win - means[:, None]).mean(axis=-1)
                osc_best = max(osc_best, float(osc.max()))
            else:
                avg_best = max(avg_best, float(np.abs(win).mean(axis=-1).max()))
        else:
            padded = np.pad(vals, ((0, m - 1), (0, m - 1)), mode="wrap")
            win = sliding_window_view(padded, (m, m))[::stride, ::stride]
            means = win.mean(axis=(-2, -1))
            if vol <= 1.0:
                osc = np.abs(win - means[..., None, None]).mean(axis=(-2, -1))
                osc_best = max(osc_best, float(osc.max()))
            else:
                avg_best = max(avg_best, float(np.abs(win).mean(axis=(-2, -1)).max()))
        m *= 2
    return osc_best, avg_best


def bmo_norm(f: Field) -> float:
    """Larger of the two cube suprema defining the bmo constant."""
    return max(bmo_branches(f))


def range_monitor(f: Field) -> tuple:
    """Exact grid (min, max)."""
    vals = f.to_physical().values
    return (float(vals.min()), float(vals.max()))


# -- inequality checkers ---------------------------------------------------------


def check_distance_power_lemma(samples) -> bool:
    """True iff |a^eps - b^eps| <= |a - b|^eps for every (a, b, eps) sample."""
    for a, b, eps in samples:
        if not (a > 0 and b > 0):
            raise ParameterError("samples need a, b > 0")
        if not (0.0 < eps <= 1.0):
            raise ParameterError("samples need eps in (0, 1]")
        if abs(a**eps - b**eps) > abs(a - b) ** eps:
            return False
    return True


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return num / den
    return 0.0 if num == 0.0 else np.inf


@dataclass
class BesovChainReport:
    p: float
    alpha: float
    besov_p_power: float
    sobolev_energy: float
    dissipation: float
    constant_first: float
    constant_second: float
    violation: bool
    split: Optional[dict] = None


def check_besov_chain(f: Field, p: float, alpha: float) -> BesovChainReport:
    """Evaluate ||f||_B^p, ||f^{p/2}||_{H^alpha}^2 and the dissipation integral.

    For nonnegative f these come straight from the three estimators; a
    sign-changing f is split into positive/negative parts with disjoint
    support, whose cross dissipation terms are reported (they should be <= 0).
    """
    if p < 2:
        raise ParameterError(f"p must be >= 2, got {p}")
    s = 2.0 * alpha / p
    grid = f.grid
    vals = f.to_physical().values
    fmin = float(vals.min())

    def part_energy(arr):
        half_power = Field(grid, arr ** (p / 2.0), "physical")
        return sobolev_alpha_energy(half_power, alpha)

    besov_pp = besov_seminorm(f, s, p) ** p
    dissipation = dissipation_functional(f, p, alpha)
    split = None
    if fmin >= 0.0:
        energy = part_energy(vals)
    else:
        plus = np.maximum(vals, 0.0)
        minus = np.maximum(-vals, 0.0)
        e_plus = part_energy(plus)
        e_minus = part_energy(minus)
        energy = e_plus + e_minus
        lam_minus = sp.fractional_laplacian(Field(grid, minus, "physical"), 2 * alpha).values
        lam_plus = sp.fractional_laplacian(Field(grid, plus, "physical"), 2 * alpha).values
        cross_plus = float(np.sum(plus ** (p - 1) * lam_minus) * grid.cell_volume)
        cross_minus = float(np.sum(minus ** (p - 1) * lam_plus) * grid.cell_volume)
        split = {
            "plus": (besov_seminorm(Field(grid, plus, "physical"), s, p) ** p,
                     e_plus,
                     dissipation_functional(Field(grid, plus, "physical"), p, alpha)),
            "minus": (besov_seminorm(Field(grid, minus, "physical"), s, p) ** p,
                      e_minus,
                      dissipation_functional(Field(grid, minus, "physical"), p, alpha)),
            "cross": (cross_plus, cross_minus),
        }
    c1 = _ratio(besov_pp, energy)
    c2 = _ratio(energy, dissipation)
    violation = bool(np.isinf(c1) or np.isinf(c2))
    return BesovChainReport(
        p=p, alpha=alpha, besov_p_power=besov_pp, sobolev_energy=energy,
        dissipation=dissipation, constant_first=c1, constant_second=c2,
        violation=violation, split=split,
    )


# -- aggregate report -------------------------------------------------------------


@dataclass(frozen=True)
class NormReport:
    lp: dict
    linf: float
    holder_seminorm: float
    holder_gamma: float
    besov_seminorm_p: float
    besov_s: float
    besov_p: float
    sobolev_alpha_energy: float
    bmo: float
    min_value: float
    max_value: float

    CSV_FIELDS = (
        "l1", "l2", "l4", "linf", "holder_seminorm", "besov_seminorm_p",
        "sobolev_alpha_energy", "bmo", "min_value", "max_value",
    )

    def csv_values(self) -> tuple:
        return (
            self.lp.get(1.0, np.nan), self.lp.get(2.0, np.nan),
            self.lp.get(4.0, np.nan), self.linf, self.holder_seminorm,
            self.besov_seminorm_p, self.sobolev_alpha_energy, self.bmo,
            self.min_value, self.max_value,
        )


def norm_report(f: Field, *, gamma: float = 0.2, besov_p: float = 2.0,
                alpha: float = 0.25, heavy: bool = True) -> NormReport:
    """Bundle the standard norms of a field; heavy=False skips the O(N^4) ones."""
    lo, hi = range_monitor(f)
    lp = {p: lp_norm(f, p) for p in (1.0, 2.0, 4.0)}
    linf = max(abs(lo), abs(hi))
    s = 2.0 * alpha / besov_p
    if heavy:
        hol = holder_seminorm(f, gamma)
        bes = besov_seminorm(f, s, besov_p)
        bm = bmo_norm(f)
    else:
        hol = bes = bm = np.nan
    return NormReport(
        lp=lp, linf=linf, holder_seminorm=hol, holder_gamma=gamma,
        besov_seminorm_p=bes, besov_s=s, besov_p=besov_p,
        sobolev_alpha_energy=sobolev_alpha_energy(f, alpha), bmo=bm,
        min_value=lo, max_value=hi,
    )
