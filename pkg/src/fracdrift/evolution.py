"""Time integration of the transport-diffusion equation on the periodic box.

Forward convention:   d/dt theta + div(v theta) + Lambda^{2a} theta = eps*Lap theta
Backward dual:        d/ds psi   - div(v(t-s) psi) + Lambda^{2a} psi = eps*Lap psi

i.e. the dual problem flips the transport sign and sees the velocity at
reversed time; the dissipative part is identical.  With divergence-free v the
pairing of a forward solution against a backward solution is conserved, which
`fracdrift.molecules.transfer_residual` measures.

The integrator is an exponential integrating-factor Runge-Kutta-2 (Heun)
step: the stiff multiplier part is applied exactly through its semigroup, the
transport term explicitly.  Pure dissipation (v = 0) is therefore advanced
exactly, and the scheme is second order in dt otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as _fft

from . import spectral as sp
from .errors import (
    CflError,
    GridError,
    HistoryGapError,
    ParameterError,
    PicardDivergenceError,
    SolverAbortError,
)
from .spectral import Field, Grid

__all__ = [
    "EquationSpec",
    "SolverState",
    "ForwardRun",
    "ZeroVelocity",
    "StaticVelocity",
    "RecordedVelocity",
    "sqg_velocity",
    "mollify_velocity",
    "etd_step",
    "run_forward",
    "run_backward",
    "picard_solve",
    "PicardReport",
    "contraction_horizon",
]


# -- velocity providers -------------------------------------------------------


def _check_divergence_free(components: Sequence[Field], tol: float = 1e-10):
    grid = components[0].grid
    div = np.zeros(grid.spectral_shape, dtype=complex)
    grad_scale = 0.0
    for ax, comp in enumerate(components):
        spec = comp.to_spectral().values
        deriv = sp._derivative_symbol(grid, ax) * spec
        div += deriv
        grad_scale += float(np.max(np.abs(deriv)))
    if np.max(np.abs(div)) > tol * max(grad_scale, 1.0):
        raise ParameterError("prescribed velocity is not divergence-free (spectral check)")


class ZeroVelocity:
    """Velocity identically zero."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self._zero = tuple(sp.constant_field(grid, 0.0) for _ in range(grid.dim))

    def at(self, time: float):
        return self._zero

    @property
    def is_zero(self) -> bool:
        return True


class StaticVelocity:
    """Time-independent prescribed velocity, checked divergence-free."""

    def __init__(self, components: Sequence[Field]):
        comps = tuple(c.to_physical() for c in components)
        grid = comps[0].grid
        if len(comps) != grid.dim:
            raise GridError("velocity component count does not match grid dimension")
        _check_divergence_free(comps)
        self.grid = grid
        self._comps = comps

    def at(self, time: float):
        return self._comps

    @property
    def is_zero(self) -> bool:
        return all(np.all(c.values == 0.0) for c in self._comps)


class RecordedVelocity:
    """Velocity snapshots at uniform times with linear interpolation.

    Queries farther than one snapshot spacing outside the recorded window
    raise HistoryGapError.
    """

    def __init__(self, grid: Grid, capacity: int):
        if capacity < 1:
            raise ParameterError("history needs at least one snapshot slot")
        self.grid = grid
        self.times = np.full(capacity, np.nan)
        self.data = np.empty((capacity, grid.dim) + grid.shape)
        self._filled = 0

    @classmethod
    def from_arrays(cls, grid: Grid, times: np.ndarray, data: np.ndarray) -> "RecordedVelocity":
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ParameterError("history needs at least one snapshot")
        if data.shape != (times.size, grid.dim) + grid.shape:
            raise GridError("history data shape does not match grid")
        obj = cls(grid, times.size)
        obj.times[:] = times
        obj.data[:] = data
        obj._filled = times.size
        return obj

    def record(self, time: float, components: Sequence[Field]):
        i = self._filled
        if i >= self.times.size:
            raise ParameterError("history buffer full")
        self.times[i] = time
        for ax, comp in enumerate(components):
            self.data[i, ax] = comp.to_physical().values
        self._filled += 1

    def trim(self):
        self.times = self.times[: self._filled]
        self.data = self.data[: self._filled]
        return self

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def is_zero(self) -> bool:
        return False

    def at(self, time: float):
        times = self.times
        if times.size == 1:
            step = np.inf
        else:
            step = times[1] - times[0]
        if time < times[0] - step or time > times[-1] + step:
            raise HistoryGapError(
                f"velocity requested at t={time}, history covers "
                f"[{times[0]}, {times[-1]}] (one-step slack)"
            )
        if times.size == 1:
            arr = self.data[0]
        else:
            pos = np.clip((time - times[0]) / step, 0.0, times.size - 1.0)
            i0 = int(min(np.floor(pos), times.size - 2))
            w = pos - i0
            arr = (1.0 - w) * self.data[i0] + w * self.data[i0 + 1]
        return tuple(
            Field(self.grid, arr[ax].copy(), "physical") for ax in range(self.grid.dim)
        )


class _TimeReversedVelocity:
    """View of a provider evaluated at reversed time t_total - s."""

    def __init__(self, provider, t_total: float):
        self._provider = provider
        self._t_total = t_total
        self.is_zero = getattr(provider, "is_zero", False)

    def at(self, s: float):
        return self._provider.at(self._t_total - s)


# -- equation description ------------------------------------------------------


@dataclass(frozen=True)
class EquationSpec:
    """Which equation to integrate and with what regularization.

    alpha is the half-order of the fractional dissipation Lambda^{2 alpha}
    and must lie in (0, 1/2].  With velocity_source="sqg_coupled" the velocity
    is (-R2 theta, R1 theta); with "prescribed" it comes from ``velocity``.
    mollify_eps > 0 smooths the velocity with a Gaussian of that width.
    ``dissipation=False`` is a test hook for pure transport.
    """

    alpha: float
    epsilon_visc: float = 0.0
    velocity_source: str = "sqg_coupled"
    velocity: Optional[object] = None
    mollify_eps: float = 0.0
    time_direction: str = "forward"
    dissipation: bool = True
    cfl_limit: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.alpha <= 0.5):
            raise ParameterError(f"alpha must lie in (0, 1/2], got {self.alpha}")
        if self.epsilon_visc < 0:
            raise ParameterError("epsilon_visc must be nonnegative")
        if self.mollify_eps < 0:
            raise ParameterError("mollify_eps must be nonnegative")
        if self.velocity_source not in ("sqg_coupled", "prescribed"):
            raise ParameterError(f"unknown velocity_source {self.velocity_source!r}")
        if self.time_direction not in ("forward", "backward_dual"):
            raise ParameterError(f"unknown time_direction {self.time_direction!r}")
        if self.velocity_source == "prescribed" and self.velocity is None:
            raise ParameterError("prescribed velocity_source needs a velocity provider")


@dataclass(frozen=True)
class SolverState:
    theta: Field
    time: float
    step_count: int
    dt: float


@dataclass
class ForwardRun:
    state: SolverState
    history: Optional[RecordedVelocity] = None


# -- the ETD step --------------------------------------------------------------


@lru_cache(maxsize=32)
def _exp_dissipation(grid: Grid, two_alpha: float, eps: float, dt: float) -> np.ndarray:
    sym = sp._dissipation_symbol(grid, two_alpha, eps)
    arr = np.exp(-dt * sym)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=32)
def _mollifier_symbol(grid: Grid, eps: float) -> np.ndarray:
    mag2 = sp._xi_magnitude(grid) ** 2
    arr = np.exp(-0.5 * eps * eps * mag2)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=64)
def _max_transport_wavenumber(grid: Grid) -> float:
    """Largest |xi| among modes kept by the 2/3 dealiasing."""
    mag = sp._xi_magnitude(grid)
    return float(np.max(mag[sp.dealias_mask(grid)]))


def sqg_velocity(theta: Field) -> tuple:
    """SQG coupling u = (-R2 theta, R1 theta); divergence-free by construction."""
    if theta.grid.dim != 2:
        raise GridError("sqg_velocity requires dim = 2")
    spec = theta.to_spectral()
    u1 = Field(theta.grid, -(sp._riesz_symbol(theta.grid, 1) * spec.values), "spectral")
    u2 = Field(theta.grid, sp._riesz_symbol(theta.grid, 0) * spec.values, "spectral")
    return (u1.to_physical(), u2.to_physical())


def mollify_velocity(v: Sequence[Field], eps: float) -> tuple:
    """Convolve each component with a unit-mass Gaussian of width eps."""
    if eps <= 0:
        raise ParameterError("mollifier width must be positive")
    out = []
    for comp in v:
        sym = _mollifier_symbol(comp.grid, float(eps))
        spec = comp.to_spectral()
        smoothed = Field(comp.grid, spec.values * sym, "spectral")
        out.append(smoothed if comp.representation == "spectral" else smoothed.to_physical())
    return tuple(out)


def _velocity_arrays(spec: EquationSpec, grid: Grid, time: float, theta_spec: np.ndarray):
    """Physical velocity component arrays at the given time/state."""
    if spec.velocity_source == "sqg_coupled":
        if grid.dim != 2:
            raise GridError("sqg coupling requires dim = 2")
        w = sp.fft_workers()
        u1h = -(sp._riesz_symbol(grid, 1) * theta_spec)
        u2h = sp._riesz_symbol(grid, 0) * theta_spec
        if spec.mollify_eps > 0:
            m = _mollifier_symbol(grid, spec.mollify_eps)
            u1h = u1h * m
            u2h = u2h * m
        u1 = _fft.irfftn(u1h, s=grid.shape, norm="forward", workers=w)
        u2 = _fft.irfftn(u2h, s=grid.shape, norm="forward", workers=w)
        return (u1, u2)
    comps = spec.velocity.at(time)
    if spec.mollify_eps > 0:
        comps = mollify_velocity(comps, spec.mollify_eps)
    return tuple(c.to_physical().values for c in comps)


def _transport_spectrum(grid: Grid, vel_arrays, theta_phys: np.ndarray, sign: float):
    """sign * div(v theta) in spectral space, dealiased."""
    w = sp.fft_workers()
    mask = sp.dealias_mask(grid)
    acc = np.zeros(grid.spectral_shape, dtype=complex)
    for ax, varr in enumerate(vel_arrays):
        prod = varr * theta_phys
        ph = _fft.rfftn(prod, norm="forward", workers=w)
        acc += sp._derivative_symbol(grid, ax) * (ph * mask)
    return sign * acc


def _cfl_check(spec: EquationSpec, grid: Grid, dt: float, vel_arrays):
    speed = np.sqrt(sum(v * v for v in vel_arrays))
    vmax = float(np.max(speed))
    kmax = _max_transport_wavenumber(grid)
    if dt * kmax * vmax > spec.cfl_limit:
        advisory = spec.cfl_limit / (kmax * vmax)
        raise CflError(
            f"CFL violation: dt*kmax*vmax = {dt * kmax * vmax:.3g} > "
            f"{spec.cfl_limit}; use dt <= {advisory:.3g}",
            advisory_dt=advisory,
        )


def _advance(grid, spec: EquationSpec, theta_phys, theta_hat, time, dt,
             check_cfl=True):
    """One integrating-factor Heun step; returns (phys, hat) at time + dt."""
    w = sp.fft_workers()
    sign = -1.0 if spec.time_direction == "forward" else 1.0
    two_alpha = 2.0 * spec.alpha
    if spec.dissipation:
        E = _exp_dissipation(grid, two_alpha, spec.epsilon_visc, dt)
    else:
        E = 1.0
    vel1 = _velocity_arrays(spec, grid, time, theta_hat)
    if check_cfl:
        _cfl_check(spec, grid, dt, vel1)
    n1 = _transport_spectrum(grid, vel1, theta_phys, sign)
    pred_hat = E * (theta_hat + dt * n1)
    pred_phys = _fft.irfftn(pred_hat, s=grid.shape, norm="forward", workers=w)
    vel2 = _velocity_arrays(spec, grid, time + dt, pred_hat)
    n2 = _transport_spectrum(grid, vel2, pred_phys, sign)
    new_hat = E * theta_hat + 0.5 * dt * (E * n1 + n2)
    new_phys = _fft.irfftn(new_hat, s=grid.shape, norm="forward", workers=w)
    return new_phys, new_hat, vel1


def etd_step(state: SolverState, spec: EquationSpec) -> SolverState:
    """Advance one step of size state.dt."""
    grid = state.theta.grid
    theta_phys = state.theta.to_physical().values
    theta_hat = state.theta.to_spectral().values
    new_phys, _, _ = _advance(grid, spec, theta_phys, theta_hat, state.time, state.dt)
    return SolverState(
        theta=Field(grid, new_phys, "physical"),
        time=state.time + state.dt,
        step_count=state.step_count + 1,
        dt=state.dt,
    )


def _run(theta0: Field, spec: EquationSpec, t_end: float, dt: float,
         observers: Sequence[Callable] = (), record_history: bool = False) -> ForwardRun:
    if t_end <= 0:
        raise ParameterError("t_end must be positive")
    if dt <= 0:
        raise ParameterError("dt must be positive")
    grid = theta0.grid
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(t_end, 1.0):
        n_steps = int(np.ceil(t_end / dt - 1e-12))
    dt_eff = t_end / n_steps
    w = sp.fft_workers()
    theta_phys = theta0.to_physical().values.copy()
    theta_hat = _fft.rfftn(theta_phys, norm="forward", workers=w)

    history = RecordedVelocity(grid, n_steps + 1) if record_history else None

    state = SolverState(Field(grid, theta_phys.copy(), "physical"), 0.0, 0, dt_eff)
    for obs in observers:
        obs(state)
    last_good = state
    for k in range(n_steps):
        t = k * dt_eff
        new_phys, new_hat, vel1 = _advance(grid, spec, theta_phys, theta_hat, t, dt_eff)
        if history is not None:
            history.record(t, tuple(Field(grid, v, "physical") for v in vel1))
        if not np.isfinite(new_phys).all():
            raise SolverAbortError(
                f"non-finite field at step {k + 1} (t={t + dt_eff:.6g})",
                last_state=last_good,
            )
        theta_phys, theta_hat = new_phys, new_hat
        state = SolverState(Field(grid, theta_phys.copy(), "physical"),
                            (k + 1) * dt_eff, k + 1, dt_eff)
        for obs in observers:
            obs(state)
        last_good = state
    if history is not None:
        vel_final = _velocity_arrays(spec, grid, n_steps * dt_eff, theta_hat)
        history.record(n_steps * dt_eff, tuple(Field(grid, v, "physical") for v in vel_final))
        history.trim()
    return ForwardRun(state=state, history=history)


def run_forward(theta0: Field, spec: EquationSpec, t_end: float, dt: float,
                observers: Sequence[Callable] = (), record_history: bool = False) -> ForwardRun:
    """Integrate forward to t_end, invoking observers after every step."""
    if spec.time_direction != "forward":
        spec = replace(spec, time_direction="forward")
    return _run(theta0, spec, t_end, dt, observers, record_history)


def run_backward(psi0: Field, velocity_history, spec: EquationSpec, t: float, dt: float,
                 observers: Sequence[Callable] = ()) -> SolverState:
    """Integrate the dual problem from s = 0 to s = t with velocity v(., t - s)."""
    reversed_vel = _TimeReversedVelocity(velocity_history, t)
    back = replace(
        spec,
        time_direction="backward_dual",
        velocity_source="prescribed",
        velocity=reversed_vel,
    )
    return _run(psi0, back, t, dt, observers).state


# -- Picard iteration on the Duhamel form ---------------------------------------


def contraction_horizon(epsilon_visc: float, v_inf: float, alpha: float,
                        constant: float = 1.0) -> float:
    """Largest t' with constant*(sqrt(t'/eps)*|v| + t'^{1-a}/eps^a) <= 1/2."""
    if epsilon_visc <= 0:
        raise ParameterError("viscosity must be positive for the contraction bound")

    def lhs(t):
        return constant * (
            np.sqrt(t / epsilon_visc) * v_inf + t ** (1.0 - alpha) / epsilon_visc**alpha
        )

    lo, hi = 0.0, 1.0
    while lhs(hi) < 0.5:
        hi *= 2.0
        if hi > 1e12:
            return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if lhs(mid) <= 0.5:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class PicardReport:
    distances: list
    ratios: list
    converged: bool
    iterations: int
    horizon_bound: float
    quadrature_nodes: int


def picard_solve(theta0: Field, velocity: Sequence[Field], spec: EquationSpec,
                 t_prime: float, n_quad: int = 33, max_iter: int = 40,
                 tol: float = 1e-10, p_norm: float = 2.0,
                 bound_constant: float = 1.0) -> tuple:
    """Fixed-point iteration on the integral (Duhamel) form of the equation.

    theta_{n+1}(t) = e^{eps t Lap} theta0
                     - int_0^t e^{eps (t-s) Lap} [div(v_eps theta_n) + Lambda^{2a} theta_n] ds

    with the heat factors applied exactly and the time integral by the
    trapezoid rule on n_quad uniform nodes.  Requires epsilon_visc > 0 and
    t_prime within the contraction horizon.  Returns (field at t_prime,
    PicardReport).
    """
    from .analysis import lp_norm

    if spec.epsilon_visc <= 0:
        raise ParameterError("picard_solve requires epsilon_visc > 0")
    if n_quad < 2:
        raise ParameterError("need at least two quadrature nodes")
    grid = theta0.grid
    comps = tuple(c.to_physical() for c in velocity)
    _check_divergence_free(comps)
    v_inf = float(np.max(np.sqrt(sum(c.values**2 for c in comps))))
    horizon = contraction_horizon(spec.epsilon_visc, v_inf, spec.alpha, bound_constant)
    if t_prime > horizon * (1.0 + 1e-9):
        raise ParameterError(
            f"t_prime={t_prime:.3g} exceeds the contraction horizon {horizon:.3g}"
        )

    if spec.mollify_eps > 0:
        comps = mollify_velocity(comps, spec.mollify_eps)
    varrs = tuple(c.to_physical().values for c in comps)

    w = sp.fft_workers()
    mag2 = sp._xi_magnitude(grid) ** 2
    lam = sp._dissipation_symbol(grid, 2.0 * spec.alpha, 0.0)
    h = t_prime / (n_quad - 1)
    # heat factors e^{eps*j*h*Lap} for j = 0..n_quad-1
    heat = [np.exp(-spec.epsilon_visc * (j * h) * mag2) for j in range(n_quad)]

    theta0_hat = _fft.rfftn(theta0.to_physical().values, norm="forward", workers=w)
    free_term = [heat[j] * theta0_hat for j in range(n_quad)]

    iterates = [hat.copy() for hat in free_term]  # theta_0(t) = e^{eps t Lap} theta0

    def integrand(hat):
        phys = _fft.irfftn(hat, s=grid.shape, norm="forward", workers=w)
        return _transport_spectrum(grid, varrs, phys, +1.0) + lam * hat

    distances, ratios = [], []
    converged = False
    n_done = 0
    for it in range(max_iter):
        g = [integrand(iterates[j]) for j in range(n_quad)]
        new = [free_term[0].copy()]
        for j in range(1, n_quad):
            acc = 0.5 * (heat[j] * g[0] + g[j])
            for i in range(1, j):
                acc += heat[j - i] * g[i]
            new.append(free_term[j] - h * acc)
        dist = 0.0
        for j in range(n_quad):
            diff = _fft.irfftn(new[j] - iterates[j], s=grid.shape,
                               norm="forward", workers=w)
            dist = max(dist, lp_norm(Field(grid, diff, "physical"), p_norm))
        distances.append(dist)
        if len(distances) >= 2 and distances[-2] > 0:
            ratios.append(distances[-1] / distances[-2])
        iterates = new
        n_done = it + 1
        if dist < tol:
            converged = True
            break
        if len(ratios) >= 3 and all(r > 1.0 for r in ratios[-3:]):
            raise PicardDivergenceError(
                f"successive-iterate ratio exceeded 1 for 3 iterations: {ratios[-3:]}"
            )
    final = Field(grid, _fft.irfftn(iterates[-1], s=grid.shape, norm="forward", workers=w),
                  "physical")
    report = PicardReport(distances, ratios, converged, n_done, horizon, n_quad)
    return final, report
