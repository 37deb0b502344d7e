"""Fixed-step explicit time integration in Fourier space.

The state is advanced as stacked half-spectrum coefficients
``(density, u1, u2, temperature, m)``. Two schemes are available:

``RK4``
    classical four-stage Runge-Kutta on the full right-hand side.
``IFRK4``
    integrating-factor RK4 (Lawson). The constant-coefficient dissipation
    ``mu Lap u + (lam + mu) grad div u`` and ``kappa Lap theta`` is
    propagated exactly, split into its gradient part (rate ``nu |k|^2``) and
    solenoidal part (rate ``mu |k|^2``); the remainder is integrated with RK4.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .model import (
    PRIMITIVE_OFFSET,
    Params,
    PerturbationState,
    PositivityError,
    PrimitiveState,
    perturbation_rhs_hat,
    primitive_rhs_hat,
    stacked_hat,
    stacked_values,
)
from .spectral import Grid

log = logging.getLogger(__name__)

SCHEMES = ("RK4", "IFRK4")


class NonFiniteError(FloatingPointError):
    def __init__(self, time: float | None = None):
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"non-finite value in state{where}")


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    POSITIVITY_BREACH = "PositivityBreach"
    NON_FINITE = "NonFinite"


@dataclass
class IntegratorConfig:
    scheme: str = "RK4"
    cfl_advective: float = 0.5
    cfl_diffusive: float = 0.25
    dt_max: float = 1e-3
    t_end: float = 1.0
    sample_interval: float = 0.05

    def __post_init__(self):
        self.scheme = self.scheme.upper()
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("cfl_advective", "cfl_diffusive", "dt_max", "sample_interval"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")


class Formulation:
    """Right-hand side and linear part for one choice of unknowns."""

    state_cls: type = PrimitiveState
    name = "abstract"
    offset: np.ndarray | None = None

    def __init__(self, grid: Grid, params: Params):
        self.grid = grid
        self.params = params
        self._ksq = np.where(grid.nyquist_free, grid.ksq, 0.0)

    def rhs_hat(self, yh: np.ndarray, time: float | None = None) -> np.ndarray:
        raise NotImplementedError

    def thermal_diffusivity(self) -> float:
        return self.params.kappa

    def linear_hat(self, yh: np.ndarray) -> np.ndarray:
        g, p = self.grid, self.params
        out = np.zeros_like(yh)
        uh = yh[1:3]
        Qu = g.project_Q_hat(uh)
        out[1:3] = -self._ksq * (p.nu * Qu + p.mu * (uh - Qu))
        out[3] = -self._ksq * self.thermal_diffusivity() * yh[3]
        return out

    def propagate(self, yh: np.ndarray, h: float) -> np.ndarray:
        """``exp(h L) yh`` for the constant-coefficient dissipation ``L``."""
        g, p = self.grid, self.params
        out = yh.copy()
        uh = yh[1:3]
        Qu = g.project_Q_hat(uh)
        out[1:3] = np.exp(-p.nu * self._ksq * h) * Qu + np.exp(-p.mu * self._ksq * h) * (uh - Qu)
        out[3] = np.exp(-self.thermal_diffusivity() * self._ksq * h) * yh[3]
        return out

    def pack(self, state) -> np.ndarray:
        return stacked_hat(self.grid, state.stacked(), self.offset)

    def unpack(self, yh: np.ndarray, time: float):
        return self.state_cls.from_stacked(stacked_values(self.grid, yh, self.offset), time)


class PrimitiveFormulation(Formulation):
    state_cls = PrimitiveState
    name = "primitive"
    offset = PRIMITIVE_OFFSET

    def rhs_hat(self, yh, time=None):
        return primitive_rhs_hat(self.grid, yh, self.params, time)

    def thermal_diffusivity(self) -> float:
        return self.params.kappa / self.params.c_nu


class PerturbationFormulation(Formulation):
    state_cls = PerturbationState
    name = "perturbation"

    def __init__(self, grid, params):
        params.require_unit_gas()
        super().__init__(grid, params)

    def rhs_hat(self, yh, time=None):
        return perturbation_rhs_hat(self.grid, yh, self.params, time)


FORMULATIONS = {"primitive": PrimitiveFormulation, "perturbation": PerturbationFormulation}


def formulation_for(state, params: Params) -> Formulation:
    if isinstance(state, PrimitiveState):
        return PrimitiveFormulation(state.grid, params)
    if isinstance(state, PerturbationState):
        return PerturbationFormulation(state.grid, params)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def compute_dt(state, params: Params, config: IntegratorConfig) -> float:
    """Fixed step from the advective CFL bound and, for RK4, the diffusive one."""
    dx = state.grid.dx
    speed = float(np.sqrt(state.u[0] ** 2 + state.u[1] ** 2).max())
    speed = max(speed, 1e-8)
    dt = min(config.dt_max, config.cfl_advective * dx / speed)
    if config.scheme == "RK4":
        stiff = max(params.mu, params.nu, params.kappa)
        dt = min(dt, config.cfl_diffusive * dx * dx / stiff)
    return dt


def _rk4(f: Formulation, yh, dt, t):
    k1 = f.rhs_hat(yh, t)
    k2 = f.rhs_hat(yh + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f.rhs_hat(yh + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f.rhs_hat(yh + dt * k3, t + dt)
    return yh + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _ifrk4(f: Formulation, yh, dt, t):
    def nonlinear(vh, time):
        return f.rhs_hat(vh, time) - f.linear_hat(vh)

    half = 0.5 * dt
    k1 = nonlinear(yh, t)
    ey = f.propagate(yh, half)
    k2 = nonlinear(ey + half * f.propagate(k1, half), t + half)
    k3 = nonlinear(ey + half * k2, t + half)
    k4 = nonlinear(f.propagate(yh, dt) + dt * f.propagate(k3, half), t + dt)
    return f.propagate(yh + dt / 6.0 * k1, dt) + f.propagate(dt / 3.0 * (k2 + k3), half) + dt / 6.0 * k4


def advance(f: Formulation, yh: np.ndarray, dt: float, scheme: str = "RK4", time: float = 0.0) -> np.ndarray:
    """One step on stacked coefficients; raises on non-finite output."""
    scheme = scheme.upper()
    if scheme == "RK4":
        out = _rk4(f, yh, dt, time)
    elif scheme == "IFRK4":
        out = _ifrk4(f, yh, dt, time)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(time + dt)
    return out


def step(state, params: Params, dt: float, scheme: str = "RK4"):
    """Advance a primitive or perturbation state by one step of size ``dt``."""
    f = formulation_for(state, params)
    yh = advance(f, f.pack(state), dt, scheme, state.time)
    return f.unpack(yh, state.time + dt)


@dataclass
class RunOutcome:
    state: Any
    status: Status
    time: float
    dt: float
    steps: int
    series: list = field(default_factory=list)
    message: str = ""

    @property
    def completed(self) -> bool:
        return self.status is Status.COMPLETED


Observer = Callable[[float, Any], Any]


def _breach(state, params: Params, t: float) -> PositivityError:
    rho = state.rho if isinstance(state, PrimitiveState) else 1.0 + state.a
    return PositivityError(rho.min(), params.rho_floor, t)


def integrate(state, params: Params, config: IntegratorConfig, observer: Observer | None = None) -> RunOutcome:
    """Integrate to ``config.t_end`` with one fixed step chosen from the initial state.

    ``observer(time, state)`` is called at ``t = 0`` and then at equally spaced
    times no further apart than ``config.sample_interval``, ending at
    ``t_end``. Non-``None`` observer results are collected in ``series``.
    """
    f = formulation_for(state, params)
    series: list = []

    def observe(t, s):
        if observer is not None:
            r = observer(t, s)
            if r is not None:
                series.append(r)

    t0 = float(state.time)
    if not state.is_valid(params):
        return RunOutcome(state, Status.POSITIVITY_BREACH, t0, 0.0, 0, series, str(_breach(state, params, t0)))
    observe(t0, state)
    if config.t_end <= 0:
        return RunOutcome(state, Status.COMPLETED, t0, 0.0, 0, series)

    n_samples = max(1, math.ceil(config.t_end / config.sample_interval - 1e-9))
    interval = config.t_end / n_samples
    dt0 = compute_dt(state, params, config)
    per_sample = max(1, math.ceil(interval / dt0 - 1e-9))
    dt = interval / per_sample
    log.info("integrating %s with %s: dt=%.4g, %d samples x %d steps", f.name, config.scheme, dt, n_samples, per_sample)

    # tendencies vanish outside the de-aliased band, so anything there (e.g. the
    # round-off of rho = 1 + a) would stay frozen and floor the H^3 norms
    yh = f.grid.dealias_mask * f.pack(state)
    current = state
    steps = 0
    for i in range(n_samples):
        for j in range(per_sample):
            t = t0 + (i * per_sample + j) * dt
            try:
                yh = advance(f, yh, dt, config.scheme, t)
            except PositivityError as err:
                err.time = t if err.time is None else err.time
                return RunOutcome(current, Status.POSITIVITY_BREACH, t, dt, steps, series, str(err))
            except NonFiniteError as err:
                return RunOutcome(current, Status.NON_FINITE, t, dt, steps, series, str(err))
            steps += 1
        t = t0 + (i + 1) * interval
        sampled = f.unpack(yh, t)
        if not sampled.is_valid(params):
            # the guard inside the RHS only sees stage values; check the step result too
            return RunOutcome(current, Status.POSITIVITY_BREACH, t, dt, steps, series, str(_breach(sampled, params, t)))
        current = sampled
        observe(t, current)
    return RunOutcome(current, Status.COMPLETED, current.time, dt, steps, series)
