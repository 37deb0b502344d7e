"""Diagnostics along trajectories: conserved integrals, the functionals E and D,
decay fits and the sampled energy inequality ``dE/dt + c D <= 0``.

The functional-inequality checkers live in ``inequalities`` and are re-exported
here.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .inequalities import (  # noqa: F401  (re-exported)
    InequalityReport,
    verify_commutator,
    verify_composition,
    verify_poincare_variant,
    verify_product,
    verify_theta_poincare,
    verify_weighted_poincare,
)
from .model import (
    Params,
    PerturbationState,
    PrimitiveState,
    compute_good_unknowns,
    residual_G,
    residual_sigma,
)
from .spectral import Grid


class NonPositiveSeries(ValueError):
    """A decay fit was requested on a window containing non-positive values."""


@dataclass
class ConservedQuantities:
    mass: float
    momentum: tuple[float, float]
    energy: float
    magnetic_mass: float


def conserved_quantities(s: PrimitiveState, p: Params) -> ConservedQuantities:
    """Torus integrals of ``rho``, ``rho u``, the total energy and ``m``.

    Integrals are zero-mode coefficients, i.e. grid means, which are exact for
    the band-limited products involved.
    """
    rho, u, vt, m = s.rho, s.u, s.theta_abs, s.m
    # fluctuation-first sums keep the drift of near-unit fields at round-off
    a, th = rho - 1.0, vt - 1.0
    mass = 1.0 + float(np.mean(a))
    mom = np.mean(rho * u, axis=(-2, -1))
    internal = 1.0 + float(np.mean(a + th + a * th))
    kinetic = 0.5 * float(np.mean(rho * (u[0] ** 2 + u[1] ** 2)))
    magnetic = 0.5 * float(np.mean(m * m))
    return ConservedQuantities(
        mass=mass,
        momentum=(float(mom[0]), float(mom[1])),
        energy=p.c_nu * internal + kinetic + magnetic,
        magnetic_mass=float(np.mean(m)),
    )


def _gradient_weighted_sum(g: Grid, fh: np.ndarray, s: float) -> float:
    """``||grad f||_{H^s}^2`` from coefficients (summed over components)."""
    w = (1.0 + g.ksq) ** s * np.where(g.nyquist_free, g.ksq, 0.0)
    return g.spectral_sum(w, fh)


def bootstrap_functionals(s: PerturbationState, p: Params, order: int = 3) -> tuple[float, float]:
    """``E = ||(sigma, u, theta, G)||^2_{H^3}`` and
    ``D = ||sigma||^2_{H^3} + ||(grad u, grad theta, grad G)||^2_{H^3}``."""
    p.require_unit_gas()
    g = s.grid
    good = compute_good_unknowns(s, p)
    sigh = g.to_spectral(good.sigma)
    rest = g.to_spectral(np.stack([s.u[0], s.u[1], s.theta, good.G[0], good.G[1]]))
    w = (1.0 + g.ksq) ** order
    sig2 = g.spectral_sum(w, sigh)
    E = sig2 + g.spectral_sum(w, rest)
    D = sig2 + _gradient_weighted_sum(g, rest, order)
    return E, D


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    momentum_1: float
    momentum_2: float
    total_energy: float
    magnetic_mass: float
    h3_a: float
    h3_u: float
    h3_theta: float
    h3_m: float
    h3_sigma: float
    h3_G: float
    E: float
    D: float
    residual_G: float
    residual_sigma: float
    min_density: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list[float]:
        return [float(v) for v in asdict(self).values()]

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.values())


def diagnose(state, p: Params, residuals: bool = True) -> DiagnosticsRecord:
    """Full diagnostics record for a primitive or perturbation state.

    Integrals use the state as given; norms, ``E``, ``D`` and residuals use its
    de-aliased part, which is what the integrator evolves.
    """
    if isinstance(state, PerturbationState):
        pert, prim = state, state.to_primitive()
    else:
        prim, pert = state, state.to_perturbation()
    g = pert.grid
    cq = conserved_quantities(prim, p)
    # subtracting the unit background leaves round-off in every mode; the H^3
    # weight turns it into a floor near 1e-9 (and the third-order terms of the
    # residual identities amplify it further), so norms see the resolved band
    pert = PerturbationState.from_stacked(g.dealias(pert.stacked()), pert.time)
    good = compute_good_unknowns(pert, p)
    E, D = bootstrap_functionals(pert, p)
    if residuals:
        rG, rs = residual_G(pert, p), residual_sigma(pert, p)
    else:
        rG = rs = float("nan")
    return DiagnosticsRecord(
        time=float(state.time),
        mass=cq.mass,
        momentum_1=cq.momentum[0],
        momentum_2=cq.momentum[1],
        total_energy=cq.energy,
        magnetic_mass=cq.magnetic_mass,
        h3_a=g.sobolev_norm(pert.a, 3),
        h3_u=g.sobolev_norm(pert.u, 3),
        h3_theta=g.sobolev_norm(pert.theta, 3),
        h3_m=g.sobolev_norm(pert.m, 3),
        h3_sigma=g.sobolev_norm(good.sigma, 3),
        h3_G=g.sobolev_norm(good.G, 3),
        E=E,
        D=D,
        residual_G=rG,
        residual_sigma=rs,
        min_density=float(prim.rho.min()),
    )


# ----------------------------------------------------------------------
# decay fits


@dataclass
class DecayFit:
    rate: float
    r_squared: float
    window: tuple[float, float]
    samples: int


def fit_decay(times, values, window: tuple[float, float] | None = None) -> DecayFit:
    """Least-squares fit of ``log values = log C - rate * t`` on ``window``.

    A constant series has rate 0 and no variance to explain; its
    ``r_squared`` is 0 by convention.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-D arrays of equal length")
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = window
    tol = 1e-9 * max(1.0, abs(hi))
    sel = (t >= lo - tol) & (t <= hi + tol)
    t, v = t[sel], v[sel]
    if t.size < 3:
        raise ValueError(f"need at least 3 samples in window {window}, got {t.size}")
    if np.any(~(v > 0)):
        raise NonPositiveSeries(f"non-positive value in window {window}")
    y = np.log(v)
    if np.all(y == y[0]):
        return DecayFit(0.0, 0.0, (float(lo), float(hi)), int(t.size))
    slope, intercept = np.polyfit(t, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * t + intercept)) ** 2))
    if ss_tot == 0.0:
        r2 = 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    rate = -float(slope)
    if rate == 0.0:
        rate = 0.0  # avoid -0.0
    return DecayFit(rate, r2, (float(lo), float(hi)), int(t.size))


# ----------------------------------------------------------------------
# sampled energy inequality


@dataclass
class EnergyInequalityReport:
    degenerate: bool
    transient_end: float | None
    worst_rate: float | None
    min_dissipation_ratio: float | None
    monotone_after_transient: bool
    samples: int


def _series(records, name):
    return np.array([getattr(r, name) if not isinstance(r, dict) else r[name] for r in records], dtype=float)


def check_energy_inequality(records, times=None, E=None, D=None) -> EnergyInequalityReport:
    """Sampled check of ``dE/dt <= -c D`` along a trajectory.

    Either pass diagnostics records or the arrays ``times``, ``E``, ``D``.
    ``dE/dt`` is estimated with second-order centred differences (one-sided
    at the ends). ``transient_end`` is the first sample time from which the
    estimate stays non-positive; ``min_dissipation_ratio`` is the smallest
    ``-(dE/dt)/D`` over those samples. An identically zero ``E`` is reported
    as degenerate without a ratio.
    """
    if records is not None:
        times, E, D = _series(records, "time"), _series(records, "E"), _series(records, "D")
    t = np.asarray(times, dtype=float)
    E = np.asarray(E, dtype=float)
    D = np.asarray(D, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples")
    if np.all(E == 0.0):
        return EnergyInequalityReport(True, None, None, None, True, int(t.size))
    dE = np.gradient(E, t, edge_order=2)
    positive = np.nonzero(dE > 0)[0]
    start = 0 if positive.size == 0 else int(positive[-1]) + 1
    if start >= t.size:
        return EnergyInequalityReport(False, None, float(dE.max()), None, False, int(t.size))
    tail = slice(start, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(D[tail] > 0, -dE[tail] / D[tail], np.inf)
    finite = ratio[np.isfinite(ratio)]
    monotone = bool(np.all(np.diff(E[tail]) <= 0))
    return EnergyInequalityReport(
        degenerate=False,
        transient_end=float(t[start]),
        worst_rate=float(dE[tail].max()),
        min_dissipation_ratio=float(finite.min()) if finite.size else None,
        monotone_after_transient=monotone,
        samples=int(t.size),
    )
