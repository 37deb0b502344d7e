"""Empirical checks of the functional inequalities used in the energy method.

Each checker evaluates both sides of an inequality with every constant set to
one and reports the ratio ``lhs / rhs``. A bounded ratio over an admissible
ensemble, stable under grid refinement, is numerical evidence for the
inequality; the largest ratio estimates the best constant from below.

Nonlinear quantities (products, commutators, compositions) are evaluated on a
grid refined by a factor two, where products of the band-limited inputs are
exact. ``L^inf`` norms are grid maxima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .model import PerturbationState
from .spectral import Grid, get_grid, grid_of, random_band_limited


@dataclass
class InequalityReport:
    lhs: float
    rhs_unit_constant: float
    ratio: float
    max_ratio: float | None = None
    mean_ratio: float | None = None
    samples: int = 1
    ratios: list = field(default_factory=list, repr=False)

    @classmethod
    def single(cls, lhs: float, rhs: float) -> "InequalityReport":
        if rhs > 0:
            ratio = lhs / rhs
        else:
            ratio = 0.0 if lhs == 0 else math.inf
        return cls(float(lhs), float(rhs), float(ratio))


def summarize(reports: Iterable[InequalityReport]) -> InequalityReport:
    """Ensemble summary; ``lhs``/``rhs`` are those of the worst sample."""
    reports = list(reports)
    if not reports:
        raise ValueError("empty ensemble")
    ratios = np.array([r.ratio for r in reports])
    worst = reports[int(np.argmax(ratios))]
    return InequalityReport(
        worst.lhs,
        worst.rhs_unit_constant,
        worst.ratio,
        max_ratio=float(ratios.max()),
        mean_ratio=float(ratios.mean()),
        samples=len(reports),
        ratios=ratios.tolist(),
    )


def _components(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u[None] if u.ndim == 2 else u


def _grad_l2_sq(g: Grid, u: np.ndarray) -> float:
    return g.sobolev_norm(u, 1, homogeneous=True) ** 2


def _check_density(rho: np.ndarray, rho_max: float | None):
    if rho.min() < 0:
        raise ValueError(f"density must be non-negative, min is {rho.min():.3g}")
    if rho_max is not None and rho.max() > rho_max * (1 + 1e-12):
        raise ValueError(f"density exceeds the bound {rho_max}: max is {rho.max():.6g}")


def verify_weighted_poincare(rho, u, rho_max: float | None = None, mass_tol: float = 1e-10) -> InequalityReport:
    """``int rho (u - int rho u)^2 <= C ||grad u||^2`` for ``int rho = 1``."""
    rho = np.asarray(rho, dtype=float)
    u = _components(u)
    g = grid_of(rho)
    _check_density(rho, rho_max)
    if abs(rho.mean() - 1.0) > mass_tol:
        raise ValueError(f"density must have unit mass, got {rho.mean():.12g}")
    mean = np.mean(rho * u, axis=(-2, -1))[:, None, None]
    lhs = float(np.sum(np.mean(rho * (u - mean) ** 2, axis=(-2, -1))))
    return InequalityReport.single(lhs, _grad_l2_sq(g, u))


def verify_poincare_variant(rho, u) -> InequalityReport:
    """``||u||^2 <= C (||grad u||^2 + (int rho |u|)^2)`` for non-negative ``rho``."""
    rho = np.asarray(rho, dtype=float)
    u = _components(u)
    g = grid_of(rho)
    _check_density(rho, None)
    lhs = float(np.sum(np.mean(u**2, axis=(-2, -1))))
    weighted = float(np.mean(rho * np.sqrt(np.sum(u**2, axis=0))))
    return InequalityReport.single(lhs, _grad_l2_sq(g, u) + weighted**2)


def theta_poincare_constraints(s: PerturbationState) -> dict[str, float]:
    """Mass, momentum and energy integrals the theta inequality is stated under."""
    rho = 1.0 + s.a
    return {
        "mass": float(rho.mean()),
        "momentum": float(np.abs(np.mean(rho * s.u, axis=(-2, -1))).max()),
        "energy": float(
            np.mean(rho * (1.0 + s.theta)) + 0.5 * np.mean(rho * np.sum(s.u**2, axis=0)) + 0.5 * np.mean(s.m**2)
        ),
    }


def verify_theta_poincare(s: PerturbationState, c0: float = 0.5, tol: float = 1e-10) -> InequalityReport:
    """``||theta||^2 <= C (||grad theta||^2 + ||grad u||^4 + ||sigma||^2)``.

    Requires ``c0 <= rho, vartheta <= 1/c0``, ``int rho = 1``, ``int rho u = 0``
    and unit total energy.
    """
    g = s.grid
    rho, vt = 1.0 + s.a, 1.0 + s.theta
    for name, f in (("density", rho), ("temperature", vt)):
        if f.min() < c0 or f.max() > 1.0 / c0:
            raise ValueError(f"{name} outside [{c0}, {1 / c0}]: range [{f.min():.4g}, {f.max():.4g}]")
    c = theta_poincare_constraints(s)
    if abs(c["mass"] - 1.0) > tol or c["momentum"] > tol or abs(c["energy"] - 1.0) > tol:
        raise ValueError(f"state violates the normalisation: {c}")
    sigma = s.a + 0.5 * g.multiply(s.m, s.m)
    lhs = float(np.mean(s.theta**2))
    rhs = _grad_l2_sq(g, s.theta) + _grad_l2_sq(g, s.u) ** 2 + g.sobolev_norm(sigma, 0) ** 2
    return InequalityReport.single(lhs, rhs)


# ----------------------------------------------------------------------
# inequalities evaluated on the refined grid


def _refine(f: np.ndarray) -> tuple[Grid, np.ndarray]:
    g = grid_of(f)
    return get_grid(2 * g.n), g.resample(f, 2 * g.n)


def _sup(f: np.ndarray) -> float:
    f = np.asarray(f)
    if f.ndim == 3:
        return float(np.sqrt(np.sum(f**2, axis=0)).max())
    return float(np.abs(f).max())


def _check_order(s: float):
    if s < 0:
        raise ValueError(f"Sobolev order must be non-negative, got {s}")


def verify_product(f, g, s: float) -> InequalityReport:
    """``||fg||_{H^s} <= C (||f||_inf ||g||_{H^s} + ||g||_inf ||f||_{H^s})``."""
    _check_order(s)
    fine, ff = _refine(f)
    _, gg = _refine(g)
    lhs = fine.sobolev_norm(ff * gg, s)
    rhs = _sup(ff) * fine.sobolev_norm(gg, s) + _sup(gg) * fine.sobolev_norm(ff, s)
    return InequalityReport.single(lhs, rhs)


def verify_commutator(f, g, s: float) -> InequalityReport:
    """``||[Lambda^s, f.grad] g|| <= C (||grad f||_inf ||Lambda^s g|| + ||Lambda^s f|| ||grad g||_inf)``.

    ``f`` is a vector field of shape ``(2, n, n)``, ``g`` a scalar field.
    """
    _check_order(s)
    f = np.asarray(f, dtype=float)
    if f.ndim != 3 or f.shape[0] != 2:
        raise ValueError(f"f must be a vector field of shape (2, n, n), got {f.shape}")
    fine, ff = _refine(f)
    _, gg = _refine(g)
    grad_g = fine.gradient(gg)
    lam_g = fine.fractional_laplacian(gg, s)
    transport = ff[0] * grad_g[0] + ff[1] * grad_g[1]
    grad_lam_g = fine.gradient(lam_g)
    comm = fine.fractional_laplacian(transport, s) - (ff[0] * grad_lam_g[0] + ff[1] * grad_lam_g[1])
    lhs = fine.l2_norm(comm)
    grad_f = np.concatenate([fine.gradient(ff[0]), fine.gradient(ff[1])])
    rhs = _sup(grad_f) * fine.l2_norm(lam_g) + fine.sobolev_norm(ff, s, homogeneous=True) * _sup(grad_g)
    return InequalityReport.single(lhs, rhs)


COMPOSITIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "I": lambda f: f / (1.0 + f),
    "J": np.log1p,
}


def verify_composition(which: str, f, s: float) -> InequalityReport:
    """``||F(f)||_{H^s} <= C (1 + ||f||_inf)^([s] + 1) ||f||_{H^s}`` for ``F`` in {I, J}."""
    _check_order(s)
    if which not in COMPOSITIONS:
        raise ValueError(f"composition must be one of {sorted(COMPOSITIONS)}, got {which!r}")
    fine, ff = _refine(f)
    sup = _sup(ff)
    if sup > 0.5:
        raise ValueError(f"composition requires ||f||_inf <= 1/2, got {sup:.6g}")
    lhs = fine.sobolev_norm(COMPOSITIONS[which](ff), s)
    rhs = (1.0 + sup) ** (math.floor(s) + 1) * fine.sobolev_norm(ff, s)
    return InequalityReport.single(lhs, rhs)


# ----------------------------------------------------------------------
# seeded ensembles

LEMMAS = ("weighted_poincare", "poincare_variant", "theta_poincare", "product", "commutator", "composition_I", "composition_J")
ENSEMBLE_SLOPE = 4.0


class _Sampler:
    """Random fields drawn once at the finest band and truncated per grid.

    Fields use modes ``|k_i| <= n/4``; a coarser grid sees the band-``n/4``
    truncation of the same draw, so ensembles at different resolutions
    describe the same functions up to their resolved band.
    """

    def __init__(self, seed: int, n_max: int, slope: float = ENSEMBLE_SLOPE):
        self.rng = np.random.default_rng(seed)
        self.fine = get_grid(n_max)
        self.band = n_max // 4
        self.slope = slope

    def draw(self, components=None, mean_free=True) -> np.ndarray:
        return random_band_limited(self.fine, self.rng, self.band, components, self.slope, mean_free)

    def uniform(self, lo, hi) -> float:
        return float(self.rng.uniform(lo, hi))


def _on_grid(f: np.ndarray, n: int) -> np.ndarray:
    """Band-``n/4`` truncation of ``f`` sampled on the ``n x n`` grid."""
    src = grid_of(f)
    band = n // 4
    keep = (np.abs(src.k1) <= band) & (src.k2 <= band)
    out = src.to_physical(np.where(keep, src.to_spectral(f), 0.0))
    return out if n == src.n else src.resample(out, n)


def _bounded_density(g: np.ndarray, spread: float) -> np.ndarray:
    """``1 + spread * g / max|g|`` for mean-free ``g``: unit mass, range ``1 +- spread``."""
    return 1.0 + spread * g / np.abs(g).max()


def _theta_state(raw: dict, n: int) -> PerturbationState:
    """Normalised state for the theta inequality built from raw draws."""
    a = _on_grid(raw["a"], n)
    a = raw["a_size"] * a / np.abs(a).max()
    rho = 1.0 + a
    u = np.stack([_on_grid(c, n) for c in raw["u"]])
    u = raw["u_size"] * u / max(np.abs(u).max(), 1e-300)
    u = u - np.mean(rho * u, axis=(-2, -1))[:, None, None]
    m = _on_grid(raw["m"], n)
    m = raw["m_size"] * m / np.abs(m).max()
    th = _on_grid(raw["theta"], n)
    th = raw["theta_size"] * th / np.abs(th).max()
    # shift theta so that int rho (1 + theta) + kinetic + magnetic = 1 (int rho = 1)
    target = -0.5 * np.mean(rho * np.sum(u**2, axis=0)) - 0.5 * np.mean(m**2)
    th = th + (target - np.mean(rho * th))
    return PerturbationState(a, u, th, m)


def lemma_ensemble(lemma: str, n: int, samples: int = 200, seed: int = 0, n_max: int | None = None, s: float = 3.0):
    """Seeded ensemble summary for ``lemma`` on the ``n x n`` grid.

    ``n_max`` is the finest grid of the study; draws are made there so that
    results on different grids are comparable.
    """
    if lemma not in LEMMAS:
        raise ValueError(f"unknown lemma {lemma!r}; expected one of {LEMMAS}")
    n_max = max(n, n_max or n)
    sampler = _Sampler(seed, n_max)
    reports = []
    for _ in range(samples):
        reports.append(_one_sample(lemma, sampler, n, s))
    return summarize(reports)


def _one_sample(lemma: str, sp: _Sampler, n: int, s: float) -> InequalityReport:
    if lemma == "weighted_poincare":
        rho = _bounded_density(_on_grid(sp.draw(), n), 0.5)
        u = _on_grid(sp.draw(2, mean_free=False), n)
        return verify_weighted_poincare(rho, u, rho_max=1.5)
    if lemma == "poincare_variant":
        rho = _bounded_density(_on_grid(sp.draw(), n), 0.5)
        u = _on_grid(sp.draw(2, mean_free=False), n)
        return verify_poincare_variant(rho, u)
    if lemma == "theta_poincare":
        raw = {
            "a": sp.draw(),
            "u": sp.draw(2),
            "m": sp.draw(),
            "theta": sp.draw(),
            "a_size": sp.uniform(0.0, 0.3),
            "u_size": sp.uniform(0.0, 0.3),
            "m_size": sp.uniform(0.0, 0.3),
            "theta_size": sp.uniform(0.01, 0.3),
        }
        return verify_theta_poincare(_theta_state(raw, n), c0=0.5)
    if lemma == "product":
        f = _on_grid(sp.draw(mean_free=False), n)
        g = _on_grid(sp.draw(mean_free=False), n)
        return verify_product(f, g, s)
    if lemma == "commutator":
        f = _on_grid(sp.draw(2, mean_free=False), n)
        g = _on_grid(sp.draw(mean_free=False), n)
        return verify_commutator(f, g, s)
    which = lemma.split("_")[1]
    f = _on_grid(sp.draw(), n)
    f = sp.uniform(0.01, 0.5) * f / _sup(_refine(f)[1])
    return verify_composition(which, f, s)
