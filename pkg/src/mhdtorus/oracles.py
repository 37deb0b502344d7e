"""Closed-form checks of the spectral operators on single-mode fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import get_grid, random_band_limited

TOLERANCE = 1e-10


@dataclass
class OracleCheck:
    name: str
    error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)


def _rel(got, want) -> float:
    got, want = np.asarray(got, dtype=complex), np.asarray(want, dtype=complex)
    scale = np.abs(want).max()
    err = np.abs(got - want).max()
    return float(err / scale) if scale > 0 else float(err)


def spectral_oracle_checks(n: int = 32, seed: int = 0) -> list[OracleCheck]:
    """Run every operator oracle on an ``n x n`` grid."""
    g = get_grid(n)
    x1, x2 = g.x
    tp = 2 * np.pi
    s1 = np.sin(tp * x1)
    c1 = np.cos(tp * x1)
    rng = np.random.default_rng(seed)
    f = random_band_limited(g, rng, n // 4)
    v = random_band_limited(g, rng, n // 4, components=2)
    w = 1.0 + tp**2

    checks = []

    def add(name, got, want, tol=TOLERANCE):
        checks.append(OracleCheck(name, _rel(got, want), tol))

    # transforms
    ch = g.to_spectral(np.full(g.shape, 3.5))
    add("constant -> zero mode", ch[0, 0], 3.5)
    add("constant -> no other modes", np.abs(ch).ravel()[1:].max(), 0.0)
    sh = g.to_spectral(s1)
    add("sin(2 pi x1) coefficient k=(1,0)", g.coefficient(sh, (1, 0)), -0.5j)
    add("sin(2 pi x1) coefficient k=(-1,0)", g.coefficient(sh, (-1, 0)), 0.5j)
    add("round trip", g.to_physical(g.to_spectral(f)), f, 1e-12)

    # derivatives
    add("d1 sin(2 pi x1)", g.derivative(s1, 0), tp * c1)
    add("d2 sin(2 pi x2)", g.derivative(np.sin(tp * x2), 1), tp * np.cos(tp * x2))
    add("derivative of constant", g.derivative(np.full(g.shape, 2.0), 0), 0.0)
    add("mixed partials commute", g.derivative(g.derivative(f, 0), 1), g.derivative(g.derivative(f, 1), 0), 1e-12)

    # fractional Laplacian
    add("Lambda^1 sin(2 pi x1)", g.fractional_laplacian(s1, 1.0), tp * s1)
    add("Lambda^0.5 cos(2 pi x2)", g.fractional_laplacian(np.cos(tp * x2), 0.5), np.sqrt(tp) * np.cos(tp * x2))
    add("Lambda^3 on mode (1,1)", g.fractional_laplacian(np.sin(tp * (x1 + x2)), 3.0),
        (tp * np.sqrt(2)) ** 3 * np.sin(tp * (x1 + x2)))
    add("Lambda^s constant", g.fractional_laplacian(np.ones(g.shape), 1.5), 0.0)
    add("Lambda^2 = -Laplacian", g.fractional_laplacian(f, 2.0), -g.laplacian(f))

    # inverse Laplacian
    add("inverse Laplacian of Laplacian", g.inverse_laplacian(g.laplacian(s1)), s1)
    add("inverse Laplacian of sin(2 pi x1)", g.inverse_laplacian(s1), -s1 / tp**2)
    add("inverse Laplacian of constant", g.inverse_laplacian(np.full(g.shape, 4.0)), 0.0)
    add("Laplacian of inverse plus mean", g.laplacian(g.inverse_laplacian(f + 0.7)) + 0.7, f + 0.7)

    # projector Q
    phi = np.cos(tp * (x1 + 2 * x2))
    grad_phi = g.gradient(phi)
    add("Q of gradient", g.project_Q(grad_phi), grad_phi)
    psi = np.sin(tp * (2 * x1 - x2))
    curl = np.stack([-g.derivative(psi, 1), g.derivative(psi, 0)])
    # a solenoidal field is annihilated; error relative to the field size
    checks.append(OracleCheck("Q of curl field", float(np.abs(g.project_Q(curl)).max() / np.abs(curl).max())))
    add("Q of single mode (1,0)", g.project_Q(np.stack([s1, s1])), np.stack([s1, 0 * s1]))
    Qv = g.project_Q(v)
    add("Q idempotent", g.project_Q(Qv), Qv, 1e-12)

    # Sobolev norms
    add("L2 norm of sin(2 pi x1)", g.sobolev_norm(s1, 0), np.sqrt(0.5))
    add("H3 norm of sin(2 pi x1)", g.sobolev_norm(s1, 3), np.sqrt(0.5) * w**1.5)
    add("homogeneous H2 norm of sin(2 pi x1)", g.sobolev_norm(s1, 2, homogeneous=True), np.sqrt(0.5) * tp**2)
    add("H^s norm of constant", g.sobolev_norm(np.full(g.shape, -1.25), 2.5), 1.25)
    add("H1 = L2 + gradient", g.sobolev_norm(f, 1) ** 2, g.sobolev_norm(f, 0) ** 2 + g.l2_norm(g.gradient(f)) ** 2)
    add("Plancherel", g.sobolev_norm(f, 0), g.l2_norm(f))

    # de-aliased product
    add("sin^2 product", g.multiply(s1, s1), 0.5 - 0.5 * np.cos(2 * tp * x1))
    add("product with one", g.multiply(f, np.ones(g.shape)), g.dealias(f))
    return checks
