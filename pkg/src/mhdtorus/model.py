"""States and right-hand sides of the 2.5-D compressible non-resistive MHD system.

Two equivalent formulations are provided:

* primitive ``(rho, u, vartheta, m)``:

      rho_t + div(rho u) = 0
      rho (u_t + u.grad u) - mu Lap u - (lam + mu) grad div u + grad P + grad(m^2)/2 = 0
      rho C_v (vartheta_t + u.grad vartheta) + P div u - kappa Lap vartheta
          = 2 mu |D(u)|^2 + lam (div u)^2
      m_t + div(m u) = 0,              P = R rho vartheta

* perturbation ``(a, u, theta, m)`` with ``a = rho - 1``, ``theta = vartheta - 1``,
  written with variable coefficients ``mu/rho``, ``(lam + mu)/rho``, ``kappa/rho``
  in divergence form plus the source terms ``f1`` and ``f2``. This form assumes
  ``R = C_v = 1``.

The good unknowns ``sigma = a + m^2/2`` and ``G = Q u - nu^-1 Delta^-1 grad sigma``
(``nu = lam + 2 mu``) and the residuals of their evolution equations are also
assembled here.

All products are de-aliased; quotients are evaluated pointwise and truncated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, grid_of


class PositivityError(RuntimeError):
    """Density (``1 + a``) dropped below the configured floor."""

    def __init__(self, min_density: float, floor: float, time: float | None = None):
        self.min_density = float(min_density)
        self.floor = float(floor)
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"min density {self.min_density:.6g} below floor {self.floor:.6g}{where}")


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    """Physical coefficients. ``lam`` is the volume viscosity lambda."""

    mu: float = 0.1
    lam: float = 0.05
    kappa: float = 0.05
    c_nu: float = 1.0
    R: float = 1.0
    rho_floor: float = 0.25

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if not self.lam + 2 * self.mu > 0:
            raise ParameterError(f"lam + 2 mu must be positive, got {self.lam + 2 * self.mu}")
        if not self.kappa > 0:
            raise ParameterError(f"kappa must be positive, got {self.kappa}")
        if not self.c_nu > 0:
            raise ParameterError(f"c_nu must be positive, got {self.c_nu}")
        if not self.R > 0:
            raise ParameterError(f"R must be positive, got {self.R}")
        if not 0 < self.rho_floor < 1:
            raise ParameterError(f"rho_floor must lie in (0, 1), got {self.rho_floor}")

    @property
    def nu(self) -> float:
        return self.lam + 2 * self.mu

    def require_unit_gas(self) -> None:
        """The perturbation form and the good unknowns are written for R = C_v = 1."""
        if self.R != 1.0 or self.c_nu != 1.0:
            raise ParameterError(
                f"perturbation formulation requires R = c_nu = 1, got R={self.R}, c_nu={self.c_nu}"
            )


def _as_vector(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 3 or u.shape[0] != 2:
        raise ValueError(f"velocity must have shape (2, n, n), got {u.shape}")
    return u


@dataclass
class PrimitiveState:
    rho: np.ndarray
    u: np.ndarray
    theta_abs: np.ndarray
    m: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.u = _as_vector(self.u)
        self.theta_abs = np.asarray(self.theta_abs, dtype=float)
        self.m = np.asarray(self.m, dtype=float)

    @property
    def grid(self) -> Grid:
        return grid_of(self.rho)

    def stacked(self) -> np.ndarray:
        return np.stack([self.rho, self.u[0], self.u[1], self.theta_abs, self.m])

    @classmethod
    def from_stacked(cls, y: np.ndarray, time: float = 0.0) -> "PrimitiveState":
        return cls(y[0], y[1:3], y[3], y[4], time)

    def is_valid(self, params: Params) -> bool:
        return bool(self.rho.min() >= params.rho_floor and self.rho.mean() > 0)

    def to_perturbation(self) -> "PerturbationState":
        return PerturbationState(self.rho - 1.0, self.u.copy(), self.theta_abs - 1.0, self.m.copy(), self.time)

    @classmethod
    def equilibrium(cls, n: int) -> "PrimitiveState":
        ones = np.ones((n, n))
        return cls(ones.copy(), np.zeros((2, n, n)), ones.copy(), np.zeros((n, n)))


@dataclass
class PerturbationState:
    a: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    m: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.u = _as_vector(self.u)
        self.theta = np.asarray(self.theta, dtype=float)
        self.m = np.asarray(self.m, dtype=float)

    @property
    def grid(self) -> Grid:
        return grid_of(self.a)

    def stacked(self) -> np.ndarray:
        return np.stack([self.a, self.u[0], self.u[1], self.theta, self.m])

    @classmethod
    def from_stacked(cls, y: np.ndarray, time: float = 0.0) -> "PerturbationState":
        return cls(y[0], y[1:3], y[3], y[4], time)

    def is_valid(self, params: Params) -> bool:
        return bool((1.0 + self.a).min() >= params.rho_floor)

    def to_primitive(self) -> PrimitiveState:
        return PrimitiveState(self.a + 1.0, self.u.copy(), self.theta + 1.0, self.m.copy(), self.time)

    @classmethod
    def zero(cls, n: int) -> "PerturbationState":
        z = np.zeros((n, n))
        return cls(z.copy(), np.zeros((2, n, n)), z.copy(), z.copy())


def to_perturbation(s: PrimitiveState) -> PerturbationState:
    return s.to_perturbation()


def to_primitive(s: PerturbationState) -> PrimitiveState:
    return s.to_primitive()


@dataclass
class Tendency:
    """Time derivatives of the four unknowns, in the order of the state."""

    density: np.ndarray
    u: np.ndarray
    temperature: np.ndarray
    m: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.stack([self.density, self.u[0], self.u[1], self.temperature, self.m])

    @classmethod
    def from_stacked(cls, y: np.ndarray) -> "Tendency":
        return cls(y[0], y[1:3], y[3], y[4])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.stacked())))


@dataclass
class GoodUnknowns:
    sigma: np.ndarray
    G: np.ndarray

# ----------------------------------------------------------------------
# shared pseudo-spectral helpers

# stacked component offsets: density and temperature sit near 1 in the primitive form
PRIMITIVE_OFFSET = np.array([1.0, 0.0, 0.0, 1.0, 0.0])


def stacked_hat(grid: Grid, y: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
    """Coefficients of stacked grid values.

    ``offset`` is subtracted before the transform and restored on the zero
    mode, so fields close to 1 keep the full precision of their fluctuation.
    """
    if offset is None:
        return grid.to_spectral(y)
    off = offset[:, None, None]
    yh = grid.to_spectral(y - off)
    yh[:, 0, 0] += offset
    return yh


def stacked_values(grid: Grid, yh: np.ndarray, offset: np.ndarray | None = None) -> np.ndarray:
    if offset is None:
        return grid.to_physical(yh)
    zh = yh.copy()
    zh[:, 0, 0] -= offset
    return grid.to_physical(zh) + offset[:, None, None]


class _Ops:
    """Thin helper binding a grid; products are always de-aliased."""

    def __init__(self, grid: Grid):
        self.g = grid

    def hat(self, f):
        return self.g.to_spectral(f)

    def phys(self, fh):
        return self.g.to_physical(fh)

    def trunc(self, f):
        return self.g.to_physical(self.g.dealias_hat(self.g.to_spectral(f)))

    def mul(self, f, g):
        return self.trunc(f * g)

    def grad_hat(self, fh):
        return np.stack([self.g.derivative_hat(fh, 0), self.g.derivative_hat(fh, 1)])

    def grad(self, fh):
        """Physical gradient from coefficients."""
        return self.phys(self.grad_hat(fh))

    def div_hat(self, vh):
        return self.g.derivative_hat(vh[0], 0) + self.g.derivative_hat(vh[1], 1)

    def div(self, vh):
        return self.phys(self.div_hat(vh))

    def dot(self, v, w):
        return self.trunc(v[0] * w[0] + v[1] * w[1])

    def velocity_gradient(self, uh):
        """``du[i, j] = d_j u_i`` as a (2, 2, n, n) array."""
        return self.phys(np.stack([self.grad_hat(uh[0]), self.grad_hat(uh[1])]))

    def viscous_heating(self, du, params: Params):
        """``2 mu |D(u)|^2 + lam (div u)^2``, de-aliased."""
        d11, d12, d21, d22 = du[0, 0], du[0, 1], du[1, 0], du[1, 1]
        shear = d12 + d21
        divu = d11 + d22
        return self.trunc(
            2 * params.mu * (d11 * d11 + d22 * d22 + 0.5 * shear * shear)
            + params.lam * divu * divu
        )

    def reciprocal(self, rho, params: Params, time=None):
        lowest = rho.min()
        if not lowest >= params.rho_floor:
            raise PositivityError(lowest, params.rho_floor, time)
        return self.trunc(1.0 / rho)


# ----------------------------------------------------------------------
# primitive formulation


def _derivatives_hat(grid: Grid, yh: np.ndarray) -> np.ndarray:
    """First derivatives of all five stacked fields: shape (5, 2, ...)."""
    return np.stack([grid.derivative_hat(yh, 0), grid.derivative_hat(yh, 1)], axis=1)


def primitive_rhs_hat(grid: Grid, yh: np.ndarray, params: Params, time=None) -> np.ndarray:
    """Tendency coefficients for stacked ``(rho, u1, u2, vartheta, m)`` coefficients."""
    g, mask, p = grid, grid.dealias_mask, params
    y = stacked_values(g, yh, PRIMITIVE_OFFSET)
    rho, u, vt, m = y[0], y[1:3], y[3], y[4]
    if not rho.min() >= p.rho_floor:
        raise PositivityError(rho.min(), p.rho_floor, time)

    dyh = _derivatives_hat(g, yh)
    d = g.to_physical(dyh)
    grad_rho, du, grad_vt, grad_m = d[0], d[1:3], d[3], d[4]
    divu = du[0, 0] + du[1, 1]
    shear = du[0, 1] + du[1, 0]

    prods = np.stack(
        [
            rho * u[0],
            rho * u[1],
            m * u[0],
            m * u[1],
            1.0 / rho,
            rho * vt,
            u[0] * du[0, 0] + u[1] * du[0, 1],
            u[0] * du[1, 0] + u[1] * du[1, 1],
            u[0] * grad_vt[0] + u[1] * grad_vt[1],
            # grad P and grad(m^2/2) by the product rule keep O(1) factors out of derivatives
            p.R * (vt * grad_rho[0] + rho * grad_vt[0]) + m * grad_m[0],
            p.R * (vt * grad_rho[1] + rho * grad_vt[1]) + m * grad_m[1],
            2 * p.mu * (du[0, 0] ** 2 + du[1, 1] ** 2 + 0.5 * shear**2) + p.lam * divu**2,
        ]
    )
    ph = mask * g.to_spectral(prods)
    uh, vth = yh[1:3], yh[3]
    divuh = g.derivative_hat(uh[0], 0) + g.derivative_hat(uh[1], 1)

    forces_h = (
        p.mu * g.laplacian_hat(uh)
        + (p.lam + p.mu) * np.stack([g.derivative_hat(divuh, 0), g.derivative_hat(divuh, 1)])
        - ph[9:11]
    )
    back = g.to_physical(np.concatenate([ph[4:6], forces_h]))
    rinv, pressure, forces = back[0], p.R * back[1], back[2:4]

    second = mask * g.to_spectral(np.stack([rinv * forces[0], rinv * forces[1], pressure * divu]))
    heat = g.to_physical(p.kappa * g.laplacian_hat(vth) + ph[11] - second[2])
    rinv_heat = mask * g.to_spectral(rinv * heat)

    out = np.empty_like(yh)
    out[0] = -(g.derivative_hat(ph[0], 0) + g.derivative_hat(ph[1], 1))
    out[1:3] = second[0:2] - ph[6:8]
    out[3] = rinv_heat / p.c_nu - ph[8]
    out[4] = -(g.derivative_hat(ph[2], 0) + g.derivative_hat(ph[3], 1))
    return mask * out


def rhs_primitive(s: PrimitiveState, p: Params) -> Tendency:
    """Tendencies of ``(rho, u, vartheta, m)``; raises ``PositivityError``."""
    g = s.grid
    dyh = primitive_rhs_hat(g, stacked_hat(g, s.stacked(), PRIMITIVE_OFFSET), p, s.time)
    return Tendency.from_stacked(g.to_physical(dyh))


# ----------------------------------------------------------------------
# perturbation formulation


class _PerturbationTerms:
    """Intermediate fields shared by the perturbation RHS, M, N and f3."""

    def __init__(self, grid: Grid, yh: np.ndarray, params: Params, time=None):
        op = self.op = _Ops(grid)
        self.grid = grid
        self.params = params
        y = grid.to_physical(yh)
        a, u, th, m = y[0], y[1:3], y[3], y[4]
        self.a, self.u, self.theta, self.m = a, u, th, m
        self.ah, self.uh, self.thh, self.mh = yh[0], yh[1:3], yh[3], yh[4]

        rho = 1.0 + a
        if not rho.min() >= params.rho_floor:
            raise PositivityError(rho.min(), params.rho_floor, time)
        self.I = op.trunc(a / rho)
        # 1/(1+a) = 1 - I(a) exactly after truncation; derive it from I to keep I precise
        self.rinv = 1.0 - self.I
        self.J = op.trunc(np.log1p(a))

        self.half_m2 = 0.5 * op.mul(m, m)
        self.sigma = a + self.half_m2
        self.sigmah = self.ah + op.hat(self.half_m2)

        self.du = op.velocity_gradient(self.uh)
        self.divu = self.du[0, 0] + self.du[1, 1]
        self.divuh = op.div_hat(self.uh)
        self.grad_a = op.grad(self.ah)
        self.grad_m = op.grad(self.mh)
        self.grad_th = op.grad(self.thh)
        self.grad_sigma = op.grad(self.sigmah)
        self.grad_I = op.grad(op.hat(self.I))
        self.grad_J = op.grad(op.hat(self.J))
        self.advect_u = np.stack([op.dot(u, self.du[i]) for i in range(2)])
        self.heating = op.viscous_heating(self.du, params)

    def transport(self, f, grad_f):
        """``-u.grad f - f div u``; shared by the a- and m-equations."""
        return -self.op.dot(self.u, grad_f) - self.op.mul(f, self.divu)

    def viscous_constant(self):
        """``mu Lap u + (lam + mu) grad div u`` (physical)."""
        g, p = self.grid, self.params
        return self.op.phys(
            p.mu * g.laplacian_hat(self.uh) + (p.lam + p.mu) * self.op.grad_hat(self.divuh)
        )

    def f1(self):
        op, p = self.op, self.params
        gI = self.grad_I
        return np.stack(
            [
                -self.advect_u[i]
                + op.mul(self.I, self.grad_sigma[i])
                + p.mu * op.dot(gI, self.du[i])
                + (p.lam + p.mu) * op.mul(gI[i], self.divu)
                - op.mul(self.theta, self.grad_J[i])
                for i in range(2)
            ]
        )

    def f2(self):
        op, p = self.op, self.params
        return (
            -op.div(op.hat(op.mul(self.theta, self.u)))
            + p.kappa * op.dot(self.grad_I, self.grad_th)
            + op.mul(self.rinv, self.heating)
        )

    def f3(self):
        op = self.op
        return (
            -op.dot(self.u, self.grad_sigma)
            - op.mul(self.sigma, self.divu)
            - op.mul(self.half_m2, self.divu)
        )

    def M(self):
        op = self.op
        visc = self.viscous_constant()
        return np.stack(
            [
                -self.advect_u[i]
                + op.mul(self.I, self.grad_sigma[i])
                - op.mul(self.I, visc[i])
                - op.mul(self.theta, self.grad_J[i])
                for i in range(2)
            ]
        )

    def N(self):
        op, p = self.op, self.params
        lap_th = op.phys(self.grid.laplacian_hat(self.thh))
        return (
            -op.div(op.hat(op.mul(self.theta, self.u)))
            - p.kappa * op.mul(self.I, lap_th)
            + op.mul(self.rinv, self.heating)
        )

    def rhs_hat(self):
        op, p, g = self.op, self.params, self.grid
        da = self.transport(self.a, self.grad_a)
        dm = self.transport(self.m, self.grad_m)

        mubar = p.mu * self.rinv
        lambar = (p.lam + p.mu) * self.rinv
        lam_div_h = op.hat(op.mul(lambar, self.divu))
        dudt_h = []
        for i in range(2):
            flux_h = op.hat(np.stack([op.mul(mubar, self.du[i, 0]), op.mul(mubar, self.du[i, 1])]))
            dudt_h.append(op.div_hat(flux_h) + g.derivative_hat(lam_div_h, i))
        dudt_h = np.stack(dudt_h) + op.hat(self.f1()) - op.grad_hat(self.sigmah + self.thh)

        kbar = p.kappa * self.rinv
        hflux_h = op.hat(np.stack([op.mul(kbar, self.grad_th[0]), op.mul(kbar, self.grad_th[1])]))
        dth_h = op.div_hat(hflux_h) - self.divuh + op.hat(self.f2())

        out = np.empty((5,) + g.spectral_shape, dtype=complex)
        out[0] = op.hat(da) - self.divuh
        out[1:3] = dudt_h
        out[3] = dth_h
        out[4] = op.hat(dm)
        return g.dealias_hat(out)

    def rhs(self):
        return self.grid.to_physical(self.rhs_hat())


def perturbation_rhs_hat(grid: Grid, yh: np.ndarray, params: Params, time=None) -> np.ndarray:
    """Tendency coefficients for stacked ``(a, u1, u2, theta, m)`` coefficients.

    Evaluates the same de-aliased terms as ``_PerturbationTerms`` with batched
    transforms.
    """
    params.require_unit_gas()
    g, mask, p = grid, grid.dealias_mask, params
    y = g.to_physical(yh)
    a, u, th, m = y[0], y[1:3], y[3], y[4]
    rho = 1.0 + a
    if not rho.min() >= p.rho_floor:
        raise PositivityError(rho.min(), p.rho_floor, time)

    dyh = _derivatives_hat(g, yh)
    d = g.to_physical(dyh)
    grad_a, du, grad_th, grad_m = d[0], d[1:3], d[3], d[4]
    divu = du[0, 0] + du[1, 1]
    shear = du[0, 1] + du[1, 0]

    first = np.stack(
        [
            a / rho,
            np.log1p(a),
            0.5 * m * m,
            u[0] * du[0, 0] + u[1] * du[0, 1],
            u[0] * du[1, 0] + u[1] * du[1, 1],
            u[0] * grad_a[0] + u[1] * grad_a[1],
            a * divu,
            u[0] * grad_m[0] + u[1] * grad_m[1],
            m * divu,
            th * u[0],
            th * u[1],
            2 * p.mu * (du[0, 0] ** 2 + du[1, 1] ** 2 + 0.5 * shear**2) + p.lam * divu**2,
        ]
    )
    fh = mask * g.to_spectral(first)
    Ih, Jh, hmh = fh[0], fh[1], fh[2]
    back = g.to_physical(
        np.stack(
            [
                Ih,
                g.derivative_hat(Ih, 0),
                g.derivative_hat(Ih, 1),
                g.derivative_hat(Jh, 0),
                g.derivative_hat(Jh, 1),
                g.derivative_hat(hmh, 0),
                g.derivative_hat(hmh, 1),
                fh[11],
            ]
        )
    )
    I, grad_I, grad_J, heating = back[0], back[1:3], back[3:5], back[7]
    rinv = 1.0 - I
    grad_sigma = grad_a + back[5:7]

    second = np.stack(
        [
            rinv * du[0, 0],
            rinv * du[0, 1],
            rinv * du[1, 0],
            rinv * du[1, 1],
            rinv * divu,
            rinv * grad_th[0],
            rinv * grad_th[1],
            I * grad_sigma[0],
            I * grad_sigma[1],
            grad_I[0] * du[0, 0] + grad_I[1] * du[0, 1],
            grad_I[0] * du[1, 0] + grad_I[1] * du[1, 1],
            grad_I[0] * divu,
            grad_I[1] * divu,
            th * grad_J[0],
            th * grad_J[1],
            grad_I[0] * grad_th[0] + grad_I[1] * grad_th[1],
            rinv * heating,
        ]
    )
    sh = mask * g.to_spectral(second)

    def D(fh_, axis):
        return g.derivative_hat(fh_, axis)

    uh, thh = yh[1:3], yh[3]
    divuh = D(uh[0], 0) + D(uh[1], 1)
    sigma_th = yh[0] + hmh + thh
    out = np.empty_like(yh)
    out[0] = -divuh - fh[5] - fh[6]
    for i in range(2):
        visc = p.mu * (D(sh[2 * i], 0) + D(sh[2 * i + 1], 1)) + (p.lam + p.mu) * D(sh[4], i)
        f1 = -fh[3 + i] + sh[7 + i] + p.mu * sh[9 + i] + (p.lam + p.mu) * sh[11 + i] - sh[13 + i]
        out[1 + i] = visc - D(sigma_th, i) + f1
    f2 = -(D(fh[9], 0) + D(fh[10], 1)) + p.kappa * sh[15] + sh[16]
    out[3] = p.kappa * (D(sh[5], 0) + D(sh[6], 1)) - divuh + f2
    out[4] = -fh[7] - fh[8]
    return mask * out


def rhs_perturbation(s: PerturbationState, p: Params) -> Tendency:
    """Tendencies of ``(a, u, theta, m)``; raises ``PositivityError``."""
    g = s.grid
    return Tendency.from_stacked(g.to_physical(perturbation_rhs_hat(g, g.to_spectral(s.stacked()), p, s.time)))


def _terms(s: PerturbationState, p: Params) -> _PerturbationTerms:
    p.require_unit_gas()
    g = s.grid
    return _PerturbationTerms(g, g.to_spectral(s.stacked()), p, s.time)


def compute_f3(s: PerturbationState, p: Params | None = None) -> np.ndarray:
    """``f3 = -u.grad sigma - sigma div u - (m^2/2) div u``."""
    # f3 does not involve the coefficients; defaults only pass validation
    return _terms(s, p or Params()).f3()


def compute_M(s: PerturbationState, p: Params) -> np.ndarray:
    return _terms(s, p).M()


def compute_N(s: PerturbationState, p: Params) -> np.ndarray:
    return _terms(s, p).N()


def compute_good_unknowns(s: PerturbationState, p: Params) -> GoodUnknowns:
    """``sigma = a + m^2/2`` and ``G = Q u - nu^-1 Delta^-1 grad sigma``."""
    g = s.grid
    op = _Ops(g)
    sigma = s.a + 0.5 * op.mul(s.m, s.m)
    Gh = g.project_Q_hat(g.to_spectral(s.u)) - g.inverse_laplacian_hat(op.grad_hat(g.to_spectral(sigma))) / p.nu
    return GoodUnknowns(sigma, g.to_physical(Gh))


def _relative(residual: np.ndarray, *scales: np.ndarray) -> float:
    num = float(np.sqrt(np.sum(residual**2)))
    den = max(float(np.sqrt(np.sum(x**2))) for x in scales)
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return num / den


def sigma_rate(s: PerturbationState, p: Params, tendency: np.ndarray | None = None) -> np.ndarray:
    """``d sigma/dt`` by the chain rule from stacked physical tendencies."""
    g = s.grid
    if tendency is None:
        tendency = rhs_perturbation(s, p).stacked()
    return tendency[0] + g.multiply(s.m, tendency[4])


def residual_sigma(s: PerturbationState, p: Params) -> float:
    """Relative L^2 residual of ``sigma_t + sigma/nu = -div G + f3`` on mean-free parts."""
    g = s.grid
    terms = _terms(s, p)
    dsig = sigma_rate(s, p, terms.rhs())
    good = compute_good_unknowns(s, p)
    lhs = dsig + good.sigma / p.nu
    rhs = -g.divergence(good.G) + terms.f3()
    lhs = lhs - lhs.mean()
    rhs = rhs - rhs.mean()
    return _relative(lhs - rhs, lhs, rhs)


def residual_G(s: PerturbationState, p: Params, f3_sign: float = -1.0) -> float:
    """Relative L^2 residual of the G equation.

    ``G_t - nu Lap G = nu^-1 Q u + Q M - grad theta - nu^-1 Delta^-1 grad f3``
    with ``G_t`` assembled by the chain rule from the RHS. ``f3_sign`` is the
    sign of the last term; differentiating the definition of ``G`` gives -1.
    """
    g = s.grid
    op = _Ops(g)
    terms = _terms(s, p)
    tend = terms.rhs()
    dsig = sigma_rate(s, p, tend)
    dGh = g.project_Q_hat(g.to_spectral(tend[1:3])) - g.inverse_laplacian_hat(
        op.grad_hat(g.to_spectral(dsig))
    ) / p.nu
    Gh = g.to_spectral(compute_good_unknowns(s, p).G)
    lhs = g.to_physical(dGh - p.nu * g.laplacian_hat(Gh))
    f3h = g.to_spectral(terms.f3())
    rhsh = (
        g.project_Q_hat(terms.uh) / p.nu
        + g.project_Q_hat(g.to_spectral(terms.M()))
        - op.grad_hat(terms.thh)
        + f3_sign * g.inverse_laplacian_hat(op.grad_hat(f3h)) / p.nu
    )
    rhs = g.to_physical(rhsh)
    return _relative(lhs - rhs, lhs, rhs)
