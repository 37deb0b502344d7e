"""Fourier operators on the unit torus T^2 = [0, 1)^2.

Scalar fields are real arrays of shape ``(n, n)`` indexed ``f[i, j] = f(i/n, j/n)``;
vector fields stack their two components along a leading axis, shape ``(2, n, n)``.
Axis 0 is x1 and axis 1 is x2.

Coefficients use the half-spectrum layout of ``scipy.fft.rfft2`` normalised so
that ``f(x) = sum_k c_k exp(2 pi i k.x)``: a constant ``c`` has zero-mode
coefficient ``c``. Row index ``i`` carries ``k1 = i`` for ``i <= n/2`` and
``i - n`` otherwise; column index ``j`` carries ``k2 = j``.

Conventions
-----------
* Nyquist modes (``|k1| = n/2`` or ``k2 = n/2``) are zeroed by every
  differential operator so derivatives of real fields stay real.
* The zero mode is annihilated by ``Lambda^s`` (s > 0), ``Delta^-1`` and ``Q``.
* Nonlinear products are de-aliased with the 2/3 rule: modes with
  ``|k_i| > (n - 1) // 3`` on either axis are removed.
"""

from __future__ import annotations

import functools
import os

import numpy as np
import scipy.fft

THREADS_ENV = "MHDTORUS_THREADS"


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class Grid:
    """Uniform ``n x n`` collocation grid on the unit torus."""

    def __init__(self, n: int):
        n = int(n)
        if n < 8 or n % 2:
            raise ValueError(f"grid size must be even and >= 8, got {n}")
        self.n = n
        self.dx = 1.0 / n
        self.shape = (n, n)
        self.spectral_shape = (n, n // 2 + 1)

        k1 = np.fft.fftfreq(n, d=1.0 / n)
        k1[n // 2] = n // 2
        k2 = np.arange(n // 2 + 1, dtype=float)
        self.k1 = np.broadcast_to(k1[:, None], self.spectral_shape).copy()
        self.k2 = np.broadcast_to(k2[None, :], self.spectral_shape).copy()
        # angular wavenumbers 2 pi k
        self.kvec = 2.0 * np.pi * np.stack([self.k1, self.k2])
        self.ksq = self.kvec[0] ** 2 + self.kvec[1] ** 2
        self.kabs = np.sqrt(self.ksq)

        self.nyquist_free = (np.abs(self.k1) != n // 2) & (self.k2 != n // 2)
        self.cutoff = (n - 1) // 3
        self.dealias_mask = (np.abs(self.k1) <= self.cutoff) & (self.k2 <= self.cutoff)

        # multiplicity of each stored coefficient in the full spectrum
        self.multiplicity = np.full(self.spectral_shape, 2.0)
        self.multiplicity[:, 0] = 1.0
        self.multiplicity[:, -1] = 1.0

        ksq = self.ksq.copy()
        ksq[0, 0] = 1.0
        self._inv_ksq = np.where(self.nyquist_free, 1.0 / ksq, 0.0)
        self._inv_ksq[0, 0] = 0.0

        # derivative and Laplacian symbols with Nyquist modes removed
        self._ik = np.where(self.nyquist_free, 1j * self.kvec, 0.0)
        self._neg_ksq = np.where(self.nyquist_free, -self.ksq, 0.0)

        x = np.arange(n) / n
        self.x = np.stack(np.meshgrid(x, x, indexing="ij"))

    def __repr__(self) -> str:
        return f"Grid(n={self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and other.n == self.n

    def __hash__(self) -> int:
        return hash(("Grid", self.n))

    # ------------------------------------------------------------------
    # transforms

    def to_spectral(self, f: np.ndarray) -> np.ndarray:
        """Fourier coefficients of ``f`` over its last two axes."""
        return scipy.fft.rfft2(f, norm="forward", workers=_workers())

    def to_physical(self, fh: np.ndarray) -> np.ndarray:
        """Grid values from half-spectrum coefficients (inverse of ``to_spectral``)."""
        return scipy.fft.irfft2(fh, s=self.shape, norm="forward", workers=_workers())

    def coefficient(self, fh: np.ndarray, k: tuple[int, int]) -> complex:
        """Coefficient of mode ``k`` in a half-spectrum array, any sign of ``k``."""
        k1, k2 = int(k[0]), int(k[1])
        if k2 < 0:
            k1, k2 = -k1, -k2
            return complex(np.conj(fh[..., k1 % self.n, k2]))
        return complex(fh[..., k1 % self.n, k2])

    # ------------------------------------------------------------------
    # spectral-space kernels (operate on coefficients)

    def derivative_hat(self, fh: np.ndarray, axis: int) -> np.ndarray:
        return self._ik[axis] * fh

    def laplacian_hat(self, fh: np.ndarray) -> np.ndarray:
        return self._neg_ksq * fh

    def inverse_laplacian_hat(self, fh: np.ndarray) -> np.ndarray:
        return -self._inv_ksq * fh

    def fractional_laplacian_hat(self, fh: np.ndarray, s: float) -> np.ndarray:
        if s < 0:
            raise ValueError(f"fractional order must be non-negative, got {s}")
        if s == 0:
            return fh.copy()
        symbol = np.where(self.nyquist_free, self.kabs**s, 0.0)
        return symbol * fh

    def project_Q_hat(self, vh: np.ndarray) -> np.ndarray:
        kdotv = self.kvec[0] * vh[0] + self.kvec[1] * vh[1]
        return self.kvec * (self._inv_ksq * kdotv)

    def dealias_hat(self, fh: np.ndarray) -> np.ndarray:
        return np.where(self.dealias_mask, fh, 0.0)

    # ------------------------------------------------------------------
    # physical-space operators

    def derivative(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Partial derivative along ``axis`` (0 for x1, 1 for x2)."""
        if axis not in (0, 1):
            raise ValueError(f"axis must be 0 or 1, got {axis}")
        return self.to_physical(self.derivative_hat(self.to_spectral(f), axis))

    def gradient(self, f: np.ndarray) -> np.ndarray:
        fh = self.to_spectral(f)
        return self.to_physical(np.stack([self.derivative_hat(fh, 0), self.derivative_hat(fh, 1)]))

    def divergence(self, v: np.ndarray) -> np.ndarray:
        vh = self.to_spectral(v)
        return self.to_physical(self.derivative_hat(vh[0], 0) + self.derivative_hat(vh[1], 1))

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.to_physical(self.laplacian_hat(self.to_spectral(f)))

    def fractional_laplacian(self, f: np.ndarray, s: float) -> np.ndarray:
        """``Lambda^s f`` with ``Lambda = sqrt(-Delta)``, symbol ``|2 pi k|^s``."""
        return self.to_physical(self.fractional_laplacian_hat(self.to_spectral(f), s))

    def inverse_laplacian(self, f: np.ndarray) -> np.ndarray:
        """Mean-free solution ``g`` of ``Delta g = f - mean(f)``."""
        return self.to_physical(self.inverse_laplacian_hat(self.to_spectral(f)))

    def project_Q(self, v: np.ndarray) -> np.ndarray:
        """Gradient part ``grad Delta^-1 div v`` of a vector field."""
        return self.to_physical(self.project_Q_hat(self.to_spectral(v)))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        return self.to_physical(self.dealias_hat(self.to_spectral(f)))

    def multiply(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Pointwise product followed by 2/3-rule truncation."""
        return self.dealias(f * g)

    # ------------------------------------------------------------------
    # integrals and norms

    def mean(self, f: np.ndarray) -> np.ndarray:
        """Integral over the unit torus (the zero-mode coefficient)."""
        return np.mean(f, axis=(-2, -1))

    def spectral_sum(self, weights: np.ndarray, fh: np.ndarray) -> float:
        """``sum_k weights_k |c_k|^2`` over the full spectrum, all leading axes."""
        return float(np.sum(self.multiplicity * weights * np.abs(fh) ** 2))

    def sobolev_norm(self, f: np.ndarray, s: float = 0.0, homogeneous: bool = False) -> float:
        """H^s norm ``(sum_k (1 + |2 pi k|^2)^s |c_k|^2)^(1/2)``.

        With ``homogeneous=True`` returns ``||Lambda^s f||_{L^2}`` instead. Vector
        fields (leading axis) are summed over components.
        """
        if s < 0:
            raise ValueError(f"Sobolev order must be non-negative, got {s}")
        return self.sobolev_norm_hat(self.to_spectral(f), s, homogeneous)

    def sobolev_norm_hat(self, fh: np.ndarray, s: float = 0.0, homogeneous: bool = False) -> float:
        if s < 0:
            raise ValueError(f"Sobolev order must be non-negative, got {s}")
        if homogeneous:
            weights = self.ksq**s if s > 0 else np.ones(self.spectral_shape)
            if s > 0:
                weights = np.where(self.nyquist_free, weights, 0.0)
        else:
            weights = (1.0 + self.ksq) ** s
        return float(np.sqrt(self.spectral_sum(weights, fh)))

    def l2_norm(self, f: np.ndarray) -> float:
        """Physical-space quadrature L^2 norm (sums over leading axes)."""
        return float(np.sqrt(np.sum(np.mean(np.asarray(f) ** 2, axis=(-2, -1)))))

    # ------------------------------------------------------------------
    # resampling

    def resample(self, f: np.ndarray, n: int) -> np.ndarray:
        """Trigonometric interpolation of ``f`` onto an ``n x n`` grid.

        Modes that do not fit on the target grid are dropped; Nyquist modes of
        the source are dropped as well so the result stays real and exact for
        band-limited input.
        """
        target = get_grid(n)
        fh = np.where(self.nyquist_free, self.to_spectral(f), 0.0)
        out = np.zeros(f.shape[:-2] + target.spectral_shape, dtype=complex)
        kmax = min(self.n, n) // 2 - 1
        rows = np.r_[0 : kmax + 1, -kmax:0]
        out[..., rows % n, : kmax + 1] = fh[..., rows % self.n, : kmax + 1]
        return target.to_physical(out)


@functools.lru_cache(maxsize=None)
def get_grid(n: int) -> Grid:
    """Shared ``Grid`` instance for size ``n``."""
    return Grid(n)


def grid_of(f: np.ndarray) -> Grid:
    """Grid matching the trailing two axes of ``f``."""
    n1, n2 = f.shape[-2:]
    if n1 != n2:
        raise ValueError(f"fields must be square, got shape {f.shape}")
    return get_grid(n1)


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    band: int,
    components: int | None = None,
    slope: float = 0.0,
    mean_free: bool = True,
) -> np.ndarray:
    """Real random field with modes ``|k_i| <= band``.

    Coefficients are complex normal draws on the square ``[-band, band]^2``,
    scaled by ``(1 + |k|^2)^(-slope/2)``. The draws are made on that square
    independently of ``grid.n``, so the same generator state yields the same
    function on every grid that resolves ``band``.
    """
    if band < 1 or band > grid.n // 2 - 1:
        raise ValueError(f"band {band} not resolvable on {grid}")
    lead = () if components is None else (components,)
    side = 2 * band + 1
    c = rng.standard_normal(lead + (side, side)) + 1j * rng.standard_normal(lead + (side, side))
    ks = np.arange(-band, band + 1)
    kk = ks[:, None] ** 2 + ks[None, :] ** 2
    c = c * (1.0 + kk) ** (-slope / 2.0)
    if mean_free:
        c[..., band, band] = 0.0
    full = np.zeros(lead + grid.shape, dtype=complex)
    full[..., (ks % grid.n)[:, None], (ks % grid.n)[None, :]] = c
    return np.real(scipy.fft.ifft2(full, norm="forward"))
