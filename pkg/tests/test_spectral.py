import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mhdtorus.spectral import Grid, get_grid, random_band_limited

TWO_PI = 2 * np.pi


@pytest.fixture
def grid():
    return get_grid(32)


def direct_coefficient(f, k):
    """Mean-normalised Fourier coefficient by explicit summation over the grid."""
    n = f.shape[0]
    j = np.arange(n) / n
    phase = np.exp(-1j * TWO_PI * (k[0] * j[:, None] + k[1] * j[None, :]))
    return np.mean(f * phase)


def rand(grid, seed, band=8, components=None):
    return random_band_limited(grid, np.random.default_rng(seed), band, components)


# ----------------------------------------------------------------------
# grid and transforms


@pytest.mark.parametrize("n", [7, 6, 0, 33])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_grid_points_and_wavenumbers(grid):
    assert grid.x[0][3, 5] == pytest.approx(3 / 32)
    assert grid.x[1][3, 5] == pytest.approx(5 / 32)
    assert grid.k1[31, 0] == -1 and grid.k1[16, 0] == 16 and grid.k2[0, 16] == 16
    assert grid.cutoff == 10
    assert get_grid(64).cutoff == 21


def test_constant_has_only_zero_mode(grid):
    fh = grid.to_spectral(np.full(grid.shape, 2.5))
    assert fh[0, 0] == pytest.approx(2.5)
    assert np.abs(fh).ravel()[1:].max() == 0.0


def test_sine_coefficients_match_direct_sum(grid):
    f = np.sin(TWO_PI * grid.x[0])
    fh = grid.to_spectral(f)
    for k in [(1, 0), (-1, 0), (2, 3), (-5, 1)]:
        assert grid.coefficient(fh, k) == pytest.approx(direct_coefficient(f, k), abs=1e-15)
    assert grid.coefficient(fh, (1, 0)) == pytest.approx(-0.5j)
    assert grid.coefficient(fh, (-1, 0)) == pytest.approx(0.5j)


def test_random_coefficients_match_direct_sum(grid):
    f = rand(grid, 3)
    fh = grid.to_spectral(f)
    for k in [(0, 0), (3, -2), (-7, 4), (8, 8)]:
        assert abs(grid.coefficient(fh, k) - direct_coefficient(f, k)) < 1e-15


@given(st.integers(0, 2**32 - 1))
def test_round_trip(seed):
    g = get_grid(32)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    back = g.to_physical(g.to_spectral(f))
    assert np.abs(back - f).max() <= 1e-12 * np.abs(f).max()


def test_real_field_is_conjugate_symmetric(grid):
    f = rand(grid, 1)
    fh = grid.to_spectral(f)
    for k in [(3, 0), (0, 0), (5, 0)]:
        assert grid.coefficient(fh, k) == pytest.approx(np.conj(grid.coefficient(fh, (-k[0], -k[1]))))


# ----------------------------------------------------------------------
# derivatives


def test_derivative_of_sine(grid):
    x1, x2 = grid.x
    np.testing.assert_allclose(grid.derivative(np.sin(TWO_PI * x1), 0), TWO_PI * np.cos(TWO_PI * x1), atol=1e-10 * TWO_PI)
    np.testing.assert_allclose(grid.derivative(np.sin(TWO_PI * x1), 1), 0, atol=1e-12)
    np.testing.assert_allclose(
        grid.derivative(np.cos(3 * TWO_PI * x2), 1), -3 * TWO_PI * np.sin(3 * TWO_PI * x2), atol=1e-10 * 3 * TWO_PI
    )


def test_derivative_of_constant(grid):
    assert np.all(grid.derivative(np.full(grid.shape, 7.0), 0) == 0)


def test_derivative_bad_axis(grid):
    with pytest.raises(ValueError):
        grid.derivative(np.zeros(grid.shape), 2)


def test_derivative_matches_finite_differences():
    g = get_grid(64)
    x1, x2 = g.x
    f = np.exp(0.3 * np.sin(TWO_PI * x1)) * np.cos(TWO_PI * x2)
    h = 1e-5
    fd = (
        np.exp(0.3 * np.sin(TWO_PI * (x1 + h))) - np.exp(0.3 * np.sin(TWO_PI * (x1 - h)))
    ) / (2 * h) * np.cos(TWO_PI * x2)
    np.testing.assert_allclose(g.derivative(f, 0), fd, atol=1e-7)


def test_nyquist_mode_is_dropped_by_derivative(grid):
    f = np.cos(np.pi * grid.n * grid.x[0])  # the k1 = n/2 mode
    assert np.abs(grid.derivative(f, 0)).max() == 0.0
    assert np.abs(grid.laplacian(f)).max() == 0.0


@given(st.integers(0, 2**32 - 1))
def test_mixed_partials_commute(seed):
    g = get_grid(32)
    f = rand(g, seed)
    d12 = g.derivative(g.derivative(f, 0), 1)
    d21 = g.derivative(g.derivative(f, 1), 0)
    assert np.abs(d12 - d21).max() <= 1e-12 * np.abs(d12).max()


# ----------------------------------------------------------------------
# fractional Laplacian and inverse Laplacian


def test_fractional_laplacian_single_mode(grid):
    s1 = np.sin(TWO_PI * grid.x[0])
    np.testing.assert_allclose(grid.fractional_laplacian(s1, 1.0), TWO_PI * s1, atol=1e-10 * TWO_PI)
    mode = np.cos(TWO_PI * (2 * grid.x[0] - grid.x[1]))
    symbol = (TWO_PI * np.sqrt(5.0)) ** 1.5
    np.testing.assert_allclose(grid.fractional_laplacian(mode, 1.5), symbol * mode, atol=1e-10 * symbol)


def test_fractional_laplacian_of_constant_is_zero(grid):
    assert np.abs(grid.fractional_laplacian(np.full(grid.shape, 3.0), 0.7)).max() == 0.0


def test_fractional_laplacian_order_zero_is_identity(grid):
    f = rand(grid, 4) + 1.0
    np.testing.assert_array_equal(grid.fractional_laplacian(f, 0.0), grid.to_physical(grid.to_spectral(f)))


def test_fractional_laplacian_rejects_negative_order(grid):
    with pytest.raises(ValueError):
        grid.fractional_laplacian(np.zeros(grid.shape), -1.0)


def test_lambda_squared_is_minus_laplacian(grid):
    f = rand(grid, 5)
    lhs = grid.fractional_laplacian(f, 2.0)
    # independent route: sum of second derivatives
    rhs = -(grid.derivative(grid.derivative(f, 0), 0) + grid.derivative(grid.derivative(f, 1), 1))
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(rhs).max()


@given(st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.5, 1.0, 2.0]), st.integers(0, 1000))
def test_lambda_semigroup(s, t, seed):
    g = get_grid(32)
    f = rand(g, seed)
    lhs = g.fractional_laplacian(f, s + t)
    rhs = g.fractional_laplacian(g.fractional_laplacian(f, t), s)
    assert np.abs(lhs - rhs).max() <= 1e-10 * np.abs(lhs).max()


def test_inverse_laplacian_examples(grid):
    s1 = np.sin(TWO_PI * grid.x[0])
    np.testing.assert_allclose(grid.inverse_laplacian(grid.laplacian(s1)), s1, atol=1e-12)
    np.testing.assert_allclose(grid.inverse_laplacian(s1), -s1 / TWO_PI**2, atol=1e-14)
    assert np.abs(grid.inverse_laplacian(np.full(grid.shape, 5.0))).max() == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_laplacian_inverts_inverse_laplacian_up_to_mean(seed, mean):
    g = get_grid(32)
    f = rand(g, seed) + mean
    back = g.laplacian(g.inverse_laplacian(f)) + g.mean(f)
    assert np.abs(back - f).max() <= 1e-10 * np.abs(f).max()


# ----------------------------------------------------------------------
# projector


def test_Q_keeps_gradients(grid):
    phi = rand(grid, 6)
    gphi = grid.gradient(phi)
    np.testing.assert_allclose(grid.project_Q(gphi), gphi, atol=1e-12 * np.abs(gphi).max())


def test_Q_kills_curl_fields(grid):
    psi = rand(grid, 7)
    v = np.stack([-grid.derivative(psi, 1), grid.derivative(psi, 0)])
    assert np.abs(grid.project_Q(v)).max() <= 1e-12 * np.abs(v).max()


def test_Q_single_mode(grid):
    s1 = np.sin(TWO_PI * grid.x[0])
    out = grid.project_Q(np.stack([s1, np.cos(TWO_PI * grid.x[0])]))
    np.testing.assert_allclose(out[0], s1, atol=1e-14)
    np.testing.assert_allclose(out[1], 0, atol=1e-14)


def test_Q_removes_mean(grid):
    v = np.ones((2,) + grid.shape)
    assert np.abs(grid.project_Q(v)).max() == 0.0


@given(st.integers(0, 2**32 - 1))
def test_Q_is_a_projector_preserving_divergence(seed):
    g = get_grid(32)
    v = rand(g, seed, components=2)
    Qv = g.project_Q(v)
    assert g.l2_norm(g.project_Q(Qv) - Qv) <= 1e-12 * g.l2_norm(v)
    div = g.divergence(v)
    assert g.l2_norm(g.divergence(Qv) - div) <= 1e-10 * g.l2_norm(div)


# ----------------------------------------------------------------------
# norms


def test_l2_norm_of_sine(grid):
    assert grid.sobolev_norm(np.sin(TWO_PI * grid.x[0]), 0) == pytest.approx(np.sqrt(0.5), rel=1e-14)


def test_norm_of_constant(grid):
    for s in (0.0, 1.0, 3.0, 2.5):
        assert grid.sobolev_norm(np.full(grid.shape, -0.75), s) == pytest.approx(0.75, rel=1e-14)


def test_h3_weight_on_single_modes(grid):
    # analytic: a real mode of amplitude A at wavevector k has ||.||_{H^s}^2 = A^2/2 (1+|2 pi k|^2)^s
    x1, x2 = grid.x
    f = 0.3 * np.cos(TWO_PI * (2 * x1 + x2)) + 0.2 * np.sin(TWO_PI * 3 * x2)
    want = 0.09 / 2 * (1 + TWO_PI**2 * 5) ** 3 + 0.04 / 2 * (1 + TWO_PI**2 * 9) ** 3
    assert grid.sobolev_norm(f, 3) ** 2 == pytest.approx(want, rel=1e-12)
    hom = 0.09 / 2 * (TWO_PI**2 * 5) ** 3 + 0.04 / 2 * (TWO_PI**2 * 9) ** 3
    assert grid.sobolev_norm(f, 3, homogeneous=True) ** 2 == pytest.approx(hom, rel=1e-12)


def test_norm_of_top_column_counts_once():
    g = get_grid(16)
    # k2 = 7 is the last non-Nyquist column; k2 = 8 is Nyquist (counted once)
    f = np.cos(TWO_PI * 7 * g.x[1])
    assert g.sobolev_norm(f, 0) == pytest.approx(g.l2_norm(f), rel=1e-13)
    nyq = np.cos(TWO_PI * 8 * g.x[1])
    assert g.sobolev_norm(nyq, 0) == pytest.approx(g.l2_norm(nyq), rel=1e-13)


def test_h1_norm_identity(grid):
    f = rand(grid, 8) + 0.4
    lhs = grid.sobolev_norm(f, 1) ** 2
    rhs = grid.l2_norm(f) ** 2 + grid.l2_norm(grid.gradient(f)) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_negative_order_rejected(grid):
    with pytest.raises(ValueError):
        grid.sobolev_norm(np.zeros(grid.shape), -0.5)


@given(st.integers(0, 2**32 - 1), st.sampled_from([16, 32, 64]))
def test_plancherel(seed, n):
    g = get_grid(n)
    f = np.random.default_rng(seed).standard_normal((2,) + g.shape)
    assert g.sobolev_norm(f, 0) == pytest.approx(g.l2_norm(f), rel=1e-10)


# ----------------------------------------------------------------------
# de-aliased products


def test_multiply_by_one(grid):
    f = rand(grid, 9, band=grid.cutoff)
    np.testing.assert_allclose(grid.multiply(f, np.ones(grid.shape)), f, atol=1e-14)


def test_sine_squared(grid):
    s1 = np.sin(TWO_PI * grid.x[0])
    np.testing.assert_allclose(grid.multiply(s1, s1), 0.5 - 0.5 * np.cos(2 * TWO_PI * grid.x[0]), atol=1e-14)


def test_multiply_truncates_high_modes():
    g = get_grid(32)
    f = np.cos(TWO_PI * 8 * g.x[0])
    # cos^2 = 1/2 + cos(16 .)/2 and 16 > cutoff 10
    np.testing.assert_allclose(g.multiply(f, f), 0.5, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_multiply_commutes(seed):
    g = get_grid(32)
    f, h = rand(g, seed), rand(g, seed + 1)
    assert np.abs(g.multiply(f, h) - g.multiply(h, f)).max() <= 1e-14 * np.abs(f * h).max()


def test_operators_are_deterministic(grid):
    f = rand(grid, 10)
    v = rand(grid, 11, components=2)
    for op in (lambda: grid.fractional_laplacian(f, 1.3), lambda: grid.project_Q(v), lambda: grid.multiply(f, f)):
        np.testing.assert_array_equal(op(), op())


# ----------------------------------------------------------------------
# helpers


def test_resample_is_exact_for_band_limited_fields():
    g32, g64 = get_grid(32), get_grid(64)
    f = rand(g32, 12, band=10)
    fine = g32.resample(f, 64)
    np.testing.assert_allclose(fine[::2, ::2], f, atol=1e-14)
    np.testing.assert_allclose(g64.resample(fine, 32), f, atol=1e-14)


def test_random_fields_do_not_depend_on_grid():
    f32 = random_band_limited(get_grid(32), np.random.default_rng(5), 4)
    f64 = random_band_limited(get_grid(64), np.random.default_rng(5), 4)
    np.testing.assert_allclose(f64[::2, ::2], f32, atol=1e-14)
    assert abs(get_grid(32).mean(f32)) < 1e-15


def test_random_band_limit():
    g = get_grid(32)
    fh = g.to_spectral(random_band_limited(g, np.random.default_rng(0), 3))
    outside = (np.abs(g.k1) > 3) | (g.k2 > 3)
    assert np.abs(fh[outside]).max() < 1e-15
    with pytest.raises(ValueError):
        random_band_limited(g, np.random.default_rng(0), 16)
