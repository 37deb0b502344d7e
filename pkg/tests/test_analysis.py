import numpy as np
import pytest
from conftest import PARAMS, HeatOnly
from hypothesis import given
from hypothesis import strategies as st

from mhdtorus.analysis import (
    DiagnosticsRecord,
    NonPositiveSeries,
    bootstrap_functionals,
    check_energy_inequality,
    conserved_quantities,
    diagnose,
    fit_decay,
)
from mhdtorus.config import initial_state, load_config
from mhdtorus.model import Params, PerturbationState, PrimitiveState
from mhdtorus.spectral import get_grid
from mhdtorus.timestepper import advance

TWO_PI = 2 * np.pi


# ----------------------------------------------------------------------
# conserved quantities


def test_equilibrium_integrals():
    cq = conserved_quantities(PrimitiveState.equilibrium(16), Params(c_nu=2.0))
    assert cq.mass == 1.0 and cq.momentum == (0.0, 0.0) and cq.energy == 2.0 and cq.magnetic_mass == 0.0


def test_single_mode_integrals():
    g = get_grid(32)
    s = PrimitiveState.equilibrium(32)
    s.u[0] = np.sin(TWO_PI * g.x[1])
    s.m = 0.1 * np.cos(TWO_PI * g.x[0]) + 0.2
    cq = conserved_quantities(s, PARAMS)
    assert cq.momentum[0] == pytest.approx(0.0, abs=1e-16)
    # int vartheta + 1/2 int u^2 + 1/2 int m^2 = 1 + 1/4 + (0.0025 + 0.02)
    assert cq.energy == pytest.approx(1.0 + 0.25 + 0.0025 + 0.02, rel=1e-14)
    assert cq.magnetic_mass == pytest.approx(0.2, rel=1e-14)


def test_initial_data_has_zero_momentum():
    s = initial_state(load_config(preset="small-random"))
    cq = conserved_quantities(s, PARAMS)
    assert max(abs(x) for x in cq.momentum) <= 1e-17
    assert cq.mass == pytest.approx(1.0, abs=1e-15)


# ----------------------------------------------------------------------
# E and D


def test_functionals_of_zero_state():
    assert bootstrap_functionals(PerturbationState.zero(16), PARAMS) == (0.0, 0.0)


def test_functionals_of_shear_flow():
    g = get_grid(32)
    s = PerturbationState.zero(32)
    s.u[0] = np.sin(TWO_PI * g.x[1])
    E, D = bootstrap_functionals(s, PARAMS)
    w = (1 + TWO_PI**2) ** 3
    assert E == pytest.approx(0.5 * w, rel=1e-12)
    assert D == pytest.approx(0.5 * TWO_PI**2 * w, rel=1e-12)


@pytest.mark.parametrize("field", ["a", "theta", "m", "u"])
def test_E_positive_for_any_nonzero_field(field):
    g = get_grid(16)
    s = PerturbationState.zero(16)
    f = 0.01 * np.cos(TWO_PI * g.x[0])
    if field == "u":
        s.u[1] = f
    else:
        setattr(s, field, f)
    E, D = bootstrap_functionals(s, PARAMS)
    assert E > 0 and D > 0


def test_functionals_need_unit_gas():
    from mhdtorus.model import ParameterError

    with pytest.raises(ParameterError):
        bootstrap_functionals(PerturbationState.zero(8), Params(R=2.0))


# ----------------------------------------------------------------------
# diagnostics records


def test_record_of_equilibrium():
    rec = diagnose(PrimitiveState.equilibrium(16), PARAMS)
    assert rec.mass == 1.0 and rec.E == 0.0 and rec.D == 0.0
    assert rec.residual_G == 0.0 and rec.residual_sigma == 0.0 and rec.min_density == 1.0
    assert rec.is_finite()


def test_record_columns():
    cols = DiagnosticsRecord.columns()
    assert cols[0] == "time" and cols[-1] == "min_density" and len(cols) == 17
    rec = diagnose(PerturbationState.zero(8), PARAMS, residuals=False)
    assert len(rec.values()) == 17 and np.isnan(rec.residual_G) and not rec.is_finite()


def test_record_is_representation_independent():
    s = initial_state(load_config(preset="small-random"))
    a = diagnose(s, PARAMS).values()
    b = diagnose(s.to_perturbation(), PARAMS).values()
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_norms_ignore_unresolved_round_off():
    g = get_grid(32)
    s = PrimitiveState.equilibrium(32)
    # one ulp of noise at the grid scale would otherwise read as ~1e-10 in H^3
    i = np.arange(32)
    s.rho = s.rho + 2.0**-52 * (-1.0) ** (i[:, None] + i[None, :])
    rec = diagnose(s, PARAMS)
    assert rec.h3_a == 0.0 and rec.E == 0.0
    assert g.sobolev_norm(s.rho - 1.0, 3) > 1e-10


# ----------------------------------------------------------------------
# decay fits


def test_fit_exact_exponential():
    t = np.linspace(0, 5, 11)
    fit = fit_decay(t, 5 * np.exp(-2 * t))
    assert fit.rate == pytest.approx(2.0, rel=1e-12) and fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window == (0.0, 5.0) and fit.samples == 11


@given(st.floats(0.01, 20), st.floats(1e-6, 1e6), st.integers(3, 50))
def test_fit_recovers_rate(rate, c, n):
    t = np.linspace(1.0, 3.0, n)
    fit = fit_decay(t, c * np.exp(-rate * t))
    assert fit.rate == pytest.approx(rate, rel=1e-10)


def test_fit_constant_series():
    fit = fit_decay(np.arange(5.0), np.full(5, 3.0))
    assert fit.rate == 0.0 and fit.r_squared == 0.0


def test_fit_window_selection():
    t = np.linspace(0, 10, 101)
    v = np.where(t < 2, 1.0, np.exp(-(t - 2)))
    fit = fit_decay(t, v, (2.0, 10.0))
    assert fit.samples == 81 and fit.rate == pytest.approx(1.0, rel=1e-10)


def test_fit_errors():
    with pytest.raises(NonPositiveSeries):
        fit_decay([0, 1, 2, 3], [1.0, 0.5, 0.0, 0.1])
    with pytest.raises(ValueError):
        fit_decay([0, 1], [1.0, 0.5])
    with pytest.raises(ValueError):
        fit_decay([0, 1, 2], [1.0, 0.5])
    # a non-positive value outside the window does not matter
    assert fit_decay([0, 1, 2, 3], [-1.0, 1.0, 0.5, 0.25], (1, 3)).rate == pytest.approx(np.log(2))


def test_heat_only_decay_rate():
    p = Params(kappa=1.0)
    g = get_grid(16)
    s = PerturbationState.zero(16)
    s.theta = 0.01 * np.cos(TWO_PI * g.x[0])
    f = HeatOnly(g, p)
    yh = f.pack(s)
    dt, times, norms = 1e-3, [], []
    for i in range(201):
        if i % 10 == 0:
            times.append(i * dt)
            norms.append(g.sobolev_norm(f.unpack(yh, i * dt).theta, 3) ** 2)
        yh = advance(f, yh, dt, "RK4")
    fit = fit_decay(times, norms)
    assert fit.rate == pytest.approx(2 * p.kappa * TWO_PI**2, rel=1e-2)
    assert fit.r_squared > 0.999


# ----------------------------------------------------------------------
# energy inequality


def test_energy_inequality_synthetic():
    t = np.linspace(0, 5, 101)
    rep = check_energy_inequality(None, t, np.exp(-t), np.exp(-t))
    assert not rep.degenerate and rep.transient_end == 0.0 and rep.monotone_after_transient
    assert rep.worst_rate < 0
    assert rep.min_dissipation_ratio == pytest.approx(1.0, rel=1e-3)


def test_energy_inequality_degenerate():
    t = np.linspace(0, 1, 5)
    rep = check_energy_inequality(None, t, np.zeros(5), np.zeros(5))
    assert rep.degenerate and rep.min_dissipation_ratio is None


def test_energy_inequality_transient():
    t = np.linspace(0, 5, 101)
    E = np.where(t < 1, 1 + t, 2 * np.exp(-(t - 1)))
    rep = check_energy_inequality(None, t, E, E)
    assert 1.0 <= rep.transient_end <= 1.1 and rep.monotone_after_transient


def test_energy_inequality_growing():
    t = np.linspace(0, 1, 11)
    rep = check_energy_inequality(None, t, np.exp(t), np.exp(t))
    assert rep.transient_end is None and not rep.monotone_after_transient and rep.worst_rate > 0


def test_energy_inequality_needs_three_samples():
    with pytest.raises(ValueError):
        check_energy_inequality(None, [0, 1], [1, 0.5], [1, 1])


def test_energy_inequality_from_records():
    recs = [diagnose(PrimitiveState.equilibrium(8), PARAMS) for _ in range(3)]
    for i, r in enumerate(recs):
        r.time = float(i)
    assert check_energy_inequality(recs).degenerate


# ----------------------------------------------------------------------
# properties of the reference trajectory


@pytest.mark.slow
def test_magnetic_field_does_not_decay(small_random_run):
    _, outcome, records, summary = small_random_run
    assert outcome.completed
    m0 = records[0].h3_m
    lo, hi = summary["m_h3_range"]
    assert 0.5 * m0 <= lo and hi <= 2.0 * m0
    assert records[-1].h3_u <= 0.1 * records[0].h3_u
    assert records[-1].h3_theta <= 0.1 * records[0].h3_theta


@pytest.mark.slow
def test_records_are_finite_and_nonnegative(small_random_run):
    records = small_random_run[2]
    assert all(r.is_finite() and r.E >= 0 and r.D >= 0 for r in records)
