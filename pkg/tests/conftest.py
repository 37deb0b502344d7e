import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mhdtorus.model import Params, PerturbationState
from mhdtorus.spectral import get_grid, random_band_limited
from mhdtorus.timestepper import Formulation

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

PARAMS = Params(mu=0.1, lam=0.05, kappa=0.05)

# pass/fail lines collected by the acceptance module, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def random_perturbation(n, seed, amplitude=1e-2, band=4, mean_free=True):
    """Band-limited perturbation state with H^3 norm ``amplitude``."""
    g = get_grid(n)
    rng = np.random.default_rng(seed)
    y = np.stack(
        [
            random_band_limited(g, rng, band, mean_free=mean_free),
            *random_band_limited(g, rng, band, components=2, mean_free=mean_free),
            random_band_limited(g, rng, band, mean_free=mean_free),
            random_band_limited(g, rng, band, mean_free=mean_free),
        ]
    )
    y *= amplitude / g.sobolev_norm(y, 3)
    return PerturbationState.from_stacked(y)


class HeatOnly(Formulation):
    """Temperature diffusion with density and velocity frozen."""

    state_cls = PerturbationState
    name = "heat-only"

    def rhs_hat(self, yh, time=None):
        out = np.zeros_like(yh)
        out[3] = self.params.kappa * self.grid.laplacian_hat(yh[3])
        return out

    def linear_hat(self, yh):
        out = np.zeros_like(yh)
        out[3] = -self._ksq * self.params.kappa * yh[3]
        return out

    def propagate(self, yh, h):
        out = yh.copy()
        out[3] = np.exp(-self.params.kappa * self._ksq * h) * yh[3]
        return out


@pytest.fixture
def params():
    return PARAMS


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ----------------------------------------------------------------------
# expensive trajectories, computed once per session and shared by the
# module tests and the acceptance suite


@pytest.fixture(scope="session")
def small_random_run():
    from mhdtorus.cli import simulate
    from mhdtorus.config import load_config

    cfg = load_config(preset="small-random")
    outcome, records, summary = simulate(cfg)
    return cfg, outcome, records, summary


@pytest.fixture(scope="session")
def small_data_run():
    from mhdtorus.cli import simulate
    from mhdtorus.config import load_config

    cfg = load_config(preset="small-data")
    outcome, records, summary = simulate(cfg)
    return cfg, outcome, records, summary


@pytest.fixture(scope="session")
def cross_check_runs():
    from mhdtorus.cli import formulation_runs
    from mhdtorus.config import load_config

    cfg = load_config(preset="cross-check")
    return cfg, formulation_runs(cfg)


@pytest.fixture(scope="session")
def ifrk4_cross_check_run():
    """Primitive IFRK4 run on the cross-check data, for the scheme comparison."""
    from dataclasses import replace

    from mhdtorus.config import initial_state, load_config
    from mhdtorus.timestepper import integrate

    cfg = load_config(preset="cross-check")
    integ = replace(cfg.integrator, scheme="IFRK4")
    return integrate(initial_state(cfg), cfg.params, integ)


def _transport_run(preset):
    from mhdtorus.config import initial_state, load_config
    from mhdtorus.timestepper import integrate

    cfg = load_config(preset=preset)
    s0 = initial_state(cfg)
    g = s0.grid
    gaps = []

    def observer(t, s):
        pert = s.to_perturbation()
        gaps.append(
            dict(
                time=t,
                m_minus_a_h3=g.sobolev_norm(pert.m - pert.a, 3),
                m_minus_rho_h3=g.sobolev_norm(s.m - s.rho, 3),
                m_minus_rho_l2=g.l2_norm(s.m - s.rho),
            )
        )

    outcome = integrate(s0, cfg.params, cfg.integrator, observer)
    return cfg, outcome, gaps


@pytest.fixture(scope="session")
def transported_blob_run():
    return _transport_run("transported-blob")


@pytest.fixture(scope="session")
def transported_density_run():
    return _transport_run("transported-density")
