import numpy as np
import pytest

from core.errors import AmplitudeTooLarge, CFLViolation, DegenerateJump, SupportTouchesShock
from core.flux_models import make_flux
from core.profile import WaveParams, integrate_profile
from core.shock_frame_sim import (
    RunStatus, RunThresholds, TwinGrid, boundary_diagnostics, init_state, rh_lipschitz_constant,
    rh_speed_from_traces, run, step,
)


def _bump(height, center, half_width=1.0):
    def field(x):
        s = (x - center) / half_width
        return np.where(np.abs(s) < 1.0, height * np.cos(0.5 * np.pi * s) ** 2, 0.0)
    return field


def test_rankine_hugoniot_speed(burgers_profile):
    assert rh_speed_from_traces(burgers_profile, 0.0, 0.0) == burgers_profile.sigma
    assert rh_speed_from_traces(burgers_profile, 0.2, 0.0) == pytest.approx(0.6)
    with pytest.raises(DegenerateJump):
        rh_speed_from_traces(burgers_profile, -0.6, 0.0)


def test_rh_lipschitz_constant(burgers_profile):
    # Burgers: both partials equal 1/2 everywhere
    assert rh_lipschitz_constant(burgers_profile, 0.1) == pytest.approx(0.5)


def test_twin_grid_validation():
    grid = TwinGrid(0.5, 2.0, 1.5)
    assert (grid.n_minus, grid.n_plus) == (4, 3)
    np.testing.assert_allclose(grid.x_minus, [-1.75, -1.25, -0.75, -0.25])
    assert 0.0 not in grid.x
    with pytest.raises(ValueError):
        TwinGrid(0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        TwinGrid(0.5, 1.0, 2.0)


def test_initial_data_guards(burgers_profile):
    grid = TwinGrid(0.05, 5.0, 1.0)
    with pytest.raises(SupportTouchesShock):
        init_state(burgers_profile, _bump(0.01, -0.2, 0.5), None, grid)
    with pytest.raises(AmplitudeTooLarge):
        init_state(burgers_profile, _bump(0.5, -3.0), None, grid)


def test_zero_perturbation_is_a_fixed_point(burgers_profile):
    grid = TwinGrid(0.05, 5.0, 1.0)
    state = init_state(burgers_profile, None, None, grid)
    assert state.psi_dot == burgers_profile.sigma
    outcome = run(state, 2.0)
    assert outcome.status is RunStatus.COMPLETED
    assert np.all(outcome.state.v == 0.0)
    assert np.all(outcome.state.zeta == 0.0)
    assert outcome.state.psi == pytest.approx(burgers_profile.sigma * 2.0, rel=1e-12)
    np.testing.assert_array_equal(outcome.history["psi_dot"], burgers_profile.sigma)


def test_zero_horizon_records_one_row(burgers_profile):
    state = init_state(burgers_profile, None, None, TwinGrid(0.05, 5.0, 1.0))
    outcome = run(state, 0.0)
    assert outcome.history["t"].tolist() == [0.0]


def test_unknown_observable(burgers_profile):
    state = init_state(burgers_profile, None, None, TwinGrid(0.05, 5.0, 1.0))
    with pytest.raises(ValueError):
        run(state, 1.0, observables=["psi", "entropy"])


def test_step_enforces_courant_limit(burgers_profile):
    grid = TwinGrid(0.05, 5.0, 1.0)
    state = init_state(burgers_profile, None, None, grid)
    with pytest.raises(CFLViolation):
        step(state, 2 * grid.h)


def test_large_bump_steepens_into_gradient_blowup(burgers_profile):
    grid = TwinGrid(0.005, 10.0, 1.0)
    state = init_state(burgers_profile, _bump(0.1, -6.0), None, grid)
    outcome = run(state, 20.0, thresholds=RunThresholds(rho=0.125, grad_threshold=3.0))
    assert outcome.status is RunStatus.GRADIENT_BLOWUP
    # inviscid breaking time of the bump is 2 / (0.1 pi)
    assert 4.0 < outcome.T_end < 9.0


def test_boundary_diagnostics_of_unperturbed_state(burgers_profile):
    state = init_state(burgers_profile, None, None, TwinGrid(0.05, 5.0, 1.0))
    report = boundary_diagnostics(state)
    assert report.zeta_mismatch == 0.0
    assert report.psi_ddot == 0.0
    assert report.rh_ratio == 0.0


@pytest.fixture(scope="module")
def inert_burgers():
    return integrate_profile(WaveParams(k=1.0, q=0.0, u0=1.0, u_i=0.5, flux=make_flux("burgers")))


def test_inert_perturbation_conserves_mass(inert_burgers):
    grid = TwinGrid(0.01, 10.0, 1.0)
    state = init_state(inert_burgers, _bump(0.05, -6.0), None, grid)
    outcome = run(state, 2.0)
    assert outcome.status is RunStatus.COMPLETED
    mass = np.sum(state.v) * grid.h
    assert np.sum(outcome.state.v) * grid.h == pytest.approx(mass, rel=1e-10)


def test_refinement_converges(inert_burgers):
    fields = []
    for h in (0.02, 0.01, 0.005):
        grid = TwinGrid(h, 10.0, 1.0)
        outcome = run(init_state(inert_burgers, _bump(0.05, -6.0), None, grid), 2.0)
        fields.append((grid.x_minus, grid.split(outcome.state.v)[0]))
    x = fields[0][0]
    coarse, mid, fine = (np.interp(x, xs, v) for xs, v in fields)
    assert np.max(np.abs(mid - fine)) < 0.7 * np.max(np.abs(coarse - mid))
