import numpy as np
import pytest

from core.backgrounds import MajdaBackground, ZndBackground
from core.blowup_lab import (
    BlowupData, GasState, GasTrajectory, Verdict, blowup_family, burgers_oracle, detect_blowup,
    distance_requirement, make_blowup_data, negative_speed_growth, simulate_gas,
    unweighted_sobolev_norm, weighted_growth, znd_reduce,
)
from core.char_fields import HypSystem
from core.errors import DistanceTooSmall, NonGenuinelyNonlinear, TemperatureGuardViolated
from utils.grid_utils import bump


@pytest.fixture(scope="module")
def majda(burgers_profile):
    return MajdaBackground(burgers_profile)


def _quiet_data(theta):
    return BlowupData(theta, -10.0, 0, np.array([1.0]), lambda x, order: bump(x, -10.0, 1.0, 1.0, order))


def test_distance_requirement():
    assert distance_requirement(0.1, 10.0, 1.0, 0.1, 3.0) == pytest.approx(30.0)
    assert distance_requirement(1.0, 0.5, 1.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        distance_requirement(0.0, 1.0, 1.0, 1.0)


def test_linear_system_has_no_blowup_family():
    A = np.diag([2.0, -1.0])
    system = HypSystem(2, lambda x, u: np.broadcast_to(A, (np.size(x), 2, 2)).copy())
    with pytest.raises(NonGenuinelyNonlinear):
        blowup_family(system)


def test_data_too_close_to_the_shock(majda):
    with pytest.raises(DistanceTooSmall):
        make_blowup_data(majda.hyp_system(), 1.0, -2.0)


def test_zero_data_stays_zero(majda):
    traj = simulate_gas(majda, _quiet_data(0.0), T_max=2.0, h=0.01)
    assert np.all(traj.history["sup_amp"] == 0.0)
    assert np.all(traj.history["z_hat_max"] == 0.0)
    assert traj.T_star is None
    assert detect_blowup(traj).verdict is Verdict.NO_BLOWUP


def test_reactant_noise_does_not_grow(majda):
    noise = lambda x: 1e-12 * bump(x, -10.0, 2.0, 1.0)
    traj = simulate_gas(majda, _quiet_data(0.0), T_max=2.0, h=0.01, z_hat0=noise)
    assert np.max(traj.history["z_hat_max"]) <= 1e-12


def test_znd_reduction_guards():
    znd = ZndBackground()
    x = np.linspace(-12.0, -6.0, 61)
    zero = np.zeros((x.size, 3))
    state = GasState(x, zero, np.zeros(x.size), znd.state(x), znd.reactant(x), 0.0)
    assert znd_reduce(state, znd, T_i=0.0).n == 3
    with pytest.raises(TemperatureGuardViolated):
        znd_reduce(state, znd, T_i=100.0)
    bad = GasState(x, zero, np.full(x.size, 1e-3), znd.state(x), znd.reactant(x), 0.0)
    with pytest.raises(ValueError):
        znd_reduce(bad, znd, T_i=0.0)


def test_burgers_oracle_blowup_time():
    h = 5e-3
    exact, traj = burgers_oracle(1.0, h=h)
    assert traj.T_star is not None
    assert traj.T_star == pytest.approx(exact, abs=5 * h)
    assert abs(traj.T_rho - traj.T_w) <= 2 * h
    verdict = detect_blowup(traj)
    assert verdict.verdict is Verdict.BLOWUP
    assert verdict.grid_grad_growth >= 5.0
    assert verdict.T_star_grid is not None


def test_verdict_needs_grid_gradient_growth():
    history = {"t": np.linspace(0.0, 1.0, 5), "sup_amp": np.ones(5),
               "sup_grad": np.array([1.0, 1.2, 1.5, 2.0, 3.0])}
    flat = detect_blowup(GasTrajectory(history, 0.01, T_star=1.0, W0=1.0, w_at_flag=1e6))
    assert flat.verdict is Verdict.NO_BLOWUP
    assert flat.grid_grad_growth == pytest.approx(3.0)
    assert flat.T_star_grid is None
    history["sup_grad"] = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    steep = detect_blowup(GasTrajectory(history, 0.01, T_star=1.0, W0=1.0, w_at_flag=1e6))
    assert steep.verdict is Verdict.BLOWUP
    assert steep.T_star_grid == pytest.approx(0.75)


def test_unweighted_norm_of_constant():
    x = np.linspace(0.0, 4.0, 401)
    assert unweighted_sobolev_norm(x, np.ones((x.size, 1)), x[1] - x[0]) == pytest.approx(2.0)


def test_weighted_growth_needs_outgoing_family(majda):
    with pytest.raises(ValueError):
        weighted_growth(majda)


def test_negative_speed_growth_rate():
    report = negative_speed_growth(h=0.01, T_max=5.0, control_T_max=5.0)
    assert report.sigma == pytest.approx(-0.3)
    assert report.relative_error < 0.05
    assert report.measured > 0
    # the L2 memory term only ever raises the bound
    assert report.memory_residual <= report.control_residual
