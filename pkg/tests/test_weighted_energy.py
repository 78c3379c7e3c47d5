import numpy as np
import pytest

from core.errors import Infeasible, NonPositiveEnergy, TailNotResolved, WrongSide
from core.flux_models import make_flux
from core.profile import WaveParams, integrate_profile
from core.shock_frame_sim import TwinGrid, init_state
from core.weighted_energy import (
    EstimateConstants, Side, WeightSpec, WeightVariant, above_floor, critical_q, damping_constants,
    damping_residual, energy_norm_bounds, estimate_constants, explicit_coefficients,
    first_failing_inequality, fit_decay_rate, select_coefficients, total_energy, weight_constant,
    weight_value, weighted_integral, weighted_sobolev_norm,
)


def _constants(omega, C_tilde, kappa, q):
    coeffs = explicit_coefficients(omega, C_tilde)
    return EstimateConstants(mu=1.0, nu=1.0, epsilon=1.0, omega=omega, eta=0.1, C_tilde=C_tilde,
                             kappa_q=kappa, q=q, C_f=1.0, delta1=1.0, coeffs=coeffs, feasible=True)


@pytest.fixture(scope="module")
def inert_profile():
    return integrate_profile(WaveParams(k=1.0, q=0.0, u0=1.0, u_i=0.5, flux=make_flux("burgers")))


def test_weight_values():
    assert weight_value(WeightSpec(1.0, 1.0, Side.RIGHT, WeightVariant.PLAIN), 2.0) == pytest.approx(np.e ** 2)
    assert weight_value(WeightSpec(1.0, 0.0, Side.LEFT, WeightVariant.ONE), -3.0) == pytest.approx(np.e ** 3)
    one = WeightSpec(1.0, 1.0, Side.LEFT, WeightVariant.ONE)
    two = WeightSpec(1.0, 1.0, Side.LEFT, WeightVariant.TWO)
    assert weight_value(one, -1.0) == pytest.approx(np.exp(2.0 - np.exp(-1.0)))
    assert weight_value(two, -1.0) == pytest.approx(np.exp(np.exp(-1.0)))
    assert weight_value(one, 0.0) == 1.0


def test_weight_side_checks():
    with pytest.raises(WrongSide):
        weight_value(WeightSpec(1.0, 1.0, Side.LEFT, WeightVariant.ONE), 1.0)
    with pytest.raises(ValueError):
        WeightSpec(1.0, 1.0, Side.LEFT, WeightVariant.PLAIN)
    with pytest.raises(ValueError):
        WeightSpec(0.0, 1.0, Side.RIGHT, WeightVariant.PLAIN)


def test_weighted_integrals_of_exponentials():
    grid = TwinGrid(0.001, 30.0, 30.0)
    unit = lambda x: np.ones_like(x)
    left, right = weighted_integral(np.exp(-np.abs(grid.x) / 2), grid, unit, unit)
    assert left == pytest.approx(1.0, rel=1e-5)
    assert right == pytest.approx(1.0, rel=1e-5)
    # each of the three orders contributes 2/3 per half-line
    norm = weighted_sobolev_norm(np.exp(-np.abs(grid.x)), grid, 0.5, order=2)
    assert norm == pytest.approx(2.0, rel=1e-3)


def test_unresolved_tail_is_reported():
    grid = TwinGrid(0.1, 5.0, 5.0)
    with pytest.raises(TailNotResolved):
        weighted_sobolev_norm(np.ones(100), grid, 0.5)


def test_inert_wave_is_feasible(inert_profile):
    constants = estimate_constants(inert_profile)
    assert constants.feasible
    assert constants.mu > 0
    assert constants.epsilon == pytest.approx(1.0 / constants.nu)


def test_critical_heat_release():
    constants = _constants(0.1, 10.0, 0.0, 0.0)
    assert first_failing_inequality(constants.coeffs, 0.1, 10.0, 0.0, 0.0) is None
    assert critical_q(constants, 1.0) == pytest.approx(5e-5, rel=1e-6)
    with pytest.raises(Infeasible) as exc:
        select_coefficients(constants, 1e-3)
    assert exc.value.index == 3


def test_fit_exact_exponential():
    t = np.linspace(0.0, 10.0, 101)
    theta, r2 = fit_decay_rate(t, 2.0 * np.exp(-0.3 * t))
    assert theta == pytest.approx(0.3, abs=1e-10)
    assert r2 == pytest.approx(1.0)


def test_fit_constant_and_noisy_series():
    t = np.linspace(0.0, 50.0, 501)
    theta, r2 = fit_decay_rate(t, np.full_like(t, 3.0))
    assert theta == pytest.approx(0.0, abs=1e-12)
    assert r2 == 1.0
    theta, _ = fit_decay_rate(t, np.exp(-t) * (1.0 + 0.1 * np.sin(5.0 * t)))
    assert theta == pytest.approx(1.0, abs=0.02)


def test_fit_rejects_non_positive_energy():
    t = np.linspace(0.0, 1.0, 20)
    E = np.ones_like(t)
    E[-1] = 0.0
    with pytest.raises(NonPositiveEnergy):
        fit_decay_rate(t, E)
    with pytest.raises(ValueError):
        fit_decay_rate(t[:2], E[:2])



def test_fit_stops_at_energy_floor():
    t = np.linspace(0.0, 50.0, 101)
    E = np.exp(-t) + 1e-8 * (1.0 + 0.5 * np.sin(7.0 * t))
    theta, r2 = fit_decay_rate(t, E, floor_factor=100.0)
    assert theta == pytest.approx(1.0, abs=0.02)
    assert r2 >= 0.999
    theta, _ = fit_decay_rate(t, E)
    assert theta < 0.5


def test_above_floor_keeps_series_without_a_floor():
    t = np.linspace(0.0, 10.0, 50)
    assert above_floor(np.full_like(t, 2.0), 100.0) == slice(0, t.size)
    assert above_floor(np.exp(0.3 * t), 100.0) == slice(0, t.size)
    E = np.concatenate(([1e-3], np.exp(-t), np.full(20, 1e-9)))
    assert above_floor(E, 10.0) == slice(1, 51)


def test_damping_residual_sign():
    t = np.linspace(0.0, 10.0, 201)
    norm = np.exp(-t)
    low = np.zeros_like(t)
    assert damping_residual(t, norm, low, 2.0, 0.5) == pytest.approx(-1.0)
    assert damping_residual(t, norm, low, 0.5, 0.5) > 0



def test_damping_residual_memory_term_bounds_exponential_growth():
    # a low-order memory integral dominates any exponentially growing trajectory
    t = np.linspace(0.0, 60.0, 241)
    low = np.exp(0.15 * t)
    norm = 1.3 * low
    assert damping_residual(t, norm, np.zeros_like(t), 1e3, 0.01) > 0
    assert damping_residual(t, norm, low, 1e3, 0.01) <= 0


def test_energy_norm_bounds():
    m, M = energy_norm_bounds(explicit_coefficients(0.1, 10.0), 1.0, 1.0)
    assert m == pytest.approx(1.25e-5 / np.e)
    assert M == pytest.approx(np.e)


def test_total_energy_of_zero_state(burgers_profile):
    constants = estimate_constants(burgers_profile)
    state = init_state(burgers_profile, None, None, TwinGrid(0.05, 10.0, 2.0))
    report = total_energy(state, constants)
    assert report.total == 0.0


def test_linear_weight_constant(burgers_profile):
    assert weight_constant(burgers_profile, 1.0) == pytest.approx((0.25, 4.0))


def test_damping_constants_without_heat_release(inert_profile):
    C, delta1, delta2 = damping_constants(inert_profile, estimate_constants(inert_profile))
    assert C >= 0
    assert delta1 == np.inf and delta2 == np.inf
