import numpy as np
import pytest

from core.backgrounds import ZndBackground
from core.char_fields import (
    HypSystem, advance_ensemble, change_of_variables_defect, coupling_coeffs, eigen_frame,
    frame_defects, gamma_at_infinity, make_ensemble, measure_diagnostics, riccati_forecast,
    spectral_gap, w_equation_residual,
)
from core.errors import BlownUp, NonGenuinelyNonlinear, NotStrictlyHyperbolic


def _constant_system(matrix):
    A = np.asarray(matrix, dtype=float)
    return HypSystem(A.shape[0], lambda x, u: np.broadcast_to(A, (np.size(x),) + A.shape).copy())


BURGERS = HypSystem(1, lambda x, u: np.asarray(u, dtype=float).reshape(-1, 1, 1))


def _linear_burgers(m):
    """Exact solution u = -m x / (1 - m t), blowing up at t = 1/m."""
    def provider(x, t):
        x = np.asarray(x, dtype=float)
        u = -m * x / (1.0 - m * t)
        return u[:, None], np.full((x.size, 1), -m / (1.0 - m * t))
    return provider


def _zero_field(n):
    def provider(x, t):
        zero = np.zeros((np.size(x), n))
        return zero, zero.copy()
    return provider


def test_gas_dynamics_eigenvalues_at_rest():
    znd = ZndBackground()
    rest = np.array([1.0, 0.0, 1.0])
    system = HypSystem(3, lambda x, u: znd.jacobian(rest + np.asarray(u).reshape(-1, 3)))
    frame = eigen_frame(system, 0.0, np.zeros(3))
    np.testing.assert_allclose(frame.lambdas, [0.7483315, 0.0, -0.7483315], atol=1e-7)
    defects = frame_defects(system, 0.0, np.zeros(3), frame)
    assert max(defects.values()) < 1e-12


def test_diagonal_frame():
    system = _constant_system([[-1.0, 0.0], [0.0, 2.0]])
    frame = eigen_frame(system, 0.0, np.zeros(2))
    np.testing.assert_allclose(frame.lambdas, [2.0, -1.0])
    np.testing.assert_allclose(np.abs(frame.eta), [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(frame.eta @ frame.xi, np.eye(2), atol=1e-14)


def test_rejects_non_hyperbolic_matrices():
    with pytest.raises(NotStrictlyHyperbolic):
        eigen_frame(_constant_system([[0.0, 1.0], [-1.0, 0.0]]), 0.0, np.zeros(2))
    with pytest.raises(NotStrictlyHyperbolic):
        eigen_frame(_constant_system(np.eye(2)), 0.0, np.zeros(2))


def test_constant_coefficients_have_no_drift():
    system = _constant_system([[2.0, 0.0], [0.0, -1.0]])
    coeffs = coupling_coeffs(system, np.array([-1.0, 0.5]), np.zeros((2, 2)))
    assert np.max(np.abs(coeffs.b)) == 0.0
    assert np.max(np.abs(coeffs.gamma)) == 0.0


def test_riccati_forecast():
    forecast = riccati_forecast(1.0, 0.05)
    assert forecast.T_star_upper == pytest.approx(71.111111, rel=1e-6)
    assert forecast.T_star_riccati == pytest.approx(20.0)
    with pytest.raises(NonGenuinelyNonlinear):
        riccati_forecast(0.0, 1.0)
    with pytest.raises(ValueError):
        riccati_forecast(1.0, 0.0)


def test_burgers_gamma_at_infinity():
    assert gamma_at_infinity(BURGERS, 0) == pytest.approx(-1.0, rel=1e-6)


def test_linear_burgers_blows_up_at_one_over_m():
    m = 1.0
    provider = _linear_burgers(m)
    ens = make_ensemble(BURGERS, provider, np.linspace(-1.0, 1.0, 21), (0,))
    with pytest.raises(BlownUp) as exc:
        advance_ensemble(BURGERS, ens, provider, 2.0)
    assert exc.value.t == pytest.approx(1.0 / m, abs=1e-2)
    assert exc.value.family == 0


def test_change_of_variables_on_exact_solution():
    provider = _linear_burgers(1.0)
    ens = make_ensemble(BURGERS, provider, np.linspace(-1.0, 1.0, 201), (0,))
    assert change_of_variables_defect(BURGERS, ens, provider) < 1e-6
    advance_ensemble(BURGERS, ens, provider, 0.5)
    np.testing.assert_allclose(ens.rho, 0.5, rtol=1e-4)
    assert change_of_variables_defect(BURGERS, ens, provider) < 1e-3


def test_characteristics_drift_in_zero_field():
    system = _constant_system([[2.0, 0.0], [0.0, -1.0]])
    seeds = np.array([-1.0, 0.0, 1.0])
    ens = make_ensemble(system, _zero_field(2), seeds, (0, 1))
    advance_ensemble(system, ens, _zero_field(2), 1.0)
    np.testing.assert_allclose(ens.X[0], seeds + 2.0)
    np.testing.assert_allclose(ens.X[1], seeds - 1.0)
    assert np.all(ens.w == 0.0)


def test_spectral_gap_of_constant_system():
    gap = spectral_gap(_constant_system([[2.0, 0.0], [0.0, -1.0]]), [-1.0, 0.0])
    assert gap.gap == pytest.approx(3.0)
    assert gap.lambda_bar == pytest.approx(2.0)


def test_single_seed_diagnostics_vanish():
    system = _constant_system([[2.0, 0.0], [0.0, -1.0]])
    ens = make_ensemble(system, _zero_field(2), [0.0], (0,))
    assert measure_diagnostics(ens) == (0.0, 0.0, 0.0, 0.0, 0.0)


def _pulse(direction, center, amplitude=0.05):
    x = np.linspace(center - 4.0, center + 4.0, 4001)
    bump = amplitude * np.exp(-(x - center) ** 2)
    return x, bump[:, None] * direction, (-2.0 * (x - center) * bump)[:, None] * direction


def test_diagonal_coefficients_are_eigenvalue_derivatives():
    system = ZndBackground().hyp_system()
    x, u = -2.0, np.array([0.01, -0.02, 0.005])
    coeffs = coupling_coeffs(system, x, u)
    frame = eigen_frame(system, x, u)
    step = 1e-5
    diag = np.arange(3)
    dlam_dx = (eigen_frame(system, x + step, u).lambdas - eigen_frame(system, x - step, u).lambdas) / (2 * step)
    np.testing.assert_allclose(coeffs.b[diag, diag], dlam_dx, atol=1e-6)
    for k in range(3):
        shift = step * frame.xi[:, k]
        dlam = (eigen_frame(system, x, u + shift).lambdas - eigen_frame(system, x, u - shift).lambdas) / (2 * step)
        np.testing.assert_allclose(coeffs.c[diag, diag, k], dlam, atol=1e-6)


def test_w_equation_holds_for_gas_pulse():
    system = ZndBackground().hyp_system()
    direction = np.array([0.6, -0.64, 0.48])
    x, u, u_x = _pulse(direction, -(4.0 + 2.0 / system.decay_rate))
    assert w_equation_residual(system, x, u, u_x) < 1e-4


def test_w_equation_holds_for_burgers_pulse():
    x, u, u_x = _pulse(np.ones(1), 0.0, amplitude=0.5)
    assert w_equation_residual(BURGERS, x, u, u_x) < 1e-4


def test_w_equation_detects_inconsistent_gradient():
    system = ZndBackground().hyp_system()
    direction = np.array([0.6, -0.64, 0.48])
    x, u, u_x = _pulse(direction, -(4.0 + 2.0 / system.decay_rate), amplitude=0.1)
    assert w_equation_residual(system, x, u, 3.0 * u_x) > 1e-2


def test_both_detectors_fire_together_on_linear_burgers():
    m = 0.5
    provider = _linear_burgers(m)
    ens = make_ensemble(BURGERS, provider, np.linspace(-1.0, 1.0, 21), (0,))
    with pytest.raises(BlownUp) as exc:
        advance_ensemble(BURGERS, ens, provider, 4.0, require_both=True)
    assert set(ens.flag_times) == {"rho", "w"}
    assert abs(ens.flag_times["rho"] - ens.flag_times["w"]) < 1e-4
    assert exc.value.t == pytest.approx(1.0 / m, abs=1e-3)
