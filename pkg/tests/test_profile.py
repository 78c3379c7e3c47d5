import numpy as np
import pytest

from core.errors import Inadmissible, InadmissibleReason
from core.flux_models import make_flux
from core.profile import (
    WaveParams, check_existence, compute_speed, inert_profile, integrate_profile, reactant_profile,
    verify_profile,
)


def _burgers(q, u0=1.0):
    return WaveParams(k=1.0, q=q, u0=u0, u_i=0.5, flux=make_flux("burgers"))


def test_compute_speed():
    assert compute_speed(_burgers(0.09)) == pytest.approx(0.5)
    assert compute_speed(_burgers(0.09, u0=2.0)) == pytest.approx(1.0)
    cube = WaveParams(u0=1.0, flux=make_flux("polynomial", (0.0, 0.0, 0.0, 1.0)))
    assert compute_speed(cube) == pytest.approx(1.0)


def test_reactant_profile():
    assert reactant_profile(_burgers(0.09), 0.5, -1.0) == pytest.approx(np.exp(-2.0))
    assert reactant_profile(_burgers(0.09), 0.5, 0.0) == 1.0
    params = WaveParams(k=2.0, q=0.09, u0=1.0, u_i=0.5, flux=make_flux("burgers"))
    assert reactant_profile(params, 1.0, -0.5) == pytest.approx(np.exp(-1.0))


def test_end_state():
    assert check_existence(_burgers(0.09)) == pytest.approx(0.9, abs=1e-11)
    assert check_existence(_burgers(0.0)) == 1.0


def test_no_root_for_large_heat_release():
    with pytest.raises(Inadmissible) as exc:
        check_existence(_burgers(0.3))
    assert exc.value.reason is InadmissibleReason.NO_ROOT


def test_burgers_profile_matches_implicit_relation(burgers_profile):
    assert burgers_profile.sigma == pytest.approx(0.5)
    assert burgers_profile.u_minus_inf == pytest.approx(0.9, abs=1e-11)
    x, u = burgers_profile.grid_x, burgers_profile.u_bar
    residual = u ** 2 / 2 - u / 2 + 0.045 * (1.0 - np.exp(2 * x))
    assert np.max(np.abs(residual / (u - 0.5))) <= 1e-8


def test_profile_tail_and_derivatives(burgers_profile):
    far = burgers_profile.u_at(np.array([-40.0]))[0]
    assert far == pytest.approx(0.9, abs=1e-10)
    x = np.array([-2.0, -1.0, -0.5])
    du, _, _ = burgers_profile.derivatives(x)
    step = 1e-4
    fd = (burgers_profile.u_at(x + step) - burgers_profile.u_at(x - step)) / (2 * step)
    np.testing.assert_allclose(du, fd, rtol=1e-4)


def test_constant_profile_when_inert():
    profile = integrate_profile(_burgers(0.0))
    assert np.all(profile.u_bar == 1.0)
    assert profile.kappa == 0.0


def test_verify_profile(burgers_profile):
    report = verify_profile(burgers_profile, tol=1e-6)
    assert report.passed
    assert report.rh_residual == pytest.approx(0.0, abs=1e-15)


def test_kappa_vanishes_with_heat_release():
    kappas = [integrate_profile(_burgers(q)).kappa for q in (0.09, 0.05, 0.01, 0.001)]
    assert all(a > b for a, b in zip(kappas, kappas[1:]))
    assert kappas[-1] < 0.05 * kappas[0]


def test_inert_wave_with_negative_speed():
    params = WaveParams(k=1.0, q=0.0, u0=1.0, u_i=0.5, flux=make_flux("polynomial", (0.0, -0.8, 0.5)))
    profile = inert_profile(params)
    assert profile.sigma == pytest.approx(-0.3)
    assert profile.frozen_reactant
    np.testing.assert_array_equal(profile.z_bar(np.array([-3.0, -1.0])), 1.0)
