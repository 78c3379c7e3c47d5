import numpy as np
import pytest

from core.backgrounds import MajdaBackground, ZndBackground
from core.errors import Inadmissible


@pytest.fixture(scope="module")
def znd():
    return ZndBackground()


def test_znd_volumes(znd):
    assert znd.state(np.array([0.0]))[0, 0] == pytest.approx(0.374074, abs=1e-6)
    assert znd.far_field()[0] == pytest.approx(0.53253, abs=1e-5)


def test_znd_conservation_invariants(znd):
    x = np.linspace(-20.0, 0.0, 41)
    U = znd.state(x)
    v, u = U[:, 0], U[:, 1]
    p = znd.eos.pressure(v, u, U[:, 2])
    np.testing.assert_allclose(-u - znd.sigma * v, -znd.m1, atol=1e-12)
    np.testing.assert_allclose(p - znd.sigma * u, znd.m2, atol=1e-12)


def test_znd_gradient_matches_finite_differences(znd):
    x = np.array([-3.0, -1.0, -0.2])
    step = 1e-6
    fd = (znd.state(x + step) - znd.state(x - step)) / (2 * step)
    np.testing.assert_allclose(znd.gradient(x), fd, rtol=1e-6, atol=1e-8)


def test_znd_jacobian_matches_flux(znd):
    U = znd.state(np.array([-2.0]))
    J = znd.jacobian(U)[0]
    step = 1e-6
    for j in range(3):
        shift = np.zeros((1, 3))
        shift[0, j] = step
        fd = (znd.flux(U + shift) - znd.flux(U - shift))[0] / (2 * step)
        np.testing.assert_allclose(J[:, j], fd, rtol=1e-6, atol=1e-8)


def test_znd_far_field_speeds(znd):
    speeds = znd.far_field_speeds()
    np.testing.assert_allclose(speeds, [0.453, -1.5, -3.453], atol=1e-3)


def test_znd_rejects_large_heat_release():
    with pytest.raises(Inadmissible):
        ZndBackground(q=1.0)


def test_majda_source_is_profile_slope(burgers_profile):
    background = MajdaBackground(burgers_profile)
    x = np.array([-2.0, -0.5])
    G = background.source_matrix(x, np.zeros(2))
    du, _, _ = burgers_profile.derivatives(x)
    np.testing.assert_allclose(G[:, 0, 0], du, rtol=1e-12)
    assert background.decay_rate == pytest.approx(2.0)


def test_znd_flux_speeds_match_jacobian(znd):
    U = znd.state(np.array([-3.0, -0.5, -0.01])) + np.array([0.01, -0.02, 0.01])
    F, speeds = znd.flux_speeds(U)
    np.testing.assert_allclose(F, znd.flux(U), rtol=1e-14)
    expected = np.sort(np.linalg.eigvals(znd.jacobian(U)).real, axis=-1)[:, ::-1] - znd.sigma
    np.testing.assert_allclose(speeds, expected, rtol=1e-9, atol=1e-12)


def test_majda_flux_speeds(burgers_profile):
    background = MajdaBackground(burgers_profile)
    U = np.array([[0.2], [0.9]])
    F, speeds = background.flux_speeds(U)
    np.testing.assert_allclose(F[:, 0], 0.5 * U[:, 0] ** 2)
    np.testing.assert_allclose(speeds[:, 0], U[:, 0] - background.sigma)
