import numpy as np
import pytest

from core.errors import NonPhysicalState, NotHyperbolic, OutOfInterval, UnsupportedOrder
from core.flux_models import (
    IdealGasEOS, eos_pressure_partials, flux_bound_constant, flux_eval, make_flux, sound_speed,
    temperature,
)


def test_burgers_values():
    flux = make_flux("burgers")
    assert flux_eval(flux, 1.0, 0) == pytest.approx(0.5)
    assert flux_eval(flux, 0.0, 1) == 0.0
    assert flux_eval(flux, 2.0, 2) == pytest.approx(1.0)
    assert flux_eval(flux, 2.0, 3) == 0.0


def test_cubic_and_polynomial_derivatives():
    cubic = make_flux("cubic")
    assert flux_eval(cubic, 1.0, 1) == pytest.approx(1.5)
    assert flux_eval(cubic, 1.0, 3) == pytest.approx(1.0)
    poly = make_flux("polynomial", (0.0, 0.0, 0.0, 1.0))
    u = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(flux_eval(poly, u, 1), 3 * u ** 2)
    np.testing.assert_allclose(flux_eval(poly, u, 2), 6 * u)


def test_flux_eval_guards():
    flux = make_flux("burgers", interval=(-1.0, 1.0))
    with pytest.raises(UnsupportedOrder):
        flux_eval(flux, 0.5, 4)
    with pytest.raises(OutOfInterval):
        flux_eval(flux, 1.5)


def test_unknown_flux_kind():
    with pytest.raises(ValueError):
        make_flux("quartic")


def test_flux_bound_constant_burgers():
    assert flux_bound_constant(make_flux("burgers"), 0.0, 2.0) == pytest.approx(2.0)


def test_pressure_partials_at_rest():
    eos = IdealGasEOS(0.4, 1.0)
    p, p_v, p_u, p_E = eos_pressure_partials(eos, 1.0, 0.0, 1.0)
    assert (p, p_v, p_u, p_E) == pytest.approx((0.4, -0.4, 0.0, 0.4))


def test_pressure_partials_match_finite_differences():
    eos = IdealGasEOS(0.4, 1.0)
    state = np.array([0.8, 0.3, 1.2])
    _, *partials = eos_pressure_partials(eos, *state)
    step = 1e-6
    for j in range(3):
        shift = np.zeros(3)
        shift[j] = step
        fd = (eos.pressure(*(state + shift)) - eos.pressure(*(state - shift))) / (2 * step)
        assert partials[j] == pytest.approx(fd, rel=1e-8, abs=1e-10)


def test_pressure_scaling():
    eos = IdealGasEOS(0.4, 1.0)
    assert eos_pressure_partials(eos, 2.0, 0.0, 1.0)[0] == pytest.approx(0.2)
    assert eos_pressure_partials(eos, 1.0, 1.0, 1.5)[0] == pytest.approx(0.4)


def test_sound_speed():
    eos = IdealGasEOS(0.4, 1.0)
    assert sound_speed(eos, 1.0, 0.0, 1.0) == pytest.approx(0.7483315, abs=1e-7)
    assert sound_speed(eos, 2.0, 0.0, 1.0) == pytest.approx(0.7483315 / 2, abs=1e-7)


def test_sound_speed_rejects_degenerate_eos():
    class Degenerate(IdealGasEOS):
        def sound_speed_sq(self, v, u, E):
            return 0.0 * np.asarray(v)

    with pytest.raises(NotHyperbolic):
        sound_speed(Degenerate(0.4, 1.0), 1.0, 0.0, 1.0)


def test_temperature_and_physicality():
    eos = IdealGasEOS(0.4, 2.0)
    assert temperature(eos, 1.0, 1.0, 1.5) == pytest.approx(0.5)
    with pytest.raises(NonPhysicalState):
        temperature(eos, 1.0, 2.0, 1.0)
    with pytest.raises(NonPhysicalState):
        eos_pressure_partials(eos, -1.0, 0.0, 1.0)
