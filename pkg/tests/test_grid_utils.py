import numpy as np
import pytest

from utils.grid_utils import bump, cell_centres, derivative, mollifier, one_sided_trace, unit_curvature_bump


def test_mollifier_support_and_peak():
    s = np.array([-0.6, -0.5, 0.0, 0.5, 0.6])
    values = mollifier(s)
    assert values[2] == pytest.approx(np.exp(-1.0))
    assert values[[0, 1, 3, 4]].tolist() == [0.0, 0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        mollifier(s, 3)


def test_mollifier_derivatives_match_finite_differences():
    s = np.linspace(-0.45, 0.45, 19)
    step = 1e-6
    for order in (1, 2):
        fd = (mollifier(s + step, order - 1) - mollifier(s - step, order - 1)) / (2 * step)
        np.testing.assert_allclose(mollifier(s, order), fd, rtol=1e-5, atol=1e-7)


def test_unit_curvature_bump():
    s = np.linspace(-0.5, 0.5, 20001)
    assert np.max(np.abs(unit_curvature_bump(s, 0.0, 2))) == pytest.approx(1.0, rel=1e-4)
    assert unit_curvature_bump(np.array([0.0]), 0.0)[0] == pytest.approx(0.0119, abs=1e-4)


def test_bump_height_and_width():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(bump(x, 2.0, 2.0, 0.5), [0.0, 0.5, 0.0])


def test_grid_helpers():
    np.testing.assert_allclose(cell_centres(0.0, 1.0, 0.25), [0.125, 0.375, 0.625, 0.875])
    assert one_sided_trace(2.0, 1.0) == 2.5
    x = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(derivative(x ** 2, 0.1, 2), 2.0, atol=1e-10)
