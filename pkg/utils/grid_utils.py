"""
Grid helpers for the lab: bump shapes, one-sided traces, finite differences
"""
from functools import lru_cache

import numpy as np


def mollifier(s: np.ndarray, order: int = 0) -> np.ndarray:
    """Standard bump exp(-1/(1-4s^2)) on (-1/2, 1/2) and its first two derivatives."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 0.5
    si = s[inside]
    y = 1.0 - 4.0 * si ** 2
    g = np.exp(-1.0 / y)
    if order == 0:
        out[inside] = g
    elif order == 1:
        out[inside] = -8.0 * si * g / y ** 2
    elif order == 2:
        out[inside] = g * (-8.0 / y ** 2 + 64.0 * si ** 2 / y ** 4 - 128.0 * si ** 2 / y ** 3)
    else:
        raise ValueError(f"mollifier derivative of order {order} not available")
    return out


@lru_cache(maxsize=1)
def curvature_scale() -> float:
    """Factor making the width-1 mollifier satisfy max|phi''| = 1."""
    s = np.linspace(-0.5, 0.5, 200001)
    return 1.0 / float(np.max(np.abs(mollifier(s, 2))))


def unit_curvature_bump(x: np.ndarray, center: float, order: int = 0) -> np.ndarray:
    """Width-1 bump centred at `center`, normalised so that max|phi''| = 1."""
    return curvature_scale() * mollifier(np.asarray(x, dtype=float) - center, order)


def bump(x: np.ndarray, center: float, width: float = 1.0, height: float = 1.0,
         order: int = 0) -> np.ndarray:
    """Smooth bump of the given peak height supported on [center - width/2, center + width/2]."""
    s = (np.asarray(x, dtype=float) - center) / width
    return height * np.e * mollifier(s, order) / width ** order


def one_sided_trace(near: np.ndarray, far: np.ndarray) -> np.ndarray:
    """Linear extrapolation to the face half a cell beyond `near`."""
    return 1.5 * near - 0.5 * far


def derivative(values: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    """order-th derivative: centred in the interior, second-order one-sided at the ends."""
    out = np.asarray(values, dtype=float)
    for _ in range(order):
        out = np.gradient(out, h, edge_order=2)
    return out


def cell_centres(lo: float, hi: float, h: float) -> np.ndarray:
    """Centres of the uniform cells of width h covering [lo, hi]."""
    n = int(round((hi - lo) / h))
    return lo + (np.arange(n) + 0.5) * h
