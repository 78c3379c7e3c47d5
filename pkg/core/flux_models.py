"""
Physics inputs: scalar Majda fluxes and the ideal-gas equation of state
"""
import logging
import os
import sys
from dataclasses import dataclass
from enum import Enum, auto
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.errors import NonPhysicalState, NotHyperbolic, OutOfInterval, UnsupportedOrder
from config import EOS_C_HEAT, EOS_GAMMA, FLUX_INTERVAL

logger = logging.getLogger(__name__)


class FluxKind(Enum):
    """Closed-form flux families."""
    BURGERS = auto()
    CUBIC_CONVEX = auto()
    POLYNOMIAL = auto()


@dataclass(frozen=True)
class ScalarFlux:
    """Scalar flux f with exact derivatives up to third order on a certified interval."""
    kind: FluxKind = FluxKind.BURGERS
    coefficients: Tuple[float, ...] = ()
    interval: Tuple[float, float] = FLUX_INTERVAL

    def __post_init__(self):
        if self.kind is FluxKind.POLYNOMIAL and not self.coefficients:
            raise ValueError("polynomial flux needs ascending coefficients")
        if self.interval[0] >= self.interval[1]:
            raise ValueError(f"empty flux interval {self.interval}")

    @property
    def polynomial(self) -> Polynomial:
        if self.kind is FluxKind.BURGERS:
            return Polynomial([0.0, 0.0, 0.5])
        if self.kind is FluxKind.CUBIC_CONVEX:
            return Polynomial([0.0, 0.0, 0.5, 1.0 / 6.0])
        return Polynomial(self.coefficients)

    def derivative(self, u, order: int = 0):
        """order-th derivative of f, vectorised, without the interval check."""
        u = np.asarray(u, dtype=float)
        if self.kind is FluxKind.BURGERS:
            if order == 0:
                return 0.5 * u * u
            if order == 1:
                return 1.0 * u
            if order == 2:
                return np.ones_like(u)
            return np.zeros_like(u)
        if self.kind is FluxKind.CUBIC_CONVEX:
            if order == 0:
                return 0.5 * u * u + u ** 3 / 6.0
            if order == 1:
                return u + 0.5 * u * u
            if order == 2:
                return 1.0 + u
            return np.ones_like(u)
        poly = self.polynomial
        return poly.deriv(order)(u) if order else poly(u)

    def f(self, u):
        return self.derivative(u, 0)

    def df(self, u):
        return self.derivative(u, 1)

    def d2f(self, u):
        return self.derivative(u, 2)

    def d3f(self, u):
        return self.derivative(u, 3)

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        lo, hi = self.interval
        return bool(np.all((u >= lo) & (u <= hi)))


def make_flux(kind: str, coeffs: Sequence[float] = (), interval: Tuple[float, float] = FLUX_INTERVAL) -> ScalarFlux:
    """Build a flux from config values (flux.kind, flux.coeffs)."""
    names = {"burgers": FluxKind.BURGERS, "cubic": FluxKind.CUBIC_CONVEX,
             "cubic_convex": FluxKind.CUBIC_CONVEX, "polynomial": FluxKind.POLYNOMIAL}
    try:
        flux_kind = names[kind.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown flux kind '{kind}'")
    return ScalarFlux(flux_kind, tuple(float(c) for c in coeffs), tuple(interval))


def flux_eval(flux: ScalarFlux, u, order: int = 0):
    """Evaluate the order-th derivative of f at u inside the certified interval."""
    if order < 0 or order > 3:
        raise UnsupportedOrder(f"order {order} not in 0..3")
    if not flux.contains(u):
        raise OutOfInterval(f"u outside certified interval {flux.interval}")
    value = flux.derivative(u, order)
    return float(value) if np.ndim(value) == 0 else value


def flux_bound_constant(flux: ScalarFlux, lo: float, hi: float, samples: int = 2001) -> float:
    """C_f: max of |f'|, |f''|, |f'''| over [lo, hi]."""
    u = np.linspace(lo, hi, samples)
    return float(max(np.max(np.abs(flux.derivative(u, order))) for order in (1, 2, 3)))


@dataclass(frozen=True)
class IdealGasEOS:
    """p = gamma * (E - u^2/2) / v, T = e / c_heat."""
    gamma: float = EOS_GAMMA
    c_heat: float = EOS_C_HEAT

    def __post_init__(self):
        if self.gamma <= 0 or self.c_heat <= 0:
            raise ValueError("gamma and c_heat must be positive")

    def internal_energy(self, u, E):
        return np.asarray(E) - 0.5 * np.asarray(u) ** 2

    def pressure(self, v, u, E):
        return self.gamma * self.internal_energy(u, E) / v

    def partials(self, v, u, E):
        """(p, p_v, p_u, p_E), vectorised, no physicality check."""
        p = self.pressure(v, u, E)
        return p, -p / v, -self.gamma * np.asarray(u) / v, self.gamma / np.asarray(v) + 0.0 * p

    def sound_speed_sq(self, v, u, E):
        p, p_v, _, p_E = self.partials(v, u, E)
        return p * p_E - p_v

    def temperature(self, u, E):
        return self.internal_energy(u, E) / self.c_heat


def _check_physical(eos: IdealGasEOS, v, u, E):
    if np.any(np.asarray(v) <= 0):
        raise NonPhysicalState("specific volume must be positive")
    if np.any(eos.internal_energy(u, E) <= 0):
        raise NonPhysicalState("internal energy must be positive")


def eos_pressure_partials(eos: IdealGasEOS, v, u, E):
    """(p, p_v, p_u, p_E) at a physical state."""
    _check_physical(eos, v, u, E)
    p, p_v, p_u, p_E = eos.partials(v, u, E)
    if np.ndim(p) == 0:
        return float(p), float(p_v), float(p_u), float(p_E)
    return p, p_v, p_u, p_E


def sound_speed(eos: IdealGasEOS, v, u, E):
    """sqrt(p p_E - p_v); equals sqrt(gamma (gamma + 1) e) / v for the ideal gas."""
    _check_physical(eos, v, u, E)
    c2 = eos.sound_speed_sq(v, u, E)
    if np.any(c2 <= 0):
        raise NotHyperbolic("p * p_E - p_v <= 0")
    c = np.sqrt(c2)
    return float(c) if np.ndim(c) == 0 else c


def temperature(eos: IdealGasEOS, v, u, E):
    """T = (E - u^2/2) / c_heat at a physical state."""
    _check_physical(eos, v, u, E)
    T = eos.temperature(u, E)
    return float(T) if np.ndim(T) == 0 else T
