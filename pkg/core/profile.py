"""
Majda traveling-wave profile: shock speed, reactant profile, end state
and the backwards-integrated burnt-side profile u_bar.
"""
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.errors import Inadmissible, InadmissibleReason, NonPositiveSpeed, StiffnessFailure
from core.flux_models import ScalarFlux
from utils.grid_utils import cell_centres
from config import (
    PROFILE_EXTENT, PROFILE_H, PROFILE_STIFFNESS_FLOOR, PROFILE_TARGET_ERROR,
    ROOT_SCAN_POINTS, ROOT_XTOL, WAVE_K, WAVE_Q, WAVE_U0, WAVE_U_I,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WaveParams:
    """Reaction rate k, heat release q, left shock value u0, ignition threshold u_i."""
    k: float = WAVE_K
    q: float = WAVE_Q
    u0: float = WAVE_U0
    u_i: float = WAVE_U_I
    flux: ScalarFlux = field(default_factory=ScalarFlux)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("reaction rate k must be positive")
        if self.u0 <= 0:
            raise ValueError("u0 must be positive")


@dataclass(frozen=True)
class WaveProfile:
    """Traveling wave on x < 0 sampled at cell centres, with dense evaluation."""
    sigma: float
    u_minus_inf: float
    grid_x: np.ndarray
    u_bar: np.ndarray
    kappa: float
    params: WaveParams
    extent: float
    solution: Optional[Callable] = field(default=None, repr=False, compare=False)
    frozen_reactant: bool = False

    @property
    def flux(self) -> ScalarFlux:
        return self.params.flux

    @property
    def h(self) -> float:
        return float(self.grid_x[1] - self.grid_x[0]) if self.grid_x.size > 1 else self.extent

    def u_at(self, x) -> np.ndarray:
        """u_bar at arbitrary x <= 0; exponential tail beyond the integration extent."""
        x = np.minimum(np.asarray(x, dtype=float), 0.0)
        if self.solution is None:
            return np.full_like(x, self.params.u0)
        inside = np.maximum(x, -self.extent)
        u = np.atleast_1d(self.solution(inside.ravel())[0]).reshape(x.shape)
        beyond = x < -self.extent
        if np.any(beyond):
            u_edge = float(self.solution(-self.extent)[0])
            rate = self.params.k / self.sigma
            u = np.where(beyond, self.u_minus_inf + (u_edge - self.u_minus_inf)
                         * np.exp(rate * (x + self.extent)), u)
        return u

    def derivatives(self, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(u_bar', u_bar'', u_bar''') by the chain rule on the profile ODE."""
        x = np.minimum(np.asarray(x, dtype=float), 0.0)
        if self.solution is None or self.params.q == 0:
            zero = np.zeros_like(x)
            return zero, zero.copy(), zero.copy()
        return _profile_derivatives(self.params, self.sigma, x, self.u_at(x))

    def z_bar(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.frozen_reactant:
            return np.ones_like(x)
        return reactant_profile(self.params, self.sigma, x)

    def dz_bar(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.frozen_reactant:
            return np.zeros_like(x)
        rate = self.params.k / self.sigma
        return np.where(x < 0, rate * reactant_profile(self.params, self.sigma, x), 0.0)

    def d2z_bar(self, x) -> np.ndarray:
        rate = 0.0 if self.frozen_reactant else self.params.k / self.sigma
        return rate * self.dz_bar(x)


def compute_speed(params: WaveParams) -> float:
    """Rankine-Hugoniot speed (f(u0) - f(0)) / u0."""
    f = params.flux.f
    return float((f(params.u0) - f(0.0)) / params.u0)


def reactant_profile(params: WaveParams, sigma: float, x):
    """z_bar: exp(k x / sigma) behind the shock, 1 ahead of it."""
    if sigma <= 0:
        raise NonPositiveSpeed(f"sigma = {sigma} <= 0")
    x = np.asarray(x, dtype=float)
    z = np.where(x < 0, np.exp(params.k * np.minimum(x, 0.0) / sigma), 1.0)
    return float(z) if z.ndim == 0 else z


def _end_state_residual(params: WaveParams, sigma: float) -> Callable[[float], float]:
    f = params.flux.f
    f0 = float(f(0.0))
    # f(u) - sigma u = f(0) - q sigma at x = -infinity
    return lambda u: float(f(u) - sigma * u - f0 + params.q * sigma)


def check_existence(params: WaveParams) -> float:
    """Return u_minus_inf, or raise Inadmissible with the reason."""
    flux = params.flux
    u0 = params.u0
    sigma = compute_speed(params)
    df_u0 = float(flux.df(u0))
    f_ratio = float(flux.f(u0) / u0)
    if not df_u0 > f_ratio > 0:
        raise Inadmissible(InadmissibleReason.WRONG_END_STATE,
                           f"need f'(u0) > f(u0)/u0 > 0, got {df_u0:.6g}, {f_ratio:.6g}")
    if not sigma > float(flux.df(0.0)):
        raise Inadmissible(InadmissibleReason.WRONG_END_STATE, "sigma <= f'(0)")
    if params.q == 0:
        return u0

    g = _end_state_residual(params, sigma)
    if params.q > 0:
        scan = np.linspace(u0, params.u_i, ROOT_SCAN_POINTS + 1)
    else:
        scan = np.linspace(u0, flux.interval[1], ROOT_SCAN_POINTS + 1)
    values = np.array([g(u) for u in scan])
    ref = np.sign(values[0])
    crossing = np.nonzero(np.sign(values[1:]) != ref)[0]
    if crossing.size == 0:
        raise Inadmissible(InadmissibleReason.NO_ROOT,
                           f"no root of f(u) = sigma u - q sigma between {scan[0]:.6g} and {scan[-1]:.6g}")
    j = int(crossing[0]) + 1
    if values[j] == 0.0:
        u_minus_inf = float(scan[j])
    else:
        lo, hi = sorted((float(scan[j - 1]), float(scan[j])))
        u_minus_inf = float(optimize.bisect(g, lo, hi, xtol=ROOT_XTOL))

    samples = np.linspace(min(u_minus_inf, u0), max(u_minus_inf, u0), 1001)
    inf_speed = float(np.min(flux.df(samples)))
    if not inf_speed > sigma:
        raise Inadmissible(InadmissibleReason.DEGENERATE_CHARACTERISTIC,
                           f"inf f' = {inf_speed:.6g} <= sigma = {sigma:.6g}")
    logger.debug(f"[Profile] u_minus_inf = {u_minus_inf:.15g} (sigma = {sigma:.15g})")
    return u_minus_inf


def _profile_derivatives(params: WaveParams, sigma: float, x: np.ndarray, u: np.ndarray):
    flux = params.flux
    k, q = params.k, params.q
    rate = k / sigma
    D = flux.df(u) - sigma
    f2 = flux.d2f(u)
    f3 = flux.d3f(u)
    u1 = k * q * np.exp(rate * x) / D
    A = rate - f2 * u1 / D
    u2 = u1 * A
    dA = -(f3 * u1 ** 2 + f2 * u2) / D + (f2 * u1) ** 2 / D ** 2
    u3 = u2 * A + u1 * dA
    return u1, u2, u3


def _fit_kappa(params: WaveParams, sigma: float, x: np.ndarray, u: np.ndarray) -> float:
    if params.q == 0:
        return 0.0
    u1, u2, u3 = _profile_derivatives(params, sigma, x, u)
    envelope = (np.abs(u1) + np.abs(u2) + np.abs(u3)) * np.exp(-params.k * x / sigma)
    return float(np.max(envelope))


def integrate_profile(params: WaveParams, extent: float = PROFILE_EXTENT,
                      target_error: float = PROFILE_TARGET_ERROR,
                      h: float = PROFILE_H) -> WaveProfile:
    """Integrate u_bar' = k q exp(kx/sigma) / (f'(u_bar) - sigma) backwards from u_bar(0) = u0."""
    u_minus_inf = check_existence(params)
    sigma = compute_speed(params)
    grid_x = cell_centres(-extent, 0.0, h)
    flux = params.flux
    k, q = params.k, params.q

    if q == 0:
        logger.info(f"[Profile] q = 0: constant profile u_bar = {params.u0}")
        return WaveProfile(sigma, params.u0, grid_x, np.full_like(grid_x, params.u0),
                           0.0, params, extent)

    def rhs(x, y):
        gap = float(flux.df(y[0])) - sigma
        if gap < PROFILE_STIFFNESS_FLOOR:
            raise StiffnessFailure(f"f'(u) - sigma = {gap:.3g} at x = {x:.6g}")
        return [k * q * np.exp(k * x / sigma) / gap]

    sol = solve_ivp(rhs, (0.0, -extent), [params.u0], method="RK45",
                    rtol=target_error, atol=target_error * 1e-2, dense_output=True)
    if not sol.success:
        raise StiffnessFailure(f"profile integration failed: {sol.message}")

    u_bar = sol.sol(grid_x)[0]
    kappa = _fit_kappa(params, sigma, grid_x, u_bar)
    logger.info(f"[Profile] sigma = {sigma:.6g}, u_minus_inf = {u_minus_inf:.6g}, "
                f"kappa = {kappa:.6g}, {sol.t.size} RK45 steps")
    return WaveProfile(sigma, u_minus_inf, grid_x, u_bar, kappa, params, extent, sol.sol)


def inert_profile(params: WaveParams, extent: float = PROFILE_EXTENT, h: float = PROFILE_H) -> WaveProfile:
    """q = 0 wave u_bar = u0 for either sign of sigma; the reactant is frozen at 1 when sigma < 0."""
    if params.q != 0:
        raise ValueError("inert profiles carry no heat release")
    sigma = compute_speed(params)
    if sigma == 0:
        raise NonPositiveSpeed("standing waves are not treated")
    grid_x = cell_centres(-extent, 0.0, h)
    logger.info(f"[Profile] inert wave, sigma = {sigma:.6g}")
    return WaveProfile(sigma, params.u0, grid_x, np.full_like(grid_x, params.u0), 0.0,
                       params, extent, frozen_reactant=sigma < 0)


@dataclass
class ProfileReport:
    """Outcome of verify_profile; failed checks are flagged, never raised."""
    ode_residual: float
    kappa: float
    envelope_ratio: float
    envelope_ok: bool
    rh_residual: float
    passed: bool


def verify_profile(profile: WaveProfile, tol: float, fd_step: float = 1e-4,
                   samples: int = 2001) -> ProfileReport:
    """Residual of the profile ODE, decay envelope and Rankine-Hugoniot residual."""
    params = profile.params
    f = params.flux.f
    sigma = profile.sigma
    rh_residual = abs(float(f(params.u0) - f(0.0) - sigma * params.u0))

    if profile.solution is None:
        ode_residual = 0.0
        envelope_ratio = 0.0
    else:
        x = np.linspace(-profile.extent + 2 * fd_step, -2 * fd_step, samples)
        u = profile.u_at(x)
        du = (profile.u_at(x + fd_step) - profile.u_at(x - fd_step)) / (2 * fd_step)
        rhs = params.k * params.q * np.exp(params.k * x / sigma) / (params.flux.df(u) - sigma)
        ode_residual = float(np.max(np.abs(du - rhs)))
        u1, u2, u3 = profile.derivatives(x)
        envelope = (np.abs(u1) + np.abs(u2) + np.abs(u3)) * np.exp(-params.k * x / sigma)
        envelope_ratio = float(np.max(envelope) / profile.kappa) if profile.kappa > 0 else 0.0

    envelope_ok = envelope_ratio <= 1.0 + 1e-3
    passed = ode_residual <= tol and rh_residual <= tol and envelope_ok
    if not passed:
        logger.warning(f"[Profile] verification failed: ode {ode_residual:.3g}, "
                       f"envelope {envelope_ratio:.6g}, rh {rh_residual:.3g}")
    return ProfileReport(ode_residual, profile.kappa, envelope_ratio, envelope_ok, rh_residual, passed)
