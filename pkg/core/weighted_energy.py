"""
Weighted energies for the shock-frame perturbation.

Left-side v components use the weight exp(e|x| + (C/e)(1 - exp(e x))),
left-side zeta components exp(e|x| - (C/e)(1 - exp(e x))), the right side
exp(e x). The twelve coefficients of the composite energy are chosen in
closed form and checked against the ten coupling inequalities.
"""
import logging
import os
import sys
from dataclasses import dataclass
from enum import Enum, auto
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.integrate import cumulative_trapezoid, trapezoid

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.errors import AmplitudeTooLarge, Infeasible, NonPositiveEnergy, TailNotResolved, WrongSide
from core.flux_models import flux_bound_constant
from core.profile import WaveProfile
from core.shock_frame_sim import PerturbationState, TwinGrid, rh_lipschitz_constant
from utils.grid_utils import derivative, one_sided_trace
from config import ENERGY_C, ENERGY_TAIL_FRACTION, ENERGY_TAIL_TOLERANCE, ENERGY_TRANSIENT_FRACTION

logger = logging.getLogger(__name__)


class Side(Enum):
    LEFT = auto()
    RIGHT = auto()


class WeightVariant(Enum):
    """ONE weighs v on the left, TWO weighs zeta on the left, PLAIN is the right-side weight."""
    ONE = auto()
    TWO = auto()
    PLAIN = auto()


@dataclass(frozen=True)
class WeightSpec:
    epsilon: float
    C: float
    side: Side
    variant: WeightVariant

    def __post_init__(self):
        if self.epsilon <= 0 or self.C < 0:
            raise ValueError("weight needs epsilon > 0 and C >= 0")
        if (self.variant is WeightVariant.PLAIN) != (self.side is Side.RIGHT):
            raise ValueError(f"{self.variant.name} weight is not defined on the {self.side.name} side")


def weight_value(spec: WeightSpec, x):
    """Closed-form weight; the inner integral of C exp(-e|s|) is never done by quadrature."""
    x = np.asarray(x, dtype=float)
    if spec.side is Side.LEFT and np.any(x > 0) or spec.side is Side.RIGHT and np.any(x < 0):
        raise WrongSide(f"{spec.side.name} weight evaluated on the other half-line")
    eps = spec.epsilon
    if spec.variant is WeightVariant.PLAIN:
        w = np.exp(eps * x)
    else:
        correction = (spec.C / eps) * -np.expm1(eps * x)
        sign = 1.0 if spec.variant is WeightVariant.ONE else -1.0
        w = np.exp(eps * np.abs(x) + sign * correction)
    return float(w) if w.ndim == 0 else w


def left_weights(epsilon: float, C: float) -> Tuple[WeightSpec, WeightSpec, WeightSpec]:
    """(v weight, zeta weight, right-side weight) as paired in the composite energy."""
    return (WeightSpec(epsilon, C, Side.LEFT, WeightVariant.ONE),
            WeightSpec(epsilon, C, Side.LEFT, WeightVariant.TWO),
            WeightSpec(epsilon, C, Side.RIGHT, WeightVariant.PLAIN))


def _half_line_integral(x: np.ndarray, integrand: np.ndarray, left: bool, tail_fraction: float,
                        tail_tolerance: Optional[float]) -> float:
    # close the quadrature at x = 0 with the extrapolated integrand
    if left:
        xs = np.append(x, 0.0)
        ys = np.append(integrand, one_sided_trace(integrand[-1], integrand[-2]))
    else:
        xs = np.insert(x, 0, 0.0)
        ys = np.insert(integrand, 0, one_sided_trace(integrand[0], integrand[1]))
    total = float(trapezoid(ys, xs))
    if tail_tolerance is not None and total > 0:
        extent = np.max(np.abs(xs))
        tail = np.abs(xs) >= (1.0 - tail_fraction) * extent
        tail_part = float(trapezoid(np.where(tail, ys, 0.0), xs))
        if tail_part > tail_tolerance * total:
            raise TailNotResolved(f"outer {tail_fraction:.0%} carries {tail_part / total:.2%} of the integral")
    return total


def weighted_integral(values: np.ndarray, grid: TwinGrid, left_weight, right_weight, order: int = 0,
                      tail_fraction: float = ENERGY_TAIL_FRACTION,
                      tail_tolerance: Optional[float] = None) -> Tuple[float, float]:
    """(int_{x<0} (d^k v)^2 w_-, int_{x>0} (d^k v)^2 w_+) for one derivative order."""
    left, right = grid.split(np.asarray(values, dtype=float))
    d_left = derivative(left, grid.h, order)
    d_right = derivative(right, grid.h, order)
    x_l, x_r = grid.x_minus, grid.x_plus
    w_l = left_weight(x_l) if callable(left_weight) else weight_value(left_weight, x_l)
    w_r = right_weight(x_r) if callable(right_weight) else weight_value(right_weight, x_r)
    return (_half_line_integral(x_l, d_left ** 2 * w_l, True, tail_fraction, tail_tolerance),
            _half_line_integral(x_r, d_right ** 2 * w_r, False, tail_fraction, tail_tolerance))


def weighted_sobolev_norm(values: np.ndarray, grid: TwinGrid, epsilon: float, order: int = 0,
                          tail_fraction: float = ENERGY_TAIL_FRACTION,
                          tail_tolerance: Optional[float] = ENERGY_TAIL_TOLERANCE) -> float:
    """sqrt(sum_{l <= k} int (d^l v)^2 exp(e|x|) dx) over both half-lines."""
    if order not in (0, 1, 2):
        raise ValueError(f"order {order} not in 0..2")
    weight = lambda x: np.exp(epsilon * np.abs(x))
    total = 0.0
    for l in range(order + 1):
        total += sum(weighted_integral(values, grid, weight, weight, l, tail_fraction, tail_tolerance))
    return float(np.sqrt(total))


@dataclass(frozen=True)
class CoefficientTuple:
    """C_{k,-}, C_{k,+} multiply the v components, the primed ones the zeta components (k = 0, 1, 2)."""
    c_minus: Tuple[float, float, float]
    c_plus: Tuple[float, float, float]
    cp_minus: Tuple[float, float, float]
    cp_plus: Tuple[float, float, float]

    def as_tuple(self) -> Tuple[float, ...]:
        return self.c_minus + self.c_plus + self.cp_minus + self.cp_plus


def explicit_coefficients(omega: float, C_tilde: float) -> CoefficientTuple:
    c1 = omega / (4 * C_tilde)
    c2 = min(c1, c1 * omega / (2 * C_tilde))
    cp0 = omega / (8 * C_tilde)
    cp1 = min(omega / (8 * C_tilde), omega * c1 / C_tilde)
    return CoefficientTuple((1.0, c1, c2), (1.0, 1.0, 1.0), (cp0, cp1, cp1), (1.0, 1.0, 1.0))


def inequality_sides(coeffs: CoefficientTuple, omega: float, C_tilde: float, kappa: float,
                     q: float) -> Tuple[np.ndarray, np.ndarray]:
    """Left and right sides of the ten coupling inequalities, in order."""
    c0m, c1m, c2m = coeffs.c_minus
    c0p, c1p, c2p = coeffs.c_plus
    d0m, d1m, d2m = coeffs.cp_minus
    d0p, d1p, d2p = coeffs.cp_plus
    rk = np.sqrt(kappa)
    aq = abs(q)
    primed = d0m + d1m + d2m
    lhs = np.array([
        C_tilde * ((c0m + c1m + c2m) * rk + primed),
        C_tilde * (rk * (c1m + c2m) + primed),
        C_tilde * aq * c1m,
        C_tilde * c2m,
        C_tilde * aq * c2m,
        C_tilde * primed,
        C_tilde * (d1m + d2m),
        C_tilde * d2m,
        C_tilde * d2m,
        C_tilde * c2m,
    ])
    rhs = np.array([
        omega * c0p / 2,
        omega * c0m / 2,
        d1m * omega / 2,
        c1m * omega / 2,
        d2m * omega / 2,
        omega * d0p / 2,
        omega * d1p / 2,
        omega * d2p / 2,
        omega * c1m,
        omega * c1p,
    ])
    return lhs, rhs


def first_failing_inequality(coeffs: CoefficientTuple, omega: float, C_tilde: float, kappa: float,
                             q: float) -> Optional[int]:
    """1-based index of the first violated inequality, or None."""
    lhs, rhs = inequality_sides(coeffs, omega, C_tilde, kappa, q)
    failing = np.nonzero(lhs > rhs * (1.0 + 1e-12))[0]
    return int(failing[0]) + 1 if failing.size else None


@dataclass(frozen=True)
class EstimateConstants:
    mu: float
    nu: float
    epsilon: float
    omega: float
    eta: float
    C_tilde: float
    kappa_q: float
    q: float
    C_f: float
    delta1: float
    coeffs: CoefficientTuple
    feasible: bool
    failing_index: Optional[int] = None


def _speed_gap(profile: WaveProfile, samples: int = 1001) -> float:
    flux = profile.flux
    sigma = profile.sigma
    u = np.linspace(min(profile.params.u0, profile.u_minus_inf), max(profile.params.u0, profile.u_minus_inf), samples)
    return float(min(sigma - flux.df(0.0), np.min(flux.df(u)) - sigma))


def _flux_constant(profile: WaveProfile, eta: float) -> float:
    lo = min(0.0, profile.params.u0, profile.u_minus_inf) - eta
    hi = max(0.0, profile.params.u0, profile.u_minus_inf) + eta
    return flux_bound_constant(profile.flux, lo, hi)


def estimate_constants(profile: WaveProfile, eta: Optional[float] = None) -> EstimateConstants:
    """mu, nu, epsilon, omega, C_tilde, kappa(q), delta_1 and the explicit coefficient tuple.

    Without eta the amplitude bound is min(u0/4, 1, mu epsilon/32) evaluated with the
    unshrunk mu.
    """
    if profile.sigma <= 0:
        raise ValueError("weighted energies need a positive shock speed")
    params = profile.params
    k, q, sigma = params.k, params.q, profile.sigma
    base_gap = min(_speed_gap(profile), k, sigma)
    if eta is None:
        eta = min(params.u0 / 4, 1.0, base_gap * k / sigma / 32)
    C_f = _flux_constant(profile, eta)
    mu = base_gap - C_f * eta
    if mu <= 0:
        raise AmplitudeTooLarge(f"eta = {eta:.3g} leaves no speed gap (mu = {mu:.3g})")
    nu = sigma + C_f * eta
    epsilon = k / nu
    omega = mu * epsilon / 4
    C_tilde = rh_lipschitz_constant(profile, eta)
    delta1 = 1.0 if q == 0 else mu * epsilon / (8 * k * abs(q))
    coeffs = explicit_coefficients(omega, C_tilde)
    failing = first_failing_inequality(coeffs, omega, C_tilde, profile.kappa, q)
    if failing is not None:
        logger.warning(f"[Energy] coefficient inequality {failing} fails at q = {q}")
    logger.info(f"[Energy] mu = {mu:.4g}, nu = {nu:.4g}, epsilon = {epsilon:.4g}, "
                f"omega = {omega:.4g}, C_tilde = {C_tilde:.4g}, eta = {eta:.4g}")
    return EstimateConstants(mu, nu, epsilon, omega, eta, C_tilde, profile.kappa, q, C_f, delta1,
                             coeffs, failing is None, failing)


def select_coefficients(constants: EstimateConstants, q: float) -> CoefficientTuple:
    coeffs = explicit_coefficients(constants.omega, constants.C_tilde)
    failing = first_failing_inequality(coeffs, constants.omega, constants.C_tilde, constants.kappa_q, q)
    if failing is not None:
        raise Infeasible(failing, f"q = {q:.6g}")
    return coeffs


def critical_q(constants: EstimateConstants, q_hi: float, xtol: float = 1e-12) -> float:
    """Largest |q| keeping the explicit tuple feasible, with kappa held at constants.kappa_q."""
    coeffs = explicit_coefficients(constants.omega, constants.C_tilde)

    def feasible(q):
        ok = first_failing_inequality(coeffs, constants.omega, constants.C_tilde, constants.kappa_q, q) is None
        return 1.0 if ok else -1.0

    if feasible(0.0) < 0:
        raise Infeasible(first_failing_inequality(coeffs, constants.omega, constants.C_tilde,
                                                  constants.kappa_q, 0.0), "already at q = 0")
    if feasible(q_hi) > 0:
        logger.warning(f"[Energy] still feasible at q_hi = {q_hi}")
        return q_hi
    return float(optimize.bisect(feasible, 0.0, q_hi, xtol=xtol))


def weight_constant(profile: WaveProfile, C_f: float) -> Tuple[float, float]:
    """(eta_max, C) of the linear L2 estimate."""
    sigma = profile.sigma
    eta_max = (sigma - float(profile.flux.df(0.0))) * profile.params.k / (4 * C_f * sigma)
    return eta_max, 1.0 / eta_max


def stability_weight_constant(constants: EstimateConstants) -> float:
    """Weight constant C large enough for the interior terms of the stability estimate."""
    kq, C_f, eta = constants.kappa_q, constants.C_f, constants.eta
    k = constants.epsilon * constants.nu
    aq = abs(constants.q)
    candidates = (
        kq * (11 * C_f + 2 * eta * C_f + kq * (C_f + 3 + kq)) / 2
        + (1 + eta * (7 + eta) + constants.delta1 * k * aq) / 2,
        kq * (4 * C_f + C_f * kq + 1) / 2,
        kq * (C_f + 1) / 2,
        (k + k ** 2 + k ** 3) / constants.nu,
    )
    return 2.0 / constants.mu * max(candidates)


def damping_constants(profile: WaveProfile, constants: EstimateConstants) -> Tuple[float, float, float]:
    """(C, delta_1, delta_2) for the damping estimate; q = 0 gives infinite delta_1 and delta_2."""
    params = profile.params
    k, q, sigma = params.k, params.q, profile.sigma
    C_f, kappa, eps = constants.C_f, constants.kappa_q, constants.epsilon
    gap = float(profile.flux.df(params.u0)) - sigma
    C = max(C_f * k ** 2 / sigma ** 3, (kappa + 2 * C_f * (3 * kappa + kappa ** 2)) / gap)
    if q == 0:
        return C, np.inf, np.inf
    delta1 = eps * gap / (4 * k * abs(q))

    x = profile.grid_x
    w_v, w_z, _ = left_weights(eps, C)
    _, u2, _ = profile.derivatives(x)
    e_u = _half_line_integral(x, np.abs(u2) * weight_value(w_v, x), True, ENERGY_TAIL_FRACTION, None)
    e_z = _half_line_integral(x, np.abs(profile.d2z_bar(x)) * weight_value(w_z, x), True,
                              ENERGY_TAIL_FRACTION, None)
    ceilings = [eps * gap / (8 * e_u) if e_u > 0 else np.inf,
                eps * gap * (2 * k - eps * sigma) * eps * sigma
                / (16 * C_f * e_z * k ** 2 * q ** 2 * np.exp(2 * C / eps))]
    return C, delta1, 0.5 * min(ceilings)


def energy_norm_bounds(coeffs: CoefficientTuple, epsilon: float, C: float) -> Tuple[float, float]:
    """(m, M) with m |(v, zeta)|^2_{H2_e} <= total energy <= M |(v, zeta)|^2_{H2_e}."""
    values = coeffs.as_tuple()
    spread = np.exp(C / epsilon)
    return min(values) / spread, max(values) * spread


@dataclass
class EnergyReport:
    """Component energies indexed by derivative order k = 0, 1, 2."""
    t: float
    v_minus: Tuple[float, float, float]
    v_plus: Tuple[float, float, float]
    zeta_minus: Tuple[float, float, float]
    zeta_plus: Tuple[float, float, float]
    total: float


def total_energy(state: PerturbationState, constants: EstimateConstants, C: float = ENERGY_C,
                 coeffs: Optional[CoefficientTuple] = None) -> EnergyReport:
    coeffs = constants.coeffs if coeffs is None else coeffs
    w_v, w_z, w_plus = left_weights(constants.epsilon, C)
    v_parts = [weighted_integral(state.v, state.grid, w_v, w_plus, k) for k in range(3)]
    z_parts = [weighted_integral(state.zeta, state.grid, w_z, w_plus, k) for k in range(3)]
    v_minus = tuple(p[0] for p in v_parts)
    v_plus = tuple(p[1] for p in v_parts)
    z_minus = tuple(p[0] for p in z_parts)
    z_plus = tuple(p[1] for p in z_parts)
    total = float(np.dot(coeffs.c_minus, v_minus) + np.dot(coeffs.c_plus, v_plus)
                  + np.dot(coeffs.cp_minus, z_minus) + np.dot(coeffs.cp_plus, z_plus))
    return EnergyReport(state.t, v_minus, v_plus, z_minus, z_plus, total)


def energy_probe(constants: EstimateConstants, C: float = ENERGY_C) -> Callable[[PerturbationState], Dict[str, float]]:
    """Callback for run(): composite energy plus squared H2_e and L2_e norms of (v, zeta)."""

    def probe(state: PerturbationState) -> Dict[str, float]:
        report = total_energy(state, constants, C)
        eps = constants.epsilon
        h2 = sum(weighted_sobolev_norm(f, state.grid, eps, 2, tail_tolerance=None) ** 2 for f in (state.v, state.zeta))
        l2 = sum(weighted_sobolev_norm(f, state.grid, eps, 0, tail_tolerance=None) ** 2 for f in (state.v, state.zeta))
        return {"energy": report.total, "norm_h2": h2, "norm_l2": l2}

    return probe


def above_floor(E: Sequence[float], floor_factor: float, min_samples: int = 3) -> slice:
    """Samples from the peak of E up to the first one within floor_factor of the minimum after it.

    Weighted norms of a perturbation that has left the domain settle on a roundoff
    floor amplified by the weight; the decay regime ends where that floor starts.
    The whole series is kept when fewer than min_samples clear the floor.
    """
    E = np.asarray(E, dtype=float)
    if E.size == 0:
        return slice(0, 0)
    peak = int(np.argmax(E))
    floor = float(np.min(E[peak:]))
    below = np.nonzero(E[peak:] <= floor_factor * floor)[0]
    end = peak + int(below[0]) if below.size else E.size
    if end - peak < min_samples:
        return slice(0, E.size)
    return slice(peak, end)


def fit_decay_rate(t: Sequence[float], E: Sequence[float],
                   transient_fraction: float = ENERGY_TRANSIENT_FRACTION,
                   window: Optional[Tuple[float, float]] = None,
                   floor_factor: Optional[float] = None) -> Tuple[float, float]:
    """(theta_hat, r2) from a straight-line fit of log E against t after the transient.

    With floor_factor the series is first cut to its decay regime (see above_floor);
    the transient fraction then applies to what is left.
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if floor_factor is not None:
        regime = above_floor(E, floor_factor)
        if regime.stop - regime.start < t.size:
            logger.debug(f"[Energy] decay regime t in [{t[regime.start]:.4g}, {t[regime.stop - 1]:.4g}] "
                         f"of [{t[0]:.4g}, {t[-1]:.4g}]")
        t, E = t[regime], E[regime]
    start = int(np.floor(transient_fraction * t.size))
    t, E = t[start:], E[start:]
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, E = t[keep], E[keep]
    if t.size < 2:
        raise ValueError("need at least two samples to fit a decay rate")
    if np.any(E <= 0):
        raise NonPositiveEnergy("energy series must be positive in the fit window")
    if t.size < 10:
        logger.warning(f"[Energy] decay fit on only {t.size} samples")
    log_e = np.log(E)
    slope, intercept = np.polyfit(t, log_e, 1)
    residual = log_e - (slope * t + intercept)
    ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
    ss_res = float(np.sum(residual ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(log_e ** 2))) else 1.0 - ss_res / ss_tot
    return float(-slope), r2


def damping_residual(t: Sequence[float], norm: Sequence[float], low_norm: Sequence[float],
                     C: float, theta: float) -> float:
    """max over t of |X(t)| - C e^{-theta t} |X(0)| - int_0^t C e^{-theta (t-s)} |X(s)|_low ds."""
    t = np.asarray(t, dtype=float)
    norm = np.asarray(norm, dtype=float)
    low_norm = np.asarray(low_norm, dtype=float)
    t0 = t - t[0]
    memory = cumulative_trapezoid(np.exp(theta * t0) * low_norm, t0, initial=0.0)
    bound = C * np.exp(-theta * t0) * (norm[0] + memory)
    return float(np.max(norm - bound))
