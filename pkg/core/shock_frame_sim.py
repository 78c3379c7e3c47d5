"""
Shock-attached simulation of perturbations (v, zeta) of a Majda wave.

Fields live on cell centres of two half-lines with no node at x = 0.
v is updated in conservative upwind form on each side, zeta by upwind
transport at speed -psi' across the whole line, and the shock position
psi by the Rankine-Hugoniot speed of the current traces.
"""
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from enum import Enum, auto
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.errors import AmplitudeTooLarge, CFLViolation, DegenerateJump, SupportTouchesShock
from core.profile import WaveProfile
from utils.grid_utils import cell_centres, derivative, one_sided_trace
from config import SIM_CFL, SIM_CFL_LIMIT, SIM_GRAD_THRESHOLD, SIM_OUTPUT_INTERVAL, SIM_SHOCK_CLEARANCE

logger = logging.getLogger(__name__)

STANDARD_OBSERVABLES = ("psi", "psi_dot", "sup_v", "sup_vx", "sup_zeta",
                        "v_minus", "v_plus", "zeta_minus", "zeta_plus")


@dataclass(frozen=True)
class TwinGrid:
    """Uniform cells on [-L_minus, 0) and (0, L_plus]."""
    h: float
    L_minus: float
    L_plus: float

    def __post_init__(self):
        if self.h <= 0 or self.L_minus <= 0 or self.L_plus <= 0:
            raise ValueError("grid spacing and extents must be positive")
        for extent in (self.L_minus, self.L_plus):
            n = round(extent / self.h)
            if n < 3 or abs(n * self.h - extent) > 1e-9 * extent:
                raise ValueError(f"extent {extent} is not a whole number (>= 3) of cells of {self.h}")

    @property
    def n_minus(self) -> int:
        return int(round(self.L_minus / self.h))

    @property
    def n_plus(self) -> int:
        return int(round(self.L_plus / self.h))

    @property
    def x_minus(self) -> np.ndarray:
        return cell_centres(-self.L_minus, 0.0, self.h)

    @property
    def x_plus(self) -> np.ndarray:
        return cell_centres(0.0, self.L_plus, self.h)

    @property
    def x(self) -> np.ndarray:
        return np.concatenate((self.x_minus, self.x_plus))

    def split(self, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return values[:self.n_minus], values[self.n_minus:]

    def traces(self, values: np.ndarray) -> Tuple[float, float]:
        """Values at 0- and 0+ by linear one-sided extrapolation."""
        left, right = self.split(values)
        return float(one_sided_trace(left[-1], left[-2])), float(one_sided_trace(right[0], right[1]))

    def side_derivative(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        """Derivative computed separately on each half-line."""
        left, right = self.split(values)
        return np.concatenate((derivative(left, self.h, order), derivative(right, self.h, order)))


@dataclass(frozen=True)
class ProfileSamples:
    """Profile quantities frozen on the left nodes of a grid."""
    u_bar: np.ndarray
    du_bar: np.ndarray
    z_bar: np.ndarray
    dz_bar: np.ndarray
    dz_bar_0: float
    d2z_bar_0: float

    @classmethod
    def from_profile(cls, profile: WaveProfile, grid: TwinGrid) -> "ProfileSamples":
        x = grid.x_minus
        du, _, _ = profile.derivatives(x)
        zero = np.array([-1e-300])
        return cls(profile.u_at(x), du, profile.z_bar(x), profile.dz_bar(x),
                   float(profile.dz_bar(zero)[0]), float(profile.d2z_bar(zero)[0]))


@dataclass(frozen=True)
class PerturbationState:
    """Shock-frame perturbation at time t; v and zeta are indexed like grid.x."""
    grid: TwinGrid
    v: np.ndarray
    zeta: np.ndarray
    psi: float
    psi_dot: float
    t: float
    profile: WaveProfile
    samples: ProfileSamples = field(repr=False, compare=False, default=None)


class RunStatus(Enum):
    """Continuation alternatives of a run."""
    COMPLETED = auto()
    AMPLITUDE_EXCURSION = auto()
    GRADIENT_BLOWUP = auto()


@dataclass
class RunThresholds:
    rho: float
    grad_threshold: float = SIM_GRAD_THRESHOLD


@dataclass
class RunOutcome:
    status: RunStatus
    T_end: float
    history: Dict[str, np.ndarray]
    state: Optional[PerturbationState] = None


def rh_speed_from_traces(profile: WaveProfile, v_minus: float, v_plus: float) -> float:
    """(f(u0 + v(0-)) - f(v(0+))) / (u0 + v(0-) - v(0+))."""
    u0 = profile.params.u0
    f = profile.flux.f
    denom = u0 + v_minus - v_plus
    if abs(denom) < 0.5 * u0:
        raise DegenerateJump(f"jump {denom:.6g} below u0/2")
    return float((f(u0 + v_minus) - f(v_plus)) / denom)


def rh_partials(profile: WaveProfile, v_minus, v_plus):
    """Partial derivatives of the Rankine-Hugoniot speed with respect to both traces."""
    u0 = profile.params.u0
    flux = profile.flux
    denom = u0 + v_minus - v_plus
    speed = (flux.f(u0 + v_minus) - flux.f(v_plus)) / denom
    return (flux.df(u0 + v_minus) - speed) / denom, (speed - flux.df(v_plus)) / denom


def rh_lipschitz_constant(profile: WaveProfile, eta: float, samples: int = 41) -> float:
    """C_tilde with |psi' - sigma|^2 <= C_tilde (v(0-)^2 + v(0+)^2) on the eta-box."""
    a, b = np.meshgrid(np.linspace(-eta, eta, samples), np.linspace(-eta, eta, samples))
    r_a, r_b = rh_partials(profile, a, b)
    return float(np.max(np.abs(r_a)) ** 2 + np.max(np.abs(r_b)) ** 2)


def rh_speed(state: PerturbationState) -> float:
    v_minus, v_plus = state.grid.traces(state.v)
    return rh_speed_from_traces(state.profile, v_minus, v_plus)


def _as_field(values, grid: TwinGrid) -> np.ndarray:
    if values is None:
        return np.zeros(grid.n_minus + grid.n_plus)
    if callable(values):
        return np.asarray(values(grid.x), dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_minus + grid.n_plus,):
        raise ValueError(f"field has shape {values.shape}, grid has {grid.n_minus + grid.n_plus} nodes")
    return values.copy()


def init_state(profile: WaveProfile, v0, zeta0, grid: TwinGrid, eta: Optional[float] = None,
               clearance: float = SIM_SHOCK_CLEARANCE) -> PerturbationState:
    """State at t = 0 with psi = 0 and psi' from the initial traces."""
    v = _as_field(v0, grid)
    zeta = _as_field(zeta0, grid)
    eta = profile.params.u0 / 4 if eta is None else eta
    near = np.abs(grid.x) < max(clearance, grid.h)
    if np.any(v[near] != 0) or np.any(zeta[near] != 0):
        raise SupportTouchesShock(f"initial data must vanish on |x| < {max(clearance, grid.h):.3g}")
    amplitude = max(np.max(np.abs(v)), np.max(np.abs(zeta)))
    if amplitude > eta:
        raise AmplitudeTooLarge(f"sup norm {amplitude:.3g} exceeds eta = {eta:.3g}")
    samples = ProfileSamples.from_profile(profile, grid)
    state = PerturbationState(grid, v, zeta, 0.0, 0.0, 0.0, profile, samples)
    return replace(state, psi_dot=rh_speed(state))


def _upwind_divergence(flux_values: np.ndarray, speeds: np.ndarray, h: float) -> np.ndarray:
    """(F_{j+1/2} - F_{j-1/2}) / h with the donor cell picked by the face speed."""
    F = np.concatenate((flux_values[:1], flux_values, flux_values[-1:]))
    a = np.concatenate((speeds[:1], speeds, speeds[-1:]))
    a_face = 0.5 * (a[:-1] + a[1:])
    face_flux = np.where(a_face >= 0, F[:-1], F[1:])
    return (face_flux[1:] - face_flux[:-1]) / h


def _upwind_gradient(values: np.ndarray, velocity: float, h: float) -> np.ndarray:
    """One-sided difference against the transport velocity; zero-order ghosts at the ends."""
    padded = np.concatenate((values[:1], values, values[-1:]))
    if velocity >= 0:
        return (padded[1:-1] - padded[:-2]) / h
    return (padded[2:] - padded[1:-1]) / h


def _ignition(u: np.ndarray, u_i: float) -> np.ndarray:
    return (u > u_i).astype(float)


def _rates(state: PerturbationState, psi_dot: float):
    """Time derivatives of v and zeta for the frozen psi'."""
    grid, prof, s = state.grid, state.profile, state.samples
    flux = prof.flux
    k, q, u_i = prof.params.k, prof.params.q, prof.params.u_i
    sigma = prof.sigma
    v_l, v_r = grid.split(state.v)
    z_l, z_r = grid.split(state.zeta)

    u_l = s.u_bar + v_l
    H_l = flux.f(u_l) - flux.f(s.u_bar) - psi_dot * v_l
    a_l = flux.df(u_l) - psi_dot
    H_r = flux.f(v_r) - flux.f(0.0) - psi_dot * v_r
    a_r = flux.df(v_r) - psi_dot

    phi_l = _ignition(u_l, u_i)
    phi_r = _ignition(v_r, u_i)
    dv_l = -_upwind_divergence(H_l, a_l, grid.h) + (psi_dot - sigma) * s.du_bar \
        + k * q * phi_l * z_l - k * q * (1.0 - phi_l) * s.z_bar
    dv_r = -_upwind_divergence(H_r, a_r, grid.h) + k * q * phi_r * (1.0 + z_r)

    zeta_x = _upwind_gradient(state.zeta, -psi_dot, grid.h)
    zx_l, zx_r = grid.split(zeta_x)
    dz_l = psi_dot * zx_l + (psi_dot - sigma) * s.dz_bar - k * phi_l * z_l + k * (1.0 - phi_l) * s.z_bar
    dz_r = psi_dot * zx_r - k * phi_r * (1.0 + z_r)
    return np.concatenate((dv_l, dv_r)), np.concatenate((dz_l, dz_r))


def max_speed(state: PerturbationState) -> float:
    """max(|psi' - f'(u_bar + v)|, |psi'|) over both half-lines."""
    flux = state.profile.flux
    v_l, v_r = state.grid.split(state.v)
    speeds = np.concatenate((flux.df(state.samples.u_bar + v_l), flux.df(v_r)))
    return float(max(np.max(np.abs(state.psi_dot - speeds)), abs(state.psi_dot)))


def step(state: PerturbationState, dt: float) -> PerturbationState:
    """One Heun step of (v, zeta, psi)."""
    courant = dt * max_speed(state) / state.grid.h
    if courant > SIM_CFL_LIMIT * (1.0 + 1e-12):
        raise CFLViolation(f"Courant number {courant:.4g} > {SIM_CFL_LIMIT}")
    dv1, dz1 = _rates(state, state.psi_dot)
    predictor = replace(state, v=state.v + dt * dv1, zeta=state.zeta + dt * dz1,
                        psi=state.psi + dt * state.psi_dot, t=state.t + dt)
    psi_dot_pred = rh_speed(predictor)
    dv2, dz2 = _rates(predictor, psi_dot_pred)
    new = replace(state,
                  v=state.v + 0.5 * dt * (dv1 + dv2),
                  zeta=state.zeta + 0.5 * dt * (dz1 + dz2),
                  psi=state.psi + 0.5 * dt * (state.psi_dot + psi_dot_pred),
                  t=state.t + dt)
    return replace(new, psi_dot=rh_speed(new))


def _observe(state: PerturbationState) -> Dict[str, float]:
    v_minus, v_plus = state.grid.traces(state.v)
    z_minus, z_plus = state.grid.traces(state.zeta)
    return {
        "psi": state.psi,
        "psi_dot": state.psi_dot,
        "sup_v": float(np.max(np.abs(state.v))),
        "sup_vx": float(np.max(np.abs(state.grid.side_derivative(state.v)))),
        "sup_zeta": float(np.max(np.abs(state.zeta))),
        "v_minus": v_minus,
        "v_plus": v_plus,
        "zeta_minus": z_minus,
        "zeta_plus": z_plus,
    }


def run(state: PerturbationState, T_max: float, observables: Optional[Sequence[str]] = None,
        thresholds: Optional[RunThresholds] = None, output_interval: float = SIM_OUTPUT_INTERVAL,
        cfl: float = SIM_CFL,
        energy_probe: Optional[Callable[[PerturbationState], Dict[str, float]]] = None) -> RunOutcome:
    """Advance until T_max, an amplitude excursion, or gradient blowup."""
    names = list(STANDARD_OBSERVABLES if observables is None else observables)
    unknown = set(names) - set(STANDARD_OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables {sorted(unknown)}")
    if thresholds is None:
        thresholds = RunThresholds(rho=state.profile.params.u0 / 8)

    history: Dict[str, List[float]] = {"t": []}

    def record(s: PerturbationState):
        observed = _observe(s)
        history["t"].append(s.t)
        for name in names:
            history.setdefault(name, []).append(observed[name])
        if energy_probe is not None:
            for name, value in energy_probe(s).items():
                history.setdefault(name, []).append(value)
        return observed

    status = RunStatus.COMPLETED
    record(state)
    next_output = state.t + output_interval
    n_steps = 0
    grid = state.grid
    logger.info(f"[ShockFrame] run to T = {T_max} on {grid.n_minus}+{grid.n_plus} cells, h = {grid.h}")
    while state.t < T_max - 1e-12 * max(1.0, T_max):
        dt = cfl * state.grid.h / max(max_speed(state), 1e-12)
        dt = min(dt, T_max - state.t, next_output - state.t)
        state = step(state, dt)
        n_steps += 1
        sup_amp = max(np.max(np.abs(state.v)), np.max(np.abs(state.zeta)))
        sup_grad = np.max(np.abs(state.grid.side_derivative(state.v)))
        if sup_amp >= thresholds.rho:
            status = RunStatus.AMPLITUDE_EXCURSION
        elif sup_grad >= thresholds.grad_threshold:
            status = RunStatus.GRADIENT_BLOWUP
        if status is not RunStatus.COMPLETED:
            record(state)
            break
        if state.t >= next_output - 1e-12:
            record(state)
            logger.debug(f"[ShockFrame] t = {state.t:.4f}, psi' = {state.psi_dot:.12g}")
            next_output += output_interval

    if history["t"][-1] != state.t:
        record(state)
    logger.info(f"[ShockFrame] {status.name} at t = {state.t:.6g} after {n_steps} steps")
    return RunOutcome(status, state.t, {k: np.asarray(v) for k, v in history.items()}, state)


def psi_second_derivative(state: PerturbationState) -> float:
    """psi'' from the time derivative of the Rankine-Hugoniot relation."""
    dv, _ = _rates(state, state.psi_dot)
    dv_minus, dv_plus = state.grid.traces(dv)
    v_minus, v_plus = state.grid.traces(state.v)
    r_a, r_b = rh_partials(state.profile, v_minus, v_plus)
    return float(r_a * dv_minus + r_b * dv_plus)


@dataclass
class BoundaryReport:
    """Trace relations at the shock; every value is 0 for the unperturbed state."""
    zeta_mismatch: float
    rh_ratio: float
    psi_ddot: float
    zeta_x_residual: float
    zeta_xx_residual: float
    zeta_x_ratio: float
    zeta_xx_ratio: float


def boundary_diagnostics(state: PerturbationState) -> BoundaryReport:
    grid, prof = state.grid, state.profile
    k, sigma = prof.params.k, prof.sigma
    dz0, d2z0 = state.samples.dz_bar_0, state.samples.d2z_bar_0
    psi_dot = state.psi_dot
    tiny = np.finfo(float).eps

    v_minus, v_plus = grid.traces(state.v)
    z_minus, z_plus = grid.traces(state.zeta)
    zx_minus, zx_plus = grid.traces(grid.side_derivative(state.zeta, 1))
    zxx_minus, zxx_plus = grid.traces(grid.side_derivative(state.zeta, 2))
    psi_ddot = psi_second_derivative(state)

    rh_ratio = (psi_dot - sigma) ** 2 / (v_minus ** 2 + v_plus ** 2 + tiny)

    # zeta_x(0-) = zeta_x(0+) + (k zeta(0-) - (psi' - sigma) z_bar'(0-)) / psi'
    x_terms = (zx_plus, k * z_minus / psi_dot, -(psi_dot - sigma) * dz0 / psi_dot)
    zeta_x_residual = abs(zx_minus - sum(x_terms))
    xx_terms = (zxx_plus,
                k * zx_minus / psi_dot,
                k * zx_plus / psi_dot,
                -(psi_dot - sigma) * d2z0 / psi_dot,
                -psi_ddot * dz0 / psi_dot ** 2,
                -(k * z_minus - (psi_dot - sigma) * dz0) * psi_ddot / psi_dot ** 3)
    zeta_xx_residual = abs(zxx_minus - sum(xx_terms))

    return BoundaryReport(
        zeta_mismatch=abs(z_minus - z_plus),
        rh_ratio=float(rh_ratio),
        psi_ddot=psi_ddot,
        zeta_x_residual=float(zeta_x_residual),
        zeta_xx_residual=float(zeta_xx_residual),
        zeta_x_ratio=float(abs(zx_minus) / (sum(abs(t) for t in x_terms) + tiny)),
        zeta_xx_ratio=float(abs(zxx_minus) / (sum(abs(t) for t in xx_terms) + tiny)),
    )
