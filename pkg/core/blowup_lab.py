"""
Blowup experiments on frozen shock backgrounds.

Perturbations of a background are evolved by a MUSCL finite-volume scheme
with characteristic-wise local Lax-Friedrichs dissipation, on a window that
slides with the tracked characteristic family, while a characteristic
ensemble rides on the field and flags the gradient catastrophe.
"""
import logging
import os
import sys
from dataclasses import dataclass, field
from enum import Enum, auto
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.backgrounds import BackgroundWave, MajdaBackground, ZndBackground
from core.char_fields import (
    CharEnsemble, HypSystem, RiccatiForecast, advance_ensemble, eigen_frame, gamma_at_infinity,
    make_ensemble, riccati_forecast, spectral_gap,
)
from core.errors import BlownUp, DistanceTooSmall, NonGenuinelyNonlinear, TemperatureGuardViolated
from core.flux_models import make_flux
from core.profile import WaveParams, inert_profile, integrate_profile
from core.shock_frame_sim import RunOutcome, RunStatus, RunThresholds, TwinGrid, init_state, run
from core.weighted_energy import fit_decay_rate, damping_residual, weighted_sobolev_norm
from utils.grid_utils import bump, unit_curvature_bump
from config import (
    BLOWUP_AMP_FACTOR, BLOWUP_ENSEMBLE_DT, BLOWUP_GRAD_FACTOR, BLOWUP_GRID_FACTOR, BLOWUP_H,
    BLOWUP_MARGIN, BLOWUP_OUTPUT_INTERVAL, BLOWUP_STRIP_BLOCK, BLOWUP_T_MAX, BLOWUP_WINDOW,
    CHAR_GNL_TOL, CHAR_PROBE_DECAYS, CHAR_SEEDS, GROWTH_ALPHA, GROWTH_DISTANCE, GROWTH_T_MAX,
    GROWTH_WIDTH, NEG_ALPHA, NEG_BUMP_CENTER, NEG_BUMP_HEIGHT, NEG_BUMP_WIDTH, NEG_COEFFS,
    NEG_CONTROL_T_MAX, NEG_EXTENT_PLUS, NEG_H, NEG_T_MAX, NEG_U0, NO_DAMPING_AMPLITUDE, SIM_CFL,
)

logger = logging.getLogger(__name__)

Shape = Callable[[np.ndarray, int], np.ndarray]


class Verdict(Enum):
    BLOWUP = auto()
    NO_BLOWUP = auto()


@dataclass(frozen=True)
class BlowupData:
    """theta * shape(x) * direction: a bump carried by one characteristic family."""
    theta: float
    x0: float
    family: int
    direction: np.ndarray
    shape: Shape = field(repr=False)
    gamma_inf: float = 0.0
    W0: float = 0.0
    s0: float = 1.0

    @property
    def support(self) -> Tuple[float, float]:
        return self.x0 - self.s0 / 2, self.x0 + self.s0 / 2

    @property
    def distance(self) -> float:
        return -self.support[1]

    def field(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.theta * self.shape(x, 0)[:, None] * self.direction[None, :]

    def derivative(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.theta * self.shape(x, 1)[:, None] * self.direction[None, :]


def distance_requirement(theta: float, T: float, s0: float, W0: float, margin: float = BLOWUP_MARGIN) -> float:
    """margin * max{1, T, |log s0|, |log W0|}; theta enters through W0."""
    if min(theta, T, s0, W0, margin) <= 0:
        raise ValueError("distance_requirement takes positive arguments")
    return margin * max(1.0, T, abs(np.log(s0)), abs(np.log(W0)))


def background_envelope(system: HypSystem, d: float, samples: int = 401) -> float:
    """sup over x <= -d of |A(x, 0) - A(-inf, 0)| + |G(x, 0)|."""
    far = -d - 2 * CHAR_PROBE_DECAYS / system.decay_rate
    x = np.linspace(far, -d, samples)
    zero = np.zeros((samples, system.n))
    A = system.matrix(x, zero)
    A_inf = system.matrix(np.array([far]), np.zeros((1, system.n)))[0]
    G = system.source(x, zero)
    return float(np.max(np.abs(A - A_inf).max(axis=(1, 2)) + np.abs(G).max(axis=(1, 2))))


def _far_field_frame(system: HypSystem):
    probe = -CHAR_PROBE_DECAYS / system.decay_rate
    return eigen_frame(system, probe, np.zeros(system.n))


def blowup_family(system: HypSystem) -> int:
    """Fastest outgoing genuinely nonlinear family, else the most nonlinear one."""
    frame = _far_field_frame(system)
    gammas = [abs(gamma_at_infinity(system, i)) for i in range(system.n)]
    gnl = [i for i in range(system.n) if gammas[i] > CHAR_GNL_TOL]
    if not gnl:
        raise NonGenuinelyNonlinear("no genuinely nonlinear family")
    outgoing = [i for i in gnl if frame.lambdas[i] < 0]
    if outgoing:
        return min(outgoing, key=lambda i: frame.lambdas[i])
    return max(gnl, key=lambda i: gammas[i])


def make_blowup_data(system: HypSystem, theta: float, x0: float, family: Optional[int] = None,
                     T: Optional[float] = None, margin: float = BLOWUP_MARGIN, shape: Optional[Shape] = None,
                     check_distance: bool = True) -> BlowupData:
    """theta phi(x - x0) xi_inf for a genuinely nonlinear family, placed far enough from the shock."""
    family = blowup_family(system) if family is None else family
    gamma = gamma_at_infinity(system, family)
    if abs(gamma) <= CHAR_GNL_TOL:
        raise NonGenuinelyNonlinear(f"family {family}: gamma_iii at infinity = {gamma:.3g}")
    if shape is None:
        shape = lambda x, order: unit_curvature_bump(x, x0, order)
    direction = _far_field_frame(system).xi[:, family]
    data = BlowupData(theta, x0, family, direction, shape, gamma)

    xs = np.linspace(*data.support, 2001)
    eta = eigen_frame(system, xs, data.field(xs)).eta[:, family, :]
    w = np.einsum("na,na->n", eta, data.derivative(xs))
    W0 = float(np.max(np.sign(gamma) * w))
    if W0 <= 0:
        raise ValueError("data carries no compressive slope for this family")
    data = BlowupData(theta, x0, family, direction, shape, gamma, W0)

    if check_distance:
        if data.distance <= 0:
            raise DistanceTooSmall("support reaches the shock")
        T = riccati_forecast(gamma, W0).T_star_upper if T is None else T
        required = distance_requirement(theta, T, data.s0, W0, margin)
        if data.distance < required:
            raise DistanceTooSmall(f"distance {data.distance:.4g} < required {required:.4g}")
        envelope = background_envelope(system, data.distance)
        if envelope > min(1.0, data.s0, W0):
            raise DistanceTooSmall(f"background envelope {envelope:.3g} at d = {data.distance:.4g} "
                                   f"exceeds min(1, s0, W0)")
    logger.info(f"[Blowup] data: theta = {theta}, x0 = {x0:.4g}, family {family}, "
                f"gamma_inf = {gamma:.6g}, W0 = {W0:.6g}")
    return data


def place_blowup_data(system: HypSystem, theta: float, family: Optional[int] = None,
                      margin: float = BLOWUP_MARGIN, window: float = BLOWUP_WINDOW,
                      shape_fn: Callable[[np.ndarray, float, int], np.ndarray] = unit_curvature_bump) -> BlowupData:
    """Blowup data at the smallest admissible distance; incoming families also need room to travel."""
    family = blowup_family(system) if family is None else family
    far = -2 * CHAR_PROBE_DECAYS / system.decay_rate
    probe = make_blowup_data(system, theta, far, family, shape=lambda x, o: shape_fn(x, far, o),
                             check_distance=False)
    T = riccati_forecast(probe.gamma_inf, probe.W0).T_star_upper
    d = distance_requirement(theta, T, probe.s0, probe.W0, margin)
    speed = float(_far_field_frame(system).lambdas[family])
    if speed > 0:
        d = max(d, 1.1 * speed * T + window / 2 + 1.0)
    d = max(d, window / 2)
    x0 = -(d + probe.s0 / 2) * (1.0 + 1e-9)
    return make_blowup_data(system, theta, x0, family, T, margin,
                            shape=lambda x, o: shape_fn(x, x0, o))


@dataclass
class GasState:
    """Perturbation on the current window together with the background samples."""
    x: np.ndarray
    U_hat: np.ndarray
    z_hat: np.ndarray
    U_bar: np.ndarray
    z_bar: np.ndarray
    t: float

    @property
    def U(self) -> np.ndarray:
        return self.U_bar + self.U_hat

    @property
    def v_sp(self) -> np.ndarray:
        return self.U[:, 0]

    @property
    def u_vel(self) -> np.ndarray:
        return self.U[:, 1]

    @property
    def E_tot(self) -> np.ndarray:
        return self.U[:, 2]

    @property
    def z(self) -> np.ndarray:
        return self.z_bar + self.z_hat


def _check_temperature(background: BackgroundWave, state: GasState, T_i: Optional[float]):
    if T_i is None or not hasattr(background, "temperature"):
        return
    T_min = float(np.min(background.temperature(state.U)))
    if T_min <= T_i:
        raise TemperatureGuardViolated(f"temperature {T_min:.6g} <= T_i = {T_i:.6g} at t = {state.t:.4g}")


def znd_reduce(state: GasState, background: ZndBackground, T_i: Optional[float] = None) -> HypSystem:
    """The 3x3 gas-dynamics system for perturbations with z_hat = 0."""
    if np.any(state.z_hat != 0):
        raise ValueError("the reduction needs z_hat = 0")
    T_i = background.default_ignition_temperature() if T_i is None else T_i
    _check_temperature(background, state, T_i)
    return background.hyp_system()


def _reactant_bar(background: BackgroundWave, x: np.ndarray) -> np.ndarray:
    if isinstance(background, ZndBackground):
        return background.reactant(x)
    return np.exp(background.decay_rate * x)


@dataclass
class _View:
    """Background seen by the window: faces carry the flux and the eigenframe, cells the state."""
    U_face: np.ndarray
    F_face: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    U_cell: np.ndarray
    z_cell: np.ndarray


class _Strip:
    """Background on faces origin + j h and cells origin + (j + 1/2) h, cached in blocks of consecutive j.

    Positions past the shock are clamped to x = 0; the window never reads them.
    """

    def __init__(self, background: BackgroundWave, system: HypSystem, h: float, origin: float,
                 block: int = BLOWUP_STRIP_BLOCK):
        self.background = background
        self.system = system
        self.h = h
        self.origin = origin
        self.block = block
        self._blocks: Dict[int, Dict[str, np.ndarray]] = {}

    def _fill(self, b: int) -> Dict[str, np.ndarray]:
        if b not in self._blocks:
            j = b * self.block + np.arange(self.block)
            faces = np.minimum(self.origin + j * self.h, 0.0)
            cells = np.minimum(self.origin + (j + 0.5) * self.h, 0.0)
            U_face = self.background.state(faces)
            frame = eigen_frame(self.system, faces, np.zeros_like(U_face))
            self._blocks[b] = {
                "U_face": U_face,
                "F_face": self.background.flux_speeds(U_face)[0],
                "eta": frame.eta,
                "xi": frame.xi,
                "U_cell": self.background.state(cells),
                "z_cell": _reactant_bar(self.background, cells),
            }
            logger.debug(f"[Blowup] background block {b} cached, x in [{faces[0]:.4g}, {faces[-1]:.4g}]")
        return self._blocks[b]

    def take(self, key: str, start: int, count: int) -> np.ndarray:
        pieces = []
        j, end = start, start + count
        while j < end:
            b = j // self.block
            stop = min(end, (b + 1) * self.block)
            pieces.append(self._fill(b)[key][j - b * self.block:stop - b * self.block])
            j = stop
        return pieces[0] if len(pieces) == 1 else np.concatenate(pieces)

    def view(self, offset: int, n_cells: int) -> _View:
        lo, hi = offset // self.block, (offset + n_cells) // self.block
        for b in [b for b in self._blocks if b < lo - 1 or b > hi + 1]:
            del self._blocks[b]
        face = lambda key: self.take(key, offset, n_cells + 1)
        cell = lambda key: self.take(key, offset, n_cells)
        return _View(face("U_face"), face("F_face"), face("eta"), face("xi"), cell("U_cell"), cell("z_cell"))


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def _field_rate(background: BackgroundWave, view: _View, U: np.ndarray, h: float,
                frame_speed: float) -> Tuple[np.ndarray, float]:
    """-(F_{j+1/2} - F_{j-1/2}) / h in a frame moving at frame_speed, and the largest face speed.

    Face states are minmod-limited; the dissipation is local Lax-Friedrichs applied family by
    family in the background eigenframe, each family with its own speed.
    """
    Ug = np.concatenate((U[:1], U, U[-1:]))
    d = np.diff(Ug, axis=0)
    slopes = np.zeros_like(Ug)
    slopes[1:-1] = _minmod(d[:-1], d[1:])
    WL = Ug[:-1] + 0.5 * slopes[:-1]
    WR = Ug[1:] - 0.5 * slopes[1:]
    FL, speed_L = background.flux_speeds(view.U_face + WL)
    FR, speed_R = background.flux_speeds(view.U_face + WR)
    a = np.maximum(np.abs(speed_L - frame_speed), np.abs(speed_R - frame_speed))
    jump = np.einsum("nia,na->ni", view.eta, WR - WL)
    dissipation = np.einsum("nai,ni->na", view.xi, a * jump)
    shift = background.sigma + frame_speed
    F = 0.5 * (FL + FR - shift * (WL + WR) - dissipation) - view.F_face
    return -np.diff(F, axis=0) / h, float(np.max(a))


def _reactant_rate(background: BackgroundWave, z: np.ndarray, h: float, frame_speed: float) -> np.ndarray:
    """z_t - (sigma + frame_speed) z_x = -k z, upwinded against the transport velocity."""
    k = background.decay_rate * background.sigma
    c = background.sigma + frame_speed
    padded = np.concatenate((z[:1], z, z[-1:]))
    if c >= 0:
        z_x = (padded[2:] - padded[1:-1]) / h
    else:
        z_x = (padded[1:-1] - padded[:-2]) / h
    return c * z_x - k * z


@dataclass
class _Snapshot:
    """Field on uniform cells starting at `left` (a cell centre) at time t."""
    t: float
    left: float
    h: float
    U: np.ndarray
    U_x: np.ndarray

    def sample(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Linear interpolation, zero outside the window."""
        q = (x - self.left) / self.h
        i = np.clip(np.floor(q).astype(int), 0, len(self.U) - 2)
        f = (q - i)[:, None]
        inside = ((q >= 0) & (q <= len(self.U) - 1))[:, None]
        u = np.where(inside, (1 - f) * self.U[i] + f * self.U[i + 1], 0.0)
        u_x = np.where(inside, (1 - f) * self.U_x[i] + f * self.U_x[i + 1], 0.0)
        return u, u_x


def _provider(prev: _Snapshot, cur: _Snapshot, frame_speed: float):
    """Blend two snapshots, each carried along at frame_speed to the requested time."""
    span = cur.t - prev.t

    def provide(x, t):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u1, ux1 = prev.sample(x - frame_speed * (t - prev.t))
        if span <= 0:
            return u1, ux1
        u2, ux2 = cur.sample(x - frame_speed * (t - cur.t))
        s = min(max((t - prev.t) / span, 0.0), 1.0)
        return (1 - s) * u1 + s * u2, (1 - s) * ux1 + s * ux2

    return provide


def _finish_detectors(system: HypSystem, ensemble: CharEnsemble, provider, span: float):
    """Carry the ensemble past its first flag until the other detector fires, for at most span."""
    try:
        advance_ensemble(system, ensemble, provider, span, require_both=True)
    except BlownUp:
        pass


@dataclass
class GasTrajectory:
    history: Dict[str, np.ndarray]
    h: float
    T_star: Optional[float] = None
    flagged_family: Optional[int] = None
    flagged_seed: Optional[int] = None
    W0: float = 0.0
    w_at_flag: float = 0.0
    forecast: Optional[RiccatiForecast] = None
    ensemble: Optional[CharEnsemble] = None
    state: Optional[GasState] = None
    T_rho: Optional[float] = None
    T_w: Optional[float] = None


def simulate_gas(background: BackgroundWave, data: BlowupData, T_max: float = BLOWUP_T_MAX,
                 h: float = BLOWUP_H, window: float = BLOWUP_WINDOW, cfl: float = SIM_CFL,
                 ensemble_dt: float = BLOWUP_ENSEMBLE_DT, output_interval: float = BLOWUP_OUTPUT_INTERVAL,
                 T_i: Optional[float] = None, seeds: int = CHAR_SEEDS, track_ensemble: bool = True,
                 z_hat0: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 observer: Optional[Callable[[GasState], Dict[str, float]]] = None) -> GasTrajectory:
    """Evolve background + perturbation until the ensemble flags blowup or T_max.

    The window slides at the far-field speed of the data's family, so the tracked wave stays
    inside it while the other families leave through its edges. Background values come from
    a strip aligned with the starting cells, read at the nearest whole-cell shift.
    """
    system = background.hyp_system()
    speed = float(_far_field_frame(system).lambdas[data.family])
    n_cells = int(round(window / h))
    left0 = data.x0 - window / 2
    x_start = left0 + (np.arange(n_cells) + 0.5) * h
    strip = _Strip(background, system, h, left0)
    offset = 0
    view = strip.view(offset, n_cells)
    U = data.field(x_start)
    reacting = z_hat0 is not None
    z = np.asarray(z_hat0(x_start), dtype=float) if reacting else np.zeros(n_cells)
    # the reactant is carried at -(sigma + speed) in the window
    z_speed = abs(background.sigma + speed) if reacting else 0.0
    t = 0.0

    ensemble = None
    forecast = None
    if track_ensemble and data.theta != 0:
        support = np.linspace(*data.support, seeds)
        fine = np.linspace(*data.support, 4001)
        eta = eigen_frame(system, fine, data.field(fine)).eta[:, data.family, :]
        slope = np.sign(data.gamma_inf) * np.einsum("na,na->n", eta, data.derivative(fine))
        seed_x = np.unique(np.append(support, fine[np.argmax(slope)]))
        gap = spectral_gap(system, x_start[:: max(1, n_cells // 20)]).gap
        t0 = data.s0 / gap if np.isfinite(gap) and gap > 0 else 0.0
        snap = _Snapshot(t, x_start[0], h, U.copy(), np.gradient(U, h, axis=0))
        ensemble = make_ensemble(system, _provider(snap, snap, speed), seed_x, [data.family], t0=t0,
                                 probe_x=x_start[:: max(1, n_cells // 120)])
        forecast = riccati_forecast(data.gamma_inf, data.W0, t0)
        logger.info(f"[Blowup] Riccati forecast T* <= {forecast.T_star_upper:.6g} (t0 = {t0:.4g})")

    history: Dict[str, List[float]] = {}

    def record():
        x = x_start + speed * t
        st = GasState(x, U, z, view.U_cell, view.z_cell, t)
        background.check_state(st.U)
        _check_temperature(background, st, T_i)
        row = {
            "t": t,
            "sup_amp": float(np.max(np.abs(U))),
            "sup_grad": float(np.max(np.abs(np.gradient(U, h, axis=0)))),
            "min_rho": float(np.min(ensemble.rho)) if ensemble is not None else 1.0,
            "max_w": float(np.max(np.abs(ensemble.w))) if ensemble is not None else 0.0,
            "z_hat_max": float(np.max(np.abs(z))),
            "window_left": float(x[0] - 0.5 * h),
        }
        if observer is not None:
            row.update(observer(st))
        for key, value in row.items():
            history.setdefault(key, []).append(value)

    record()
    traj = GasTrajectory({}, h, W0=data.W0, forecast=forecast, ensemble=ensemble)
    next_output = output_interval
    next_ensemble = ensemble_dt
    last_snap = None if ensemble is None else snap
    steps = 0
    logger.info(f"[Blowup] {background.name}: {n_cells} cells, h = {h}, window speed {speed:.4g}, T_max = {T_max}")
    while t < T_max - 1e-12:
        k1, a_max = _field_rate(background, view, U, h, speed)
        a_max = max(a_max, z_speed)
        dt = min(cfl * h / a_max if a_max > 0 else np.inf, output_interval, T_max - t)
        U1 = U + dt * k1
        k2, _ = _field_rate(background, view, U1, h, speed)
        U = 0.5 * (U + U1 + dt * k2)
        if reacting:
            zp = z + dt * _reactant_rate(background, z, h, speed)
            z = 0.5 * (z + zp + dt * _reactant_rate(background, zp, h, speed))
        t += dt
        steps += 1

        shift = int(round(speed * t / h))
        if shift != offset:
            if left0 + (shift + n_cells) * h >= 0:
                raise DistanceTooSmall(f"window reached the shock at t = {t:.4g}")
            offset = shift
            view = strip.view(offset, n_cells)

        flagged = False
        if ensemble is not None and (t >= next_ensemble - 1e-12 or t >= T_max - 1e-12):
            snap = _Snapshot(t, x_start[0] + speed * t, h, U.copy(), np.gradient(U, h, axis=0))
            provider = _provider(last_snap, snap, speed)
            try:
                advance_ensemble(system, ensemble, provider, t - ensemble.t)
            except BlownUp as e:
                traj.T_star = e.t
                traj.flagged_family = e.family
                traj.flagged_seed = e.seed
                traj.w_at_flag = float(np.max(np.abs(ensemble.w)))
                _finish_detectors(system, ensemble, provider, 2 * h)
                flagged = True
            last_snap = snap
            next_ensemble += ensemble_dt
        if flagged or t >= next_output - 1e-12 or t >= T_max - 1e-12:
            record()
            next_output += output_interval
            logger.debug(f"[Blowup] t = {t:.4f}, sup|U| = {history['sup_amp'][-1]:.4g}, "
                         f"min rho = {history['min_rho'][-1]:.4g}")
        if flagged:
            logger.info(f"[Blowup] ensemble flagged blowup at t = {traj.T_star:.6g} "
                        f"(family {traj.flagged_family}, seed {traj.flagged_seed}) after {steps} steps")
            break

    if ensemble is not None:
        traj.T_rho = ensemble.flag_times.get("rho")
        traj.T_w = ensemble.flag_times.get("w")
    traj.history = {k: np.asarray(v) for k, v in history.items()}
    traj.state = GasState(x_start + speed * t, U, z, view.U_cell, view.z_cell, t)
    return traj


@dataclass
class BlowupVerdict:
    verdict: Verdict
    T_star: Optional[float]
    T_star_grid: Optional[float]
    amp_growth: float
    grad_growth: float
    grid_grad_growth: float
    within_forecast: Optional[bool]
    forecast_upper: Optional[float]
    T_rho: Optional[float] = None
    T_w: Optional[float] = None


def detect_blowup(traj: GasTrajectory, amp_factor: float = BLOWUP_AMP_FACTOR,
                  grad_factor: float = BLOWUP_GRAD_FACTOR, grid_factor: float = BLOWUP_GRID_FACTOR) -> BlowupVerdict:
    """BLOWUP needs the ensemble flag with |w| grown by grad_factor, the grid gradient grown by
    grid_factor and sup|U| kept within amp_factor of its start."""
    hist = traj.history
    amp0 = hist["sup_amp"][0]
    grad0 = hist["sup_grad"][0]
    amp_growth = float(np.max(hist["sup_amp"]) / amp0) if amp0 > 0 else 0.0
    grid_growth = float(np.max(hist["sup_grad"]) / grad0) if grad0 > 0 else 0.0
    if traj.W0 > 0 and traj.w_at_flag > 0:
        grad_growth = traj.w_at_flag / traj.W0
    else:
        grad_growth = grid_growth
    over = np.nonzero(hist["sup_grad"] >= grid_factor * grad0)[0] if grad0 > 0 else np.array([], dtype=int)
    T_grid = float(hist["t"][over[0]]) if over.size else None

    blown = (traj.T_star is not None and grad_growth >= grad_factor and grid_growth >= grid_factor
             and amp_growth <= amp_factor)
    within = None
    upper = None
    if traj.forecast is not None:
        upper = traj.forecast.T_star_upper
        within = traj.T_star is not None and traj.T_star <= upper
    verdict = Verdict.BLOWUP if blown else Verdict.NO_BLOWUP
    if traj.T_star is not None and not blown:
        logger.warning(f"[Blowup] flag at t = {traj.T_star:.4g} without the amplitude/gradient dichotomy "
                       f"(amp x{amp_growth:.3g}, w x{grad_growth:.3g}, grid x{grid_growth:.3g})")
    return BlowupVerdict(verdict, traj.T_star, T_grid, amp_growth, grad_growth, grid_growth, within, upper,
                         traj.T_rho, traj.T_w)


def trajectory_from_run(outcome: RunOutcome, h: float) -> GasTrajectory:
    """View a shock-frame run as a trajectory the blowup detector understands."""
    hist = outcome.history
    history = {
        "t": hist["t"],
        "sup_amp": np.maximum(hist["sup_v"], hist["sup_zeta"]),
        "sup_grad": hist["sup_vx"],
    }
    T_star = outcome.T_end if outcome.status is RunStatus.GRADIENT_BLOWUP else None
    return GasTrajectory(history, h, T_star=T_star)


def unweighted_sobolev_norm(x: np.ndarray, U: np.ndarray, h: float, order: int = 2) -> float:
    """sqrt(sum_{l <= order} int |d^l U|^2 dx) on a uniform window."""
    total = 0.0
    D = np.asarray(U, dtype=float)
    for l in range(order + 1):
        if l:
            D = np.gradient(D, h, axis=0, edge_order=2)
        total += float(trapezoid(np.sum(D.reshape(len(x), -1) ** 2, axis=1), x))
    return float(np.sqrt(total))


def burgers_oracle(m: float, h: float = BLOWUP_H, window: float = BLOWUP_WINDOW,
                   u0: float = 1.0) -> Tuple[float, GasTrajectory]:
    """Burgers data with largest compressive slope m on a constant state; exact blowup at 1/m."""
    params = WaveParams(k=1.0, q=0.0, u0=u0, u_i=u0 / 2, flux=make_flux("burgers"))
    background = MajdaBackground(integrate_profile(params))
    s = np.linspace(-0.5, 0.5, 20001)
    theta = m / float(np.max(unit_curvature_bump(s, 0.0, 1)))
    data = place_blowup_data(background.hyp_system(), theta, window=window)
    traj = simulate_gas(background, data, T_max=2.0 / m, h=h, window=window)
    if traj.T_star is None:
        logger.warning(f"[Blowup] Burgers oracle m = {m}: no flag before t = {2.0 / m}")
    return 1.0 / m, traj


@dataclass
class NoDampingMember:
    n: int
    theta: float
    x0: float
    h2_initial: float
    l2_initial: float
    T_star: Optional[float]
    forecast_upper: float
    excursion: bool
    max_l2_scaled: float
    hyperbola_r2: float


def _hyperbola_r2(t: np.ndarray, w: np.ndarray) -> float:
    """r^2 of a straight-line fit of 1/|w| against t over the second half of the run."""
    keep = slice(len(t) // 2, None)
    t, y = np.asarray(t)[keep], 1.0 / np.asarray(w)[keep]
    if t.size < 3:
        return float("nan")
    slope, intercept = np.polyfit(t, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - slope * t - intercept) ** 2))
    return 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot


def no_damping_member(params: WaveParams, n: int, amplitude: float = NO_DAMPING_AMPLITUDE,
                      h: float = BLOWUP_H, window: float = BLOWUP_WINDOW,
                      margin: float = BLOWUP_MARGIN, T_max: float = BLOWUP_T_MAX) -> NoDampingMember:
    """One member v_n = amplitude phi / (n + 1) of the family, run to its gradient excursion."""
    background = MajdaBackground(integrate_profile(params))
    system = background.hyp_system()
    theta = amplitude / (n + 1)
    data = place_blowup_data(system, theta, margin=margin, window=window)
    x = np.linspace(*data.support, 2001)
    U0 = data.field(x)
    h2 = unweighted_sobolev_norm(x, U0, x[1] - x[0], 2)
    l2 = unweighted_sobolev_norm(x, U0, x[1] - x[0], 0)

    def l2_observer(state: GasState) -> Dict[str, float]:
        return {"l2": unweighted_sobolev_norm(state.x, state.U_hat, h, 0)}

    traj = simulate_gas(background, data, T_max=T_max, h=h, window=window, observer=l2_observer)
    verdict = detect_blowup(traj)
    ens_hist = traj.ensemble.history
    r2 = _hyperbola_r2(np.asarray(ens_hist["t"]), np.asarray(ens_hist["max_w"]))
    member = NoDampingMember(n, theta, data.x0, h2, l2, traj.T_star, traj.forecast.T_star_upper,
                             verdict.verdict is Verdict.BLOWUP,
                             float(np.max(traj.history["l2"]) * np.sqrt(n + 1)), r2)
    logger.info(f"[Blowup] no-damping n = {n}: |v_n|_H2 = {h2:.4g}, T* = {traj.T_star}, "
                f"excursion = {member.excursion}")
    return member


def no_damping_family(params: WaveParams, members: Sequence[int], amplitude: float = NO_DAMPING_AMPLITUDE,
                      h: float = BLOWUP_H, window: float = BLOWUP_WINDOW, margin: float = BLOWUP_MARGIN,
                      T_max: float = BLOWUP_T_MAX, map_fn: Callable = map) -> List[NoDampingMember]:
    """Members in the given order; map_fn lets callers fan the runs out to a pool."""
    args = [(params, n, amplitude, h, window, margin, T_max) for n in members]
    return list(map_fn(_no_damping_star, args))


def _no_damping_star(args):
    return no_damping_member(*args)


@dataclass
class GrowthReport:
    measured: float
    expected: float
    relative_error: float
    r2: float
    amplitude: float
    c_p: float
    family_speed: float
    history: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)


def _tail(background: BackgroundWave, x: float) -> float:
    return float(np.max(np.abs(background.state(np.array([x]))[0] - background.far_field())))


def weighted_growth(background: BackgroundWave, alpha: float = GROWTH_ALPHA, p: float = GROWTH_DISTANCE,
                    family: Optional[int] = None, T_max: float = GROWTH_T_MAX, h: float = BLOWUP_H,
                    window: float = BLOWUP_WINDOW, width: float = GROWTH_WIDTH,
                    output_interval: float = BLOWUP_OUTPUT_INTERVAL) -> GrowthReport:
    """Growth rate of int |U_hat|^2 exp(alpha |x|) for an outgoing bump at distance p."""
    system = background.hyp_system()
    frame = _far_field_frame(system)
    if family is None:
        family = int(np.argmin(frame.lambdas))
    speed = float(frame.lambdas[family])
    if speed >= 0:
        raise ValueError(f"family {family} is not outgoing (speed {speed:.4g})")
    c_p = max(1.0 / p, _tail(background, -p / 2)) ** 2
    amplitude = c_p * np.exp(-alpha * p)
    x0 = -p
    shape = lambda x, order: bump(x, x0, width, 1.0, order)
    data = BlowupData(amplitude, x0, family, frame.xi[:, family], shape, s0=width)

    def weighted_l2(state: GasState) -> Dict[str, float]:
        density = np.sum(state.U_hat ** 2, axis=1) * np.exp(alpha * np.abs(state.x))
        return {"weighted_l2": float(trapezoid(density, state.x))}

    traj = simulate_gas(background, data, T_max=T_max, h=h, window=max(window, 2 * width + 2),
                        track_ensemble=False, observer=weighted_l2, output_interval=output_interval)
    decay, r2 = fit_decay_rate(traj.history["t"], traj.history["weighted_l2"], transient_fraction=0.0)
    measured = -decay
    expected = alpha * abs(speed)
    report = GrowthReport(measured, expected, abs(measured - expected) / expected, r2, amplitude, c_p, speed,
                          traj.history)
    logger.info(f"[Blowup] weighted growth {measured:.6g} vs alpha |lambda| = {expected:.6g}")
    return report


@dataclass
class NegativeSpeedReport:
    sigma: float
    measured: float
    expected: float
    relative_error: float
    r2: float
    control_residual: float
    memory_residual: float
    history: Dict[str, np.ndarray]


def negative_speed_growth(coeffs: Sequence[float] = NEG_COEFFS, u0: float = NEG_U0, alpha: float = NEG_ALPHA,
                          center: float = NEG_BUMP_CENTER, width: float = NEG_BUMP_WIDTH,
                          height: float = NEG_BUMP_HEIGHT, h: float = NEG_H,
                          extent_plus: float = NEG_EXTENT_PLUS, T_max: float = NEG_T_MAX,
                          control_T_max: float = NEG_CONTROL_T_MAX,
                          control_C: float = 1e3, control_theta: float = 0.01) -> NegativeSpeedReport:
    """Right-side zeta bump on an inert wave with sigma < 0, measured in the alpha-weighted norms.

    The growth rate is fitted on [0, T_max]; the same run continued to control_T_max is
    checked against a pure decay claim |X(t)| <= C exp(-theta t) |X(0)| (control_residual).
    memory_residual is the same functional with the run's own L2 norm as memory term; that
    term grows with the solution, so it cannot refute decay and is reported only.
    """
    params = WaveParams(k=1.0, q=0.0, u0=u0, u_i=u0 / 2, flux=make_flux("polynomial", coeffs))
    profile = inert_profile(params, extent=1.0, h=h)
    if profile.sigma >= 0:
        raise ValueError(f"sigma = {profile.sigma:.4g} is not negative")
    grid = TwinGrid(h, 10 * h, extent_plus)
    zeta0 = lambda x: bump(x, center, width, height)
    state = init_state(profile, None, zeta0, grid, eta=max(u0 / 4, 2 * height))

    def probe(s):
        l2 = sum(weighted_sobolev_norm(f, s.grid, alpha, 0, tail_tolerance=None) ** 2 for f in (s.v, s.zeta))
        h2 = sum(weighted_sobolev_norm(f, s.grid, alpha, 2, tail_tolerance=None) ** 2 for f in (s.v, s.zeta))
        return {"l2_alpha": l2, "h2_alpha": h2}

    outcome = run(state, control_T_max, thresholds=RunThresholds(rho=u0 / 8, grad_threshold=1e6),
                  output_interval=0.25, energy_probe=probe)
    hist = outcome.history
    window = hist["t"] <= T_max + 1e-9
    decay, r2 = fit_decay_rate(hist["t"][window], hist["l2_alpha"][window], transient_fraction=0.0)
    measured = -decay
    expected = alpha * abs(profile.sigma)
    control = damping_residual(hist["t"], np.sqrt(hist["h2_alpha"]), np.zeros_like(hist["t"]),
                               control_C, control_theta)
    memory = damping_residual(hist["t"], np.sqrt(hist["h2_alpha"]), np.sqrt(hist["l2_alpha"]),
                              control_C, control_theta)
    logger.info(f"[Blowup] negative speed sigma = {profile.sigma:.4g}: growth {measured:.6g} "
                f"vs {expected:.6g}, control residual {control:.4g} (with L2 memory {memory:.4g})")
    return NegativeSpeedReport(profile.sigma, measured, expected, abs(measured - expected) / expected,
                               r2, control, memory, hist)
