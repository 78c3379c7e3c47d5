"""
Characteristic machinery for strictly hyperbolic systems

    u_t + A(x, u) u_x + G(x, u) u = 0

Eigenframes, the coupling coefficients of the w_i = eta_i . u_x equations,
characteristic ensembles (X_i, rho_i, w_i) and the Riccati blowup forecast.
Everything is vectorised over a batch of points.
"""
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.linalg import eig, inv
from scipy.integrate import trapezoid

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.errors import BlownUp, NonGenuinelyNonlinear, NotStrictlyHyperbolic
from config import (
    CHAR_FD_STEP, CHAR_GAP_TOL, CHAR_GNL_TOL, CHAR_PROBE_DECAYS, CHAR_RHO_FLOOR,
    CHAR_RICCATI_STEP, CHAR_W_CEILING,
)

logger = logging.getLogger(__name__)

# (x, u) -> (u, u_x), both (N, n)
FieldProvider = Callable[[np.ndarray, float], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class HypSystem:
    """matrix_fn and source_fn map x (N,), u (N, n) to (N, n, n)."""
    n: int
    matrix_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    source_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    decay_rate: float = 1.0
    delta: float = 1.0
    name: str = ""

    def matrix(self, x, u) -> np.ndarray:
        return np.asarray(self.matrix_fn(x, u), dtype=float)

    def source(self, x, u) -> np.ndarray:
        if self.source_fn is None:
            return np.zeros((np.size(x), self.n, self.n))
        return np.asarray(self.source_fn(x, u), dtype=float)


@dataclass
class EigenFrame:
    """lambdas (N, n) descending; xi[:, :, j] is the right eigenvector j; eta[:, i, :] the left one."""
    lambdas: np.ndarray
    xi: np.ndarray
    eta: np.ndarray

    def point(self, index: int = 0) -> "EigenFrame":
        return EigenFrame(self.lambdas[index], self.xi[index], self.eta[index])


def _batch(system: HypSystem, x, u) -> Tuple[np.ndarray, np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    single = x.ndim == 0
    X = np.atleast_1d(x)
    U = u.reshape(-1, system.n)
    if U.shape[0] != X.size:
        U = np.broadcast_to(U, (X.size, system.n))
    return X, np.array(U), single


def _frame_from_matrices(A: np.ndarray) -> EigenFrame:
    w, R = eig(A)
    scale = 1.0 + np.max(np.abs(w), axis=-1)
    if np.any(np.max(np.abs(w.imag), axis=-1) > CHAR_GAP_TOL * scale):
        raise NotStrictlyHyperbolic("complex eigenvalues")
    order = np.argsort(-w.real, axis=-1)
    lambdas = np.take_along_axis(w.real, order, axis=-1)
    R = np.take_along_axis(R.real, order[:, None, :], axis=-1)
    if lambdas.shape[-1] > 1 and np.any(-np.diff(lambdas, axis=-1) < CHAR_GAP_TOL * scale[:, None]):
        raise NotStrictlyHyperbolic("repeated eigenvalue")

    L = inv(R)
    eta = L / np.linalg.norm(L, axis=-1, keepdims=True)
    lead = np.take_along_axis(eta, np.argmax(np.abs(eta), axis=-1)[..., None], axis=-1)
    eta = eta * np.sign(lead)
    # rescale xi^j so that eta_j . xi^j = 1
    pairing = np.einsum("nja,naj->nj", eta, R)
    xi = R / pairing[:, None, :]
    return EigenFrame(lambdas, xi, eta)


def eigen_frame(system: HypSystem, x, u) -> EigenFrame:
    """Ordered eigenvalues with normalised left and biorthogonal right eigenvectors."""
    X, U, single = _batch(system, x, u)
    frame = _frame_from_matrices(system.matrix(X, U))
    return frame.point(0) if single else frame


def frame_defects(system: HypSystem, x, u, frame: EigenFrame) -> Dict[str, float]:
    """Largest deviations from biorthogonality, normalisation and the eigen relations."""
    X, U, _ = _batch(system, x, u)
    A = system.matrix(X, U)
    lam = np.atleast_2d(frame.lambdas)
    xi = frame.xi.reshape(-1, system.n, system.n)
    eta = frame.eta.reshape(-1, system.n, system.n)
    eye = np.eye(system.n)
    scale = 1.0 + np.max(np.abs(lam))
    return {
        "biorthogonality": float(np.max(np.abs(eta @ xi - eye))),
        "normalisation": float(np.max(np.abs(np.linalg.norm(eta, axis=-1) - 1.0))),
        "right": float(np.max(np.abs(A @ xi - xi * lam[:, None, :]))) / scale,
        "left": float(np.max(np.abs(eta @ A - eta * lam[:, :, None]))) / scale,
    }


@dataclass
class CouplingCoeffs:
    """b[i, j], c[i, j, k], gamma[i, k, m], zeta_lin[i, k], kappa[i], batched over a leading axis."""
    b: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    zeta_lin: np.ndarray
    kappa: np.ndarray


def _x_step(x: np.ndarray) -> np.ndarray:
    return CHAR_FD_STEP * (1.0 + np.abs(x))


def _u_step(u: np.ndarray) -> np.ndarray:
    return CHAR_FD_STEP * (1.0 + np.linalg.norm(u, axis=-1))


def coupling_coeffs(system: HypSystem, x, u, frame: Optional[EigenFrame] = None) -> CouplingCoeffs:
    """Coefficients of dw_i/dt = sum zeta_ik w_k + sum gamma_ikm w_k w_m + kappa_i along the i-th characteristic."""
    X, U, single = _batch(system, x, u)
    n = system.n
    N = X.size
    if frame is None or np.ndim(frame.lambdas) == 1:
        frame = _frame_from_matrices(system.matrix(X, U))
    lam, xi, eta = frame.lambdas, frame.xi, frame.eta

    # one batched call per field: rows are (x + hx, x - hx, x, then u +- hu xi^k for each k)
    hx = _x_step(X)
    hu = _u_step(U)
    shifts = hu[None, :, None] * np.moveaxis(xi, -1, 0)  # [k, N, a]
    Xs = np.concatenate([X + hx, X - hx, X] + [X] * (2 * n))
    Us = np.concatenate([U, U, U] + [U + sign * shifts[k] for k in range(n) for sign in (1.0, -1.0)])
    A_all = system.matrix(Xs, Us).reshape(3 + 2 * n, N, n, n)
    G_all = system.source(Xs, Us).reshape(3 + 2 * n, N, n, n)

    dA_dx = (A_all[0] - A_all[1]) / (2 * hx)[:, None, None]
    dG_dx = (G_all[0] - G_all[1]) / (2 * hx)[:, None, None]
    G = G_all[2]
    # [N, k, a, b]: derivative along xi^k
    dA_du = np.moveaxis((A_all[3::2] - A_all[4::2]) / (2 * hu)[None, :, None, None], 0, 1)
    dG_du = np.moveaxis((G_all[3::2] - G_all[4::2]) / (2 * hu)[None, :, None, None], 0, 1)

    b = np.einsum("nia,nab,nbj->nij", eta, dA_dx, xi)
    c = np.einsum("nia,nkab,nbj->nijk", eta, dA_du, xi)
    Gu = np.einsum("nab,nb->na", G, U)
    g = np.einsum("nma,na->nm", eta, Gu)
    eta_dot = np.einsum("nka,nia->nik", eta, eta)  # eta_k . eta_i stored at [i, k]

    zeta = -(b + np.einsum("nia,nab,nbk->nik", eta, G, xi)
             + np.einsum("nia,nkab,nb->nik", eta, dG_du, U))
    gamma = -c.copy()
    kappa = -np.einsum("nia,nab,nb->ni", eta, dG_dx, U)

    # D[i, k] = 1 / (lambda_k - lambda_i) off the diagonal, 0 on it
    eye = np.eye(n)
    off = eye == 0
    D = np.where(off, 1.0 / np.where(off, lam[:, None, :] - lam[:, :, None], 1.0), 0.0)
    drift = lam[:, :, None] * b * D
    s = np.einsum("nikm,nm->nik", c, g) * D
    zeta += s - drift
    zeta += np.einsum("nik,nik->ni", drift - s, eta_dot)[:, :, None] * eye
    r = c * (lam[:, :, None, None] - lam[:, None, None, :]) * D[:, :, :, None]
    gamma -= r
    gamma += np.einsum("nim,ij->nimj", np.einsum("nikm,nik->nim", r, eta_dot), eye)

    if single:
        return CouplingCoeffs(b[0], c[0], gamma[0], zeta[0], kappa[0])
    return CouplingCoeffs(b, c, gamma, zeta, kappa)


def w_equation_residual(system: HypSystem, x: np.ndarray, u: np.ndarray, u_x: np.ndarray,
                        tau: float = 1e-5) -> float:
    """Relative gap between w_t + lambda w_x and the coupled right-hand side for a smooth field.

    u_t comes from the system itself; w_t is the derivative of eta(x, u) . u_x along it,
    w_x a second-order difference on the uniform grid x. Two edge points are dropped per side.
    """
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    frame = _frame_from_matrices(system.matrix(x, u))
    u_t = -(np.einsum("nab,nb->na", system.matrix(x, u), u_x) + np.einsum("nab,nb->na", system.source(x, u), u))
    u_xt = np.gradient(u_t, dx, axis=0, edge_order=2)
    w_plus = _family_w(system, x, u + tau * u_t, u_x + tau * u_xt)
    w_minus = _family_w(system, x, u - tau * u_t, u_x - tau * u_xt)
    w = np.einsum("nma,na->nm", frame.eta, u_x)
    lhs = (w_plus - w_minus) / (2 * tau) + frame.lambdas * np.gradient(w, dx, axis=0, edge_order=2)

    coeffs = coupling_coeffs(system, x, u, frame)
    rhs = (np.einsum("nik,nk->ni", coeffs.zeta_lin, w)
           + np.einsum("nikm,nk,nm->ni", coeffs.gamma, w, w) + coeffs.kappa)
    inner = slice(2, -2)
    scale = max(float(np.max(np.abs(lhs[inner]))), float(np.max(np.abs(rhs[inner]))), 1e-300)
    return float(np.max(np.abs(lhs[inner] - rhs[inner]))) / scale


def gamma_at_infinity(system: HypSystem, family: int, probe_x: Optional[float] = None) -> float:
    """gamma_iii at u = 0 far behind the shock, where B and G are below 1e-8."""
    if probe_x is None:
        probe_x = -CHAR_PROBE_DECAYS / system.decay_rate
    coeffs = coupling_coeffs(system, probe_x, np.zeros(system.n))
    return float(coeffs.gamma[family, family, family])


@dataclass
class SpectralGap:
    nu: np.ndarray
    mu: np.ndarray
    gap: float
    lambda_bar: float


def spectral_gap(system: HypSystem, xs: Sequence[float], delta: Optional[float] = None) -> SpectralGap:
    """inf/sup of each lambda_i over positions and |u| <= delta, and min_{k<i} (nu_k - mu_i)."""
    delta = system.delta if delta is None else delta
    n = system.n
    states = np.vstack([np.zeros(n), delta * np.eye(n), -delta * np.eye(n)])
    xs = np.asarray(xs, dtype=float)
    X = np.repeat(xs, states.shape[0])
    U = np.tile(states, (xs.size, 1))
    lam = _frame_from_matrices(system.matrix(X, U)).lambdas
    nu = lam.min(axis=0)
    mu = lam.max(axis=0)
    gaps = [nu[k] - mu[i] for i in range(n) for k in range(i)]
    return SpectralGap(nu, mu, float(min(gaps)) if gaps else np.inf, float(np.max(np.abs(lam))))


@dataclass
class CharEnsemble:
    """Characteristics of the tracked families issued from seeds; arrays are (families, seeds)."""
    seeds: np.ndarray
    families: Tuple[int, ...]
    X: np.ndarray
    log_rho: np.ndarray
    w: np.ndarray
    t: float = 0.0
    t0: float = 0.0
    probe_x: Optional[np.ndarray] = None
    W0: float = 0.0
    W: float = 0.0
    V: float = 0.0
    U: float = 0.0
    S: float = 0.0
    J: float = 0.0
    history: Dict[str, List[float]] = field(default_factory=dict)
    # detector name ("rho" or "w") -> time it first fired, and the (row, seed) that fired first
    flag_times: Dict[str, float] = field(default_factory=dict)
    flag_at: Optional[Tuple[int, int]] = None

    @property
    def rho(self) -> np.ndarray:
        return np.exp(self.log_rho)

    @property
    def v(self) -> np.ndarray:
        return self.w * self.rho

    @property
    def alpha(self) -> np.ndarray:
        return self.X.min(axis=1)

    @property
    def beta(self) -> np.ndarray:
        return self.X.max(axis=1)


def _family_w(system: HypSystem, x: np.ndarray, u: np.ndarray, u_x: np.ndarray) -> np.ndarray:
    """eta_m . u_x for every family m, shape (N, n)."""
    frame = _frame_from_matrices(system.matrix(x, u))
    return np.einsum("nma,na->nm", frame.eta, u_x)


def _update_diagnostics(system: HypSystem, ens: CharEnsemble, provider: FieldProvider):
    ens.W = max(ens.W, float(np.max(np.abs(ens.w))))
    ens.S = max(ens.S, float(np.max(ens.beta - ens.alpha)))
    for row in range(len(ens.families)):
        ens.J = max(ens.J, float(trapezoid(np.abs(ens.v[row]), ens.seeds)))
        u, _ = provider(ens.X[row], ens.t)
        ens.U = max(ens.U, float(np.max(np.abs(u))))
    if ens.probe_x is not None:
        u, u_x = provider(ens.probe_x, ens.t)
        ens.U = max(ens.U, float(np.max(np.abs(u))))
        w_all = _family_w(system, ens.probe_x, u, u_x)
        for row, fam in enumerate(ens.families):
            outside = (ens.probe_x < ens.alpha[row]) | (ens.probe_x > ens.beta[row])
            if np.any(outside):
                ens.V = max(ens.V, float(np.max(np.abs(w_all[outside, fam]))))
    h = ens.history
    h.setdefault("t", []).append(ens.t)
    h.setdefault("max_w", []).append(float(np.max(np.abs(ens.w))))
    h.setdefault("min_rho", []).append(float(np.min(ens.rho)))
    h.setdefault("S", []).append(ens.S)
    h.setdefault("J", []).append(ens.J)
    h.setdefault("V", []).append(ens.V)
    h.setdefault("U", []).append(ens.U)


def make_ensemble(system: HypSystem, provider: FieldProvider, seeds: Sequence[float],
                  families: Sequence[int], t: float = 0.0, t0: float = 0.0,
                  probe_x: Optional[Sequence[float]] = None) -> CharEnsemble:
    """Characteristics from the seeds with rho = 1 and w_i = eta_i . u_x of the current field."""
    seeds = np.asarray(seeds, dtype=float)
    families = tuple(int(f) for f in families)
    u, u_x = provider(seeds, t)
    w_all = _family_w(system, seeds, u, u_x)
    w = np.array([w_all[:, fam] for fam in families])
    ens = CharEnsemble(seeds, families, np.tile(seeds, (len(families), 1)), np.zeros_like(w), w,
                       t=t, t0=t0, probe_x=None if probe_x is None else np.asarray(probe_x, dtype=float))
    ens.W0 = float(np.max(np.abs(w))) if w.size else 0.0
    _update_diagnostics(system, ens, provider)
    return ens


def _ensemble_rates(system: HypSystem, ens_X: np.ndarray, ens_w: np.ndarray, families: Tuple[int, ...],
                    provider: FieldProvider, t: float):
    """(dX/dt, dlog_rho/dt, dw/dt, max |gamma|) for every tracked characteristic."""
    F, M = ens_X.shape
    x = ens_X.ravel()
    u, u_x = provider(x, t)
    frame = _frame_from_matrices(system.matrix(x, u))
    coeffs = coupling_coeffs(system, x, u, frame)
    w_all = np.einsum("nma,na->nm", frame.eta, u_x)
    fam = np.repeat(np.asarray(families), M)
    idx = np.arange(x.size)
    w_all[idx, fam] = ens_w.ravel()

    speed = frame.lambdas[idx, fam]
    dlog_rho = coeffs.b[idx, fam, fam] + np.einsum("nm,nm->n", coeffs.c[idx, fam, fam, :], w_all)
    zeta_row = coeffs.zeta_lin[idx, fam, :]
    gamma_row = coeffs.gamma[idx, fam, :, :]
    dw = (np.einsum("nk,nk->n", zeta_row, w_all)
          + np.einsum("nkm,nk,nm->n", gamma_row, w_all, w_all)
          + coeffs.kappa[idx, fam])
    g_max = float(np.max(np.abs(gamma_row))) if gamma_row.size else 0.0
    return speed.reshape(F, M), dlog_rho.reshape(F, M), dw.reshape(F, M), g_max


def _check_blowup(ens: CharEnsemble, rho_floor: float, w_ceiling: float, require_both: bool = False):
    """Record first crossings of the rho floor and the w ceiling; raise once one (or both) fired."""
    crossed = {"rho": ens.log_rho < np.log(rho_floor), "w": np.abs(ens.w) > w_ceiling}
    for name, flags in crossed.items():
        if name not in ens.flag_times and np.any(flags):
            ens.flag_times[name] = ens.t
            if ens.flag_at is None:
                row, seed = np.argwhere(flags)[0]
                ens.flag_at = (int(row), int(seed))
    if ens.flag_at is None or (require_both and len(ens.flag_times) < len(crossed)):
        return
    row, seed = ens.flag_at
    raise BlownUp(min(ens.flag_times.values()), ens.families[row], seed, ens)


def advance_ensemble(system: HypSystem, ens: CharEnsemble, provider: FieldProvider, dt: float,
                     rho_floor: float = CHAR_RHO_FLOOR, w_ceiling: float = CHAR_W_CEILING,
                     riccati_step: float = CHAR_RICCATI_STEP, require_both: bool = False) -> CharEnsemble:
    """Heun steps of (X, log rho, w) over dt, sub-stepped so dt_sub |gamma| |w| stays below riccati_step.

    Raises BlownUp when the rho floor or the w ceiling is crossed; with require_both it
    keeps integrating until both detectors have fired.
    """
    t_end = ens.t + dt
    while ens.t < t_end - 1e-14 * max(1.0, abs(t_end)):
        s1, r1, w1, g_max = _ensemble_rates(system, ens.X, ens.w, ens.families, provider, ens.t)
        w_max = float(np.max(np.abs(ens.w))) if ens.w.size else 0.0
        h = t_end - ens.t
        if g_max * w_max * h > riccati_step:
            h = riccati_step / (g_max * w_max)
        X_pred = ens.X + h * s1
        w_pred = ens.w + h * w1
        s2, r2, w2, _ = _ensemble_rates(system, X_pred, w_pred, ens.families, provider, ens.t + h)
        ens.X = ens.X + 0.5 * h * (s1 + s2)
        ens.log_rho = ens.log_rho + 0.5 * h * (r1 + r2)
        ens.w = ens.w + 0.5 * h * (w1 + w2)
        ens.t += h
        _check_blowup(ens, rho_floor, w_ceiling, require_both)
    _update_diagnostics(system, ens, provider)
    return ens


def measure_diagnostics(ens: CharEnsemble) -> Tuple[float, float, float, float, float]:
    """(W, V, U, S, J) accumulated over the run."""
    return ens.W, ens.V, ens.U, ens.S, ens.J


def regions_disjoint(ens: CharEnsemble) -> bool:
    """True if the current [alpha_i, beta_i] intervals of the tracked families do not overlap."""
    order = np.argsort(ens.alpha)
    a, b = ens.alpha[order], ens.beta[order]
    return bool(np.all(b[:-1] < a[1:]))


def change_of_variables_defect(system: HypSystem, ens: CharEnsemble, provider: FieldProvider,
                               row: int = 0, samples: int = 2001) -> float:
    """Relative gap between int |w_i| dx over [alpha_i, beta_i] and int |v_i| dz over the seeds."""
    fam = ens.families[row]
    x = np.linspace(ens.alpha[row], ens.beta[row], samples)
    u, u_x = provider(x, ens.t)
    lhs = float(trapezoid(np.abs(_family_w(system, x, u, u_x)[:, fam]), x))
    rhs = float(trapezoid(np.abs(ens.v[row]), ens.seeds))
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


@dataclass
class RiccatiForecast:
    gamma_inf: float
    W0: float
    t0: float
    T_star_upper: float
    T_star_riccati: float


def riccati_forecast(gamma_inf: float, W0: float, t0: float = 0.0) -> RiccatiForecast:
    """Upper bound t0 + 8 / (3 |gamma| (3/4) W0) on the blowup time; W0 is measured along sign(gamma)."""
    if abs(gamma_inf) <= CHAR_GNL_TOL:
        raise NonGenuinelyNonlinear(f"gamma_iii at infinity = {gamma_inf:.3g}")
    if W0 <= 0:
        raise ValueError("W0 must be positive")
    g = abs(gamma_inf)
    upper = t0 + 8.0 / (3.0 * g * 0.75 * W0)
    return RiccatiForecast(gamma_inf, W0, t0, upper, t0 + 1.0 / (g * W0))
