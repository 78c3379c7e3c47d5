"""
Frozen shock profiles seen from the shock frame, x < 0.

A background supplies U_bar(x), its derivative, the flux F and Jacobian DF,
and builds the quasilinear system for perturbations,
    u_t + (DF(U_bar + u) - sigma) u_x + G(x, u) u = 0,
where the columns of G are int_0^1 d_j DF(U_bar + s u) U_bar' ds.
"""
import logging
import os
import sys
from typing import Tuple

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from core.char_fields import HypSystem
from core.errors import Inadmissible, InadmissibleReason, NonPhysicalState
from core.flux_models import IdealGasEOS, eos_pressure_partials
from core.profile import WaveProfile
from config import EOS_C_HEAT, EOS_GAMMA, ZND_K, ZND_Q, ZND_RIGHT_STATE, ZND_SIGMA

logger = logging.getLogger(__name__)

# two-point Gauss rule on [0, 1]
GAUSS_NODES = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))
GAUSS_WEIGHTS = (0.5, 0.5)


class BackgroundWave:
    """Base class; subclasses provide state, gradient, flux and jacobian."""
    n: int = 1
    sigma: float = 1.0
    decay_rate: float = 1.0
    name: str = "background"

    def state(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def flux(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flux_speeds(self, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(F(U), eigenvalues of DF(U) - sigma in descending order) per row of U."""
        speeds = np.sort(np.linalg.eigvals(self.jacobian(U)).real, axis=-1)[:, ::-1]
        return self.flux(U), speeds - self.sigma

    def far_field(self) -> np.ndarray:
        return self.state(np.array([-1e3 / self.decay_rate]))[0]

    def check_state(self, U: np.ndarray):
        pass

    def jacobian_derivative(self, U: np.ndarray, j: int) -> np.ndarray:
        """d DF / d U_j by central differences."""
        step = 1e-6 * (1.0 + np.abs(U[:, j]))
        shift = np.zeros_like(U)
        shift[:, j] = step
        return (self.jacobian(U + shift) - self.jacobian(U - shift)) / (2 * step)[:, None, None]

    def source_matrix(self, x, u) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.asarray(u, dtype=float).reshape(-1, self.n)
        U_bar = self.state(x)
        dU_bar = self.gradient(x)
        G = np.zeros((x.size, self.n, self.n))
        for s, weight in zip(GAUSS_NODES, GAUSS_WEIGHTS):
            U = U_bar + s * u
            for j in range(self.n):
                G[:, :, j] += weight * np.einsum("nab,nb->na", self.jacobian_derivative(U, j), dU_bar)
        return G

    def hyp_system(self, delta: float = 0.1) -> HypSystem:
        eye = np.eye(self.n)

        def matrix_fn(x, u):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            u = np.asarray(u, dtype=float).reshape(-1, self.n)
            return self.jacobian(self.state(x) + u) - self.sigma * eye

        return HypSystem(self.n, matrix_fn, self.source_matrix, self.decay_rate, delta, self.name)

    def far_field_speeds(self) -> np.ndarray:
        """Frame speeds of the families at x = -infinity, descending."""
        A = self.jacobian(self.far_field()[None, :])[0] - self.sigma * np.eye(self.n)
        return np.sort(np.linalg.eigvals(A).real)[::-1]


class MajdaBackground(BackgroundWave):
    """Scalar Majda profile u_bar on x < 0 with the reactant perturbation held at zero."""

    def __init__(self, profile: WaveProfile):
        if profile.sigma <= 0:
            raise ValueError("the scalar background needs a positive shock speed")
        self.profile = profile
        self.n = 1
        self.sigma = profile.sigma
        self.decay_rate = profile.params.k / profile.sigma
        self.name = "majda"

    def state(self, x) -> np.ndarray:
        return np.atleast_1d(self.profile.u_at(x))[:, None]

    def gradient(self, x) -> np.ndarray:
        return np.atleast_1d(self.profile.derivatives(x)[0])[:, None]

    def flux(self, U):
        return self.profile.flux.f(U)

    def jacobian(self, U):
        return self.profile.flux.df(U)[:, :, None]

    def jacobian_derivative(self, U, j):
        return self.profile.flux.d2f(U)[:, :, None]

    def flux_speeds(self, U):
        return self.profile.flux.f(U), self.profile.flux.df(U) - self.sigma

    def far_field(self):
        return np.array([self.profile.u_minus_inf])


class ZndBackground(BackgroundWave):
    """Overdriven ideal-gas ZND detonation in Lagrangian variables (v, u, E), reactant Z = exp(kx/sigma).

    Mass, momentum and energy across the wave fix u and p linearly in v; the ideal-gas
    law then leaves a quadratic in v whose smaller root is the compressive branch.
    """

    def __init__(self, sigma: float = ZND_SIGMA, q: float = ZND_Q, k: float = ZND_K,
                 right_state: Tuple[float, float, float] = ZND_RIGHT_STATE,
                 eos: IdealGasEOS = None):
        self.eos = eos or IdealGasEOS(EOS_GAMMA, EOS_C_HEAT)
        self.n = 3
        self.sigma = float(sigma)
        self.q = float(q)
        self.k = float(k)
        self.decay_rate = self.k / self.sigma
        self.name = "znd"
        v_r, u_r, E_r = right_state
        p_r, _, _, _ = eos_pressure_partials(self.eos, v_r, u_r, E_r)
        self.right_state = np.array(right_state, dtype=float)
        s = self.sigma
        self.m1 = s * v_r + u_r
        self.m2 = -s * u_r + p_r
        self.m3 = -s * E_r + p_r * u_r - self.q * s
        self.a = self.m2 + s * self.m1
        g = self.eos.gamma
        self._alpha = s ** 2 * (1.0 + g / 2.0)
        self._beta = (1.0 + g) * self.a
        # the discriminant is smallest in the burnt state
        if self._discriminant(np.array([0.0]))[0] <= 0:
            raise Inadmissible(InadmissibleReason.DEGENERATE_CHARACTERISTIC,
                               "compressive branch reaches the sonic point")
        burnt = self.state(np.array([-np.inf]))[0]
        logger.info(f"[Blowup] ZND background: von Neumann v = {self.state(np.array([0.0]))[0, 0]:.6g}, "
                    f"burnt v = {burnt[0]:.6g}")

    def _K(self, Z):
        s = self.sigma
        return self.a * self.m1 / s - self.m1 ** 2 / 2 - (self.m3 + self.q * s * Z) / s

    def _discriminant(self, Z):
        return self._beta ** 2 - 4 * self._alpha * self.eos.gamma * self._K(Z)

    def reactant(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.exp(self.k * np.minimum(x, 0.0) / self.sigma)

    def _volume(self, Z):
        return (self._beta - np.sqrt(self._discriminant(Z))) / (2 * self._alpha)

    def state(self, x) -> np.ndarray:
        Z = self.reactant(x)
        s = self.sigma
        V = self._volume(Z)
        U = self.m1 - s * V
        p = self.a - s ** 2 * V
        E = (p * U - self.m3 - self.q * s * Z) / s
        return np.column_stack((V, U, E))

    def gradient(self, x) -> np.ndarray:
        Z = self.reactant(x)
        s = self.sigma
        V = self._volume(Z)
        U = self.m1 - s * V
        p = self.a - s ** 2 * V
        dZ = self.k * Z / s
        dV = self.eos.gamma * self.q / (2 * self._alpha * V - self._beta) * dZ
        dU = -s * dV
        dp = -s ** 2 * dV
        dE = (dp * U + p * dU - self.q * s * dZ) / s
        return np.column_stack((dV, dU, dE))

    def flux(self, U):
        p = self.eos.pressure(U[:, 0], U[:, 1], U[:, 2])
        return np.column_stack((-U[:, 1], p, p * U[:, 1]))

    def jacobian(self, U):
        v, u, E = U[:, 0], U[:, 1], U[:, 2]
        p, p_v, p_u, p_E = self.eos.partials(v, u, E)
        J = np.zeros((U.shape[0], 3, 3))
        J[:, 0, 1] = -1.0
        J[:, 1, 0], J[:, 1, 1], J[:, 1, 2] = p_v, p_u, p_E
        J[:, 2, 0], J[:, 2, 1], J[:, 2, 2] = u * p_v, p + u * p_u, u * p_E
        return J

    def flux_speeds(self, U):
        """Lagrangian speeds c, 0, -c with c^2 = p p_E - p_v = (gamma + 1) p / v."""
        v, u = U[:, 0], U[:, 1]
        p = self.eos.pressure(v, u, U[:, 2])
        c = np.sqrt((self.eos.gamma + 1.0) * p / v)
        flux = np.column_stack((-u, p, p * u))
        return flux, np.column_stack((c, np.zeros_like(c), -c)) - self.sigma

    def far_field(self):
        return self.state(np.array([-np.inf]))[0]

    def check_state(self, U):
        if np.any(U[:, 0] <= 0) or np.any(self.eos.internal_energy(U[:, 1], U[:, 2]) <= 0):
            raise NonPhysicalState("perturbed ZND state left the physical region")

    def temperature(self, U) -> np.ndarray:
        return self.eos.temperature(U[:, 1], U[:, 2])

    def default_ignition_temperature(self) -> float:
        """Midway between the unburnt temperature and the coolest point behind the shock."""
        T_right = float(self.eos.temperature(self.right_state[1], self.right_state[2]))
        x = -np.linspace(0.0, 40.0 / self.decay_rate, 4001)
        T_left = float(np.min(self.temperature(self.state(x))))
        return 0.5 * (T_right + T_left)
