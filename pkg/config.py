"""
Detonation Lab Configuration Settings
"""
import os

# Paths
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
ASSETS_DIR = os.path.join(BASE_DIR, "assets")
CONFIGS_DIR = os.path.join(ASSETS_DIR, "configs")
OUTPUT_DIR = os.path.join(BASE_DIR, "output")

# Output
CSV_FORMAT = "%.17g"  # 17 significant digits round-trips a double
LOG_FORMAT = "%(message)s"

# Flux and equation of state
FLUX_KIND = "burgers"
FLUX_COEFFS = ()
FLUX_INTERVAL = (-10.0, 10.0)
EOS_GAMMA = 0.4
EOS_C_HEAT = 1.0

# Majda traveling wave
WAVE_K = 1.0
WAVE_Q = 0.09
WAVE_U0 = 1.0
WAVE_U_I = 0.5

# Profile integration
PROFILE_EXTENT = 10.0
PROFILE_H = 1e-2
PROFILE_TARGET_ERROR = 1e-10
PROFILE_STIFFNESS_FLOOR = 1e-8
ROOT_XTOL = 1e-12
ROOT_SCAN_POINTS = 4000

# Shock-frame simulation
SIM_H = 5e-3
SIM_EXTENT_MINUS = 25.0
SIM_EXTENT_PLUS = 5.0
SIM_CFL = 0.4
SIM_CFL_LIMIT = 0.4  # hard Courant ceiling checked on every step
SIM_T_MAX = 50.0
SIM_RHO = None  # None -> u0 / 8
SIM_GRAD_THRESHOLD = 1e3
SIM_OUTPUT_INTERVAL = 0.5
SIM_SHOCK_CLEARANCE = 0.25  # initial data must vanish on (-clearance, clearance)

# Initial perturbation (majda-run)
PERTURB_FIELD = "v"
PERTURB_AMPLITUDE = 1e-3
PERTURB_LEFT = -6.0
PERTURB_RIGHT = -5.0

# Majda stability checks
MAJDA_R2_MIN = 0.98
MAJDA_PSI_RATE_FACTOR = 2.0  # |psi_dot - sigma| rate within this factor of theta_hat / 2

# Weighted energy
ENERGY_EPSILON = None  # None -> k / nu from the estimate constants
ENERGY_C = 1.0
ENERGY_ETA = None  # None -> min(u0 / 4, 1, mu epsilon / 32)
ENERGY_TRANSIENT_FRACTION = 0.1
ENERGY_FLOOR_FACTOR = 100.0  # decay fits stop once E is within this factor of its late minimum
ENERGY_TAIL_FRACTION = 0.05
ENERGY_TAIL_TOLERANCE = 0.01

# Characteristics
CHAR_FD_STEP = 1e-6
CHAR_GAP_TOL = 1e-10
CHAR_RHO_FLOOR = 1e-6
CHAR_W_CEILING = 1e6
CHAR_PROBE_DECAYS = 20.0  # gamma_inf probe at x = -CHAR_PROBE_DECAYS / c
CHAR_SEEDS = 41
CHAR_RICCATI_STEP = 0.02  # max dt * |gamma| * |w| per ensemble sub-step
CHAR_GNL_TOL = 1e-12
CHAR_W_RESIDUAL_TOL = 1e-4  # relative gap allowed in the w-equation check

# Blowup experiments
BLOWUP_SYSTEM = "znd"
BLOWUP_THETA = 0.1
BLOWUP_FAMILY = None  # None -> outgoing genuinely nonlinear family
BLOWUP_MARGIN = 1.0
BLOWUP_GRAD_FACTOR = 1e3
BLOWUP_GRID_FACTOR = 5.0  # grid |U_x| growth; the mesh caps it near jump / (2 h)
BLOWUP_AMP_FACTOR = 2.0
BLOWUP_H = 5e-3
BLOWUP_WINDOW = 4.0  # co-moving with the tracked family
BLOWUP_T_MAX = 400.0
BLOWUP_ENSEMBLE_DT = 0.1  # time between field snapshots fed to the ensemble
BLOWUP_STRIP_BLOCK = 8192  # background faces cached per block along the window path
BLOWUP_OUTPUT_INTERVAL = 0.25

# ZND background
ZND_SIGMA = 1.5
ZND_Q = 0.5
ZND_K = 1.0
ZND_RIGHT_STATE = (1.0, 0.0, 1.0)  # (v, u, E) ahead of the shock
ZND_T_I = None  # None -> midway between the right and the coldest left temperature

# Negative-speed instability
NEG_COEFFS = (0.0, -0.8, 0.5)
NEG_U0 = 1.0
NEG_ALPHA = 1.0
NEG_BUMP_CENTER = 4.0
NEG_BUMP_WIDTH = 4.0
NEG_BUMP_HEIGHT = 1e-3
NEG_H = 1e-2
NEG_EXTENT_PLUS = 30.0
NEG_T_MAX = 5.0
NEG_CONTROL_T_MAX = 60.0

# No-damping family
NO_DAMPING_MEMBERS = (4, 8, 16)
NO_DAMPING_AMPLITUDE = 6.0

# Weighted-norm growth (outgoing gas dynamics bump)
GROWTH_ALPHA = 0.2
GROWTH_DISTANCE = 20.0
GROWTH_T_MAX = 4.0
GROWTH_WIDTH = 2.0

# Experiment defaults
EXPERIMENT = "profile"
SEED = 0
WORKERS = 1
