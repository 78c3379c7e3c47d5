"""
Exception hierarchy for the detonation lab.
Library code raises these; only main.py maps them to exit codes.
"""
from enum import Enum, auto
from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


# Physics inputs
class OutOfInterval(LabError):
    """Flux evaluated outside its certified interval."""


class UnsupportedOrder(LabError):
    """Derivative order above three requested."""


class NonPhysicalState(LabError):
    """Non-positive specific volume or internal energy."""


class NotHyperbolic(LabError):
    """p * p_E - p_v <= 0."""


# Profiles
class NonPositiveSpeed(LabError):
    pass


class InadmissibleReason(Enum):
    """Why a wave configuration was rejected."""
    NO_ROOT = auto()
    DEGENERATE_CHARACTERISTIC = auto()
    WRONG_END_STATE = auto()


class Inadmissible(LabError):
    def __init__(self, reason: InadmissibleReason, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason.name}: {detail}" if detail else reason.name)


class StiffnessFailure(LabError):
    """f'(u) - sigma fell below the safety floor while integrating the profile."""


# Shock-frame simulation
class SupportTouchesShock(LabError):
    pass


class AmplitudeTooLarge(LabError):
    pass


class DegenerateJump(LabError):
    pass


class CFLViolation(LabError):
    pass


# Weighted energy
class WrongSide(LabError):
    pass


class TailNotResolved(LabError):
    pass


class Infeasible(LabError):
    def __init__(self, index: int, detail: str = ""):
        self.index = index
        super().__init__(f"coefficient inequality {index} fails" + (f" ({detail})" if detail else ""))


class NonPositiveEnergy(LabError):
    pass


# Characteristics and blowup
class NotStrictlyHyperbolic(LabError):
    pass


class BlownUp(LabError):
    """Raised by the characteristic ensemble when rho or |w| crosses its limit."""

    def __init__(self, t: float, family: int, seed: int, ensemble: Optional[object] = None):
        self.t = t
        self.family = family
        self.seed = seed
        self.ensemble = ensemble
        super().__init__(f"blowup at t={t:.6g} (family {family}, seed {seed})")


class NonGenuinelyNonlinear(LabError):
    pass


class DistanceTooSmall(LabError):
    pass


class TemperatureGuardViolated(LabError):
    pass


# Configuration
class ConfigError(LabError):
    pass


class ParseError(ConfigError):
    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class UnknownKey(ConfigError):
    pass


class RangeError(ConfigError):
    pass
