"""Parameter containers shared across modules.

Units: time in inverse atomic linewidths (the atomic decay rate is 1), spectra
normalised so that vacuum/shot noise is 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError, InfeasibleDetectionError, ValidationError

# slack for floating-point sums like 0.3 + 0.7
FEASIBILITY_TOL = 1e-12


def theta_from_efficiency(epsilon: float) -> float:
    """Excess-noise factor 1/epsilon - 1; infinite for an absent detector."""
    if not 0.0 <= epsilon <= 1.0 or math.isnan(epsilon):
        raise DomainError(f"detector efficiency must lie in [0, 1], got {epsilon!r}")
    if epsilon == 0.0:
        return math.inf
    return 1.0 / epsilon - 1.0


def efficiency_from_theta(theta: float) -> float:
    if theta < 0 or math.isnan(theta):
        raise DomainError(f"theta must be >= 0, got {theta!r}")
    if math.isinf(theta):
        return 0.0
    return 1.0 / (1.0 + theta)


def check_detection_feasible(epsilon_x: float, epsilon_y: float) -> None:
    if epsilon_x + epsilon_y > 1.0 + FEASIBILITY_TOL:
        raise InfeasibleDetectionError(
            f"epsilon_x + epsilon_y > 1 ({epsilon_x!r} + {epsilon_y!r})"
        )


def lambda_from_gain(g: float, eta: float) -> float:
    """Atomic feedback parameter eta*g/(1-g) for round-loop gain g."""
    if g == 1.0:
        raise DomainError("round-loop gain g = 1 is singular")
    return g * eta / (1.0 - g)


def gain_from_lambda(lam: float, eta: float) -> float:
    """Inverse of :func:`lambda_from_gain`."""
    if eta + lam == 0.0:
        raise DomainError("lambda = -eta corresponds to infinite gain")
    return lam / (eta + lam)


@dataclass(frozen=True)
class SqueezedInput:
    """White-noise input beam with X spectrum L and Y spectrum 1/L."""

    L: float = 1.0

    def __post_init__(self):
        if not self.L > 0 or math.isinf(self.L):
            raise DomainError(f"squeezing factor L must be finite and > 0, got {self.L!r}")

    @property
    def sx(self) -> float:
        return self.L

    @property
    def sy(self) -> float:
        return 1.0 / self.L


@dataclass(frozen=True)
class DetectorChannel:
    efficiency: float = 0.0

    def __post_init__(self):
        theta_from_efficiency(self.efficiency)

    @property
    def theta(self) -> float:
        return theta_from_efficiency(self.efficiency)

    @property
    def present(self) -> bool:
        return self.efficiency > 0.0


@dataclass(frozen=True)
class FeedbackConfig:
    """Loop gains, detectors and the single-pole loop filter.

    The loop response is h(s) = bandwidth * exp(-bandwidth * s), delayed by tau.
    """

    gx: float = 0.0
    gy: float = 0.0
    channel_x: DetectorChannel = field(default_factory=DetectorChannel)
    channel_y: DetectorChannel = field(default_factory=DetectorChannel)
    tau: float = 0.001
    bandwidth: float = 100.0

    def __post_init__(self):
        for name in ("gx", "gy"):
            g = getattr(self, name)
            if g == 1.0:
                raise DomainError(f"{name} = 1 makes the loop denominator (1 - g) vanish")
            if not math.isfinite(g):
                raise DomainError(f"{name} must be finite, got {g!r}")
        if self.tau < 0:
            raise DomainError(f"loop delay tau must be >= 0, got {self.tau!r}")
        if not self.bandwidth > 0:
            raise DomainError(f"filter bandwidth must be > 0, got {self.bandwidth!r}")
        check_detection_feasible(self.channel_x.efficiency, self.channel_y.efficiency)
        if self.gx != 0 and not self.channel_x.present:
            raise DomainError("gx != 0 requires epsilon_x > 0 (no X detector to feed back from)")
        if self.gy != 0 and not self.channel_y.present:
            raise DomainError("gy != 0 requires epsilon_y > 0 (no Y detector to feed back from)")

    @property
    def theta_x(self) -> float:
        return self.channel_x.theta

    @property
    def theta_y(self) -> float:
        return self.channel_y.theta


@dataclass(frozen=True)
class BathParams:
    """Coupling of a two-level atom to a (possibly squashed) squeezed bath.

    ``theta_x``/``theta_y`` of ``inf`` mean the channel is absent; the matching
    lambda must then be zero.
    """

    eta: float
    L: float = 1.0
    lambda_x: float = 0.0
    lambda_y: float = 0.0
    theta_x: float = math.inf
    theta_y: float = math.inf

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"mode matching eta must lie in [0, 1], got {self.eta!r}")
        if not self.L > 0 or math.isinf(self.L):
            raise DomainError(f"squeezing factor L must be finite and > 0, got {self.L!r}")
        for q in ("x", "y"):
            lam = getattr(self, f"lambda_{q}")
            theta = getattr(self, f"theta_{q}")
            if theta < 0 or math.isnan(theta):
                raise DomainError(f"theta_{q} must be >= 0, got {theta!r}")
            if lam == 0.0:
                continue
            if self.eta == 0.0:
                raise DomainError(f"lambda_{q} != 0 requires eta > 0 (feedback needs coupling)")
            if math.isinf(theta):
                raise DomainError(f"lambda_{q} != 0 with an absent {q.upper()} detector")
            if not lam > -self.eta or not math.isfinite(lam):
                raise DomainError(f"lambda_{q} must lie in (-eta, inf), got {lam!r}")
        check_detection_feasible(
            efficiency_from_theta(self.theta_x), efficiency_from_theta(self.theta_y)
        )

    @classmethod
    def from_gains(cls, eta, L, gx=0.0, gy=0.0, epsilon_x=0.0, epsilon_y=0.0):
        check_detection_feasible(epsilon_x, epsilon_y)
        return cls(
            eta=eta,
            L=L,
            lambda_x=lambda_from_gain(gx, eta),
            lambda_y=lambda_from_gain(gy, eta),
            theta_x=theta_from_efficiency(epsilon_x),
            theta_y=theta_from_efficiency(epsilon_y),
        )


@dataclass(frozen=True)
class BlochRates:
    """Decay rates of <sigma_x>, <sigma_y>, <sigma_z> and the pump constant C.

    d<sz>/dt = -gamma_z <sz> - C.
    """

    gamma_x: float
    gamma_y: float
    gamma_z: float
    C: float

    def as_tuple(self):
        return (self.gamma_x, self.gamma_y, self.gamma_z, self.C)

    def check(self, tol=1e-12):
        if self.gamma_x < -tol or self.gamma_y < -tol:
            raise ValidationError(f"negative decay rate in {self}")
        if abs(self.gamma_z - self.gamma_x - self.gamma_y) > tol * max(1.0, abs(self.gamma_z)):
            raise ValidationError(f"gamma_z != gamma_x + gamma_y in {self}")
        return self


VACUUM_RATES = BlochRates(0.5, 0.5, 1.0, 1.0)


@dataclass(frozen=True)
class BlochState:
    x: float = 0.0
    y: float = 0.0
    z: float = -1.0

    def as_tuple(self):
        return (self.x, self.y, self.z)

    @property
    def norm2(self) -> float:
        return self.x**2 + self.y**2 + self.z**2
