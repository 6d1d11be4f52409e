"""Closed-form quadrature spectra of free and in-loop (squashed) light.

Conventions: the loop filter is single-pole, h(s) = bw * exp(-bw * s), with
Fourier transform h(w) = integral_0^inf h(s) exp(i w s) ds = bw / (bw - i w),
so that exp(i w tau) h(w) -> 1 as w -> 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, LoopResonanceError, SingularityError
from .params import FeedbackConfig, check_detection_feasible, theta_from_efficiency

VIOLATION_TOL = 1e-9
RESONANCE_TOL = 1e-12

FREE_FIELD_LEGAL = "free-field-legal"
SQUASHED_VIOLATION = "squashed-violation"


def _check_L(L):
    if not L > 0 or math.isinf(L):
        raise DomainError(f"L must be finite and > 0, got {L!r}")


def _check_theta(theta):
    if theta < 0 or math.isnan(theta):
        raise DomainError(f"theta must be >= 0, got {theta!r}")


def homodyne_spectrum(epsilon, S):
    """Photocurrent spectrum eps*S + (1 - eps) of a detector with efficiency eps."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"efficiency must lie in [0, 1], got {epsilon!r}")
    return epsilon * S + (1.0 - epsilon)


def inloop_spectrum_broadband(L, g, theta):
    """In-loop spectrum (L + g^2 theta) / (1 - g)^2 well inside the loop bandwidth."""
    _check_L(L)
    _check_theta(theta)
    if g == 1.0:
        raise SingularityError("g = 1: broadband denominator (1 - g)^2 vanishes")
    if math.isinf(theta):
        if g != 0.0:
            raise DomainError("feedback gain must be 0 when the detector is absent (theta = inf)")
        return float(L)
    return (L + g * g * theta) / (1.0 - g) ** 2


def optimal_gain(L, theta):
    """Gain -L/theta minimising the broadband in-loop spectrum.

    Returns ``-inf`` for a perfect detector (theta = 0): the optimum is
    unbounded. Returns 0 for an absent detector.
    """
    _check_L(L)
    _check_theta(theta)
    if math.isinf(theta):
        return 0.0
    if theta == 0.0:
        return -math.inf
    return -L / theta


def min_inloop_spectrum(L, theta):
    """Lower bound L / (1 + L/theta) reached at the optimal gain."""
    _check_L(L)
    _check_theta(theta)
    if math.isinf(theta):
        return float(L)
    return L * theta / (theta + L)


def is_potentially_unstable(g) -> bool:
    """Broadband formulas are only trusted for |g| < 1 without a stability check."""
    return abs(g) >= 1.0


def loop_filter_response(omega, bandwidth):
    omega = np.asarray(omega, dtype=float)
    return bandwidth / (bandwidth - 1j * omega)


def loop_transfer(omega, g, tau, bandwidth):
    """Open-loop transfer g exp(i w tau) h(w)."""
    omega = np.asarray(omega, dtype=float)
    return g * np.exp(1j * omega * tau) * loop_filter_response(omega, bandwidth)


def inloop_spectrum_full(omega, S0, g, theta, tau, bandwidth):
    """Frequency-resolved in-loop spectrum.

    [S0(w) + theta g^2 |h(w)|^2] / |1 - g exp(i w tau) h(w)|^2. ``omega`` and
    ``S0`` may be arrays (broadcast together).
    """
    _check_theta(theta)
    if tau < 0 or not bandwidth > 0:
        raise DomainError("need tau >= 0 and bandwidth > 0")
    omega = np.asarray(omega, dtype=float)
    S0 = np.asarray(S0, dtype=float)
    if g == 0.0:
        out = np.broadcast_to(S0, np.broadcast(omega, S0).shape).astype(float)
        return out if out.ndim else float(out)
    if math.isinf(theta):
        raise DomainError("feedback gain must be 0 when the detector is absent (theta = inf)")
    h = loop_filter_response(omega, bandwidth)
    denom = np.abs(1.0 - g * np.exp(1j * omega * tau) * h)
    if np.any(denom < RESONANCE_TOL):
        bad = np.atleast_1d(omega)[np.atleast_1d(denom < RESONANCE_TOL)][0]
        raise LoopResonanceError(f"loop resonance: |1 - g e^(iwt) h(w)| ~ 0 at omega = {bad:g}")
    out = (S0 + theta * g * g * np.abs(h) ** 2) / denom**2
    return out if out.ndim else float(out)


class DualSquash(NamedTuple):
    sx: float
    sy: float
    total: float


def dual_squash_sum(epsilon_x, epsilon_y):
    """Vacuum input, both quadratures squashed with optimal gains."""
    check_detection_feasible(epsilon_x, epsilon_y)
    sx = min_inloop_spectrum(1.0, theta_from_efficiency(epsilon_x))
    sy = min_inloop_spectrum(1.0, theta_from_efficiency(epsilon_y))
    return DualSquash(sx, sy, sx + sy)


class SqueezeSquash(NamedTuple):
    sx: float
    sy: float
    total: float


def squeeze_squash_pair(L, epsilon):
    """X squeezed to L (no X detector); Y squashed with a detector of efficiency eps."""
    _check_L(L)
    theta = theta_from_efficiency(epsilon)
    sy = min_inloop_spectrum(1.0 / L, theta)
    return SqueezeSquash(float(L), sy, L + sy)


class Uncertainty(NamedTuple):
    product: float
    classification: str


def uncertainty_product(sx, sy, tol=VIOLATION_TOL):
    if not (sx > 0 and sy > 0):
        raise DomainError("spectra must be positive")
    p = sx * sy
    return Uncertainty(p, SQUASHED_VIOLATION if p < 1.0 - tol else FREE_FIELD_LEGAL)


@dataclass
class SpectrumCurve:
    frequencies: np.ndarray
    values_x: np.ndarray
    values_y: np.ndarray

    @property
    def product(self):
        return self.values_x * self.values_y

    @property
    def total(self):
        return self.values_x + self.values_y


def spectrum_curve(feedback: FeedbackConfig, L, omegas) -> SpectrumCurve:
    """In-loop X and Y spectra of a white input with X spectrum L."""
    _check_L(L)
    omegas = np.asarray(omegas, dtype=float)
    sx = inloop_spectrum_full(omegas, np.full_like(omegas, L), feedback.gx,
                              feedback.theta_x, feedback.tau, feedback.bandwidth)
    sy = inloop_spectrum_full(omegas, np.full_like(omegas, 1.0 / L), feedback.gy,
                              feedback.theta_y, feedback.tau, feedback.bandwidth)
    return SpectrumCurve(omegas, np.asarray(sx, float), np.asarray(sy, float))
