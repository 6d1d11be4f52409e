"""Closed-form Bloch dynamics and fluorescence of the atom in the bath."""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from .errors import DomainError
from .params import BathParams, BlochRates, BlochState


def rates_squeezed(eta, L) -> BlochRates:
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta!r}")
    if not L > 0 or math.isinf(L):
        raise DomainError(f"L must be finite and > 0, got {L!r}")
    gx = 0.5 * ((1 - eta) + eta * L)
    gy = 0.5 * ((1 - eta) + eta / L)
    return BlochRates(gx, gy, gx + gy, 1.0)


def _feedback_rate(eta, S0, lam, theta):
    # (1-eta) + eta*S0*(1 + lam/eta)^2 + lam^2 theta/eta; lam = 0 kills theta = inf
    if lam == 0.0:
        return 0.5 * ((1 - eta) + eta * S0)
    return 0.5 * ((1 - eta) + eta * S0 * (1 + lam / eta) ** 2 + lam * lam * theta / eta)


def rates_squashed(params: BathParams) -> BlochRates:
    """Rates with X and Y homodyne feedback; C = 1 + lambda_x + lambda_y."""
    p = params
    gx = _feedback_rate(p.eta, p.L, p.lambda_x, p.theta_x)
    gy = _feedback_rate(p.eta, 1.0 / p.L, p.lambda_y, p.theta_y)
    return BlochRates(gx, gy, gx + gy, 1.0 + p.lambda_x + p.lambda_y)


def optimal_lambda_y(eta, L, theta):
    """Feedback parameter -eta/(1 + L theta) minimising gamma_y."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta!r}")
    if not L > 0 or theta < 0:
        raise DomainError("need L > 0 and theta >= 0")
    if math.isinf(theta) or eta == 0.0:
        return 0.0
    return -eta / (1.0 + L * theta)


def evolve_bloch(rates: BlochRates, initial: BlochState, t) -> BlochState:
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t!r}")
    x, y, z = bloch_trajectory(rates, initial, np.array([t], dtype=float))[0]
    return BlochState(float(x), float(y), float(z))


def bloch_trajectory(rates: BlochRates, initial: BlochState, times):
    """Bloch vectors at ``times`` as an (n, 3) array."""
    t = np.asarray(times, dtype=float)
    gx, gy, gz, C = rates.as_tuple()
    x = initial.x * np.exp(-gx * t)
    y = initial.y * np.exp(-gy * t)
    if gz == 0.0:
        if C != 0.0:
            raise DomainError("inconsistent rates: gamma_z = 0 with C != 0")
        z = np.full_like(t, initial.z)
    else:
        zss = -C / gz
        z = zss + (initial.z - zss) * np.exp(-gz * t)
    return np.column_stack([x, y, z])


def fluorescence_spectrum(eta, rates: BlochRates, omega):
    """Two-Lorentzian fluorescence spectrum into the unmatched vacuum modes.

    (1-eta)(gz-C)/(8 pi gz) [gx/(gx^2+w^2) + gy/(gy^2+w^2)]
    """
    gx, gy, gz, C = rates.as_tuple()
    if not (gx > 0 and gy > 0):
        raise DomainError("fluorescence spectrum needs gamma_x, gamma_y > 0")
    if gz < C:
        raise DomainError(f"gamma_z < C ({gz:g} < {C:g}): unphysical steady state")
    w2 = np.asarray(omega, dtype=float) ** 2
    pref = (1 - eta) * (gz - C) / (8 * math.pi * gz)
    return pref * (gx / (gx**2 + w2) + gy / (gy**2 + w2))


def lineshape_fwhm(rates: BlochRates, tol=1e-9):
    """Full width at half maximum of the two-Lorentzian lineshape (bisection)."""
    gx, gy = rates.gamma_x, rates.gamma_y

    def shape(w):
        return gx / (gx**2 + w * w) + gy / (gy**2 + w * w)

    half = 0.5 * shape(0.0)
    lo, hi = 0.0, max(gx, gy)
    while shape(hi) > half:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shape(mid) > half:
            lo = mid
        else:
            hi = mid
    return lo + hi


def fit_two_lorentzians(omega, P):
    """Least-squares widths of a1 g1/(g1^2+w^2) + a2 g2/(g2^2+w^2).

    Returns (widths, amplitudes) with widths sorted ascending.
    """
    omega = np.asarray(omega, dtype=float)
    P = np.asarray(P, dtype=float)
    scale = P.max()

    def model(w, a1, g1, a2, g2):
        return a1 * g1 / (g1**2 + w**2) + a2 * g2 / (g2**2 + w**2)

    # crude start: split the peak between a narrow and a broad line
    p0 = [0.5 * scale * 0.3, 0.3, 0.5 * scale * 1.0, 1.0]
    popt, _ = optimize.curve_fit(model, omega, P, p0=p0, xtol=1e-14, ftol=1e-14,
                                 gtol=1e-14, maxfev=20000)
    a1, g1, a2, g2 = popt
    pairs = sorted([(abs(g1), a1), (abs(g2), a2)])
    return np.array([pairs[0][0], pairs[1][0]]), np.array([pairs[0][1], pairs[1][1]])
