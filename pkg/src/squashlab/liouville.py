"""Superoperator machinery for a two-level atom in a squeezed or squashed bath.

Basis ordering is {|e>, |g>}; the Pauli matrices are the standard ones, so
sigma = |g><e| = (sigma_x - i sigma_y) / 2. Density matrices are
column-stacked: vec(A rho B) = (B^T kron A) vec(rho).
"""
from __future__ import annotations

import math

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import DomainError, GridLengthError, NoUniqueSteadyStateError, RateExtractionError
from .params import BathParams, BlochRates, BlochState

SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

RATE_TOL = 1e-10
TRACE_TOL = 1e-12


def vec(rho):
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v):
    return np.asarray(v).reshape(2, 2, order="F")


def spre(A):
    """Left multiplication rho -> A rho."""
    return np.kron(IDENTITY, A)


def spost(A):
    """Right multiplication rho -> rho A."""
    return np.kron(np.asarray(A).T, IDENTITY)


def commutator(A):
    """rho -> [A, rho]."""
    return spre(A) - spost(A)


def dissipator(A):
    """Superoperator of D[A] rho = A rho A^dag - {A^dag A, rho}/2."""
    A = np.asarray(A, dtype=complex)
    AdA = A.conj().T @ A
    return np.kron(A.conj(), A) - 0.5 * spre(AdA) - 0.5 * spost(AdA)


def feedback_term(F, c):
    """rho -> -i [F, c rho + rho c^dag] for a Hermitian feedback operator F."""
    c = np.asarray(c, dtype=complex)
    return -1j * commutator(F) @ (spre(c) + spost(c.conj().T))


def apply(M, rho):
    return unvec(M @ vec(rho))


def _check_eta_L(eta, L):
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta!r}")
    if not L > 0 or math.isinf(L):
        raise DomainError(f"L must be finite and > 0, got {L!r}")


def _squeezed_jump(L):
    return (L + 1) * SIGMA_MINUS - (L - 1) * SIGMA_PLUS


def build_squeezed_me(eta, L):
    """(1 - eta) D[sigma] + eta/(4L) D[(L+1) sigma - (L-1) sigma^dag]."""
    _check_eta_L(eta, L)
    return (1 - eta) * dissipator(SIGMA_MINUS) + eta / (4 * L) * dissipator(_squeezed_jump(L))


def build_squashed_me(params: BathParams):
    """Squeezed-bath generator plus homodyne feedback of both quadratures.

    X feedback: -i lx [sy/2, cx rho + rho cx^dag] + lx^2 (L + thx)/eta D[sy/2]
    with cx = ((L+1) sigma - (L-1) sigma^dag)/2.
    Y feedback: -i ly [sx/2, cy rho + rho cy^dag] + ly^2 (1/L + thy)/eta D[sx/2]
    with cy = -i((1/L+1) sigma + (1/L-1) sigma^dag)/2.
    """
    p = params
    M = build_squeezed_me(p.eta, p.L)
    Li = 1.0 / p.L
    if p.lambda_x != 0.0:
        cx = 0.5 * _squeezed_jump(p.L)
        M = M + p.lambda_x * feedback_term(SIGMA_Y / 2, cx)
        M = M + p.lambda_x**2 * (p.L + p.theta_x) / p.eta * dissipator(SIGMA_Y / 2)
    if p.lambda_y != 0.0:
        cy = -0.5j * ((Li + 1) * SIGMA_MINUS + (Li - 1) * SIGMA_PLUS)
        M = M + p.lambda_y * feedback_term(SIGMA_X / 2, cy)
        M = M + p.lambda_y**2 * (Li + p.theta_y) / p.eta * dissipator(SIGMA_X / 2)
    return M


def trace_row(M):
    """d(tr rho)/dt as a row functional; zero for a trace-preserving generator."""
    return vec(IDENTITY) @ M


def bloch_generator(M):
    """Affine Bloch dynamics dr/dt = A r + b implied by the Liouvillian."""
    A = np.empty((3, 3))
    b = np.empty(3)
    for j, Pj in enumerate(PAULIS):
        b[j] = 0.5 * np.trace(Pj @ apply(M, IDENTITY)).real
        for k, Pk in enumerate(PAULIS):
            A[j, k] = 0.5 * np.trace(Pj @ apply(M, Pk)).real
    return A, b


def extract_bloch_rates(M, tol=RATE_TOL) -> BlochRates:
    """Read gamma_x, gamma_y, gamma_z and C off the Liouvillian.

    Raises RateExtractionError if the Bloch components do not decouple.
    """
    A, b = bloch_generator(M)
    off = A - np.diag(np.diag(A))
    coupling = max(np.abs(off).max(), abs(b[0]), abs(b[1]))
    if coupling > tol * max(1.0, np.abs(A).max()):
        raise RateExtractionError(f"rate extraction invalid: Bloch cross-coupling {coupling:.3g}")
    return BlochRates(float(-A[0, 0]), float(-A[1, 1]), float(-A[2, 2]), float(-b[2]))


def liouvillian_eigenvalues(M):
    """Eigenvalues sorted by decreasing real part (0 first for a valid generator)."""
    ev = np.linalg.eigvals(M)
    return ev[np.argsort(-ev.real, kind="stable")]


def steady_state(M, tol=1e-12):
    """Unique stationary density matrix from the null space of M."""
    u, s, vh = np.linalg.svd(M)
    scale = max(1.0, s[0])
    if s[-2] < tol * scale:
        raise NoUniqueSteadyStateError(
            f"no unique steady state (two singular values below {tol * scale:.3g})"
        )
    rho = unvec(vh[-1].conj())
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def bloch_vector(rho):
    return BlochState(*(float(np.trace(P @ rho).real) for P in PAULIS))


def density_from_bloch(state: BlochState):
    return 0.5 * (IDENTITY + state.x * SIGMA_X + state.y * SIGMA_Y + state.z * SIGMA_Z)


def check_density_matrix(rho, trace_tol=1e-12, eig_tol=1e-10):
    rho = np.asarray(rho)
    if not np.allclose(rho, rho.conj().T, atol=trace_tol):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > trace_tol:
        raise DomainError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -eig_tol:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def propagator(M, t):
    """exp(M t); eigendecomposition unless the eigenbasis is ill-conditioned."""
    ev, V = np.linalg.eig(M)
    if np.linalg.cond(V) > 1e8:
        return scipy.linalg.expm(M * t)
    return V @ np.diag(np.exp(ev * t)) @ np.linalg.inv(V)


def propagate(M, rho0, t):
    return unvec(propagator(M, t) @ vec(rho0))


def _correlation_modes(M):
    """Amplitudes and exponents of C(t) = tr[sigma^dag exp(M t)(sigma rho_ss)]."""
    rho = steady_state(M)
    v0 = vec(SIGMA_MINUS @ rho)
    ev, V = np.linalg.eig(M)
    coeff = np.linalg.solve(V, v0)
    amps = (vec(SIGMA_PLUS.T) @ V) * coeff
    return amps, ev


def correlation(M, times):
    """Stationary two-time correlation <sigma^dag(t) sigma(0)> on ``times``."""
    amps, ev = _correlation_modes(M)
    t = np.asarray(times, dtype=float)
    return (amps[None, :] * np.exp(np.outer(t, ev))).sum(axis=1)


def regression_spectrum(M, eta, omega, cutoff=1e-11, max_time=1e6, steps_per_unit=None):
    """Fluorescence spectrum (1 - eta)/(2 pi) * integral C(t) e^{i w t} dt.

    C(t) is sampled on a grid long enough that |C| < cutoff at the end, the
    negative-time half follows from C(-t) = C(t)^*, and the integral is done
    by composite Simpson quadrature.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    amps, ev = _correlation_modes(M)
    c0 = np.abs(amps).sum()
    if c0 < cutoff:
        return np.zeros_like(omega)
    # modes carrying only rounding-level weight (e.g. the stationary one) are dropped
    live = np.abs(amps) > 1e-13 * c0
    slowest = np.min(-ev[live].real)
    if not slowest > 0:
        raise GridLengthError("correlation function does not decay")
    t_end = math.log(c0 / cutoff) / slowest
    if t_end > max_time:
        raise GridLengthError(f"correlation decays too slowly (needs t > {t_end:.3g})")
    fastest = max(np.abs(ev).max(), np.abs(omega).max(), 1.0)
    h = 0.01 / fastest if steps_per_unit is None else 1.0 / steps_per_unit
    n = int(math.ceil(t_end / h))
    n += n % 2  # Simpson wants an even number of intervals
    t = np.linspace(0.0, n * h, n + 1)
    C = correlation(M, t)
    if abs(C[-1]) >= cutoff:
        raise GridLengthError(f"|C(t_end)| = {abs(C[-1]):.3g} not below {cutoff:g}")
    out = np.empty_like(omega)
    chunk = max(1, int(2e6 // len(t)))
    for i in range(0, len(omega), chunk):
        w = omega[i:i + chunk]
        integrand = C[None, :] * np.exp(1j * np.outer(w, t))
        out[i:i + chunk] = 2.0 * scipy.integrate.simpson(integrand, x=t, axis=1).real
    return (1.0 - eta) / (2.0 * math.pi) * out
