"""Acceptance checks tying the closed forms, the simulator and the
master-equation engine together. Each check returns a :class:`CriterionResult`;
``squashlab --mode verify`` and the test-suite both run them."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bloch, liouville, loopsim, spectra
from .params import BathParams, BlochState, DetectorChannel, FeedbackConfig, theta_from_efficiency


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _close(a, b, tol):
    return abs(a - b) <= tol


def squeeze_squash_example():
    pair = spectra.squeeze_squash_pair(0.25, 0.95)
    ok = pair.sx == 0.25 and _close(pair.sy, 0.051948, 1e-6) and _close(pair.total, 0.301948, 1e-6)
    return ok, f"Sx={pair.sx:.12g} Sy={pair.sy:.9f} sum={pair.total:.9f}"


def decay_suppression():
    theta = theta_from_efficiency(0.95)
    lam = bloch.optimal_lambda_y(1.0, 0.25, theta)
    rates = bloch.rates_squashed(BathParams(eta=1.0, L=0.25, lambda_y=lam, theta_y=theta))
    ok = _close(rates.gamma_z, 0.150974, 1e-6)
    return ok, f"lambda_y={lam:.9f} gamma_z={rates.gamma_z:.9f} (1 - gamma_z = {1 - rates.gamma_z:.4f})"


def optimal_gain_bound():
    g = np.linspace(-20.0, 0.9, 200_001)
    worst_gap = math.inf
    worst_attain = 0.0
    for L in (0.1, 0.5, 1.0, 2.0):
        for theta in (0.05, 0.2, 1.0, 5.0):
            bound = spectra.min_inloop_spectrum(L, theta)
            sweep = (L + g * g * theta) / (1.0 - g) ** 2
            assert np.allclose(sweep[::1000], [spectra.inloop_spectrum_broadband(L, x, theta) for x in g[::1000]])
            worst_gap = min(worst_gap, float(sweep.min() - bound))
            at = spectra.inloop_spectrum_broadband(L, spectra.optimal_gain(L, theta), theta)
            worst_attain = max(worst_attain, abs(at - bound))
    ok = worst_gap >= -1e-9 and worst_attain <= 1e-6
    return ok, f"min(sweep - bound)={worst_gap:.3g}, max|S(g*) - bound|={worst_attain:.3g}"


def heterodyne_squash():
    r = spectra.dual_squash_sum(0.5, 0.5)
    ok = r.sx == 0.5 and r.sy == 0.5 and r.total == 1.0
    return ok, f"Sx={r.sx!r} Sy={r.sy!r} sum={r.total!r}"


ACCEPTANCE_LOOP = dict(L=1.0, epsilon=0.5, g=-1.0, bandwidth=100.0, tau=0.001, dt=1e-4,
                       n_samples=2**22, segment_length=2**16, seed=20240611)


def loop_simulation(seed=None):
    p = ACCEPTANCE_LOOP
    fb = FeedbackConfig(gx=p["g"], channel_x=DetectorChannel(p["epsilon"]),
                        tau=p["tau"], bandwidth=p["bandwidth"])
    cfg = loopsim.SimulationConfig(feedback=fb, L=p["L"], dt=p["dt"], n_samples=p["n_samples"],
                                   seed=p["seed"] if seed is None else seed)
    rep = loopsim.verify_against_analytic(cfg, p["segment_length"], (0.0, p["bandwidth"] / 10))
    plateau_dev = abs(rep.plateau - 0.5) / 0.5
    ok = rep.fraction_within_3se >= 0.95 and plateau_dev <= 0.05
    return ok, (f"{len(rep.frequencies)} bins, {100 * rep.fraction_within_3se:.1f}% within 3 SE; "
                f"plateau={rep.plateau:.4f} (dev {100 * plateau_dev:.2f}%), band mean={rep.band_mean:.4f}")


def random_bath_params(rng, n):
    """Feasible BathParams with moderate magnitudes."""
    out = []
    while len(out) < n:
        eta = rng.uniform(0.05, 1.0)
        L = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        ex = rng.uniform(0.05, 0.9)
        ey = rng.uniform(0.05, 1.0 - ex) if ex < 0.95 else 0.0
        gx, gy = rng.uniform(-10.0, 0.5, 2)
        out.append(BathParams.from_gains(eta, L, gx, gy, ex, ey))
    return out


def _scaled_err(got, want):
    return max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(got, want))


def liouvillian_oracle(n=1000, seed=7):
    rng = np.random.default_rng(seed)
    worst_rates = worst_eig = worst_open = 0.0
    for p in random_bath_params(rng, n):
        M = liouville.build_squashed_me(p)
        closed = bloch.rates_squashed(p)
        got = liouville.extract_bloch_rates(M)
        worst_rates = max(worst_rates, _scaled_err(got.as_tuple(), closed.as_tuple()))
        ev = np.sort(liouville.liouvillian_eigenvalues(M).real)
        want = np.sort([0.0, -closed.gamma_x, -closed.gamma_y, -closed.gamma_z])
        z = liouville.bloch_vector(liouville.steady_state(M)).z
        eig_c = -z * closed.gamma_z
        worst_eig = max(worst_eig, _scaled_err(list(ev) + [eig_c], list(want) + [closed.C]))
        M0 = liouville.build_squeezed_me(p.eta, p.L)
        worst_open = max(worst_open, _scaled_err(liouville.extract_bloch_rates(M0).as_tuple(),
                                                 bloch.rates_squeezed(p.eta, p.L).as_tuple()))
    ok = max(worst_rates, worst_eig, worst_open) <= 1e-10
    return ok, (f"{n} draws: rates err {worst_rates:.2g}, eigen/steady-state err {worst_eig:.2g}, "
                f"open-loop err {worst_open:.2g}")


def fluorescence_lineshape():
    eta, L = 0.5, 0.5
    M = liouville.build_squeezed_me(eta, L)
    rates = bloch.rates_squeezed(eta, L)
    omega = np.linspace(-10.0, 10.0, 401)
    P_reg = liouville.regression_spectrum(M, eta, omega)
    P_cf = bloch.fluorescence_spectrum(eta, rates, omega)
    shape_err = float(np.abs(P_reg / P_reg.max() - P_cf / P_cf.max()).max())
    widths, _ = bloch.fit_two_lorentzians(omega, P_reg)
    width_err = max(abs(widths[0] - 0.375), abs(widths[1] - 0.75))
    ratio = P_reg / P_cf
    ok = shape_err <= 1e-6 and width_err <= 1e-6
    return ok, (f"lineshape err {shape_err:.2g}, widths {widths[0]:.9f}/{widths[1]:.9f}; "
                f"normalisation ratio regression/closed-form = {ratio.mean():.6f} "
                f"(spread {ratio.max() - ratio.min():.1g}, reported only)")


def uncertainty_classification():
    worst = 0.0
    for L in (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0):
        u = spectra.uncertainty_product(L, 1.0 / L)
        worst = max(worst, abs(u.product - 1.0))
        if u.classification != spectra.FREE_FIELD_LEGAL:
            return False, f"free field L={L} misclassified"
    for L in (0.1, 0.5, 1.0, 3.0):
        for eps in (0.05, 0.5, 0.95, 1.0):
            theta = theta_from_efficiency(eps)
            sx = spectra.min_inloop_spectrum(L, theta)
            if sx == 0.0:
                continue  # perfect detector: zero noise, product 0, violation trivially
            u = spectra.uncertainty_product(sx, 1.0 / L)
            if u.classification != spectra.SQUASHED_VIOLATION:
                return False, f"squashed L={L}, eps={eps} classified {u.classification}"
    ok = worst <= 1e-12
    return ok, f"free-field |product - 1| <= {worst:.2g}; all squashed configurations violate"


def frozen_atom():
    prev = None
    worst_change = 0.0
    monotone = True
    for k in range(1, 7):
        L = 10.0**-k
        theta = L
        lam = bloch.optimal_lambda_y(1.0, L, theta)
        rates = bloch.rates_squashed(BathParams(eta=1.0, L=L, lambda_y=lam, theta_y=theta))
        vals = rates.as_tuple()
        if prev is not None and any(v >= p for v, p in zip(vals, prev)):
            monotone = False
        prev = vals
        z1 = bloch.evolve_bloch(rates, BlochState(0.0, 0.0, 1.0), 1.0).z
        change = abs(z1 - 1.0)
        worst_change = max(worst_change, change / (10 * L))
        if change >= 10 * L:
            return False, f"L={L:g}: z changed by {change:.3g}"
    ok = monotone and max(prev) < 1e-5
    return ok, (f"rates strictly decreasing={monotone}, at L=1e-6 rates={tuple(f'{v:.2g}' for v in prev)}, "
                f"max change/(10L)={worst_change:.3g}")


CRITERIA = [
    (1, "squeeze+squash worked example", squeeze_squash_example),
    (2, "decay suppression gamma_z", decay_suppression),
    (3, "optimal-gain bound", optimal_gain_bound),
    (4, "heterodyne squash", heterodyne_squash),
    (5, "stochastic vs analytic spectrum", loop_simulation),
    (6, "Liouvillian vs closed-form rates", liouvillian_oracle),
    (7, "fluorescence lineshape", fluorescence_lineshape),
    (8, "uncertainty-violation classification", uncertainty_classification),
    (9, "frozen-atom limit", frozen_atom),
]


def run_criterion(number) -> CriterionResult:
    num, name, fn = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed criterion, not a crashed gate
        ok, detail = False, f"error: {exc!r}"
    return CriterionResult(num, name, bool(ok), detail, time.perf_counter() - t0)


def run_all(echo=print):
    results = []
    for num, _, _ in CRITERIA:
        r = run_criterion(num)
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
