import math

import numpy as np
import pytest
from scipy.special import lambertw

from squashlab import loopsim, spectra
from squashlab.errors import DomainError, InstabilityError
from squashlab.loopsim import SimulationConfig, TimeSeries
from squashlab.params import DetectorChannel, FeedbackConfig


def loop_config(g=-1.0, eps=0.5, L=1.0, tau=0.001, bw=100.0, dt=1e-4, n=2**20, seed=1, quad="X"):
    if quad == "X":
        fb = FeedbackConfig(gx=g, channel_x=DetectorChannel(eps), tau=tau, bandwidth=bw)
    else:
        fb = FeedbackConfig(gy=g, channel_y=DetectorChannel(eps), tau=tau, bandwidth=bw)
    return SimulationConfig(feedback=fb, L=L, dt=dt, n_samples=n, seed=seed)


def stepwise_loop(x0, xi, g, theta, a, d):
    """Literal per-step loop with a circular delay buffer; oracle for the IIR form."""
    n = len(x0)
    buf = [0.0] * (d + 1)  # f[n-d] .. f[n]
    f = 0.0
    out = np.empty(n)
    for k in range(n):
        buf[k % (d + 1)] = f
        f_delayed = buf[(k - d) % (d + 1)] if k >= d else 0.0
        chi = g * f_delayed
        u = x0[k] + chi + math.sqrt(theta) * xi[k]
        out[k] = x0[k] + chi
        f = f + a * (u - f)
    return out


def test_iir_matches_stepwise_oracle():
    cfg = SimulationConfig(feedback=FeedbackConfig(gx=-1.7, channel_x=DetectorChannel(0.4), tau=0.001,
                                                   bandwidth=100.0),
                           L=0.7, dt=1e-4, n_samples=2**12, seed=3, warmup=1000)
    rec = loopsim.simulate_loop(cfg)
    rng = np.random.default_rng(3)
    n = 1000 + 2**12
    x0 = rng.normal(0, math.sqrt(0.7 / 1e-4), n)
    xi = rng.normal(0, math.sqrt(1 / 1e-4), n)
    want = stepwise_loop(x0, xi, -1.7, 1 / 0.4 - 1, 0.01, 10)[1000:]
    np.testing.assert_allclose(rec.x.samples, want, rtol=1e-9, atol=1e-9 * np.abs(want).max())


def test_determinism():
    cfg = loop_config(n=2**14)
    a, b = loopsim.simulate_loop(cfg), loopsim.simulate_loop(cfg)
    assert np.array_equal(a.x.samples, b.x.samples)
    assert np.array_equal(a.y.samples, b.y.samples)
    c = loopsim.simulate_loop(loop_config(n=2**14, seed=2))
    assert not np.array_equal(a.x.samples, c.x.samples)


def test_causality():
    rng = np.random.default_rng(0)
    w = rng.normal(size=500)
    d, k = 10, 200
    base = loopsim.closed_loop_response(w, -1.0, 0.01, d)
    w2 = w.copy()
    w2[k] += 5.0
    pert = loopsim.closed_loop_response(w2, -1.0, 0.01, d)
    assert np.array_equal(base[: k + d + 1], pert[: k + d + 1])
    assert pert[k + d + 1] != base[k + d + 1]


def white(v, dt, n, seed=0):
    rng = np.random.default_rng(seed)
    return TimeSeries(dt, rng.normal(0, math.sqrt(v / dt), n))


@pytest.mark.parametrize("v", [1.0, 0.5])
def test_welch_calibration(v):
    est = loopsim.estimate_spectrum(white(v, 1e-3, 2**18), 1024)
    within = np.abs(est.estimates - v) <= 3 * est.standard_errors
    assert within.mean() >= 0.95
    assert est.estimates.mean() == pytest.approx(v, rel=0.01)


def test_welch_lorentzian():
    dt, bw, n = 1e-3, 10.0, 2**20
    u = white(1.0, dt, n, seed=5).samples
    # forward-Euler single pole, as in the loop filter
    from scipy.signal import lfilter
    a = dt * bw
    y = lfilter([0.0, a], [1.0, -(1.0 - a)], u)
    est = loopsim.estimate_spectrum(TimeSeries(dt, y), 4096)
    sel = (est.frequencies > 0) & (est.frequencies < 5 * bw)
    want = bw**2 / (bw**2 + est.frequencies[sel] ** 2)
    within = np.abs(est.estimates[sel] - want) <= 3 * est.standard_errors[sel]
    assert within.mean() >= 0.95


def test_welch_errors():
    s = white(1.0, 1e-3, 1024)
    with pytest.raises(DomainError):
        loopsim.estimate_spectrum(s, 2048)
    with pytest.raises(DomainError):
        loopsim.estimate_spectrum(s, 1000)


def test_standard_error_convergence():
    seg = 512
    s1 = loopsim.estimate_spectrum(white(1.0, 1e-3, 2**17, seed=1), seg)
    s2 = loopsim.estimate_spectrum(white(1.0, 1e-3, 2**18, seed=2), seg)
    quoted = np.mean(s2.standard_errors / s2.estimates) / np.mean(s1.standard_errors / s1.estimates)
    assert quoted == pytest.approx(1 / math.sqrt(2), rel=0.2)
    scatter = np.std(s2.estimates - 1.0) / np.std(s1.estimates - 1.0)
    assert scatter == pytest.approx(1 / math.sqrt(2), rel=0.2)


def stable_root(g, tau, bw):
    """Rightmost closed-loop pole of 1 - g e^{-s tau} bw/(bw + s) = 0 (Lambert W)."""
    if tau == 0:
        return bw * (g - 1)
    return (lambertw(g * bw * tau * np.exp(bw * tau)) / tau - bw).real


@pytest.mark.parametrize("g,tau,bw,want", [
    (-1.0, 0.0, 100.0, "stable"),
    (-1.0, 0.0, 1.0, "stable"),
    (0.999, 0.0, 100.0, "marginal"),
    (-5.0, 2 / 100.0, 100.0, "unstable"),
])
def test_stability_examples(g, tau, bw, want):
    assert loopsim.stability_check(g, tau, bw) == want


def test_stability_matches_lambert_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(200):
        g = rng.uniform(-30, 3)
        if abs(g - 1) < 0.05:
            continue
        bw = 10 ** rng.uniform(0, 3)
        tau = rng.uniform(0, 3) / bw
        status = loopsim.stability_check(g, tau, bw)
        if status == "marginal":
            continue
        root = stable_root(g, tau, bw)
        if abs(root) < 1e-6 * bw:
            continue
        assert status == ("unstable" if root > 0 else "stable"), (g, tau, bw, root)
        checked += 1
    assert checked > 150


def test_open_loop_is_raw_noise():
    cfg = loop_config(g=0.0, eps=0.0, n=2**18)
    rec = loopsim.simulate_loop(cfg)
    rng = np.random.default_rng(cfg.seed)
    x0 = rng.normal(0, math.sqrt(1 / cfg.dt), cfg.warmup_steps + cfg.n_samples)
    np.testing.assert_array_equal(rec.x.samples, x0[cfg.warmup_steps:])
    rep = loopsim.verify_against_analytic(cfg, 256, (0.0, math.pi / cfg.dt), record=rec)
    assert rep.fraction_within_3se >= 0.95
    assert rep.max_relative_deviation < 0.08


def test_open_loop_deviation_full_length():
    cfg = loop_config(g=0.0, eps=0.0, n=2**22)
    rep = loopsim.verify_against_analytic(cfg, 256, (0.0, math.pi / cfg.dt))
    assert rep.max_relative_deviation < 0.05


def test_squash_plateau_and_y_untouched():
    cfg = loop_config(n=2**21, seed=4)
    rec = loopsim.simulate_loop(cfg)
    rep = loopsim.verify_against_analytic(cfg, 2**15, (0.0, 10.0), record=rec)
    assert rep.fraction_within_3se >= 0.95
    assert rep.plateau == pytest.approx(0.5, rel=0.05)
    # Y quadrature is open loop: variance * dt estimates its white level 1/L
    y = rec.y.samples
    var = y.var() * cfg.dt
    se = math.sqrt(2.0 / len(y))
    assert abs(var - 1.0) <= 3 * se


def test_y_variance_with_squeezed_input():
    cfg = loop_config(L=0.25, n=2**20, seed=9)
    rec = loopsim.simulate_loop(cfg)
    var = rec.y.samples.var() * cfg.dt
    assert abs(var - 4.0) <= 3 * 4.0 * math.sqrt(2.0 / len(rec.y.samples))
    est = loopsim.estimate_spectrum(rec.y, 2**12)
    assert est.estimates[1:].mean() == pytest.approx(4.0, rel=0.02)


def test_high_frequency_returns_to_open_loop():
    cfg = loop_config(n=2**20, seed=6)
    est = loopsim.estimate_spectrum(loopsim.simulate_loop(cfg).x, 2**10)
    # residual loop response ~ 2 bw / w stays below the per-bin error for w > 100 bw
    sel = est.frequencies > 100 * cfg.feedback.bandwidth
    within = np.abs(est.estimates[sel] - cfg.L) <= 3 * est.standard_errors[sel]
    assert sel.sum() > 50
    assert within.mean() >= 0.95


def test_y_squash_with_squeezed_input():
    # L = 0.25, eps_y = 0.95 at the optimal gain; zero delay keeps the g = -76 loop stable
    theta = 1 / 0.95 - 1
    g = spectra.optimal_gain(4.0, theta)
    cfg = loop_config(g=g, eps=0.95, L=0.25, tau=0.0, n=2**21, seed=8, quad="Y")
    rep = loopsim.verify_against_analytic(cfg, 2**15, (0.0, 10.0), quadrature="Y")
    assert rep.plateau_analytic == pytest.approx(4 / 77, rel=1e-12)
    assert rep.plateau == pytest.approx(4 / 77, rel=0.05)


def test_unstable_loop_refused_and_divergence_named():
    cfg = loop_config(g=1.5, n=2**14)
    with pytest.raises(InstabilityError, match="unstable"):
        loopsim.simulate_loop(cfg)
    with pytest.raises(InstabilityError, match="diverged at step"):
        loopsim.simulate_loop(cfg, override_stability=True)


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0),
    dict(dt=5e-4),  # coarser than tau/10
    dict(n=1000),
])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        loop_config(**kwargs)


def test_warmup_minimum():
    cfg = loop_config()
    assert cfg.warmup_steps == 1000
    with pytest.raises(DomainError):
        SimulationConfig(feedback=cfg.feedback, warmup=10)
