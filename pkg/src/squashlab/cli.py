"""Command-line front end.

    squashlab --mode spectra --L 0.25 --ey 0.95 --out spectra.csv
    squashlab --mode verify

Exit status: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import bloch, liouville, loopsim, spectra, verify
from .config import AUTO, MODES, ScenarioConfig, build_config, flag_for, load_config, parse_value
from .errors import ConfigError, NumericalError, ValidationError
from .params import BathParams, BlochState, DetectorChannel, FeedbackConfig, theta_from_efficiency

log = logging.getLogger("squashlab")

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser():
    p = _Parser(prog="squashlab", description="Squashed-light spectra, loop simulation and atom decay.")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--seed", type=str)
    for name in ScenarioConfig.__dataclass_fields__:
        if name in ("mode", "out", "seed"):
            continue
        p.add_argument(flag_for(name), dest=name, type=str, metavar=name.upper())
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def write_csv(path, header, columns):
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(f"{float(v):.12g}" for v in row))
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _resolve_gain(value, S0, epsilon, name):
    if value != AUTO:
        return float(value)
    theta = theta_from_efficiency(epsilon)
    g = spectra.optimal_gain(S0, theta)
    if math.isinf(g):
        raise ValidationError(f"{name} = auto is unbounded for a perfect detector; give {name} explicitly")
    return g


def gains(cfg: ScenarioConfig):
    gx = _resolve_gain(cfg.gx, cfg.L, cfg.epsilon_x, "gx")
    gy = _resolve_gain(cfg.gy, 1.0 / cfg.L, cfg.epsilon_y, "gy")
    return gx, gy


def feedback_config(cfg: ScenarioConfig):
    gx, gy = gains(cfg)
    return FeedbackConfig(gx=gx, gy=gy, channel_x=DetectorChannel(cfg.epsilon_x),
                          channel_y=DetectorChannel(cfg.epsilon_y), tau=cfg.tau,
                          bandwidth=cfg.bandwidth)


def omega_grid(cfg):
    return np.linspace(cfg.omega_min, cfg.omega_max, cfg.n_bins)


def run_spectra(cfg, err):
    fb = feedback_config(cfg)
    curve = spectra.spectrum_curve(fb, cfg.L, omega_grid(cfg))
    sx0 = spectra.inloop_spectrum_broadband(cfg.L, fb.gx, fb.theta_x)
    sy0 = spectra.inloop_spectrum_broadband(1.0 / cfg.L, fb.gy, fb.theta_y)
    u = spectra.uncertainty_product(sx0, sy0)
    print(f"# gx={fb.gx:.12g} gy={fb.gy:.12g} broadband Sx={sx0:.12g} Sy={sy0:.12g} "
          f"sum={sx0 + sy0:.12g} product={u.product:.12g} ({u.classification})", file=err)
    for name, g in (("gx", fb.gx), ("gy", fb.gy)):
        if spectra.is_potentially_unstable(g):
            status = loopsim.stability_check(g, fb.tau, fb.bandwidth)
            print(f"# note: |{name}| >= 1, loop stability check: {status}", file=err)
    write_csv(cfg.out, ["omega", "Sx", "Sy", "product", "sum"],
              [curve.frequencies, curve.values_x, curve.values_y, curve.product, curve.total])


def run_loop_sim(cfg, err):
    sim = loopsim.SimulationConfig(feedback=feedback_config(cfg), L=cfg.L, dt=cfg.dt,
                                   n_samples=cfg.samples, seed=cfg.seed)
    record = loopsim.simulate_loop(sim)
    series = record.x if cfg.quadrature == "X" else record.y
    est = loopsim.estimate_spectrum(series, cfg.segment_length)
    sel = (est.frequencies >= cfg.omega_min) & (est.frequencies <= cfg.omega_max)
    an = loopsim.analytic_for(sim, est.frequencies[sel], cfg.quadrature)
    rep = loopsim.verify_against_analytic(sim, cfg.segment_length, (cfg.omega_min, cfg.omega_max),
                                          cfg.quadrature, record=record)
    print(f"# {cfg.quadrature}: {est.n_segments} segments, {100 * rep.fraction_within_3se:.1f}% of bins "
          f"within 3 SE, max rel dev {rep.max_relative_deviation:.3g}, plateau {rep.plateau:.6g} "
          f"(analytic {rep.plateau_analytic:.6g})", file=err)
    write_csv(cfg.out, ["omega", "S_est", "S_err", "S_analytic"],
              [est.frequencies[sel], est.estimates[sel], est.standard_errors[sel], np.atleast_1d(an)])


def bath_params(cfg):
    gx, gy = gains(cfg)
    if cfg.eta == 0.0:
        gx = gy = 0.0  # no coupling, feedback cannot act on the atom
    return BathParams.from_gains(cfg.eta, cfg.L, gx, gy, cfg.epsilon_x, cfg.epsilon_y)


def run_atom(cfg, err):
    params = bath_params(cfg)
    rates = bloch.rates_squashed(params)
    print(f"# gamma_x={rates.gamma_x:.12g} gamma_y={rates.gamma_y:.12g} "
          f"gamma_z={rates.gamma_z:.12g} C={rates.C:.12g}", file=err)
    t = np.linspace(0.0, cfg.t_max, cfg.n_bins)
    traj = bloch.bloch_trajectory(rates, BlochState(cfg.x0, cfg.y0, cfg.z0), t)
    write_csv(cfg.out, ["t", "x", "y", "z"], [t, traj[:, 0], traj[:, 1], traj[:, 2]])


def run_fluorescence(cfg, err):
    params = bath_params(cfg)
    rates = bloch.rates_squashed(params)
    omega = omega_grid(cfg)
    closed = bloch.fluorescence_spectrum(params.eta, rates, omega)
    M = liouville.build_squashed_me(params)
    reg = liouville.regression_spectrum(M, params.eta, omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(closed != 0, reg / closed, np.nan)
    print(f"# gamma_x={rates.gamma_x:.12g} gamma_y={rates.gamma_y:.12g} "
          f"FWHM={bloch.lineshape_fwhm(rates):.9g}", file=err)
    write_csv(cfg.out, ["omega", "P_closed_form", "P_regression", "ratio"], [omega, closed, reg, ratio])


def run_verify(cfg, err):
    results = verify.run_all(echo=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 0 if not failed else 2


RUNNERS = {
    "spectra": run_spectra,
    "loop-sim": run_loop_sim,
    "atom": run_atom,
    "fluorescence": run_fluorescence,
    "verify": run_verify,
}


def parse_args(argv):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    file_entries = load_config(args.config) if args.config else {}
    overrides = {}
    for key in ScenarioConfig.__dataclass_fields__:
        raw = getattr(args, key, None)
        if raw is not None:
            overrides[key] = parse_value(key, raw, flag_for(key))
    if "mode" not in overrides and "mode" not in file_entries:
        raise ConfigError("no mode given (use --mode or 'mode = ...' in the config file)")
    return build_config(file_entries, overrides)


def run(argv=None, err=None):
    err = sys.stderr if err is None else err
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
        print(cfg.echo().replace("\n", "\n# ").join(["# ", ""]), file=err)
        status = RUNNERS[cfg.mode](cfg, err)
        return status or 0
    except ValidationError as exc:
        print(f"error: {exc}", file=err)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=err)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
