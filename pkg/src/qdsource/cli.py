"""
Command-line runner.

    qdsource simulate --config run.cfg --out results/ --seed 7
    qdsource g2 --config run.cfg --input results/stream.csv --out results/
    qdsource sweep-temperature --config run.cfg --out sweep/ --jobs 4

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure, 4 fit did not
converge (a partial report is still written).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from . import budget as bd
from . import io as qio
from . import temperature as tm
from . import waveguide as wg
from .analysis import fit_g2, fit_trpl, g2_integrated
from .config import ConfigError, ExperimentConfig, load
from .emitter import EmptySimulationError, config_digest, simulate_pulse_train
from .fitting import FitError
from .pipeline import (POWER_COLUMNS, TEMPERATURE_COLUMNS, detect, histograms,
                       lifetime_model_for, sweep_power, sweep_temperature)
from .seeds import derive_seed

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FIT = 0, 2, 3, 4


def _config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be >= 0", key="--seed")
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _meta(cfg: ExperimentConfig, command: str, **extra):
    m = {"command": command, "seed": cfg.seed, "config_digest": config_digest(cfg),
         "version": __version__}
    m.update(extra)
    return m


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stream_for(cfg, args):
    if getattr(args, "input", None):
        return qio.read_stream(args.input)
    return simulate_pulse_train(cfg.emitter, cfg.drive, cfg.experiment.temperature,
                                lifetime_model_for(cfg), derive_seed(cfg.seed, "emitter"))


def cmd_simulate(cfg, args):
    out = _outdir(args)
    stream = _stream_for(cfg, args)
    stream.meta["config_digest"] = config_digest(cfg)
    _, clicks = detect(cfg, stream, cfg.filter.width_nm, cfg.seed)
    qio.write_stream(out / "stream.csv", stream)
    qio.write_clicks(out / "clicks.csv", clicks, _meta(cfg, "simulate",
                                                        temperature=cfg.experiment.temperature))
    print(f"{len(stream)} photons, {sum(len(c) for c in clicks)} clicks -> {out}")
    return EXIT_OK


def _fit_report(path, cfg, trpl, g2, gi, error=""):
    lines = [f"# {k}: {v}" for k, v in _meta(cfg, "fit").items()]
    if trpl is not None:
        lines += [f"trpl.{k} = {v!r}" for k, v in asdict(trpl).items()]
    if g2 is not None:
        lines += [f"g2.{k} = {v!r}" for k, v in asdict(g2).items()]
    lines.append(f"g2_integrated_background_included = {gi!r}")
    if error:
        lines.append(f"error = {error!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_g2(cfg, args):
    out = _outdir(args)
    stream = _stream_for(cfg, args)
    period = 1e6 / stream.meta.get("rep_rate_mhz", cfg.drive.rep_rate)
    T = stream.meta.get("temperature", cfg.experiment.temperature)
    _, clicks = detect(cfg, stream, cfg.filter.width_nm, cfg.seed)
    g2h, tr = histograms(cfg, clicks, period)
    meta = _meta(cfg, "g2", temperature=T)
    qio.write_histogram(out / "g2_histogram.csv", g2h, meta)
    qio.write_histogram(out / "trpl_histogram.csv", tr, meta)
    trpl = g2 = None
    gi = math.nan
    try:
        model = lifetime_model_for(cfg)
        tau = model(T) if model else cfg.emitter.tau_x0
        gi = g2_integrated(g2h, period, lifetime=tau, jitter_fwhm=cfg.detector.jitter_fwhm)
        trpl = fit_trpl(tr, weighting=cfg.analysis.weighting)
        g2 = fit_g2(g2h, trpl.lifetime, period, cfg.analysis.weighting, cfg.detector.jitter_fwhm)
    except (FitError, ValueError) as exc:
        # data too sparse or shapeless to analyse: keep whatever was computed
        _fit_report(out / "fit_report.txt", cfg, trpl, g2, gi, str(exc))
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    _fit_report(out / "fit_report.txt", cfg, trpl, g2, gi)
    qio.write_table(out / "fit.csv", qio.FIT_HEADER,
                    [g2.as_row(T, stream.meta.get("power_ratio", cfg.drive.power_ratio))], meta)
    print(f"g2(0) fit = {g2.g2_zero:.4f}  integrated = {gi:.4f}  tau = {trpl.lifetime:.3f} ns")
    return EXIT_OK


def cmd_trpl(cfg, args):
    out = _outdir(args)
    stream = _stream_for(cfg, args)
    period = 1e6 / stream.meta.get("rep_rate_mhz", cfg.drive.rep_rate)
    _, clicks = detect(cfg, stream, cfg.filter.width_nm, cfg.seed)
    _, tr = histograms(cfg, clicks, period)
    meta = _meta(cfg, "trpl")
    qio.write_histogram(out / "trpl_histogram.csv", tr, meta)
    try:
        fit = fit_trpl(tr, weighting=cfg.analysis.weighting)
    except FitError as exc:
        _fit_report(out / "fit_report.txt", cfg, None, None, math.nan, str(exc))
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    _fit_report(out / "fit_report.txt", cfg, fit, None, math.nan)
    print(f"tau = {fit.lifetime:.4f} ns")
    return EXIT_OK


def cmd_sweep_temperature(cfg, args):
    out = _outdir(args)
    rows = sweep_temperature(cfg, jobs=args.jobs)
    qio.write_table(out / "sweep_temperature.csv", TEMPERATURE_COLUMNS, rows,
                    _meta(cfg, "sweep-temperature"))
    lt = [(t, tm.default_lifetime_model(t)) for t in cfg.sweep.temperatures]
    qio.write_table(out / "lifetime_curve.csv", qio.LIFETIME_HEADER, lt, _meta(cfg, "lifetime"))
    for r in rows:
        print(f"T = {r[0]:6.1f} K  g2 = {r[4]:.4f}  {r[-1]}")
    return EXIT_OK


def cmd_sweep_power(cfg, args):
    out = _outdir(args)
    rows = sweep_power(cfg, jobs=args.jobs)
    qio.write_table(out / "sweep_power.csv", POWER_COLUMNS, rows, _meta(cfg, "sweep-power"))
    for r in rows:
        print(f"P/Psat = {r[0]:5.2f}  rate = {r[2]:.3f} Mcps  g2 = {r[4]:.4f}")
    return EXIT_OK


def cmd_budget(cfg, args):
    out = _outdir(args)
    b = bd.compute_budget(cfg.budget.inputs(), cfg.budget.multiphoton)
    rows = bd.report_rows(b)
    qio.write_table(out / "budget.csv", ("stage", "percent", "percent_rounded"), rows,
                    _meta(cfg, "budget", multiphoton=b.multiphoton))
    print(bd.format_table(b))
    return EXIT_OK


def cmd_waveguide(cfg, args):
    out = _outdir(args)
    w = cfg.waveguide
    rows = wg.sweep(w.diameters, w.wavelengths(), w.n_core, w.n_clad)
    qio.write_table(out / "waveguide.csv", qio.WAVEGUIDE_HEADER, rows, _meta(cfg, "waveguide"))
    print(f"{len(rows)} grid points -> {out / 'waveguide.csv'}")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate a photon stream and detector clicks"),
    "g2": (cmd_g2, "coincidence histogram, TRPL and g2 fits"),
    "trpl": (cmd_trpl, "decay histogram and lifetime fit"),
    "sweep-temperature": (cmd_sweep_temperature, "g2(0) versus temperature"),
    "sweep-power": (cmd_sweep_power, "count rate and g2(0) versus pump power"),
    "budget": (cmd_budget, "efficiency chain"),
    "waveguide": (cmd_waveguide, "HE11 mode and emission-rate sweep"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="master seed (overrides config)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel sweep points")
    p = argparse.ArgumentParser(prog="qdsource", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        if name in ("g2", "trpl"):
            sp.add_argument("--input", metavar="CSV", help="photon stream written by 'simulate'")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    fn = COMMANDS[args.command][0]
    try:
        return fn(cfg, args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (EmptySimulationError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
