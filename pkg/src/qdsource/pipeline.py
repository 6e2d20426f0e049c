"""
End-to-end experiments: emitter -> filter -> HBT -> histograms -> fits.

These functions compose the library the way the lab protocol does and are
what the command-line runner calls.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import temperature as tm
from .analysis import G2Fit, TrplFit, fit_g2, fit_trpl, g2_integrated
from .config import ExperimentConfig
from .detection import Histogram, apply_bandpass, correlate, hbt_detect, trpl_histogram
from .emitter import PhotonStream, simulate_pulse_train
from .fitting import FitError
from .seeds import derive_seed

# filter width schedule of the temperature protocol: (T_K, width_nm) knots
FILTER_SCHEDULE = ((4.0, 0.1), (120.0, 0.1), (175.0, 12.0), (300.0, 25.0))
LOW_T_POWER, HIGH_T_POWER, POWER_SWITCH_T = 0.5, 0.25, 120.0


def protocol(temperature: float):
    """(power_ratio, filter_width_nm) used at ``temperature`` in the sweep."""
    t, w = zip(*FILTER_SCHEDULE)
    width = float(np.interp(temperature, t, w))
    power = LOW_T_POWER if temperature <= POWER_SWITCH_T else HIGH_T_POWER
    return power, width


def lifetime_model_for(cfg: ExperimentConfig):
    if cfg.experiment.lifetime_model == "constant":
        return None
    return tm.default_lifetime_model


def apply_throughput(stream: PhotonStream, p: float, seed: int) -> PhotonStream:
    """Independent Bernoulli survival of each photon (lumped optics loss)."""
    if p >= 1.0:
        return stream
    keep = np.random.default_rng(seed).random(len(stream)) < p
    return stream.select(keep)


@dataclass
class Measurement:
    temperature: float
    power_ratio: float
    filter_width: float
    stream: PhotonStream
    filtered: PhotonStream
    clicks: tuple
    g2_hist: Histogram
    trpl_hist: Histogram
    trpl: TrplFit | None = None
    g2: G2Fit | None = None
    g2_integrated: float = float("nan")
    error: str = ""

    @property
    def duration(self) -> float:
        m = self.stream.meta
        return m["n_pulses"] / (m["rep_rate_mhz"] * 1e6)

    @property
    def detected_rate(self) -> float:
        """Clicks per second summed over both detectors."""
        return sum(len(c) for c in self.clicks) / self.duration


def detect(cfg: ExperimentConfig, stream: PhotonStream, filter_width: float,
           seed: int, filter_center: float | None = None):
    """Filter, attenuate and detect a photon stream; return (filtered, clicks)."""
    center = filter_center if filter_center is not None else cfg.filter.center_nm
    if center is None:
        center = stream.meta["lines"]["X"][0]
    filtered = apply_bandpass(stream, center, filter_width, seed=derive_seed(seed, "bandpass"))
    filtered = apply_throughput(filtered, cfg.experiment.collection, derive_seed(seed, "optics"))
    clicks = hbt_detect(filtered, cfg.detector, seed=derive_seed(seed, "hbt"))
    return filtered, clicks


def histograms(cfg: ExperimentConfig, clicks, period_ps: float):
    a, b = clicks
    bw = cfg.analysis.bin_width
    window = cfg.analysis.side_peaks * period_ps
    window = bw * math.ceil(window / bw)
    g2h = correlate(a, b, bw, window)
    tr = trpl_histogram(a, period_ps, cfg.analysis.trpl_bin_width) + \
        trpl_histogram(b, period_ps, cfg.analysis.trpl_bin_width)
    return g2h, tr


def analyse(cfg: ExperimentConfig, g2h: Histogram, tr: Histogram, period_ps: float):
    """TRPL fit, then the lifetime-constrained g2 fit. Raises FitError."""
    trpl = fit_trpl(tr, weighting=cfg.analysis.weighting)
    g2 = fit_g2(g2h, trpl.lifetime, period_ps, weighting=cfg.analysis.weighting,
                jitter_fwhm=cfg.detector.jitter_fwhm)
    return trpl, g2


def measure(cfg: ExperimentConfig, temperature: float, power_ratio: float, filter_width: float,
            seed: int, n_pulses: int | None = None, fit: bool = True) -> Measurement:
    """Simulate and analyse one (temperature, power, filter) point."""
    drive = replace(cfg.drive, power_ratio=power_ratio,
                    n_pulses=cfg.drive.n_pulses if n_pulses is None else n_pulses)
    stream = simulate_pulse_train(cfg.emitter, drive, temperature, lifetime_model_for(cfg),
                                  derive_seed(seed, "emitter"))
    filtered, clicks = detect(cfg, stream, filter_width, seed)
    g2h, tr = histograms(cfg, clicks, drive.period_ps)
    m = Measurement(temperature, power_ratio, filter_width, stream, filtered, clicks, g2h, tr)
    model = lifetime_model_for(cfg)
    tau = model(temperature) if model is not None else cfg.emitter.tau_x0
    try:
        m.g2_integrated = g2_integrated(g2h, drive.period_ps, lifetime=tau,
                                        jitter_fwhm=cfg.detector.jitter_fwhm)
    except ValueError as exc:
        m.error = str(exc)
    if fit:
        try:
            m.trpl, m.g2 = analyse(cfg, g2h, tr, drive.period_ps)
            m.g2_integrated = m.g2.g2_integrated
        except (FitError, ValueError) as exc:
            m.error = str(exc)
    return m


TEMPERATURE_COLUMNS = ("T_K", "wavelength_nm", "linewidth_uev", "lifetime_ns", "g2_zero",
                       "g2_integrated", "trpl_lifetime_ns", "background", "power_ratio",
                       "filter_nm", "error")


def _temperature_point(args):
    cfg, temperature, seed = args
    if cfg.filter.schedule == "protocol":
        power, width = protocol(temperature)
    else:
        power, width = cfg.drive.power_ratio, cfg.filter.width_nm
    lam = tm.emission_wavelength(temperature)
    width_uev = tm.linewidth(temperature)
    model = lifetime_model_for(cfg)
    tau = model(temperature) if model is not None else cfg.emitter.tau_x0
    try:
        m = measure(cfg, temperature, power, width, seed, n_pulses=cfg.sweep.n_pulses)
    except (ValueError, FitError) as exc:
        return (temperature, lam, width_uev, tau, math.nan, math.nan, math.nan, math.nan,
                power, width, str(exc))
    g2 = m.g2
    return (temperature, lam, width_uev, tau,
            g2.g2_zero if g2 else math.nan, m.g2_integrated,
            m.trpl.lifetime if m.trpl else math.nan,
            g2.background_level if g2 else math.nan, power, width, m.error)


def _run(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps submission order, so rows come back in sweep order
        return list(pool.map(fn, tasks))


def sweep_temperature(cfg: ExperimentConfig, temperatures=None, jobs: int = 1):
    """One row per temperature (see ``TEMPERATURE_COLUMNS``)."""
    temps = cfg.sweep.temperatures if temperatures is None else tuple(temperatures)
    if not temps:
        raise ValueError("temperature list is empty")
    tasks = [(cfg, float(t), derive_seed(cfg.seed, "sweep-temperature", float(t))) for t in temps]
    return _run(_temperature_point, tasks, jobs)


POWER_COLUMNS = ("power_ratio", "mu", "detected_rate_mcps", "x_rate_mcps", "g2_zero",
                 "g2_integrated", "trpl_lifetime_ns", "error")


def _power_point(args):
    cfg, power, seed = args
    mu = cfg.emitter.mu_sat * power
    if power == 0:
        return (power, mu, 0.0, 0.0, math.nan, math.nan, math.nan, "no drive")
    try:
        m = measure(cfg, cfg.experiment.temperature, power, cfg.filter.width_nm, seed,
                    n_pulses=cfg.sweep.n_pulses)
    except (ValueError, FitError) as exc:
        return (power, mu, math.nan, math.nan, math.nan, math.nan, math.nan, str(exc))
    x_rate = m.stream.count("X") / m.duration
    return (power, mu, m.detected_rate * 1e-6, x_rate * 1e-6,
            m.g2.g2_zero if m.g2 else math.nan, m.g2_integrated,
            m.trpl.lifetime if m.trpl else math.nan, m.error)


def sweep_power(cfg: ExperimentConfig, powers=None, jobs: int = 1):
    """One row per power ratio at ``cfg.experiment.temperature``."""
    ps = cfg.sweep.powers if powers is None else tuple(powers)
    if not ps:
        raise ValueError("power list is empty")
    tasks = [(cfg, float(p), derive_seed(cfg.seed, "sweep-power", float(p))) for p in ps]
    return _run(_power_point, tasks, jobs)


def click_streams_from(stream: PhotonStream, cfg: ExperimentConfig, seed: int):
    """Detection for an existing photon stream (CLI ``g2`` / ``trpl`` input)."""
    _, clicks = detect(cfg, stream, cfg.filter.width_nm, seed)
    return clicks

