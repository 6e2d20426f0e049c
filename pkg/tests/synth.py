"""Independent generators for synthetic test data.

Everything here samples events directly (delays, photon numbers) and bins
them with numpy, so none of it shares code with the fit models under test.
"""

import math

import numpy as np

from qdsource.detection import ClickStream, Histogram

PERIOD = 50_000.0  # ps, 20 MHz


def coincidence_histogram(g2, b_over_a, tau_ns, amplitude=400.0, bin_width=100.0,
                          n_side=6, period=PERIOD, seed=0):
    """Peak train sampled event by event: Laplace delays around k*period.

    ``amplitude`` is the expected counts per bin at a side-peak maximum; the
    flat background is ``b_over_a * amplitude`` per bin.
    """
    rng = np.random.default_rng(seed)
    tau = tau_ns * 1e3
    half = int(round(n_side * period / bin_width))
    edges = (np.arange(2 * half + 2) - half - 0.5) * bin_width
    lo, hi = edges[0], edges[-1]
    area = amplitude * 2.0 * tau / bin_width  # counts under one side peak
    delays = []
    # peaks just outside the window still leak their tails in
    reach = n_side + 1 + int(math.ceil(20 * tau / period))
    for k in range(-reach, reach + 1):
        n = rng.poisson(area * (g2 if k == 0 else 1.0))
        delays.append(k * period + rng.laplace(0.0, tau, n))
    n_bkg = rng.poisson(b_over_a * amplitude * (len(edges) - 1))
    delays.append(rng.uniform(lo, hi, n_bkg))
    d = np.concatenate(delays)
    counts = np.histogram(d, bins=edges)[0]
    return Histogram(bin_width, lo, counts, "coincidence")


def decay_histogram(tau_ns, n_events, bkg_fraction=0.0, bin_width=50.0, period=PERIOD, seed=0):
    """TRPL histogram: exponential delays plus a flat floor.

    ``bkg_fraction`` is the floor per bin relative to the expected counts in
    the first bin of the decay.
    """
    rng = np.random.default_rng(seed)
    nbins = int(round(period / bin_width))
    edges = np.arange(nbins + 1) * bin_width
    t = rng.exponential(tau_ns * 1e3, n_events)
    t = t[t < period]
    counts = np.histogram(t, bins=edges)[0]
    peak = n_events * -math.expm1(-bin_width / (tau_ns * 1e3))
    counts = counts + rng.poisson(bkg_fraction * peak, nbins)
    return Histogram(bin_width, 0.0, counts, "decay"), bkg_fraction * peak


def mixed_clicks(p, n_pulses, tau_ns=2.1, period=PERIOD, signal_prob=0.5, seed=0):
    """Two HBT channels fed by a perfect single-photon source plus Poisson noise.

    Each pulse carries at most one signal photon (probability ``signal_prob``)
    and a Poisson number of background photons with mean chosen so that the
    signal makes up a fraction ``p`` of all photons. Every photon is routed
    to one of two ideal detectors.
    """
    rng = np.random.default_rng(seed)
    beta = signal_prob * (1.0 - p) / p
    n_sig = (rng.random(n_pulses) < signal_prob).astype(np.int64)
    n_bkg = rng.poisson(beta, n_pulses)
    per_pulse = n_sig + n_bkg
    pulse = np.repeat(np.arange(n_pulses), per_pulse)
    t = pulse * period + rng.exponential(tau_ns * 1e3, len(pulse))
    arm = rng.random(len(t)) < 0.5
    return ClickStream(0, np.sort(t[~arm])), ClickStream(1, np.sort(t[arm]))
