import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qdsource import temperature as tm
from qdsource.detection import (ClickStream, DetectorConfig, Histogram, apply_bandpass, correlate,
                                hbt_detect, lorentzian_pass_fraction, trpl_histogram)
from qdsource.emitter import DriveConfig, EmitterConfig, PhotonStream, simulate_pulse_train

IDEAL = DetectorConfig(efficiency=1.0, jitter_fwhm=0.0, dark_rate=0.0)


def x_stream(n, center=1301.28, fwhm_uev=45.0, seed=0, times=None):
    fwhm = tm.fwhm_uev_to_nm(fwhm_uev, center)
    t = np.arange(n, dtype=float) * 1000.0 if times is None else np.asarray(times, float)
    return PhotonStream(t, np.zeros(len(t), np.int8), np.full(len(t), center),
                        {"seed": seed, "lines": {"X": [center, fwhm]},
                         "n_pulses": n, "rep_rate_mhz": 1000.0})


def brute_force_hist(a, b, bw, window, skip_self=False):
    d = np.subtract.outer(b, a)
    if skip_self:
        np.fill_diagonal(d, np.nan)
    d = d[np.isfinite(d)]
    half = int(round(window / bw))
    edges = (np.arange(2 * half + 2) - half - 0.5) * bw
    return np.histogram(d, bins=edges)[0]


# --- bandpass -----------------------------------------------------------------

def test_infinite_width_is_identity():
    s = x_stream(1000)
    out = apply_bandpass(s, 1301.28, math.inf, seed=1)
    assert np.array_equal(out.time_ps, s.time_ps)
    assert out is not s


def test_narrow_filter_matches_lorentzian_cdf():
    n = 200_000
    s = x_stream(n)
    fwhm = s.meta["lines"]["X"][1]
    out = apply_bandpass(s, 1301.28, 0.1, seed=3)
    # closed form for a centered top hat: (2/pi) atan(width / fwhm)
    p = 2 / math.pi * math.atan(0.1 / fwhm)
    assert lorentzian_pass_fraction(1301.28, fwhm, 1301.28, 0.1) == pytest.approx(p, rel=1e-12)
    assert abs(len(out) / n - p) < 3 * math.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(out.wavelength_nm - 1301.28) <= 0.05)


def test_detuned_filter_nearly_empty():
    n = 100_000
    s = x_stream(n)
    fwhm = s.meta["lines"]["X"][1]
    center = 1301.28 + 10 * fwhm
    out = apply_bandpass(s, center, fwhm, seed=4)
    frac = lorentzian_pass_fraction(1301.28, fwhm, center, fwhm)
    assert frac < 0.04
    assert len(out) / n < 0.04


def test_bandpass_rejects_bad_width():
    with pytest.raises(ValueError):
        apply_bandpass(x_stream(3), 1301.28, 0.0)


# --- detectors ----------------------------------------------------------------

def test_ideal_detectors_binomial_split():
    n = 100_000
    a, b = hbt_detect(x_stream(n), IDEAL, seed=5)
    assert len(a) + len(b) == n
    assert abs(len(a) - n / 2) < 3 * math.sqrt(n / 4)
    assert a.is_sorted and b.is_sorted


def test_zero_efficiency_dark_only():
    det = DetectorConfig(efficiency=0.0, jitter_fwhm=0.0, dark_rate=1000.0)
    a, b = hbt_detect(x_stream(10), det, duration=10.0, seed=6)
    for ch in (a, b):
        assert abs(len(ch) - 1e4) < 3 * math.sqrt(1e4)
        assert ch.meta["n_dark"] == len(ch)


def test_dark_counts_uniform_in_time():
    det = DetectorConfig(efficiency=0.0, jitter_fwhm=0.0, dark_rate=5000.0)
    a, _ = hbt_detect(x_stream(1), det, duration=2.0, seed=7)
    assert stats.kstest(a.times / 2e12, "uniform").pvalue > 0.01


def test_dead_time_spacing():
    det = DetectorConfig(efficiency=1.0, jitter_fwhm=0.0, dark_rate=0.0, dead_time=5000.0)
    a, b = hbt_detect(x_stream(10_000), det, seed=8)
    for ch in (a, b):
        assert np.all(np.diff(ch.times) >= 5000.0)


def test_efficiency_stages_commute():
    n = 40_000
    s = x_stream(n)
    once = [len(c) for c in hbt_detect(s, DetectorConfig(0.45, 0.0, 0.0), seed=9)]
    # 0.9 stage then 0.5 stage
    a, b = hbt_detect(s, DetectorConfig(0.9, 0.0, 0.0), seed=10)
    keep = np.random.default_rng(11)
    twice = [int(np.count_nonzero(keep.random(len(c)) < 0.5)) for c in (a, b)]
    # two-sample comparison of binomial totals
    p = 0.45 / 2
    sd = math.sqrt(2 * n * p * (1 - p))
    for x, y in zip(once, twice):
        assert abs(x - y) < 3 * sd


def test_jitter_widens_without_shift():
    n = 50_000
    det = DetectorConfig(efficiency=1.0, jitter_fwhm=60.0, dark_rate=0.0)
    # photon pairs at identical times, so the cross-correlation sees the jitter alone
    s = x_stream(2 * n, times=np.repeat(np.arange(n) * 1e5, 2))
    a, b = hbt_detect(s, det, seed=12)
    h = correlate(a, b, 5.0, 500.0)
    c = h.centers
    mean = np.sum(h.counts * c) / h.counts.sum()
    sd = math.sqrt(np.sum(h.counts * c**2) / h.counts.sum() - mean**2)
    # difference of two independent jitters: sigma * sqrt(2)
    assert sd == pytest.approx(60.0 / 2.3548 * math.sqrt(2), rel=0.05)
    assert abs(mean) < 3 * sd / math.sqrt(h.counts.sum())


def test_detector_validation():
    for kw in (dict(efficiency=1.2), dict(jitter_fwhm=-1), dict(dark_rate=math.nan)):
        with pytest.raises(ValueError):
            DetectorConfig(**kw)


# --- correlation --------------------------------------------------------------

def test_single_click_self_and_cross():
    a = ClickStream(0, [0.0])
    b = ClickStream(1, [0.0])
    h = correlate(a, b, 10.0, 100.0)
    assert h.counts.sum() == 1
    assert h.counts[len(h.counts) // 2] == 1
    assert correlate(a, a, 10.0, 100.0).counts.sum() == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 5000), max_size=40), st.lists(st.floats(0, 5000), max_size=40),
       st.sampled_from([7.0, 25.0, 100.0]))
def test_correlate_matches_brute_force(ta, tb, bw):
    a = ClickStream(0, np.sort(ta))
    b = ClickStream(1, np.sort(tb))
    window = bw * 20
    h = correlate(a, b, bw, window)
    ref = brute_force_hist(a.times, b.times, bw, window)
    # bin edges are shared, so only delays landing exactly on an edge may differ
    d = np.subtract.outer(b.times, a.times).ravel()
    on_edge = int(np.count_nonzero(np.mod(d + bw / 2, bw) == 0))
    assert abs(int(h.counts.sum()) - int(ref.sum())) <= on_edge
    assert np.abs(h.counts - ref).sum() <= 2 * on_edge
    # swapping the streams mirrors the delay axis
    assert np.abs(correlate(b, a, bw, window).counts - h.counts[::-1]).sum() <= 2 * on_edge


def test_autocorrelation_no_double_counting():
    t = np.sort(np.random.default_rng(1).random(200) * 1e4)
    a = ClickStream(0, t)
    h = correlate(a, a, 50.0, 1e4)
    ref = brute_force_hist(t, t, 50.0, 1e4, skip_self=True)
    assert np.array_equal(h.counts, ref)
    assert h.counts.sum() == 200 * 199


def test_independent_poisson_flat():
    rng = np.random.default_rng(13)
    span = 1e10
    a = ClickStream(0, np.sort(rng.random(20_000) * span))
    b = ClickStream(1, np.sort(rng.random(20_000) * span))
    h = correlate(a, b, 1e4, 5e5)
    # the window is tiny compared to the span, so the expectation is flat
    assert stats.chisquare(h.counts).pvalue > 0.01


def test_correlate_errors():
    a = ClickStream(0, [2.0, 1.0])
    b = ClickStream(1, [0.0])
    with pytest.raises(ValueError):
        correlate(a, b, 10.0, 100.0)
    with pytest.raises(ValueError):
        correlate(b, b, 10.0, 105.0)


def test_pulsed_peaks_spaced_by_period():
    drive = DriveConfig(rep_rate=20.0, n_pulses=100_000, power_ratio=1.0)
    s = simulate_pulse_train(EmitterConfig(), drive, 4.0, None, 2)
    a, b = hbt_detect(s, DetectorConfig(), seed=3)
    h = correlate(a, b, 500.0, 200_000.0)

    def window_sum(center):
        return h.counts[np.abs(h.centers - center) < 5000].sum()

    for k in (1, 2, 3):
        on = window_sum(k * 50_000.0) + window_sum(-k * 50_000.0)
        off = window_sum((k + 0.5) * 50_000.0) + window_sum(-(k + 0.5) * 50_000.0)
        assert on > 50 * max(off, 1)


# --- histograms ---------------------------------------------------------------

def test_trpl_exact_pulse_times_single_bin():
    clicks = ClickStream(0, np.arange(100) * 50_000.0)
    h = trpl_histogram(clicks, 50_000.0, 100.0)
    assert h.counts[0] == 100 and h.counts.sum() == 100
    assert h.kind == "decay"


def test_trpl_uniform_clicks_flat():
    rng = np.random.default_rng(14)
    clicks = ClickStream(0, np.sort(rng.random(200_000) * 1e9))
    h = trpl_histogram(clicks, 50_000.0, 500.0)
    assert len(h.counts) == 100
    assert stats.chisquare(h.counts).pvalue > 0.01


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=200), st.integers(1, 17))
def test_rebin_conserves_counts(counts, factor):
    h = Histogram(10.0, -5.0, np.array(counts))
    r = h.rebin(factor)
    assert r.counts.sum() == h.counts.sum()
    assert r.bin_width == 10.0 * factor
    assert r.origin == h.origin


def test_histogram_validation():
    with pytest.raises(ValueError):
        Histogram(0.0, 0.0, [1])
    with pytest.raises(ValueError):
        Histogram(1.0, 0.0, [-1])
    with pytest.raises(ValueError):
        Histogram(1.0, 0.0, [1]) + Histogram(2.0, 0.0, [1])
