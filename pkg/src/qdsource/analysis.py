"""
Recover g2(0), background and lifetime from coincidence and decay histograms.

Two g2 estimators are provided. ``g2_integrated`` is the model-free ratio of
zero-delay to side-peak areas; ``fit_g2`` fits a train of two-sided
exponentials plus a flat, uncorrelated background, with the lifetime held at
the value from a separate TRPL fit (``fit_trpl``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.signal import find_peaks

from .detection import Histogram
from .fitting import FitError, levenberg_marquardt


class PeriodMismatchError(FitError):
    """Observed peak spacing disagrees with the stated repetition period."""


@dataclass(frozen=True)
class G2Fit:
    g2_zero: float
    background_level: float  # counts per bin
    peak_amplitude: float  # counts per bin at the side-peak maxima
    lifetime_used: float  # ns
    residual_norm: float  # reduced chi-square
    g2_zero_err: float = float("nan")
    n_iter: int = 1
    g2_integrated: float = float("nan")  # background included, model free

    def as_row(self, temperature=float("nan"), power_ratio=float("nan")):
        return (temperature, power_ratio, self.g2_zero, self.background_level,
                self.lifetime_used, self.residual_norm)


@dataclass(frozen=True)
class TrplFit:
    lifetime: float  # ns
    amplitude: float  # counts per bin at t = 0
    background: float  # counts per bin
    rise_time: float | None = None  # ns
    lifetime_err: float = float("nan")
    n_iter: int = 0
    residual_norm: float = float("nan")


def default_halfwidth(rep_period, lifetime=None, jitter_fwhm=60.0):
    """Integration half-width (ps): min(5 tau, T/2 - 3 jitter)."""
    hw = rep_period / 2.0 - 3.0 * jitter_fwhm
    if lifetime is not None:
        hw = min(hw, 5.0 * lifetime * 1e3)
    return hw


def _peak_sums(hist: Histogram, rep_period, halfwidth):
    c = hist.centers
    k_lo = int(math.ceil((c[0] + halfwidth) / rep_period))
    k_hi = int(math.floor((c[-1] - halfwidth) / rep_period))
    ks = [k for k in range(k_lo, k_hi + 1)]
    sums = {}
    for k in ks:
        sel = np.abs(c - k * rep_period) <= halfwidth
        sums[k] = float(hist.counts[sel].sum())
    return sums


def g2_integrated(hist: Histogram, rep_period: float, integration_halfwidth: float | None = None,
                  lifetime: float | None = None, jitter_fwhm: float = 60.0,
                  min_side_peaks: int = 5) -> float:
    """Zero-delay peak area over the mean side-peak area.

    Parameters
    ----------
    hist : Histogram
        Coincidence histogram, delays in ps.
    rep_period : float
        Laser period in ps.
    integration_halfwidth : float, optional
        Window half-width in ps around each peak center. Defaults to
        ``default_halfwidth(rep_period, lifetime, jitter_fwhm)``.
    lifetime : float, optional
        Exciton lifetime in ns, only used for the default window.
    """
    if not rep_period > 0:
        raise ValueError("rep_period must be positive")
    hw = default_halfwidth(rep_period, lifetime, jitter_fwhm) \
        if integration_halfwidth is None else float(integration_halfwidth)
    if not 0 < hw < rep_period / 2:
        raise ValueError("integration half-width must lie in (0, rep_period/2)")
    sums = _peak_sums(hist, rep_period, hw)
    left = [k for k in sums if k < 0]
    right = [k for k in sums if k > 0]
    if 0 not in sums or len(left) < min_side_peaks or len(right) < min_side_peaks:
        raise ValueError(f"histogram must span >= {min_side_peaks} side peaks on each side")
    side = np.array([sums[k] for k in left + right])
    if np.any(side <= 0):
        raise ValueError("empty side-peak window")
    return sums[0] / float(side.mean())


# --- TRPL ---------------------------------------------------------------

def _trpl_model(t, amp, tau, bkg, period=None, rise=None):
    decay = np.exp(-t / tau)
    if period is not None:
        decay = decay / -np.expm1(-period / tau)  # earlier pulses pile up
    if rise is not None:
        decay = decay * -np.expm1(-t / rise)
    return amp * decay + bkg


def _tail_guess(t, y):
    """Log-linear regression of the background-subtracted tail."""
    n = len(y)
    bkg = max(float(np.mean(np.sort(y)[: max(n // 10, 1)])), 0.0)
    z = y - bkg
    peak = float(z[0])
    if peak <= 0:
        raise FitError("no decay above background")
    sel = (z > 0.05 * peak) & (z > 3.0 * math.sqrt(max(bkg, 1.0)))
    idx = np.flatnonzero(sel)
    if len(idx) < 3:
        raise FitError("too few points above background to seed the fit")
    # stop at the first gap so noise near the floor does not bend the line
    gaps = np.flatnonzero(np.diff(idx) > 1)
    if len(gaps):
        idx = idx[: gaps[0] + 1]
    if len(idx) < 3:
        raise FitError("too few contiguous points above background")
    slope, icpt = np.polyfit(t[idx], np.log(z[idx]), 1)
    if not slope < 0:
        raise FitError("tail does not decay")
    return math.exp(icpt), -1.0 / slope, bkg


def fit_trpl(hist: Histogram, with_rise: bool = False, weighting: str = "poisson",
             period: float | None = None, max_iter: int = 200,
             tail_trim: float = 0.3) -> TrplFit:
    """Fit ``A exp(-t/tau) + B`` to the decay after the histogram maximum.

    Parameters
    ----------
    hist : Histogram
        Decay histogram (ps bins), at least 50 bins.
    with_rise : bool
        Multiply the decay by ``1 - exp(-t/tau_rise)`` and fit from t = 0.
    weighting : {"poisson", "none"}
    period : float, optional
        Sync period in ps. When given (default: taken from the histogram
        metadata) the model includes the tails of earlier pulses.
    tail_trim : float
        Width in ns left out at the end of the histogram.

    Raises
    ------
    FitError
        Flat data, negative amplitude, lifetime running away, or no
        convergence within ``max_iter`` iterations.
    """
    if hist.kind != "decay":
        raise ValueError("fit_trpl needs a decay histogram")
    if len(hist.counts) < 50:
        raise ValueError("decay histogram needs at least 50 bins")
    if period is None:
        period = hist.meta.get("sync_period")
    y_all = hist.counts.astype(float)
    t_all = (hist.centers - hist.origin) * 1e-3  # ns from the histogram start
    i0 = 0 if with_rise else int(np.argmax(y_all)) + 1
    t0 = t_all[i0] if not with_rise else 0.0
    # drop the last bins: jitter folds early clicks of the next pulse there
    stop = len(y_all) - int(math.ceil(tail_trim * 1e3 / hist.bin_width))
    t, y = t_all[i0:stop] - t0, y_all[i0:stop]
    p_ns = None if period is None else period * 1e-3
    span = t_all[-1] - t_all[0]

    amp0, tau0, bkg0 = _tail_guess(t, y)
    if tau0 > 20 * span:
        raise FitError(f"lifetime unbounded (initial estimate {tau0:.3g} ns)")
    if p_ns is not None:
        amp0 *= -math.expm1(-p_ns / tau0)
    w = 1.0 / np.sqrt(np.maximum(y, 1.0)) if weighting == "poisson" else np.ones_like(y)
    if weighting not in ("poisson", "none"):
        raise ValueError(f"unknown weighting {weighting!r}")

    def unpack(p):
        amp, ltau, bkg = p[0], p[1], p[2]
        rise = math.exp(p[3]) if with_rise else None
        return amp, math.exp(ltau), bkg, rise

    def resid(p):
        amp, tau, bkg, rise = unpack(p)
        return (_trpl_model(t, amp, tau, bkg, p_ns, rise) - y) * w

    x0 = [amp0, math.log(tau0), bkg0] + ([math.log(0.05)] if with_rise else [])
    res = levenberg_marquardt(resid, x0, max_iter=max_iter)
    amp, tau, bkg, rise = unpack(res.x)
    if not res.converged:
        raise FitError("TRPL fit did not converge", res.x, res.n_iter)
    if amp <= 0:
        raise FitError("negative-amplitude fit rejected", res.x, res.n_iter)
    if not (0 < tau < 20 * span):
        raise FitError(f"lifetime unbounded ({tau:.3g} ns)", res.x, res.n_iter)
    if bkg < 0:
        # background pinned at its physical bound
        def resid0(p):
            return (_trpl_model(t, p[0], math.exp(p[1]), 0.0, p_ns,
                                math.exp(p[2]) if with_rise else None) - y) * w
        x1 = [amp, math.log(tau)] + ([math.log(rise)] if with_rise else [])
        res = levenberg_marquardt(resid0, x1, max_iter=max_iter)
        if not res.converged:
            raise FitError("TRPL fit did not converge", res.x, res.n_iter)
        amp, tau, bkg = res.x[0], math.exp(res.x[1]), 0.0
        rise = math.exp(res.x[2]) if with_rise else None
        err = math.sqrt(max(res.covariance()[1, 1], 0.0)) * tau
    else:
        err = math.sqrt(max(res.covariance()[1, 1], 0.0)) * tau
    # amplitude referred to t = 0 of the histogram
    amp_0 = amp * math.exp(t0 / tau)
    dof = max(len(y) - len(res.x), 1)
    return TrplFit(float(tau), float(amp_0), float(bkg), rise, float(err), res.n_iter,
                   float(2 * res.cost / dof))


# --- g2 peak-train fit --------------------------------------------------

def _two_sided_mean(lo, hi, tau):
    """Mean of exp(-|x|/tau) over [lo, hi], elementwise."""
    def prim(x):  # antiderivative, odd-symmetric around 0
        return np.sign(x) * tau * -np.expm1(-np.abs(x) / tau)
    return (prim(hi) - prim(lo)) / (hi - lo)


def _design(hist: Histogram, rep_period, tau_ps):
    edges = hist.edges
    lo, hi = edges[:-1], edges[1:]
    k_lo = int(math.floor(edges[0] / rep_period)) - 1
    k_hi = int(math.ceil(edges[-1] / rep_period)) + 1
    side = np.zeros(len(lo))
    for k in range(k_lo, k_hi + 1):
        if k != 0:
            side += _two_sided_mean(lo - k * rep_period, hi - k * rep_period, tau_ps)
    zero = _two_sided_mean(lo, hi, tau_ps)
    return np.column_stack([np.ones(len(lo)), side, zero])


def _weights(y, weighting):
    if weighting == "poisson":
        return 1.0 / np.sqrt(np.maximum(y, 1.0))
    if weighting == "none":
        return np.ones_like(y)
    raise ValueError(f"unknown weighting {weighting!r}")


def _linear_solve(X, y, sw):
    coef, rnorm = nnls(X * sw[:, None], y * sw)
    return coef, rnorm


def observed_spacing(hist: Histogram, rep_period: float) -> float | None:
    """Median spacing (ps) between the dominant peaks, or None if unclear."""
    c = hist.counts.astype(float)
    dist = max(int(0.5 * rep_period / hist.bin_width), 1)
    width = max(int(0.02 * rep_period / hist.bin_width), 1)
    smooth = np.convolve(c, np.ones(width) / width, mode="same")
    idx, props = find_peaks(smooth, distance=dist, prominence=0)
    if len(idx) < 3:
        return None
    prom = props["prominences"]
    idx = np.sort(idx[prom >= 0.3 * prom.max()])
    if len(idx) < 3:
        return None
    d = np.diff(hist.centers[idx])
    # a strongly antibunched zero peak doubles one gap; fold such gaps back
    n = np.maximum(np.round(d / np.median(d)), 1)
    return float(np.median(d / n))


def _check_period(hist, rep_period, tol=0.05):
    s = observed_spacing(hist, rep_period)
    if s is not None and abs(s / rep_period - 1.0) > tol:
        raise PeriodMismatchError(
            f"peak spacing {s:.1f} ps disagrees with rep_period {rep_period:.1f} ps")


def _check_span(hist, rep_period, min_side_peaks=5):
    c = hist.centers
    if c[0] > -min_side_peaks * rep_period or c[-1] < min_side_peaks * rep_period:
        raise ValueError(f"histogram must span >= {min_side_peaks} side peaks on each side")


def fit_g2(hist: Histogram, lifetime: float, rep_period: float, weighting: str = "poisson",
           jitter_fwhm: float = 60.0) -> G2Fit:
    """Fit a periodic train of two-sided exponentials on a flat background.

    Model: ``B + A * sum_k c_k exp(-|tau - k T| / lifetime)`` with c_k = 1 for
    k != 0 and c_0 = g2_zero. With the lifetime fixed the model is linear in
    (B, A, A*g2_zero), so the fit is an exact non-negative linear solve.

    Parameters
    ----------
    hist : Histogram
        Coincidence histogram (ps).
    lifetime : float
        Exciton lifetime in ns, normally from ``fit_trpl``.
    rep_period : float
        Laser period in ps.
    weighting : {"poisson", "none"}
    """
    if not (lifetime > 0 and math.isfinite(lifetime)):
        raise ValueError(f"lifetime must be positive, got {lifetime}")
    _check_span(hist, rep_period)
    _check_period(hist, rep_period)
    y = hist.counts.astype(float)
    sw = _weights(y, weighting)
    X = _design(hist, rep_period, lifetime * 1e3)
    coef, rnorm = _linear_solve(X, y, sw)
    bkg, amp, c0 = coef
    if amp <= 0:
        raise FitError("no side peaks found: amplitude is zero", coef, 1)
    g2 = c0 / amp
    dof = max(len(y) - 3, 1)
    chi2 = rnorm ** 2 / dof
    # error of g2 from the weighted normal equations
    Xw = X * sw[:, None]
    cov = np.linalg.pinv(Xw.T @ Xw) * max(chi2, 1.0 if weighting == "poisson" else chi2)
    grad = np.array([0.0, -c0 / amp ** 2, 1.0 / amp])
    g2_err = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    try:
        gi = g2_integrated(hist, rep_period, lifetime=lifetime, jitter_fwhm=jitter_fwhm)
    except ValueError:
        gi = float("nan")
    return G2Fit(float(g2), float(bkg), float(amp), float(lifetime), float(chi2), g2_err, 1, gi)


def profile_lifetime(hist: Histogram, rep_period: float, lifetimes, weighting: str = "poisson"):
    """Chi-square profile over fixed lifetimes.

    Returns an array with columns (lifetime_ns, chi2, background, amplitude,
    g2_zero), the linear parameters re-optimized at every lifetime.
    """
    y = hist.counts.astype(float)
    sw = _weights(y, weighting)
    rows = []
    for tau in lifetimes:
        coef, rnorm = _linear_solve(_design(hist, rep_period, tau * 1e3), y, sw)
        g = coef[2] / coef[1] if coef[1] > 0 else float("nan")
        rows.append((tau, rnorm ** 2, coef[0], coef[1], g))
    return np.array(rows)


def fit_g2_floating(hist: Histogram, rep_period: float, lifetime0: float,
                    weighting: str = "poisson", max_iter: int = 200) -> G2Fit:
    """As ``fit_g2`` but with the lifetime free (variable projection).

    The linear parameters are eliminated exactly at every trial lifetime and
    damped least squares runs over log(lifetime) alone.
    """
    _check_span(hist, rep_period)
    y = hist.counts.astype(float)
    sw = _weights(y, weighting)

    def resid(p):
        X = _design(hist, rep_period, math.exp(p[0]) * 1e3)
        coef, _ = _linear_solve(X, y, sw)
        return (X @ coef - y) * sw

    res = levenberg_marquardt(resid, [math.log(lifetime0)], max_iter=max_iter)
    if not res.converged:
        raise FitError("floating-lifetime fit did not converge", res.x, res.n_iter)
    tau = math.exp(res.x[0])
    fit = fit_g2(hist, tau, rep_period, weighting)
    return G2Fit(fit.g2_zero, fit.background_level, fit.peak_amplitude, tau,
                 fit.residual_norm, fit.g2_zero_err, res.n_iter, fit.g2_integrated)


def residual_ridge(profile: np.ndarray, rel_tol: float = 0.01) -> np.ndarray:
    """Rows of a ``profile_lifetime`` table within ``rel_tol`` of the best chi2."""
    chi2 = profile[:, 1]
    return profile[chi2 <= chi2.min() * (1.0 + rel_tol)]


# --- re-excitation dip --------------------------------------------------

@dataclass(frozen=True)
class DipResult:
    depth: float  # 1 - center/shoulder
    z_score: float  # (shoulder - center) / combined Poisson error
    center: float  # counts per bin at zero delay
    shoulder: float  # counts per bin at the shoulder maximum
    shoulder_delay: float  # ps


def zero_peak_dip(hist: Histogram, search: float = 2000.0) -> DipResult:
    """Depth of the dip at zero delay inside the zero-delay peak.

    The histogram is folded (tau and -tau averaged, both sides are
    statistically equivalent) before comparing the zero-delay bin with the
    highest bin within ``search`` ps.
    """
    c = hist.centers
    i0 = int(np.argmin(np.abs(c)))
    n = min(int(search / hist.bin_width), i0, len(c) - 1 - i0)
    if n < 2:
        raise ValueError("search window too narrow for this binning")
    y = hist.counts.astype(float)
    right = y[i0 + 1:i0 + n + 1]
    left = y[i0 - 1:i0 - n - 1:-1] if i0 - n - 1 >= 0 else y[i0 - 1::-1][:n]
    folded = right + left  # two bins per delay
    k = int(np.argmax(folded))
    shoulder = folded[max(k - 1, 0):k + 2].mean() / 2.0
    n_sh = 2 * len(folded[max(k - 1, 0):k + 2])
    center = y[i0]
    err = math.sqrt(max(center, 1.0) + shoulder / n_sh)
    depth = 1.0 - center / shoulder if shoulder > 0 else 0.0
    return DipResult(float(depth), float((shoulder - center) / err), float(center),
                     float(shoulder), float((k + 1) * hist.bin_width))
