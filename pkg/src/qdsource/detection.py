"""
Detection chain: spectral filter, 50/50 splitter, detectors and time tagging.

Photon streams go in, click streams come out; ``correlate`` and
``trpl_histogram`` reduce clicks to the histograms consumed by the fitting
code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .emitter import LINES, PhotonStream
from .seeds import derive_seed

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class DetectorConfig:
    """SNSPD pair parameters, shared by both channels."""

    efficiency: float = 0.9
    jitter_fwhm: float = 60.0  # ps, per detector
    dark_rate: float = 100.0  # counts/s
    dead_time: float = 0.0  # ps

    def __post_init__(self):
        for name in ("efficiency", "jitter_fwhm", "dark_rate", "dead_time"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {val}")
        if self.efficiency > 1:
            raise ValueError(f"efficiency must be <= 1, got {self.efficiency}")


@dataclass
class ClickStream:
    channel: int
    times: np.ndarray  # ps, sorted
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")

    def __len__(self):
        return len(self.times)

    @property
    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.times) >= 0))


@dataclass
class Histogram:
    """Counts in equal bins; bin ``i`` covers ``[origin + i*w, origin + (i+1)*w)``."""

    bin_width: float
    origin: float
    counts: np.ndarray
    kind: str = "coincidence"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if self.kind not in ("coincidence", "decay"):
            raise ValueError(f"unknown histogram kind {self.kind!r}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be >= 0")

    @property
    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(len(self.counts)) + 0.5) * self.bin_width

    @property
    def edges(self) -> np.ndarray:
        return self.origin + np.arange(len(self.counts) + 1) * self.bin_width

    def rebin(self, factor: int) -> "Histogram":
        """Merge ``factor`` neighbouring bins; a ragged tail is zero-padded."""
        factor = int(factor)
        if factor < 1:
            raise ValueError("factor must be >= 1")
        pad = (-len(self.counts)) % factor
        c = np.concatenate([self.counts, np.zeros(pad, dtype=self.counts.dtype)])
        return Histogram(self.bin_width * factor, self.origin,
                         c.reshape(-1, factor).sum(axis=1), self.kind, dict(self.meta))

    def __add__(self, other: "Histogram") -> "Histogram":
        if (other.bin_width, other.origin, len(other.counts), other.kind) != \
                (self.bin_width, self.origin, len(self.counts), self.kind):
            raise ValueError("histograms have different binning")
        return Histogram(self.bin_width, self.origin, self.counts + other.counts,
                         self.kind, dict(self.meta))


def _stream_seed(stream: PhotonStream, label: str) -> int:
    return derive_seed(stream.meta.get("seed", 0), label)


def apply_bandpass(stream: PhotonStream, center: float, width: float,
                   seed: int | None = None) -> PhotonStream:
    """Top-hat spectral filter of full width ``width`` (nm) around ``center``.

    Each photon's realized wavelength is drawn from the Lorentzian of its
    line, using the line table stored in ``stream.meta["lines"]``. Photons
    without a table entry keep their nominal wavelength.
    """
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    if math.isinf(width):
        return stream.select(slice(None))

    rng = np.random.default_rng(_stream_seed(stream, "bandpass") if seed is None else seed)
    lam = stream.wavelength_nm.copy()
    table = stream.meta.get("lines", {})
    u = rng.random(len(stream))
    for code, name in enumerate(LINES):
        if name not in table:
            continue
        mask = stream.line == code
        x0, fwhm = table[name]
        lam[mask] = x0 + 0.5 * fwhm * np.tan(np.pi * (u[mask] - 0.5))
    keep = np.abs(lam - center) <= 0.5 * width
    out = PhotonStream(stream.time_ps[keep], stream.line[keep], lam[keep], dict(stream.meta))
    out.meta["filter"] = {"center_nm": float(center), "width_nm": float(width)}
    return out


def lorentzian_pass_fraction(line_center, fwhm, center, width):
    """Analytic fraction of a Lorentzian line inside a top-hat passband."""
    hw = 0.5 * fwhm
    hi = center + 0.5 * width - line_center
    lo = center - 0.5 * width - line_center
    return (math.atan(hi / hw) - math.atan(lo / hw)) / math.pi


@numba.njit(cache=True)
def _dead_time_mask(t, dead):
    keep = np.ones(t.shape[0], dtype=np.bool_)
    last = -np.inf
    for i in range(t.shape[0]):
        if t[i] - last < dead:
            keep[i] = False
        else:
            last = t[i]
    return keep


def hbt_detect(stream: PhotonStream, det: DetectorConfig, duration: float | None = None,
               seed: int | None = None):
    """Route photons through a 50/50 splitter onto two identical detectors.

    Parameters
    ----------
    stream : PhotonStream
    det : DetectorConfig
    duration : float, optional
        Acquisition time in s for the dark-count window. Defaults to the pulse
        train length recorded in the stream metadata.
    seed : int, optional
        Defaults to a seed derived from the stream's own seed.

    Returns
    -------
    (ClickStream, ClickStream)
    """
    if duration is None:
        n = stream.meta.get("n_pulses")
        rate = stream.meta.get("rep_rate_mhz")
        if n is None or rate is None:
            raise ValueError("duration not given and not recoverable from stream metadata")
        duration = n / (rate * 1e6)
    if not (duration >= 0 and math.isfinite(duration)):
        raise ValueError(f"duration must be >= 0, got {duration}")

    rng = np.random.default_rng(_stream_seed(stream, "hbt") if seed is None else seed)
    n = len(stream)
    arm = rng.random(n) < 0.5
    survive = rng.random(n) < det.efficiency
    sigma = det.jitter_fwhm * FWHM_TO_SIGMA
    jitter = rng.normal(0.0, sigma, n) if sigma > 0 else np.zeros(n)
    t_ps = duration * 1e12
    meta = {k: stream.meta[k] for k in ("seed", "emitter_digest", "drive_digest",
                                        "temperature") if k in stream.meta}
    out = []
    for ch, sel in enumerate((~arm & survive, arm & survive)):
        t = stream.time_ps[sel] + jitter[sel]
        n_dark = rng.poisson(det.dark_rate * duration)
        t = np.sort(np.concatenate([t, rng.random(n_dark) * t_ps]), kind="stable")
        if det.dead_time > 0:
            t = t[_dead_time_mask(t, det.dead_time)]
        out.append(ClickStream(ch, t, dict(meta, n_dark=int(n_dark))))
    return out[0], out[1]


@numba.njit(cache=True)
def _correlate(a, b, origin, bw, nbins, skip_self):
    counts = np.zeros(nbins, dtype=np.int64)
    span = nbins * bw
    j0 = 0
    nb = b.shape[0]
    for i in range(a.shape[0]):
        lo = a[i] + origin
        while j0 < nb and b[j0] < lo:
            j0 += 1
        j = j0
        while j < nb:
            d = b[j] - lo
            if d >= span:
                break
            if not (skip_self and j == i):
                k = int(d // bw)
                if k < nbins:
                    counts[k] += 1
            j += 1
    return counts


def correlate(a: ClickStream, b: ClickStream, bin_width: float, window: float) -> Histogram:
    """Histogram of all delays ``t_b - t_a`` with ``|delay| <= window``.

    Bins are centered on multiples of ``bin_width`` so that zero delay sits in
    the middle of the central bin. Passing the same stream twice gives the
    autocorrelation with self-pairs removed.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    ratio = window / bin_width
    if window < 0 or abs(ratio - round(ratio)) > 1e-9:
        raise ValueError("window must be a non-negative multiple of bin_width")
    if not (a.is_sorted and b.is_sorted):
        raise ValueError("click streams must be sorted by time")
    half = int(round(ratio))
    nbins = 2 * half + 1
    origin = -(half + 0.5) * bin_width
    counts = _correlate(a.times, b.times, origin, float(bin_width), nbins, a is b)
    return Histogram(bin_width, origin, counts, "coincidence",
                     {"channels": [a.channel, b.channel]})


def trpl_histogram(clicks: ClickStream, sync_period: float, bin_width: float) -> Histogram:
    """Decay histogram of click times folded onto the laser period (ps)."""
    if not sync_period > 0:
        raise ValueError("sync_period must be positive")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    nbins = int(math.ceil(sync_period / bin_width - 1e-9))
    phase = np.mod(clicks.times, sync_period)
    idx = np.minimum((phase // bin_width).astype(np.int64), nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    return Histogram(bin_width, 0.0, counts, "decay", {"sync_period": float(sync_period)})
