"""
Temperature dependence of the dot emission: line position, width, line set
and radiative lifetime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import optimize

from .waveguide import NanowireGeometry, se_rate_relative

HC_EV_NM = 1239.841984  # h*c in eV nm
KB_MEV = 8.617333262e-2  # Boltzmann constant in meV / K

#: anchor points for the exciton line (K, nm)
ANCHOR_LOW = (4.0, 1301.28)
ANCHOR_HIGH = (300.0, 1397.8)
VARSHNI_BETA = 600.0  # K, pinned (InP-like)

LINEWIDTH_4K = 45.0  # ueV, spectrometer-limited floor
MERGE_TEMPERATURE = 150.0  # K
XX_BINDING = 2.0  # meV
SP_SPLITTING = 68.0  # meV


def ev_to_nm(energy_ev):
    return HC_EV_NM / energy_ev


def nm_to_ev(wavelength_nm):
    return HC_EV_NM / wavelength_nm


def fwhm_uev_to_nm(fwhm_uev, wavelength_nm):
    """Convert an energy linewidth (ueV) to a wavelength linewidth (nm)."""
    return wavelength_nm**2 * fwhm_uev * 1e-6 / HC_EV_NM


# ---------------------------------------------------------------------------
# line position


@dataclass(frozen=True)
class Varshni:
    e0: float  # eV
    alpha: float  # eV / K
    beta: float = VARSHNI_BETA

    def energy(self, temperature):
        t = np.asarray(temperature, dtype=float)
        return self.e0 - self.alpha * t**2 / (t + self.beta)

    @classmethod
    def from_anchors(cls, low=ANCHOR_LOW, high=ANCHOR_HIGH, beta=VARSHNI_BETA):
        (t1, l1), (t2, l2) = low, high
        g1, g2 = t1**2 / (t1 + beta), t2**2 / (t2 + beta)
        e1, e2 = nm_to_ev(l1), nm_to_ev(l2)
        alpha = (e1 - e2) / (g2 - g1)
        return cls(e1 + alpha * g1, alpha, beta)


DEFAULT_VARSHNI = Varshni.from_anchors()


def _check_temperature(temperature, upper=None):
    t = np.asarray(temperature, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    if upper is not None and np.any(t > upper):
        raise ValueError(f"temperature above {upper} K not supported, got {temperature}")
    return t


def emission_wavelength(temperature, model: Varshni = DEFAULT_VARSHNI):
    """Exciton emission wavelength (nm) at ``temperature`` (K), 0 < T <= 350."""
    t = _check_temperature(temperature, upper=350.0)
    out = ev_to_nm(model.energy(t))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# linewidth


def _bose(e_ph, t):
    t = np.asarray(t, dtype=float)
    x = e_ph / (KB_MEV * t)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(x)


@dataclass(frozen=True)
class LinewidthModel:
    """FWHM(T) = gamma0 + a*T + b / (exp(e_phonon/kT) - 1), all in ueV."""

    gamma0: float
    a: float  # ueV / K
    b: float  # ueV
    e_phonon: float  # meV

    def __call__(self, temperature):
        t = _check_temperature(temperature)
        out = self.gamma0 + self.a * t + self.b * _bose(self.e_phonon, t)
        return float(out) if np.ndim(out) == 0 else out

    @classmethod
    def calibrated(cls, gamma_4k=LINEWIDTH_4K, merge_temperature=MERGE_TEMPERATURE,
                   separation=XX_BINDING, a=0.5, e_phonon=25.0, xx_width_scale=1.0):
        """Pin FWHM(4 K) and make X and XX touch at ``merge_temperature``.

        Touching means the sum of the two half widths equals the X-XX
        separation (meV).
        """
        target = 2.0 * separation * 1e3 / (1.0 + xx_width_scale)
        n4, nm = _bose(e_phonon, 4.0), _bose(e_phonon, merge_temperature)
        # two linear equations in (gamma0, b)
        mat = np.array([[1.0, n4], [1.0, nm]])
        rhs = np.array([gamma_4k - a * 4.0, target - a * merge_temperature])
        gamma0, b = np.linalg.solve(mat, rhs)
        return cls(float(gamma0), a, float(b), e_phonon)


DEFAULT_LINEWIDTH = LinewidthModel.calibrated()


def linewidth(temperature, model: LinewidthModel = DEFAULT_LINEWIDTH):
    """Exciton FWHM in ueV."""
    return model(temperature)


def merge_temperature(separation=XX_BINDING, model: LinewidthModel = DEFAULT_LINEWIDTH,
                      xx_width_scale=1.0, t_max=350.0):
    """Lowest temperature at which X and XX half widths bridge their separation."""
    def gap(t):
        w = model(t)
        return 0.5 * (w + xx_width_scale * w) - separation * 1e3

    if gap(t_max) < 0:
        return math.inf
    return optimize.brentq(gap, 1.0, t_max, xtol=1e-9)


# ---------------------------------------------------------------------------
# lifetime


@dataclass(frozen=True)
class Level:
    label: str
    energy: float  # meV above the bright exciton
    multiplicity: float
    bright: bool = False


def default_manifold(dark_splitting=0.3, sp_splitting=SP_SPLITTING, pshell_multiplicity=4.0):
    return (
        Level("bright", 0.0, 2.0, bright=True),
        Level("dark", dark_splitting, 2.0),
        Level("p-shell", sp_splitting, pshell_multiplicity),
    )


def _check_manifold(manifold):
    bright = [lv for lv in manifold if lv.bright]
    if len(bright) != 1:
        raise ValueError("manifold needs exactly one bright level")
    if bright[0].energy != 0.0:
        raise ValueError("energies are measured from the bright level")
    for lv in manifold:
        if lv.energy < 0 or lv.multiplicity <= 0:
            raise ValueError(f"bad level {lv}")
    return bright[0]


def bright_fraction(temperature, manifold):
    """Thermal occupation of the bright level over the whole manifold."""
    bright = _check_manifold(manifold)
    t = _check_temperature(temperature)
    kt = KB_MEV * t
    z = sum(lv.multiplicity * np.exp(-lv.energy / kt) for lv in manifold)
    out = bright.multiplicity / z
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LifetimeModelParams:
    tau_rad_bulk: float  # ns
    manifold: tuple = field(default_factory=default_manifold)
    varshni: Varshni = DEFAULT_VARSHNI

    def __post_init__(self):
        if not self.tau_rad_bulk > 0:
            raise ValueError("tau_rad_bulk must be positive")
        _check_manifold(self.manifold)


DEFAULT_GEOMETRY = NanowireGeometry(310.0)


@lru_cache(maxsize=1024)
def _f_rel(geometry, wavelength):
    return se_rate_relative(geometry, wavelength)


def waveguide_factor(temperature, geometry=DEFAULT_GEOMETRY, varshni=DEFAULT_VARSHNI):
    lam = float(emission_wavelength(temperature, varshni))
    return _f_rel(geometry, round(lam, 9))


def lifetime(temperature, params: LifetimeModelParams, geometry=DEFAULT_GEOMETRY):
    """Effective exciton lifetime (ns) from waveguide coupling and dark-state spreading."""
    temps = np.atleast_1d(np.asarray(temperature, dtype=float))
    out = np.empty_like(temps)
    for i, t in enumerate(temps):
        f_rel = waveguide_factor(t, geometry, params.varshni)
        if not f_rel > 0:
            raise ValueError(f"waveguide rate factor is {f_rel} at T={t} K")
        out[i] = params.tau_rad_bulk / (f_rel * bright_fraction(t, params.manifold))
    return float(out[0]) if np.ndim(temperature) == 0 else out


def calibrate_lifetime(tau_low=2.1, tau_high=10.8, t_low=4.0, t_high=300.0,
                       geometry=DEFAULT_GEOMETRY, manifold=None, tune="p-shell"):
    """Fit tau_rad_bulk and the multiplicity of one manifold level to two lifetimes.

    The multiplicity of level ``tune`` sets how fast the bright fraction
    falls with temperature; tau_rad_bulk then fixes the absolute scale.
    """
    manifold = tuple(manifold or default_manifold())
    idx = [lv.label for lv in manifold].index(tune)
    fw_low = waveguide_factor(t_low, geometry)
    fw_high = waveguide_factor(t_high, geometry)
    target = (tau_high / tau_low) * fw_high / fw_low  # f_low / f_high

    def with_mult(g):
        levels = list(manifold)
        levels[idx] = replace(levels[idx], multiplicity=g)
        return tuple(levels)

    def mismatch(log_g):
        m = with_mult(math.exp(log_g))
        return bright_fraction(t_low, m) / bright_fraction(t_high, m) - target

    log_g = optimize.brentq(mismatch, math.log(1e-6), math.log(1e8), xtol=1e-13)
    tuned = with_mult(math.exp(log_g))
    tau_bulk = tau_low * fw_low * bright_fraction(t_low, tuned)
    return LifetimeModelParams(float(tau_bulk), tuned)


@lru_cache(maxsize=1)
def default_lifetime_params() -> LifetimeModelParams:
    return calibrate_lifetime()


def default_lifetime_model(temperature):
    """tau_X(T) in ns with the calibrated defaults."""
    return lifetime(temperature, default_lifetime_params())


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectrumLine:
    label: str
    center: float  # nm
    fwhm: float  # ueV
    relative_intensity: float

    def __post_init__(self):
        if not (self.fwhm > 0 and math.isfinite(self.center)):
            raise ValueError(f"bad spectrum line {self}")
        if self.relative_intensity < 0:
            raise ValueError("relative_intensity must be >= 0")

    @property
    def fwhm_nm(self):
        return fwhm_uev_to_nm(self.fwhm, self.center)


#: per-line width multipliers on the exciton FWHM
LINE_WIDTH_SCALE = {"X": 1.0, "XX": 1.0, "p-shell": 3.0}
PSHELL_VISIBLE_ABOVE = 100.0  # K


def line_centers(temperature, xx_binding=XX_BINDING, sp_splitting=SP_SPLITTING,
                 varshni=DEFAULT_VARSHNI):
    """Center wavelengths (nm) of X, XX and the p-shell line."""
    ex = float(varshni.energy(_check_temperature(temperature)))
    return {
        "X": ev_to_nm(ex),
        "XX": ev_to_nm(ex - xx_binding * 1e-3),
        "p-shell": ev_to_nm(ex + sp_splitting * 1e-3),
    }


def synth_line_set(emitter, temperature, power_ratio, width_model=DEFAULT_LINEWIDTH):
    """Spectral lines seen at ``temperature`` and pump ``power_ratio``.

    Intensities follow Poisson filling of the dot: X ~ P(N>=1),
    XX ~ P(N>=2); the p-shell line needs a third pair and a thermally
    populated p level, and is only drawn above 100 K.
    """
    from .emitter import saturation_map

    mu = saturation_map(power_ratio, emitter.mu_sat)
    p0 = math.exp(-mu)
    p_ge1 = 1.0 - p0
    p_ge2 = p_ge1 - mu * p0
    p_ge3 = p_ge2 - 0.5 * mu * mu * p0
    centers = line_centers(temperature, emitter.xx_binding, emitter.sp_splitting)
    width = width_model(temperature)
    if temperature > PSHELL_VISIBLE_ABOVE:
        manifold = emitter.manifold()
        kt = KB_MEV * temperature
        z = sum(lv.multiplicity * math.exp(-lv.energy / kt) for lv in manifold)
        pop = sum(lv.multiplicity * math.exp(-lv.energy / kt)
                  for lv in manifold if lv.label == "p-shell") / z
        i_p = p_ge3 * pop
    else:
        i_p = 0.0
    intens = {"X": p_ge1, "XX": p_ge2, "p-shell": i_p}
    return [SpectrumLine(lbl, centers[lbl], width * LINE_WIDTH_SCALE[lbl], max(intens[lbl], 0.0))
            for lbl in ("X", "XX", "p-shell")]
