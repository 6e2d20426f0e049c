"""
HE11 mode of a step-index cylindrical nanowire and a spontaneous-emission proxy.

The guided-mode solver is exact (hybrid-mode characteristic equation with
Bessel J in the core and modified Bessel K outside). The emission-rate curve
built on top of it is an approximation: it combines core confinement, group
index and the on-axis field strength of the HE11 mode, and is only meant to
reproduce the qualitative trend of the rate with wavelength and diameter.

Internal units: lengths in 1/k0 (k0 = 2*pi/wavelength), c = eps0 = mu0 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

J01 = special.jn_zeros(0, 1)[0]  # HE11 always has u < j_{0,1}
_LOGW_FLOOR = -700.0

#: prefactor of the guided-mode emission proxy (3 / 4pi, dipole on axis)
SE_PREFACTOR = 3.0 / (4.0 * math.pi)


class ModeSolverError(RuntimeError):
    """Raised when the HE11 root cannot be bracketed or refined."""


@dataclass(frozen=True)
class NanowireGeometry:
    diameter: float  # nm
    n_core: float = 3.2
    n_clad: float = 1.0

    def __post_init__(self):
        if not (self.diameter > 0 and math.isfinite(self.diameter)):
            raise ValueError(f"diameter must be positive, got {self.diameter}")
        if not self.n_clad >= 1.0:
            raise ValueError("n_clad must be >= 1")
        if not self.n_core > self.n_clad:
            raise ValueError("n_core must exceed n_clad")


@dataclass(frozen=True)
class ModeSolution:
    n_eff: float
    v_number: float
    confinement: float
    u: float  # normalized core transverse wavenumber
    w: float  # normalized cladding decay constant
    residual: float  # characteristic-equation residual at the root
    delta_n: float  # n_eff - n_clad, kept separately since it can underflow n_eff


def v_number(geom: NanowireGeometry, wavelength: float) -> float:
    return math.pi * geom.diameter * math.sqrt(geom.n_core**2 - geom.n_clad**2) / wavelength


def _lhs(u):
    # J1'(u) / (u J1(u)) written via J0 to avoid a derivative call
    return special.j0(u) / (u * special.j1(u)) - 1.0 / u**2


def _k_ratio(w):
    # K0(w) / (w K1(w)), exponentially scaled to survive tiny and large w
    return special.k0e(w) / (w * special.k1e(w))


def _he_branch(u, w, n1, n2):
    """Right-hand side of the HE branch, J1'(u)/(u J1(u)) = rhs.

    The characteristic equation is quadratic in J1'/(uJ1). The HE root is
    the one that stays finite as w -> 0; it is evaluated in the rationalized
    form with the 1/w^4 terms cancelled analytically.
    """
    p = _k_ratio(w)
    w2 = w * w
    n1s, n2s = n1 * n1, n2 * n2
    # everything below is multiplied through by w^2
    c = n2s * p * p * w2 + 2.0 * n2s * p - n1s * w2 / u**4 - (n1s + n2s) / u**2
    bneg = (n1s + n2s) * (p * w2 + 1.0)
    disc = bneg * bneg - 4.0 * n1s * c * w2
    return 2.0 * c / (bneg + math.sqrt(disc))


def characteristic(u, w, n1, n2) -> float:
    """Full hybrid-mode (nu = 1) characteristic function in product form.

    Zero at every HE1m and EH1m root, so it doubles as an independent check
    on the branch-selected solver. Scaled by (u w)^4 and by the size of its
    two terms, which makes it dimensionless and O(1) away from roots.
    """
    ju = _lhs(u) * u * u * w * w
    kw = -(_k_ratio(w) * w * w + 1.0) * u * u
    left = (ju + kw) * (n1**2 * ju + n2**2 * kw)
    right = (w * w + u * u) * (n1**2 * w * w + n2**2 * u * u)
    return (left - right) / (abs(left) + abs(right))


def he11_residual(u, w, n1, n2) -> float:
    """Normalized residual of the HE-branch equation J1'/(uJ1) = rhs(u, w)."""
    lhs = _lhs(u)
    rhs = _he_branch(u, w, n1, n2)
    return (lhs - rhs) / max(abs(lhs), abs(rhs), 1.0)


def _residual_logw(t, vnum, n1, n2):
    w = math.exp(t)
    u = math.sqrt(max(vnum * vnum - w * w, 0.0))
    return _lhs(u) - _he_branch(u, w, n1, n2)


def _bracket(vnum, n1, n2):
    hi = math.log(vnum) - 1e-12
    if vnum > J01:
        lo = 0.5 * math.log(vnum**2 - J01**2) + 1e-12
    else:
        lo = _LOGW_FLOOR
    # scan downward from the largest w: the first sign change is the HE11 root
    grid = np.linspace(hi, lo, 400)
    prev_t = grid[0]
    prev_f = _residual_logw(prev_t, vnum, n1, n2)
    for t in grid[1:]:
        f = _residual_logw(t, vnum, n1, n2)
        if not math.isfinite(f):
            continue
        if math.isfinite(prev_f) and np.sign(f) != np.sign(prev_f):
            return t, prev_t
        prev_t, prev_f = t, f
    raise ModeSolverError(f"no HE11 root bracketed for V={vnum:.4g}")


def _b_over_a(u, w, neff):
    # H_z / E_z amplitude ratio from continuity of E_phi, multiplied through by w^2
    ju = _lhs(u)
    return -neff * (w * w / u**2 + 1.0) / (ju * w * w - (_k_ratio(w) * w * w + 1.0))


def _fields(r, region, u, w, s, n1, n2, neff):
    """Azimuthally averaged S_z at radius r (units of 1/k0) for HE11, times w^4.

    E_z = A f(r) cos(phi), H_z = B f(r) sin(phi) with A = 1 in the core;
    cladding amplitudes follow from continuity of E_z, H_z. The common w^4
    factor keeps thin-wire cladding fields finite and cancels in every ratio.
    """
    kappa, gamma = u / s, w / s
    b_over_a = _b_over_a(u, w, neff)
    if region == "core":
        f = special.j1(kappa * r)
        fp = kappa * special.jvp(1, kappa * r)
        pref = (w / kappa) ** 4 / 4.0 if w < 1e75 else 0.0
        eps = n1**2
        amp = 1.0
    else:
        # K1(gamma r) / K1(w), exponentially scaled
        x = gamma * r
        scale = math.exp(w - x) / special.k1e(w)
        f = special.k1e(x) * scale
        fp = -gamma * special.k0e(x) * scale - f / r
        pref = s**4 / 4.0
        eps = n2**2
        amp = special.j1(u)
    a_, b_ = amp, amp * b_over_a
    er = a_ * neff * fp + b_ * f / r
    hphi = b_ * neff * f / r + eps * a_ * fp
    ephi = a_ * neff * f / r + b_ * fp
    hr = b_ * neff * fp + eps * a_ * f / r
    return (er * hphi + ephi * hr) * pref


def _tangential_mismatch(u, w, s, n1, n2, neff):
    """Relative jumps of H_phi and E_phi across the interface (zero at a root)."""
    kappa, gamma = u / s, w / s
    boa = _b_over_a(u, w, neff)
    out = []
    for f, fp, kt2, eps, amp in (
        (special.j1(u), kappa * special.jvp(1, u), kappa**2, n1**2, 1.0),
        (1.0, -gamma * (_k_ratio(w) * w + 1.0 / w), -gamma**2, n2**2, special.j1(u)),
    ):
        a_, b_ = amp, amp * boa
        hphi = (b_ * neff * f / s + eps * a_ * fp) / kt2
        ephi = (a_ * neff * f / s + b_ * fp) / kt2
        out.append((hphi, ephi))
    (h1, e1), (h2, e2) = out
    return abs(h1 - h2) / max(abs(h1), abs(h2)), abs(e1 - e2) / max(abs(e1), abs(e2))


def _power(u, w, s, n1, n2, neff):
    core, _ = integrate.quad(
        lambda r: _fields(r, "core", u, w, s, n1, n2, neff) * r, 0.0, s, limit=200)
    # cladding on a log-radius grid out to ~60 decay lengths; for very thin
    # wires the near field falls off as r^-3, so 1e8 radii is enough
    t_max = math.log(s * min(1.0 + 60.0 / w, 1e8))
    clad, _ = integrate.quad(
        lambda t: _fields(math.exp(t), "clad", u, w, s, n1, n2, neff) * math.exp(2 * t),
        math.log(s), t_max, limit=500)
    return core, clad


def _solve(diameter, n_core, n_clad, wavelength, with_power=True):
    s = math.pi * diameter / wavelength  # core radius times k0
    vnum = s * math.sqrt(n_core**2 - n_clad**2)
    t_lo, t_hi = _bracket(vnum, n_core, n_clad)
    try:
        t = optimize.brentq(_residual_logw, t_lo, t_hi, args=(vnum, n_core, n_clad),
                            xtol=1e-15, rtol=1e-15, maxiter=200)
    except (ValueError, RuntimeError) as exc:
        raise ModeSolverError(str(exc)) from exc
    w = math.exp(t)
    u = math.sqrt(vnum**2 - w**2)
    w2s2 = (w / s) ** 2
    neff = math.sqrt(n_clad**2 + w2s2)
    res = he11_residual(u, w, n_core, n_clad)
    conf = float("nan")
    if with_power:
        core, clad = _power(u, w, s, n_core, n_clad, neff)
        conf = core / (core + clad)
    return neff, vnum, conf, u, w, res, w2s2


@lru_cache(maxsize=4096)
def _cached(diameter, n_core, n_clad, wavelength):
    return _solve(diameter, n_core, n_clad, wavelength)


def he11_neff(geom: NanowireGeometry, wavelength: float) -> ModeSolution:
    """Solve the HE11 mode of a step-index wire.

    Parameters
    ----------
    geom : NanowireGeometry
    wavelength : float
        Free-space wavelength in nm.

    Returns
    -------
    ModeSolution
        Effective index, V number, fraction of guided power carried inside
        the core, and the normalized transverse constants (u, w).
    """
    if not (wavelength > 0 and math.isfinite(wavelength)):
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    neff, vnum, conf, u, w, res, w2s2 = _cached(
        float(geom.diameter), float(geom.n_core), float(geom.n_clad), float(wavelength))
    delta_n = w2s2 / (math.sqrt(geom.n_clad**2 + w2s2) + geom.n_clad)
    return ModeSolution(neff, vnum, conf, u, w, res, delta_n)


def group_index(geom: NanowireGeometry, wavelength: float, rel_step: float = 1e-4) -> float:
    h = wavelength * rel_step
    # n_eff(lambda) via scale invariance: only D/lambda matters at fixed indices
    n_plus = _solve(geom.diameter, geom.n_core, geom.n_clad, wavelength + h, False)[0]
    n_minus = _solve(geom.diameter, geom.n_core, geom.n_clad, wavelength - h, False)[0]
    n0 = he11_neff(geom, wavelength).n_eff
    return n0 - wavelength * (n_plus - n_minus) / (2 * h)


def _axis_area_factor(geom, wavelength, sol):
    """(lambda / n_core)^2 / A_eff with A_eff = P_total / S_z(axis)."""
    s = math.pi * geom.diameter / wavelength
    core, clad = _power(sol.u, sol.w, s, geom.n_core, geom.n_clad, sol.n_eff)
    s_axis = _fields(1e-9 * s, "core", sol.u, sol.w, s, geom.n_core, geom.n_clad, sol.n_eff)
    if not s_axis > 0:
        return 0.0  # mode fully expelled, field on the axis underflows
    a_eff = 2.0 * math.pi * (core + clad) / s_axis  # area in (1/k0)^2
    lam = 2.0 * math.pi  # wavelength in units of 1/k0
    return (lam / geom.n_core) ** 2 / a_eff


def se_rate_relative(geom: NanowireGeometry, wavelength: float) -> float:
    """Approximate HE11 spontaneous-emission rate of an on-axis dot, relative to bulk.

    F = (3/4pi) * confinement * (n_g / n_core) * (lambda/n_core)^2 / A_eff.
    Not a Green's-function result: use it for trends, not absolute rates.
    """
    sol = he11_neff(geom, wavelength)
    ng = group_index(geom, wavelength)
    return SE_PREFACTOR * sol.confinement * (ng / geom.n_core) * _axis_area_factor(geom, wavelength, sol)


def sweep(diameters, wavelengths, n_core=3.2, n_clad=1.0):
    """Rows of (diameter_nm, wavelength_nm, n_eff, confinement, F_rel)."""
    rows = []
    for d in diameters:
        geom = NanowireGeometry(float(d), n_core, n_clad)
        for lam in wavelengths:
            sol = he11_neff(geom, float(lam))
            rows.append((float(d), float(lam), sol.n_eff, sol.confinement,
                         se_rate_relative(geom, float(lam))))
    return rows
