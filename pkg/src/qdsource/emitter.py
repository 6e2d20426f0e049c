"""
Kinetic Monte Carlo photon emission from a pulsed quantum dot.

Each laser pulse drops a Poisson number of electron-hole pairs into a
carrier reservoir around the dot. Pairs are captured into the dot (when there
is room), relax to the s shell, and recombine as biexciton (XX) and exciton
(X) photons. The neutral exciton wanders thermally between its bright level
and optically inactive levels (dark exciton, higher shells); only the bright
level emits. Events are drawn with an exact next-event (Gillespie) scheme, so
there is no time step.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Callable, Iterator, NamedTuple

import numba
import numpy as np

from . import temperature as tm

LINES = ("X", "XX", "p-shell")
LINE_CODE = {name: i for i, name in enumerate(LINES)}

#: mean injected pairs per pulse at P = P_sat
DEFAULT_MU_SAT = 6.0
#: multiplicity of the lumped higher-shell manifold, from the lifetime calibration
DEFAULT_PSHELL_MULTIPLICITY = 81.40


class EmptySimulationError(ValueError):
    """Raised when asked to simulate zero pulses."""


@dataclass(frozen=True)
class EmitterConfig:
    """Level structure and rates of the simulated dot (rates in 1/ns, energies in meV)."""

    tau_x0: float = 2.1
    tau_xx_ratio: float = 0.5
    capture_rate: float = 3.0
    relax_rate: float = 300.0
    reservoir_loss_rate: float = 4.0
    dark_splitting: float = 0.3
    sp_splitting: float = tm.SP_SPLITTING
    spin_flip_rate: float = 10.0
    degeneracies: tuple = (("bright", 2.0), ("dark", 2.0),
                           ("p-shell", DEFAULT_PSHELL_MULTIPLICITY))
    xx_binding: float = tm.XX_BINDING
    mu_sat: float = DEFAULT_MU_SAT
    prompt_capture: bool = True  # free dot states fill during the pulse itself

    def __post_init__(self):
        object.__setattr__(self, "degeneracies",
                           tuple((str(k), float(v)) for k, v in self.degeneracies))
        for name in ("tau_x0", "tau_xx_ratio", "capture_rate", "relax_rate",
                     "reservoir_loss_rate", "dark_splitting", "sp_splitting",
                     "spin_flip_rate", "xx_binding", "mu_sat"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val}")
        for name in ("tau_x0", "capture_rate", "relax_rate", "sp_splitting", "mu_sat"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        # zero switches the channel off
        for name in ("reservoir_loss_rate", "spin_flip_rate", "dark_splitting", "xx_binding"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 < self.tau_xx_ratio <= 1:
            raise ValueError(f"tau_xx_ratio must be in (0, 1], got {self.tau_xx_ratio}")
        labels = [k for k, _ in self.degeneracies]
        if "bright" not in labels:
            raise ValueError("degeneracies must include the bright level")
        if any(v <= 0 for _, v in self.degeneracies):
            raise ValueError("multiplicities must be positive")

    @property
    def dark_states(self) -> bool:
        return self.spin_flip_rate > 0 and len(self.degeneracies) > 1

    def manifold(self):
        energies = {"bright": 0.0, "dark": self.dark_splitting, "p-shell": self.sp_splitting}
        levels = []
        for label, mult in self.degeneracies:
            if label not in energies:
                raise ValueError(f"unknown manifold level {label!r}")
            levels.append(tm.Level(label, energies[label], mult, bright=label == "bright"))
        return tuple(levels)


@dataclass(frozen=True)
class DriveConfig:
    rep_rate: float = 80.0  # MHz
    power_ratio: float = 1.0  # P / P_sat
    n_pulses: int = 100_000
    mode: str = "pulsed"
    fixed_pairs: int | None = None  # inject exactly this many pairs per pulse

    def __post_init__(self):
        if not (self.rep_rate > 0 and math.isfinite(self.rep_rate)):
            raise ValueError(f"rep_rate must be positive, got {self.rep_rate}")
        if not (self.power_ratio >= 0 and math.isfinite(self.power_ratio)):
            raise ValueError(f"power_ratio must be >= 0, got {self.power_ratio}")
        if self.mode != "pulsed":
            raise ValueError("only pulsed excitation is supported")
        if self.n_pulses < 0:
            raise ValueError("n_pulses must be >= 0")
        if self.fixed_pairs is not None and self.fixed_pairs < 0:
            raise ValueError("fixed_pairs must be >= 0")

    @property
    def period_ps(self) -> float:
        return 1e6 / self.rep_rate


class PhotonRecord(NamedTuple):
    time: float  # ps
    line: str
    wavelength: float  # nm


@dataclass
class PhotonStream:
    """Columnar photon records sorted by time, plus provenance."""

    time_ps: np.ndarray
    line: np.ndarray  # int8 codes into LINES
    wavelength_nm: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time_ps = np.asarray(self.time_ps, dtype=np.float64)
        self.line = np.asarray(self.line, dtype=np.int8)
        self.wavelength_nm = np.asarray(self.wavelength_nm, dtype=np.float64)
        if not (len(self.time_ps) == len(self.line) == len(self.wavelength_nm)):
            raise ValueError("column lengths differ")

    def __len__(self):
        return len(self.time_ps)

    def records(self) -> Iterator[PhotonRecord]:
        for t, c, w in zip(self.time_ps, self.line, self.wavelength_nm):
            yield PhotonRecord(float(t), LINES[c], float(w))

    def select(self, mask) -> "PhotonStream":
        return PhotonStream(self.time_ps[mask], self.line[mask], self.wavelength_nm[mask],
                            dict(self.meta))

    def count(self, line: str) -> int:
        return int(np.count_nonzero(self.line == LINE_CODE[line]))


def config_digest(cfg) -> str:
    """Stable short hash of a config's canonical JSON text."""
    payload = asdict(cfg) if is_dataclass(cfg) else cfg
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def saturation_map(power_ratio, mu_sat=DEFAULT_MU_SAT):
    """Mean injected pairs per pulse, linear in pump power."""
    p = np.asarray(power_ratio, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"power_ratio must be >= 0, got {power_ratio}")
    mu = mu_sat * p
    return float(mu) if np.ndim(mu) == 0 else mu


def boltzmann_rates(emitter: EmitterConfig, temperature):
    """Bright->level rates and the common return rate (1/ns).

    Detailed balance: up/down = (g_i / g_B) exp(-E_i / kT).
    """
    kt = tm.KB_MEV * temperature
    levels = emitter.manifold()
    bright = next(lv for lv in levels if lv.bright)
    out = np.array([emitter.spin_flip_rate * lv.multiplicity / bright.multiplicity
                    * math.exp(-lv.energy / kt) for lv in levels if not lv.bright])
    return out, emitter.spin_flip_rate


# state codes for the Gillespie kernel
_X_EMIT, _XX_EMIT = 0, 1


@numba.njit(cache=True)
def _kmc(rng, pairs, period, k_cap, k_loss, k_relax, g_xx, g_x, flip_out, flip_back, prompt):
    n_pulses = pairs.shape[0]
    cap = max(16, 2 * n_pulses)
    times = np.empty(cap)
    kinds = np.empty(cap, dtype=np.int8)
    n_out = 0

    n_lv = flip_out.shape[0]
    flip_total = 0.0
    for i in range(n_lv):
        flip_total += flip_out[i]

    res = pairs[0]  # reservoir pairs
    hot = 0  # captured, not yet relaxed
    if prompt:
        hot = min(res, 2)
        res -= hot
    ns = 0  # s-shell pairs: 0 empty, 1 X, 2 XX
    lvl = 0  # 0 bright, i>0 -> flip_out[i-1]
    t = 0.0
    k = 1  # next pulse index
    while True:
        a_cap = k_cap * res if ns + hot < 2 else 0.0
        a_loss = k_loss * res
        a_relax = k_relax * hot
        a_xx = g_xx if ns == 2 else 0.0
        a_x = g_x if (ns == 1 and lvl == 0) else 0.0
        a_out = flip_total if (ns == 1 and lvl == 0) else 0.0
        a_back = flip_back if (ns == 1 and lvl > 0) else 0.0
        a0 = a_cap + a_loss + a_relax + a_xx + a_x + a_out + a_back

        t_next = k * period
        if a0 <= 0.0:
            if k >= n_pulses:
                break
            t = t_next
            res += pairs[k]
            if prompt:
                m = min(res, 2 - ns - hot)
                if m > 0:
                    res -= m
                    hot += m
            k += 1
            continue
        dt = rng.exponential() / a0
        if k < n_pulses and t + dt >= t_next:
            # memoryless: restart the clock at the pulse
            t = t_next
            res += pairs[k]
            if prompt:
                m = min(res, 2 - ns - hot)
                if m > 0:
                    res -= m
                    hot += m
            k += 1
            continue
        t += dt

        r = rng.random() * a0
        if r < a_cap:
            res -= 1
            hot += 1
        elif r < a_cap + a_loss:
            res -= 1
        elif r < a_cap + a_loss + a_relax:
            hot -= 1
            if ns == 0:
                ns = 1
                lvl = 0
            else:
                ns = 2
        elif r < a_cap + a_loss + a_relax + a_xx:
            ns = 1
            lvl = 0
            if n_out == cap:
                cap *= 2
                times = _grow(times, cap)
                kinds = _grow_i8(kinds, cap)
            times[n_out] = t
            kinds[n_out] = _XX_EMIT
            n_out += 1
        elif r < a_cap + a_loss + a_relax + a_xx + a_x:
            ns = 0
            if n_out == cap:
                cap *= 2
                times = _grow(times, cap)
                kinds = _grow_i8(kinds, cap)
            times[n_out] = t
            kinds[n_out] = _X_EMIT
            n_out += 1
        elif r < a0 - a_back:
            # pick the destination level
            x = rng.random() * flip_total
            acc = 0.0
            for i in range(n_lv):
                acc += flip_out[i]
                if x < acc or i == n_lv - 1:
                    lvl = i + 1
                    break
        else:
            lvl = 0
    return times[:n_out], kinds[:n_out]


@numba.njit(cache=True)
def _grow(arr, cap):
    out = np.empty(cap)
    out[:arr.shape[0]] = arr
    return out


@numba.njit(cache=True)
def _grow_i8(arr, cap):
    out = np.empty(cap, dtype=np.int8)
    out[:arr.shape[0]] = arr
    return out


@numba.njit(cache=True)
def _manifold_walk(rng, flip_out, flip_back, duration):
    n_lv = flip_out.shape[0]
    total = 0.0
    for i in range(n_lv):
        total += flip_out[i]
    occ = np.zeros(n_lv + 1)
    t = 0.0
    lvl = 0
    while t < duration:
        rate = total if lvl == 0 else flip_back
        dt = rng.exponential() / rate
        dt = min(dt, duration - t)
        occ[lvl] += dt
        t += dt
        if lvl == 0:
            x = rng.random() * total
            acc = 0.0
            for i in range(n_lv):
                acc += flip_out[i]
                if x < acc or i == n_lv - 1:
                    lvl = i + 1
                    break
        else:
            lvl = 0
    return occ / duration


def manifold_occupancy(emitter: EmitterConfig, temperature: float, duration_ns: float, seed: int):
    """Time-averaged occupation of each manifold level with decay switched off."""
    flip_out, flip_back = boltzmann_rates(emitter, temperature)
    if flip_back <= 0:
        raise ValueError("spin_flip_rate must be > 0 to mix the manifold")
    occ = _manifold_walk(np.random.default_rng(seed), flip_out, flip_back, float(duration_ns))
    labels = ["bright"] + [lv.label for lv in emitter.manifold() if not lv.bright]
    return dict(zip(labels, occ))


def line_table(emitter: EmitterConfig, temperature: float, width_model=tm.DEFAULT_LINEWIDTH):
    """{label: (center_nm, fwhm_nm)} at ``temperature``."""
    centers = tm.line_centers(temperature, emitter.xx_binding, emitter.sp_splitting)
    width = width_model(temperature)
    return {lbl: (centers[lbl], tm.fwhm_uev_to_nm(width * tm.LINE_WIDTH_SCALE[lbl], centers[lbl]))
            for lbl in LINES}


def simulate_pulse_train(emitter: EmitterConfig, drive: DriveConfig, temperature: float,
                         lifetime_model: Callable[[float], float] | None, seed: int,
                         width_model=tm.DEFAULT_LINEWIDTH) -> PhotonStream:
    """Simulate ``drive.n_pulses`` excitation pulses and return the emitted photons.

    Parameters
    ----------
    emitter, drive : EmitterConfig, DriveConfig
    temperature : float
        Lattice temperature in K, 4 <= T <= 300.
    lifetime_model : callable or None
        Maps T (K) to the observed exciton lifetime (ns). ``None`` uses
        ``emitter.tau_x0`` at every temperature.
    seed : int

    Returns
    -------
    PhotonStream
        Emission times (ps since the first pulse at t = 0), line labels and
        nominal line-center wavelengths.
    """
    if drive.n_pulses == 0:
        raise EmptySimulationError("empty simulation: n_pulses = 0")
    if not (4.0 <= temperature <= 300.0):
        raise ValueError(f"temperature must be within [4, 300] K, got {temperature}")

    tau_x = float(lifetime_model(temperature)) if lifetime_model is not None else emitter.tau_x0
    if not (tau_x > 0 and math.isfinite(tau_x)):
        raise ValueError(f"lifetime model returned {tau_x}")

    rng = np.random.default_rng(seed)
    if drive.fixed_pairs is not None:
        pairs = np.full(drive.n_pulses, drive.fixed_pairs, dtype=np.int64)
        if drive.power_ratio == 0:
            pairs[:] = 0
    else:
        mu = saturation_map(drive.power_ratio, emitter.mu_sat)
        pairs = rng.poisson(mu, drive.n_pulses).astype(np.int64)

    if emitter.dark_states:
        flip_out, flip_back = boltzmann_rates(emitter, temperature)
        f_bright = tm.bright_fraction(temperature, emitter.manifold())
    else:
        flip_out, flip_back, f_bright = np.zeros(1), 0.0, 1.0
    # bright-level rate chosen so the manifold-averaged decay matches tau_x
    g_x = 1.0 / (tau_x * f_bright)
    g_xx = 1.0 / (emitter.tau_xx_ratio * tau_x)

    period_ns = drive.period_ps * 1e-3
    t_ns, kinds = _kmc(rng, pairs, period_ns, emitter.capture_rate, emitter.reservoir_loss_rate,
                       emitter.relax_rate, g_xx, g_x, np.asarray(flip_out, dtype=float), flip_back,
                       emitter.prompt_capture)

    table = line_table(emitter, temperature, width_model)
    codes = np.where(kinds == _X_EMIT, LINE_CODE["X"], LINE_CODE["XX"]).astype(np.int8)
    centers = np.array([table[name][0] for name in LINES])
    order = np.argsort(t_ns, kind="stable")
    meta = {
        "seed": int(seed),
        "emitter_digest": config_digest(emitter),
        "drive_digest": config_digest(drive),
        "temperature": float(temperature),
        "tau_x_ns": tau_x,
        "rep_rate_mhz": drive.rep_rate,
        "power_ratio": drive.power_ratio,
        "n_pulses": int(drive.n_pulses),
        "lines": {k: list(v) for k, v in table.items()},
    }
    return PhotonStream(t_ns[order] * 1e3, codes[order], centers[codes[order]], meta)
