"""
Strict flat configuration files.

One ``section.key = value`` assignment per line, ``#`` starts a comment.
Values are Python literals (numbers, quoted strings, lists, tuples, dicts,
True/False/None). Unknown keys are errors, and every error names the line
and key that caused it.

Example::

    seed = 7
    emitter.capture_rate = 3.0
    drive.rep_rate = 20
    sweep.temperatures = [4, 77, 120, 150, 220, 260, 300]
"""

from __future__ import annotations

import ast
import re
from dataclasses import asdict, dataclass, field, fields, replace

from .budget import BudgetInputs
from .detection import DetectorConfig
from .emitter import DriveConfig, EmitterConfig


class ConfigError(ValueError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


@dataclass(frozen=True)
class FilterConfig:
    width_nm: float = 0.1
    center_nm: float | None = None  # None follows the X line
    schedule: str = "protocol"  # "protocol" or "fixed" in temperature sweeps

    def __post_init__(self):
        if not self.width_nm > 0:
            raise ValueError(f"width_nm must be positive, got {self.width_nm}")
        if self.schedule not in ("protocol", "fixed"):
            raise ValueError(f"schedule must be 'protocol' or 'fixed', got {self.schedule!r}")


@dataclass(frozen=True)
class ExperimentSection:
    temperature: float = 4.0
    collection: float = 1.0  # lumped optics throughput before the splitter
    lifetime_model: str = "calibrated"  # or "constant" (tau_x0 at every T)

    def __post_init__(self):
        if not 4.0 <= self.temperature <= 300.0:
            raise ValueError(f"temperature must be within [4, 300] K, got {self.temperature}")
        if not 0 < self.collection <= 1:
            raise ValueError(f"collection must be in (0, 1], got {self.collection}")
        if self.lifetime_model not in ("calibrated", "constant"):
            raise ValueError(f"lifetime_model must be 'calibrated' or 'constant'")


@dataclass(frozen=True)
class AnalysisSection:
    bin_width: float = 50.0  # ps
    side_peaks: int = 6  # correlation window in periods
    trpl_bin_width: float = 50.0  # ps
    weighting: str = "poisson"

    def __post_init__(self):
        if not self.bin_width > 0 or not self.trpl_bin_width > 0:
            raise ValueError("bin widths must be positive")
        if self.side_peaks < 5:
            raise ValueError(f"side_peaks must be >= 5, got {self.side_peaks}")
        if self.weighting not in ("poisson", "none"):
            raise ValueError(f"weighting must be 'poisson' or 'none'")


@dataclass(frozen=True)
class SweepSection:
    temperatures: tuple = (4.0, 77.0, 120.0, 150.0, 220.0, 260.0, 300.0)
    powers: tuple = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
    n_pulses: int = 3_000_000

    def __post_init__(self):
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        if not self.temperatures:
            raise ValueError("temperatures must not be empty")
        if any(not 4.0 <= t <= 300.0 for t in self.temperatures):
            raise ValueError("temperatures must lie within [4, 300] K")
        if any(p < 0 for p in self.powers):
            raise ValueError("powers must be >= 0")
        if self.n_pulses <= 0:
            raise ValueError("n_pulses must be positive")


@dataclass(frozen=True)
class BudgetSection:
    detected_rate: float = 1.86
    rep_rate: float = 80.0
    detector_efficiency: float = 0.90
    setup_throughput: float = 0.10
    sideband_fraction: float = 0.20
    g2_zero: float = 0.021
    mirror_reflectivity: float | None = 0.91
    multiphoton: str = "linear"

    def __post_init__(self):
        if self.multiphoton not in ("linear", "sqrt"):
            raise ValueError("multiphoton must be 'linear' or 'sqrt'")
        self.inputs()  # validates

    def inputs(self) -> BudgetInputs:
        return BudgetInputs(self.detected_rate, self.rep_rate, self.detector_efficiency,
                            self.setup_throughput, self.sideband_fraction, self.g2_zero,
                            self.mirror_reflectivity)


@dataclass(frozen=True)
class WaveguideSection:
    diameters: tuple = (270.0, 290.0, 310.0)
    wavelength_min: float = 1100.0
    wavelength_max: float = 1500.0
    wavelength_step: float = 10.0
    n_core: float = 3.2
    n_clad: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "diameters", tuple(float(d) for d in self.diameters))
        if not self.diameters or any(d <= 0 for d in self.diameters):
            raise ValueError("diameters must be positive")
        if not 0 < self.wavelength_min <= self.wavelength_max:
            raise ValueError("need 0 < wavelength_min <= wavelength_max")
        if not self.wavelength_step > 0:
            raise ValueError("wavelength_step must be positive")
        if not self.n_core > self.n_clad >= 1:
            raise ValueError("need n_core > n_clad >= 1")

    def wavelengths(self):
        n = int(round((self.wavelength_max - self.wavelength_min) / self.wavelength_step))
        return tuple(self.wavelength_min + i * self.wavelength_step for i in range(n + 1))


SECTIONS = {
    "emitter": EmitterConfig,
    "drive": DriveConfig,
    "detector": DetectorConfig,
    "filter": FilterConfig,
    "experiment": ExperimentSection,
    "analysis": AnalysisSection,
    "sweep": SweepSection,
    "budget": BudgetSection,
    "waveguide": WaveguideSection,
}
TOP_LEVEL = {"seed": 0}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    emitter: EmitterConfig = field(default_factory=EmitterConfig)
    drive: DriveConfig = field(default_factory=lambda: DriveConfig(rep_rate=20.0,
                                                                   n_pulses=1_000_000))
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    budget: BudgetSection = field(default_factory=BudgetSection)
    waveguide: WaveguideSection = field(default_factory=WaveguideSection)

    def as_dict(self) -> dict:
        return asdict(self)


_LINE = re.compile(r"^\s*([A-Za-z_][\w]*(?:\.[A-Za-z_]\w*)?)\s*=\s*(.*?)\s*$")


def _strip_comment(text):
    # a '#' inside a quoted string is kept
    out, quote = [], None
    for ch in text:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def parse_text(text: str) -> dict:
    """Parse assignments into ``{key: (value, line_number)}``."""
    found = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError("expected 'section.key = value'", no)
        key, val = m.group(1), m.group(2)
        if not val:
            raise ConfigError("missing value", no, key)
        try:
            value = ast.literal_eval(val)
        except (ValueError, SyntaxError):
            raise ConfigError(f"cannot read value {val!r} (strings need quotes)", no, key) from None
        if key in found:
            raise ConfigError(f"duplicate key, first set on line {found[key][1]}", no, key)
        found[key] = (value, no)
    return found


def _field_names(cls):
    return {f.name for f in fields(cls)}


def build(assignments: dict) -> ExperimentConfig:
    """Validate ``{key: (value, line)}`` into an ExperimentConfig."""
    per_section = {name: {} for name in SECTIONS}
    lines = {}
    top = {}
    for key, (value, no) in assignments.items():
        lines[key] = no
        if "." not in key:
            if key not in TOP_LEVEL:
                raise ConfigError("unknown key", no, key)
            top[key] = value
            continue
        section, name = key.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}", no, key)
        if name not in _field_names(SECTIONS[section]):
            raise ConfigError("unknown key", no, key)
        if section == "emitter" and name == "degeneracies" and isinstance(value, dict):
            value = tuple(value.items())
        per_section[section][name] = value

    base = ExperimentConfig()
    built = {}
    for section, cls in SECTIONS.items():
        kwargs = per_section[section]
        try:
            built[section] = replace(getattr(base, section), **kwargs)
        except (ValueError, TypeError) as exc:
            key = _blame(section, kwargs, str(exc))
            raise ConfigError(str(exc), lines.get(key), key) from None
    seed = top.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer", lines.get("seed"), "seed")
    return ExperimentConfig(seed=seed, **built)


def _blame(section, kwargs, message):
    for name in sorted(kwargs, key=len, reverse=True):
        if name in message:
            return f"{section}.{name}"
    if len(kwargs) == 1:
        return f"{section}.{next(iter(kwargs))}"
    return section


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        text = fh.read()
    return build(parse_text(text))


def loads(text: str) -> ExperimentConfig:
    return build(parse_text(text))


def defaults_table() -> str:
    """Every accepted key with its default, generated from the dataclasses."""
    base = ExperimentConfig()
    rows = [("seed", repr(base.seed))]
    for section, cls in SECTIONS.items():
        obj = getattr(base, section)
        for f in fields(cls):
            rows.append((f"{section}.{f.name}", repr(getattr(obj, f.name))))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}} = {v}" for k, v in rows)


def dump(cfg: ExperimentConfig) -> str:
    """Config text that reloads to ``cfg``."""
    lines = [f"seed = {cfg.seed!r}"]
    for section, cls in SECTIONS.items():
        obj = getattr(cfg, section)
        for f in fields(cls):
            lines.append(f"{section}.{f.name} = {getattr(obj, f.name)!r}")
    return "\n".join(lines) + "\n"

