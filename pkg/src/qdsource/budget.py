"""
Efficiency chain from a detected count rate back to the first collection lens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction

STAGES = ("end_to_end_raw", "end_to_end_detcorr", "first_lens", "first_lens_single_photon",
          "first_lens_with_sideband", "mirror_projection")


@dataclass(frozen=True)
class BudgetInputs:
    detected_rate: float  # Mcps
    rep_rate: float  # MHz
    detector_efficiency: float
    setup_throughput: float
    sideband_fraction: float
    g2_zero: float
    mirror_reflectivity: float | None = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{f.name} must be finite and >= 0, got {v}")
        for name in ("detector_efficiency", "setup_throughput", "sideband_fraction",
                     "mirror_reflectivity"):
            v = getattr(self, name)
            if v is not None and v > 1:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.rep_rate == 0:
            raise ValueError("rep_rate must be positive")
        if self.detector_efficiency == 0:
            raise ValueError("detector_efficiency must be positive")
        if self.setup_throughput == 0:
            raise ValueError("setup_throughput must be positive")
        if self.sideband_fraction == 1:
            raise ValueError("sideband_fraction must be < 1")
        if self.detected_rate > self.rep_rate:
            raise ValueError("detected_rate exceeds rep_rate")


@dataclass(frozen=True)
class EfficiencyBudget:
    end_to_end_raw: float
    end_to_end_detcorr: float
    first_lens: float
    first_lens_single_photon: float
    first_lens_with_sideband: float
    mirror_projection: float | None = None
    multiphoton: str = "linear"

    def items(self):
        return [(name, getattr(self, name)) for name in STAGES]


def _chain(x: BudgetInputs, num, multiphoton):
    raw = num(x.detected_rate) / num(x.rep_rate)
    det = raw / num(x.detector_efficiency)
    lens = det / num(x.setup_throughput)
    if multiphoton == "linear":
        single = lens * (1 - num(x.g2_zero))
    elif multiphoton == "sqrt":
        single = lens * num(math.sqrt(max(1.0 - x.g2_zero, 0.0)))
    else:
        raise ValueError(f"unknown multiphoton correction {multiphoton!r}")
    side = lens / (1 - num(x.sideband_fraction))
    mirror = None if x.mirror_reflectivity is None else lens * (1 + num(x.mirror_reflectivity))
    return raw, det, lens, single, side, mirror


def compute_budget(inputs: BudgetInputs, multiphoton: str = "linear") -> EfficiencyBudget:
    """Chain the efficiencies.

    ``multiphoton`` selects the single-photon correction: ``"linear"``
    multiplies by (1 - g2(0)), ``"sqrt"`` by sqrt(1 - g2(0)).
    """
    vals = _chain(inputs, float, multiphoton)
    return EfficiencyBudget(*vals, multiphoton=multiphoton)


def exact_budget(inputs: BudgetInputs) -> dict:
    """Same chain in rational arithmetic (linear correction only).

    Inputs are read through their decimal text, so 0.9 is exactly 9/10.
    """
    def num(v):
        return Fraction(repr(float(v)))
    vals = _chain(inputs, num, "linear")
    return dict(zip(STAGES, vals))


def round_sig(x: float, sig: int = 2) -> float:
    """Round to ``sig`` significant figures (for matching printed percentages)."""
    if x == 0 or not math.isfinite(x):
        return x
    return round(x, sig - 1 - int(math.floor(math.log10(abs(x)))))


def report_rows(budget: EfficiencyBudget, sig: int = 2):
    """(stage, percent at 4 s.f., percent at ``sig`` s.f.) for each stage."""
    rows = []
    for name, val in budget.items():
        if val is None:
            continue
        pct = 100.0 * val
        rows.append((name, float(f"{pct:.4g}"), round_sig(pct, sig)))
    return rows


def format_table(budget: EfficiencyBudget) -> str:
    rows = report_rows(budget)
    width = max(len(r[0]) for r in rows)
    lines = [f"{'stage':<{width}}  {'percent':>9}  {'rounded':>7}"]
    for name, pct, rnd in rows:
        lines.append(f"{name:<{width}}  {pct:>9.4g}  {rnd:>7g}")
    return "\n".join(lines)
