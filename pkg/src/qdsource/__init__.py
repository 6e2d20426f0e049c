"""
Simulation and analysis of a pulsed nanowire quantum-dot single-photon source.

Modules
-------
emitter      kinetic Monte Carlo photon emission
temperature  wavelength, linewidth and lifetime versus temperature
waveguide    HE11 mode solver and relative emission rate
detection    filter, beamsplitter, detectors, correlator
analysis     g2(0) and lifetime estimation
budget       efficiency chain
pipeline     end-to-end experiments
"""

__version__ = "0.1.0"

from .analysis import (G2Fit, TrplFit, fit_g2, fit_g2_floating, fit_trpl, g2_integrated,
                       zero_peak_dip)
from .budget import BudgetInputs, EfficiencyBudget, compute_budget
from .detection import (ClickStream, DetectorConfig, Histogram, apply_bandpass, correlate,
                        hbt_detect, trpl_histogram)
from .emitter import (DriveConfig, EmitterConfig, PhotonRecord, PhotonStream,
                      saturation_map, simulate_pulse_train)
from .fitting import FitError
from .temperature import emission_wavelength, lifetime, linewidth, synth_line_set
from .waveguide import ModeSolution, NanowireGeometry, he11_neff, se_rate_relative

__all__ = [
    "G2Fit", "TrplFit", "fit_g2", "fit_g2_floating", "fit_trpl", "g2_integrated",
    "zero_peak_dip", "BudgetInputs", "EfficiencyBudget", "compute_budget", "ClickStream",
    "DetectorConfig", "Histogram", "apply_bandpass", "correlate", "hbt_detect",
    "trpl_histogram", "DriveConfig", "EmitterConfig", "PhotonRecord", "PhotonStream",
    "saturation_map", "simulate_pulse_train", "FitError", "emission_wavelength", "lifetime",
    "linewidth", "synth_line_set", "ModeSolution", "NanowireGeometry", "he11_neff",
    "se_rate_relative",
]
