"""
Temperature dependence
======================

Emission wavelength, linewidth and lifetime from the temperature models,
then the full g2(0) sweep with the filter/power protocol applied per
temperature.
"""

import numpy as np

from qdsource import temperature as tm
from qdsource.config import loads
from qdsource.pipeline import TEMPERATURE_COLUMNS, protocol, sweep_temperature

T = np.array([4.0, 77.0, 120.0, 150.0, 220.0, 260.0, 300.0])

# %%
for t in T:
    lam = tm.emission_wavelength(t)
    gam = tm.linewidth(t)
    print(f"{t:5.0f} K  {lam:9.3f} nm  {gam:7.1f} ueV  "
          f"({tm.fwhm_uev_to_nm(gam, lam):.3f} nm)  tau {tm.default_lifetime_model(t):5.2f} ns")

# %%
# The lifetime grows as dark and p-shell states soak up population.
grid = np.linspace(4.0, 300.0, 7)
print(np.round(tm.default_lifetime_model(grid), 2))

# %%
# Filter width and power used at each temperature.
for t in T:
    print(t, protocol(t))

# %%
# The sweep itself. 3e6 pulses per point take roughly a minute on one core;
# this uses fewer.
cfg = loads("sweep.n_pulses = 500000\n")
rows = sweep_temperature(cfg)
print(TEMPERATURE_COLUMNS)
for r in rows:
    print(f"{r[0]:5.0f} K  g2 = {r[4]:.3f}  integrated = {r[5]:.3f}")

# %%
# Above roughly 150 K the exciton line merges with its neighbours, the
# filter has to open up, and g2(0) approaches the two-photon value of one
# half. Nothing in the model pushes it back down at 220 K.
