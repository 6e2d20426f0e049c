"""
Efficiency budget and nanowire mode
===================================

Work the efficiency chain back from a detected count rate, then look at
how the HE11 mode of the nanowire shapes the emission rate.
"""

import numpy as np

from qdsource import budget as bd
from qdsource import waveguide as wg

# %%
x = bd.BudgetInputs(1.86, 80.0, 0.90, 0.10, 0.20, 0.021, 0.91)
b = bd.compute_budget(x)
print(bd.format_table(b))

# %%
# Exact rational arithmetic agrees with the float chain.
exact = bd.exact_budget(x)
print(max(abs(v - float(exact[k])) for k, v in b.items()))

# %%
# The square-root multiphoton correction is a little gentler.
print(bd.format_table(bd.compute_budget(x, "sqrt")))

# %%
# Effective index across the band for three diameters.
lams = np.arange(1100.0, 1501.0, 50.0)
for d in (270.0, 290.0, 310.0):
    geom = wg.NanowireGeometry(d)
    n = [wg.he11_neff(geom, lam).n_eff for lam in lams]
    print(d, np.round(n, 4))

# %%
# Relative emission rate into the guided mode. It falls with wavelength
# over 1300-1400 nm, which is where the dot emits as it warms up.
rows = wg.sweep((270.0, 290.0, 310.0), np.arange(1300.0, 1401.0, 20.0))
for d, lam, neff, conf, f in rows:
    print(f"{d:5.0f} nm  {lam:6.0f} nm  n_eff {neff:.4f}  conf {conf:.3f}  F {f:.3f}")
