"""
Single-slot estimates under contamination
=========================================

Least squares passes the contamination straight through. The MMSE estimate
shrinks it but cannot remove it, since it uses one slot only.
"""

import numpy as np

from pilotsim import ls_estimate, make_pilot_book, mmse_estimate
from pilotsim.scenario import complex_gaussian

rng = np.random.default_rng(3)
sigma_n2, sigma_c2 = 0.2, 0.6
x = make_pilot_book(96).pilot(0)

n = 20_000
h = complex_gaussian(rng, 1.0, n)
c = complex_gaussian(rng, sigma_c2, n)  # same-pilot users of the other cells
y = (h + c)[:, None] * x + complex_gaussian(rng, sigma_n2, (n, x.size))

ls = ls_estimate(x, y)
mmse = mmse_estimate(x, y, sigma_n2, sigma_c2)

print(f"LS   MSE {np.mean(np.abs(ls - h) ** 2):.4f}  expected {sigma_c2 + sigma_n2:.4f}")
target = (sigma_c2 + sigma_n2) / (1 + sigma_c2 + sigma_n2)
print(f"MMSE MSE {np.mean(np.abs(mmse - h) ** 2):.4f}  expected {target:.4f}")

# the LS error is almost entirely the contaminating channel
print(f"corr(LS error, contamination) = {abs(np.corrcoef(ls - h, c)[0, 1]):.3f}")
