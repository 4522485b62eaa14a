"""
Choosing the AR coefficient
===========================

A Kalman filter with a fixed AR(1) coefficient works well only near the
coefficient that fits the mobility. The grid below gives that best value,
and the tracking filter should settle close to it without being told the
speed.
"""

from dataclasses import replace

import numpy as np

from pilotsim import SimConfig, mse_surface, run_block
from pilotsim.cli import render_plot

cfg = SimConfig(n_slots=3000, n_realizations=10, v_kmh=(3, 10, 30, 50, 100, 130))
a_grid = np.round(np.arange(0.3, 1.0 + 1e-9, 0.01), 2)

surface = mse_surface(cfg, a_grid=a_grid)
render_plot(surface, "surface", "ar_coefficient.svg")
print("wrote ar_coefficient.svg")

tracker_cfg = replace(cfg, estimators=("modkalman",))
print(" v [km/h]  grid a*  tracked a")
for v, a_star in zip(surface.v_kmh, surface.optimal_a()):
    trace = run_block(tracker_cfg, v, record_a=True).a_trace
    print(f"{v:9g}  {a_star:7.2f}  {trace[:, -1].mean():9.3f}")
