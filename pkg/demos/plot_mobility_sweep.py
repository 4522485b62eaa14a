"""
Estimation error versus mobility
================================

Sweep the user speed and compare the single-slot estimators with the
recursive ones. Hopping turns the contamination into slot-to-slot white
noise, which the recursive filters average out when the channel is slow.

The sizes here are reduced to keep the run short; the CLI defaults use 100
realizations of 10^4 slots.
"""

import logging

from pilotsim import SimConfig, run_sweep
from pilotsim.cli import render_plot, write_csv

logging.basicConfig(level=logging.INFO, format="%(message)s")

cfg = SimConfig(n_slots=4000, n_realizations=8, v_kmh=(1, 3, 10, 30, 70, 130))
result = run_sweep(cfg, "mobility")

for name, mse in result.mse_table().items():
    print(f"{name:>10} " + " ".join(f"{m:7.4f}" for m in mse))

write_csv(result, "mobility_sweep.csv")
render_plot(result, "mobility", "mobility_sweep.svg")
print(f"wrote mobility_sweep.csv and mobility_sweep.svg in {result.elapsed_s:.1f}s")

# the same curves against the signal-to-interference ratio at pedestrian speed
sir = run_sweep(cfg, "sir")
render_plot(sir, "sir", "sir_sweep.svg")
print("wrote sir_sweep.svg")
