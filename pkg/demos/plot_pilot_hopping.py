"""
Pilot hopping and collision distance
====================================

Every cell draws a fresh pilot permutation each slot. The number of slots
between two collisions with the same foreign user is then geometric with
mean K.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pilotsim import collision_pmf, hop_schedule, schedule_collision_distances

K = 96

# the first slots of one cell: row n maps user -> pilot
sched = hop_schedule(master_seed=1, cell=0, K=K, n_slots=5)
print("pilots of users 0..5 in the first slots")
print(sched[:, :6])

# any slot can be regenerated on its own
assert np.array_equal(hop_schedule(1, 0, K, 1, start=3)[0], sched[3])

d = schedule_collision_distances(master_seed=1, K=K, n_slots=100_000)
print(f"{d.size} collisions, mean distance {d.mean():.2f} (expected {K})")

fixed = schedule_collision_distances(master_seed=1, K=K, n_slots=1000, hopping=False)
print(f"without hopping the contaminator never changes: mean distance {fixed.mean():.0f}")

fig, ax = plt.subplots()
ax.hist(d, bins=np.arange(1, 500, 5), density=True, alpha=0.6, label="schedules")
x = np.arange(1, 500)
ax.plot(x, collision_pmf(x, K), "k", lw=1, label="geometric law")
ax.set_xlabel("collision distance [slots]")
ax.set_ylabel("probability")
ax.legend()
fig.savefig("pilot_hopping.png", dpi=120)
print("wrote pilot_hopping.png")
