"""
Fading channel of a moving user
===============================

Draw a sum-of-scatterers channel for a few speeds and compare its empirical
autocorrelation with the Bessel function J0.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pilotsim import DopplerParams, clarke_init, clarke_sample, theoretical_autocorrelation

rng = np.random.default_rng(0)
t_s = 5e-4  # one slot
lags = np.arange(200)

fig, (ax_mag, ax_corr) = plt.subplots(2, 1, figsize=(6.4, 6.4))
for v in (3.0, 30.0, 100.0):
    f_d = DopplerParams.from_kmh(v, 1.8e9).f_d

    # one channel over one second, for the magnitude trace
    single = clarke_init(rng, 20, f_d)
    t = np.arange(2000) * t_s
    ax_mag.plot(t, 20 * np.log10(np.abs(clarke_sample(single, t))), lw=0.8, label=f"{v:g} km/h")

    # many independent channels give the ensemble autocorrelation
    batch = clarke_init(rng, 20, f_d, size=5000)
    h = clarke_sample(batch, lags * t_s)
    emp = np.mean(np.conj(h[:, :1]) * h, axis=0).real
    line, = ax_corr.plot(lags, emp, ".", ms=3)
    ax_corr.plot(lags, theoretical_autocorrelation(f_d, lags * t_s), color=line.get_color(), lw=1,
                 label=f"{v:g} km/h, f_d = {f_d:.1f} Hz")

ax_mag.set_xlabel("time [s]")
ax_mag.set_ylabel("|h| [dB]")
ax_mag.legend(fontsize=8)
ax_corr.set_xlabel("lag [slots]")
ax_corr.set_ylabel("autocorrelation")
ax_corr.legend(fontsize=8)
fig.tight_layout()
fig.savefig("fading_channel.png", dpi=120)
print("wrote fading_channel.png")
