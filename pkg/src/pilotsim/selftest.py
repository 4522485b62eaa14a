"""Quick analytic-oracle checks run by ``pilotsim selftest``."""

from __future__ import annotations

import sys
from dataclasses import replace

import numpy as np

from .estimators import kalman_gain, mmse_weights
from .harness import SimConfig, compute_mse, run_block
from .pilots import schedule_collision_distances


def _line(out, name, ok, detail):
    out.write(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}\n")
    return ok


def run_selftest(cfg: SimConfig | None = None, out=sys.stdout) -> bool:
    cfg = cfg or SimConfig()
    ok = True
    sc, sn = cfg.contamination_power, cfg.sigma_n2

    d = schedule_collision_distances(cfg.master_seed, cfg.K, 100_000)
    ok &= _line(out, "collision distance mean", abs(d.mean() / cfg.K - 1) < 0.02,
                f"{d.mean():.3f} vs {cfg.K}")

    # one slot per realization: the MMSE error scales with |h|^2, which must be averaged over channels
    small = replace(cfg, n_slots=1, n_realizations=10_000, burn_in=0, estimators=("ls", "mmse"), workers=1)
    res = run_block(small, 3.0)
    ls, _ = compute_mse(res.errors["ls"], small.burn_in)
    mm, _ = compute_mse(res.errors["mmse"], small.burn_in)
    ok &= _line(out, "LS oracle", abs(ls - (sc + sn)) < 0.02, f"{ls:.4f} vs {sc + sn:.4f}")
    target = (sc + sn) / (1 + sc + sn)
    ok &= _line(out, "MMSE oracle", abs(mm - target) < 0.02, f"{mm:.4f} vs {target:.4f}")

    rng = np.random.default_rng(cfg.master_seed)
    worst = 0.0
    for tau in (4, cfg.tau):
        for _ in range(20):
            x = rng.standard_normal(tau) + 1j * rng.standard_normal(tau)
            x /= np.linalg.norm(x)
            p = rng.uniform(0, 1)
            R = (p + sc) * np.outer(x, x.conj()) + sn * np.eye(tau)
            k_naive = np.linalg.solve(R.T, p * x.conj())
            R1 = (1 + sc) * np.outer(x, x.conj()) + sn * np.eye(tau)
            w_naive = np.linalg.solve(R1.T, x.conj())
            worst = max(worst, np.abs(kalman_gain(x, p, sn, sc) - k_naive).max(),
                        np.abs(mmse_weights(x, sn, sc) - w_naive).max())
    ok &= _line(out, "rank-one gains", worst < 1e-10, f"max deviation {worst:.2e}")
    return bool(ok)
