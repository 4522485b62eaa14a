"""Monte Carlo experiments: realizations, MSE aggregation and parameter sweeps.

Every realization is fully determined by ``(master_seed, realization index)``
and the same seeds are reused at every sweep point, so curves are computed on
common random numbers. Realizations can be spread over worker processes; the
reduction always runs in realization order, so the result does not depend on
the number of workers.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .channel import DopplerParams, InvalidParameterError, ar1_coefficient
from .estimators import ESTIMATORS, TrackerConfig, grid_mse, run_estimator, run_recursive
from .pilots import make_pilot_book
from .scenario import MODES, CellTopology, sigma_c_to_sir, sir_to_sigma_c, synthesize_stream

log = logging.getLogger(__name__)

DEFAULT_MOBILITY_KMH = (1.0, 3.0, 10.0, 30.0, 50.0, 70.0, 100.0, 130.0)
DEFAULT_SIR_DB = (-3.0, 0.0, 3.0, 6.0, 10.0)


@dataclass(frozen=True)
class SimConfig:
    """Experiment description; defaults reproduce the reference parameter table."""

    sigma_n2: float = 0.2
    L: int = 7
    K: int = 96
    tau: int = 96
    mu: float = 1e-5
    nu: float = 100.0
    f_c: float = 1.8e9
    N_s: int = 20
    t_s: float = 5e-4
    a0: float = 0.5
    h_hat0: complex = 0j
    q0: complex = 0j
    p1: float = 0.0
    s1: float = 0.0
    sigma_c2: float | None = None
    sir_db: float | None = None
    v_kmh: tuple[float, ...] = DEFAULT_MOBILITY_KMH
    sir_list_db: tuple[float, ...] = DEFAULT_SIR_DB
    sir_v_kmh: float = 3.0
    mode: str = "idealized"
    hopping: bool = True
    n_slots: int = 10_000
    n_realizations: int = 100
    burn_in: int = 500
    master_seed: int = 0
    estimators: tuple[str, ...] = ("ls", "mmse", "kalman", "modkalman", "predictor")
    grad_scale: float | None = None
    s_form: str = "exact"
    kalman_a: float | None = None
    kalman_p1: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.sigma_c2 is not None and self.sir_db is not None:
            raise InvalidParameterError("give either sigma_c2 or sir_db, not both")
        if self.sigma_c2 is not None and self.sigma_c2 < 0:
            raise InvalidParameterError("sigma_c2 must be >= 0")
        if self.sigma_n2 < 0:
            raise InvalidParameterError("sigma_n2 must be >= 0")
        if self.n_realizations < 1:
            raise InvalidParameterError("n_realizations must be >= 1")
        if self.n_slots <= self.burn_in or self.burn_in < 0:
            raise InvalidParameterError("need 0 <= burn_in < n_slots")
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}")
        if not 1 <= self.K <= self.tau:
            raise InvalidParameterError("need 1 <= K <= tau")
        if self.N_s < 1 or self.L < 1:
            raise InvalidParameterError("N_s and L must be >= 1")
        if not (self.t_s > 0 and self.f_c > 0):
            raise InvalidParameterError("t_s and f_c must be > 0")
        if not 0 <= self.a0 <= 1:
            raise InvalidParameterError("a0 must lie in [0, 1]")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise InvalidParameterError(f"unknown estimators: {sorted(unknown)}")
        if any(v < 0 for v in self.v_kmh) or self.sir_v_kmh < 0:
            raise InvalidParameterError("speeds must be >= 0")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")

    @property
    def contamination_power(self) -> float:
        if self.sigma_c2 is not None:
            return float(self.sigma_c2)
        if self.sir_db is not None:
            return sir_to_sigma_c(self.sir_db)
        return 0.6

    def tracker(self, sigma_c2: float | None = None) -> TrackerConfig:
        return TrackerConfig(
            mu=self.mu, nu=self.nu, sigma_n2=self.sigma_n2,
            sigma_c2=self.contamination_power if sigma_c2 is None else sigma_c2,
            a0=self.a0, h_hat0=self.h_hat0, q0=self.q0, p1=self.p1, s1=self.s1,
            grad_scale=float(self.tau if self.grad_scale is None else self.grad_scale),
            s_form=self.s_form,
        )

    def topology(self, sigma_c2: float | None = None) -> CellTopology:
        return CellTopology(L=self.L, K=self.K, mode=self.mode,
                            sigma_c2=self.contamination_power if sigma_c2 is None else sigma_c2,
                            sigma_n2=self.sigma_n2)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("h_hat0", "q0"):
            d[k] = str(complex(d[k]))
        for k in ("v_kmh", "sir_list_db", "estimators"):
            d[k] = list(d[k])
        return d

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class BlockResult:
    """Squared errors of a block of realizations.

    ``errors[name]`` has shape ``(R, n_slots)``; ``diverged[name]`` flags the
    realizations excluded from aggregates.
    """

    realizations: list[int]
    errors: dict[str, np.ndarray]
    diverged: dict[str, np.ndarray]
    a_trace: np.ndarray | None = None


def _block(cfg: SimConfig, realizations, v_kmh: float, sigma_c2: float,
           record_a: bool = False, static_contamination: bool = False) -> BlockResult:
    f_d = DopplerParams.from_kmh(v_kmh, cfg.f_c).f_d
    topo = cfg.topology(sigma_c2)
    book = make_pilot_book(cfg.tau, cfg.K)
    zs, es, hs = [], [], []
    for r in realizations:
        st = synthesize_stream(topo, book, f_d=f_d, t_s=cfg.t_s, n_slots=cfg.n_slots,
                               n_scatterers=cfg.N_s, master_seed=cfg.master_seed, realization=r,
                               hopping=cfg.hopping, static_contamination=static_contamination)
        z, e = st.projections()
        zs.append(z)
        es.append(e)
        hs.append(st.h_true)
    z, e, h = np.array(zs), np.array(es), np.array(hs)
    tcfg = cfg.tracker(sigma_c2)
    a_known = cfg.kalman_a if cfg.kalman_a is not None else ar1_coefficient(f_d, cfg.t_s)
    errors, diverged = {}, {}
    a_trace = None
    for name in cfg.estimators:
        if record_a and name == "modkalman":
            est, bad, a_trace = run_recursive(name, z, e, tcfg, record_a=True)
        else:
            est, bad = run_estimator(name, z, e, tcfg, a_known=a_known, p_known=cfg.kalman_p1)
        d = est - h
        errors[name] = d.real ** 2 + d.imag ** 2
        diverged[name] = np.asarray(bad)
    return BlockResult(list(realizations), errors, diverged, a_trace)


def run_realization(cfg: SimConfig, realization_index: int, v_kmh: float | None = None,
                    sigma_c2: float | None = None) -> dict[str, np.ndarray]:
    """Per-slot squared errors ``|h_hat_n - h_n|^2`` of every configured estimator.

    Diverged estimators are reported as all-NaN sequences.
    """
    v = cfg.v_kmh[0] if v_kmh is None else v_kmh
    res = _block(cfg, [realization_index], v, cfg.contamination_power if sigma_c2 is None else sigma_c2)
    out = {}
    for name, err in res.errors.items():
        out[name] = np.full(err.shape[1], np.nan) if res.diverged[name][0] else err[0]
    return out


def run_block(cfg: SimConfig, v_kmh: float, sigma_c2: float | None = None, record_a: bool = False,
              static_contamination: bool = False) -> BlockResult:
    """All realizations of ``cfg`` at one operating point, optionally over workers."""
    sc = cfg.contamination_power if sigma_c2 is None else sigma_c2
    idx = list(range(cfg.n_realizations))
    if cfg.workers <= 1 or len(idx) < 2:
        return _block(cfg, idx, v_kmh, sc, record_a, static_contamination)
    chunks = [c.tolist() for c in np.array_split(idx, min(cfg.workers, len(idx))) if len(c)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        parts = list(pool.map(_block, [cfg] * len(chunks), chunks, [v_kmh] * len(chunks),
                              [sc] * len(chunks), [record_a] * len(chunks),
                              [static_contamination] * len(chunks)))
    errors = {k: np.concatenate([p.errors[k] for p in parts]) for k in parts[0].errors}
    diverged = {k: np.concatenate([p.diverged[k] for p in parts]) for k in parts[0].diverged}
    a_trace = np.concatenate([p.a_trace for p in parts]) if record_a and parts[0].a_trace is not None else None
    return BlockResult(idx, errors, diverged, a_trace)


def compute_mse(errors, burn_in: int) -> tuple[float, float]:
    """Mean squared error after ``burn_in`` and its standard error.

    ``errors`` is a single sequence or one sequence per realization. The
    standard error is taken across per-realization means.
    """
    err = np.atleast_2d(np.asarray(errors, dtype=float))
    if err.shape[-1] <= burn_in:
        raise InvalidParameterError("no slots left after burn-in")
    if err.shape[0] == 0:
        raise InvalidParameterError("no realizations to aggregate")
    per_real = np.array([row[burn_in:].mean() for row in err])
    mse = math.fsum(per_real) / len(per_real)
    if len(per_real) < 2:
        return mse, 0.0
    return mse, float(np.std(per_real, ddof=1) / math.sqrt(len(per_real)))


@dataclass(frozen=True)
class SweepRow:
    estimator: str
    v_kmh: float
    sir_db: float
    mse: float
    std_err: float
    n_samples: int
    seed: int


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    axis: str = "mobility"
    diverged: int = 0
    elapsed_s: float = 0.0

    def series(self, estimator: str) -> list[SweepRow]:
        return [r for r in self.rows if r.estimator == estimator]

    def mse_table(self) -> dict[str, np.ndarray]:
        names = list(dict.fromkeys(r.estimator for r in self.rows))
        return {n: np.array([r.mse for r in self.series(n)]) for n in names}


def _rows_for_point(cfg: SimConfig, res: BlockResult, v_kmh: float, sigma_c2: float) -> tuple[list[SweepRow], int]:
    rows, n_div = [], 0
    for name in cfg.estimators:
        ok = ~res.diverged[name]
        n_div += int((~ok).sum())
        if (~ok).any():
            log.warning("%s diverged in %d realization(s) at v=%g km/h, sigma_c2=%g",
                        name, int((~ok).sum()), v_kmh, sigma_c2)
        if not ok.any():
            rows.append(SweepRow(name, v_kmh, sigma_c_to_sir(sigma_c2), math.nan, math.nan, 0, cfg.master_seed))
            continue
        mse, se = compute_mse(res.errors[name][ok], cfg.burn_in)
        n = int(ok.sum()) * (cfg.n_slots - cfg.burn_in)
        rows.append(SweepRow(name, float(v_kmh), sigma_c_to_sir(sigma_c2), mse, se, n, cfg.master_seed))
    return rows, n_div


def run_sweep(cfg: SimConfig, axis: str = "mobility", values=None, progress=None) -> SweepResult:
    """MSE of every configured estimator along the mobility or SIR axis.

    ``values`` defaults to ``cfg.v_kmh`` (km/h) or ``cfg.sir_list_db`` (dB).
    ``progress`` is called with ``(done, total, seconds)`` after each point.
    Rows are ordered by estimator, then by axis value.
    """
    if axis not in ("mobility", "sir"):
        raise InvalidParameterError(f"unknown sweep axis {axis!r}")
    values = list(values if values is not None else (cfg.v_kmh if axis == "mobility" else cfg.sir_list_db))
    if not values:
        raise InvalidParameterError("sweep axis has no values")
    t0 = time.perf_counter()
    per_point, n_div = [], 0
    for i, val in enumerate(values):
        if axis == "mobility":
            v, sc = float(val), cfg.contamination_power
        else:
            v, sc = cfg.sir_v_kmh, sir_to_sigma_c(float(val))
        res = run_block(cfg, v, sc)
        rows, nd = _rows_for_point(cfg, res, v, sc)
        if axis == "sir":
            rows = [replace(r, sir_db=float(val)) for r in rows]
        per_point.append(rows)
        n_div += nd
        elapsed = time.perf_counter() - t0
        log.info("point %d/%d (%s=%g) done in %.1fs", i + 1, len(values), axis, val, elapsed)
        if progress is not None:
            progress(i + 1, len(values), elapsed)
    order = {name: k for k, name in enumerate(cfg.estimators)}
    rows = [r for pt in per_point for r in pt]
    rows.sort(key=lambda r: (order[r.estimator],
                             r.v_kmh if axis == "mobility" else r.sir_db))
    return SweepResult(rows=rows, axis=axis, diverged=n_div, elapsed_s=time.perf_counter() - t0)


@dataclass
class SurfaceResult:
    """Fixed-coefficient Kalman MSE over an ``(a, v)`` grid: ``mse[i, j]`` is ``v[i], a[j]``."""

    a_grid: np.ndarray
    v_kmh: np.ndarray
    mse: np.ndarray
    seed: int = 0

    def optimal_a(self) -> np.ndarray:
        return self.a_grid[np.argmin(self.mse, axis=1)]


def mse_surface(cfg: SimConfig, a_grid=None, v_kmh=None) -> SurfaceResult:
    """MSE of the conventional Kalman filter for every fixed ``a`` and mobility."""
    a_grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.01), 2) if a_grid is None else np.asarray(a_grid, float)
    v_list = np.asarray(cfg.v_kmh if v_kmh is None else v_kmh, float)
    sc = cfg.contamination_power
    topo = cfg.topology(sc)
    book = make_pilot_book(cfg.tau, cfg.K)
    out = np.empty((v_list.size, a_grid.size))
    for i, v in enumerate(v_list):
        f_d = DopplerParams.from_kmh(v, cfg.f_c).f_d
        zs, es, hs = [], [], []
        for r in range(cfg.n_realizations):
            st = synthesize_stream(topo, book, f_d=f_d, t_s=cfg.t_s, n_slots=cfg.n_slots, n_scatterers=cfg.N_s,
                                   master_seed=cfg.master_seed, realization=r, hopping=cfg.hopping)
            z, e = st.projections()
            zs.append(z)
            es.append(e)
            hs.append(st.h_true)
        out[i] = grid_mse(np.array(zs), np.array(es), np.array(hs), a_grid, cfg.sigma_n2, sc,
                          cfg.burn_in, p_known=cfg.kalman_p1)
    return SurfaceResult(a_grid=a_grid, v_kmh=v_list, mse=out, seed=cfg.master_seed)
