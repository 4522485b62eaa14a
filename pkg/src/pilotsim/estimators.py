"""Single-slot and recursive channel estimators.

Every recursive filter works on the matched-filter output ``z = x^H y`` and
the pilot energy ``E = x^H x``. Because the innovation covariance is a rank-one
update of a scaled identity, ``R = (p + sigma_c2) x x^H + sigma_n2 I``, its
inverse applied to the pilot collapses to::

    x^H R^{-1} = x^H / D,    D = sigma_n2 + (p + sigma_c2) E

so the Kalman gain is ``k = (p / D) x^H`` and no ``tau x tau`` system is ever
solved. State fields may be scalars or arrays; arrays run independent filters
side by side (realizations, grid points) with identical arithmetic per
element.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import InvalidParameterError

DIVERGENCE_LIMIT = 1e6


class FilterDivergenceError(ArithmeticError):
    def __init__(self, slot, message="filter diverged"):
        super().__init__(f"{message} at slot {slot}")
        self.slot = slot


@dataclass(frozen=True)
class TrackerConfig:
    """Parameters of the AR-coefficient tracking filter.

    ``grad_scale`` is the pilot energy at which ``mu`` and ``nu`` are
    expressed: the cost gradient computed with unit-norm pilots is multiplied
    by it before capping. The default 96 corresponds to a length-96 pilot of
    unit-modulus symbols. Set it to 1 to apply ``mu`` to the raw gradient.

    ``s_form`` selects the covariance-derivative recursion: ``"exact"`` is the
    derivative of the covariance recursion, ``"compact"`` drops its
    ``2 a (p - 1)`` term.
    """

    mu: float = 1e-5
    nu: float = 100.0
    sigma_n2: float = 0.2
    sigma_c2: float = 0.6
    a0: float = 0.5
    h_hat0: complex = 0.0
    q0: complex = 0.0
    p1: float = 0.0
    s1: float = 0.0
    grad_scale: float = 96.0
    s_form: str = "exact"
    truncate: bool = True

    def __post_init__(self):
        if self.mu < 0:
            raise InvalidParameterError("mu must be >= 0")
        if not self.nu > 0:
            raise InvalidParameterError("nu must be > 0")
        if self.sigma_n2 < 0 or self.sigma_c2 < 0:
            raise InvalidParameterError("noise and contamination powers must be >= 0")
        if self.s_form not in ("exact", "compact"):
            raise InvalidParameterError(f"unknown s_form {self.s_form!r}")


@dataclass(frozen=True)
class FilterState:
    """Filter state after slot ``n``.

    ``p`` and ``s`` already refer to slot ``n + 1`` (predicted covariance and
    its derivative). ``innovation``, ``grad``, ``gain`` and ``dgain`` are the
    transient values of the last step: ``x^H e``, the cost gradient before
    scaling and capping, and the scalar coefficients of ``k = gain * x^H`` and
    ``m = dgain * x^H``.
    """

    h_hat: np.ndarray | complex
    a: np.ndarray | float
    p: np.ndarray | float
    q: np.ndarray | complex = 0.0
    s: np.ndarray | float = 0.0
    n: int = 0
    innovation: np.ndarray | complex = 0.0
    grad: np.ndarray | float = 0.0
    gain: np.ndarray | float = 0.0
    dgain: np.ndarray | float = 0.0

    @classmethod
    def initial(cls, cfg: TrackerConfig, shape=()) -> "FilterState":
        def full(v, dtype):
            return np.full(shape, v, dtype=dtype) if shape else dtype(v)

        return cls(h_hat=full(cfg.h_hat0, complex), a=full(cfg.a0, float), p=full(cfg.p1, float),
                   q=full(cfg.q0, complex), s=full(cfg.s1, float))

    @classmethod
    def known_a(cls, a, p1: float = 1.0, h_hat0: complex = 0.0, shape=()) -> "FilterState":
        a = np.broadcast_to(np.asarray(a, dtype=float), shape).copy() if shape else float(a)
        return cls(h_hat=np.full(shape, h_hat0, complex) if shape else complex(h_hat0), a=a,
                   p=np.full(shape, p1, float) if shape else float(p1))


def _inner(x, y):
    return np.sum(np.conj(x) * y, axis=-1)


def _energy(x):
    x = np.asarray(x)
    return np.sum(x.real ** 2 + x.imag ** 2, axis=-1)


def _check_pilot(energy):
    if np.any(np.asarray(energy) <= 0):
        raise InvalidParameterError("pilot must be non-zero")


def _gain(p, energy, sigma_n2, sigma_c2):
    """Scalar coefficients ``(p / D, 1 / D)`` with ``D`` the rank-one denominator."""
    d = sigma_n2 + (p + sigma_c2) * energy
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    return p * inv, inv


def ls_estimate(x, y):
    """Least-squares estimate ``(x^H x)^-1 x^H y``."""
    energy = _energy(x)
    _check_pilot(energy)
    return _inner(x, y) / energy


def mmse_estimate(x, y, sigma_n2: float, sigma_c2: float):
    """Single-slot MMSE estimate for a unit-power channel.

    Equals ``x^H (x x^H + sigma_n2 I + sigma_c2 x x^H)^-1 y``, evaluated as
    ``x^H y / (sigma_n2 + (1 + sigma_c2) x^H x)``. With no noise and no
    contamination this is the LS estimate.
    """
    energy = _energy(x)
    _check_pilot(energy)
    return _inner(x, y) / (sigma_n2 + (1.0 + sigma_c2) * energy)


def mmse_weights(x, sigma_n2: float, sigma_c2: float):
    """Row vector ``w`` with ``mmse_estimate = w @ y``."""
    energy = _energy(x)
    _check_pilot(energy)
    return np.conj(x) / np.expand_dims(sigma_n2 + (1.0 + sigma_c2) * energy, -1)


def kalman_gain(x, p, sigma_n2: float, sigma_c2: float):
    """Kalman gain row vector ``k = p x^H R^-1`` via the rank-one identity."""
    g, _ = _gain(p, _energy(x), sigma_n2, sigma_c2)
    return np.conj(x) * np.expand_dims(g, -1)


def kalman_update(state: FilterState, z, energy, sigma_n2: float, sigma_c2: float) -> tuple[FilterState, np.ndarray]:
    """Conventional Kalman step with the AR coefficient ``state.a`` held fixed."""
    a, h_prev, p = state.a, state.h_hat, state.p
    xe = z - energy * a * h_prev
    g, _ = _gain(p, energy, sigma_n2, sigma_c2)
    kx = g * energy
    h = a * h_prev + g * xe
    p_next = a * a * (1.0 - kx) * p + (1.0 - a * a)
    return replace(state, h_hat=h, p=p_next, n=state.n + 1, innovation=xe, gain=g), h


def modified_kalman_update(state: FilterState, z, energy, cfg: TrackerConfig) -> tuple[FilterState, np.ndarray]:
    """One step of the Kalman filter with online AR-coefficient tracking.

    Order per slot: innovation, cost gradient, coefficient update, gain,
    estimate, gain derivative, estimate derivative, covariance and its
    derivative. Everything on the right-hand side uses values from before
    this slot except where the freshly updated coefficient is used.
    """
    a_prev, h_prev, q_prev, p, s = state.a, state.h_hat, state.q, state.p, state.s
    xe = z - energy * a_prev * h_prev
    # real part: the cost is real and a is real
    grad = -np.real(np.conj(q_prev * a_prev + h_prev) * xe)
    step = cfg.grad_scale * grad
    if cfg.truncate:
        step = np.clip(step, -cfg.nu, cfg.nu)
    a = a_prev - cfg.mu * step
    if cfg.truncate:
        a = np.clip(a, 0.0, 1.0)
    g, inv_d = _gain(p, energy, cfg.sigma_n2, cfg.sigma_c2)
    kx = g * energy
    h = a * h_prev + g * xe
    dg = (1.0 - kx) * s * inv_d
    q = (1.0 - kx) * (a * q_prev + h_prev) + dg * xe
    p_next = a * a * (1.0 - kx) * p + (1.0 - a * a)
    if cfg.s_form == "exact":
        s_next = a * a * (1.0 - kx) ** 2 * s + 2.0 * a * ((1.0 - kx) * p - 1.0)
    else:
        s_next = a * a * (1.0 - kx) * s * (1.0 - kx) - 2.0 * a * kx * p
    new = FilterState(h_hat=h, a=a, p=p_next, q=q, s=s_next, n=state.n + 1,
                      innovation=xe, grad=grad, gain=g, dgain=dg)
    return new, h


def predictor_update(state: FilterState, z, energy, cfg: TrackerConfig) -> tuple[FilterState, np.ndarray]:
    """Same recursion as the tracking filter, reporting the one-step prediction.

    The slot-``n`` output is ``a_{n-1} h_{n-1}``, formed before ``y_n`` is used.
    """
    prediction = state.a * state.h_hat
    new, _ = modified_kalman_update(state, z, energy, cfg)
    return new, prediction


def _guard(state: FilterState, estimate):
    bad = ~np.isfinite(estimate) | (np.abs(estimate) > DIVERGENCE_LIMIT)
    for v in (state.a, state.p, state.q, state.s):
        bad = bad | ~np.isfinite(v)
    if np.any(bad):
        raise FilterDivergenceError(state.n)


def kalman_step(state: FilterState, x, y, a_known=None, sigma_n2: float = 0.2, sigma_c2: float = 0.6):
    """Conventional Kalman step on a received pilot vector.

    ``a_known`` overrides the coefficient stored in ``state``.
    """
    if a_known is not None:
        if not 0.0 <= a_known <= 1.0:
            raise InvalidParameterError("AR coefficient must lie in [0, 1]")
        state = replace(state, a=a_known)
    energy = _energy(x)
    _check_pilot(energy)
    z = _inner(x, y)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(state.h_hat))):
        raise FilterDivergenceError(state.n + 1, "non-finite input")
    new, h = kalman_update(state, z, energy, sigma_n2, sigma_c2)
    _guard(new, h)
    return new, h


def modified_kalman_step(state: FilterState, x, y, cfg: TrackerConfig):
    energy = _energy(x)
    _check_pilot(energy)
    new, h = modified_kalman_update(state, _inner(x, y), energy, cfg)
    _guard(new, h)
    return new, h


def predictor_step(state: FilterState, x, y, cfg: TrackerConfig):
    energy = _energy(x)
    _check_pilot(energy)
    new, pred = predictor_update(state, _inner(x, y), energy, cfg)
    _guard(new, new.h_hat)
    return new, pred


@dataclass(frozen=True)
class RunningAverage:
    """Average of all LS estimates so far; optimal only for a static channel."""

    total: np.ndarray | complex = 0.0
    n: int = 0

    def update(self, z, energy):
        total = self.total + z / energy
        new = RunningAverage(total=total, n=self.n + 1)
        return new, total / new.n


# batch drivers ---------------------------------------------------------------

ESTIMATORS = ("ls", "mmse", "kalman", "modkalman", "predictor", "avg")


def run_recursive(kind: str, z: np.ndarray, energy: np.ndarray, cfg: TrackerConfig,
                  a_known=None, p_known: float = 1.0, record_a: bool = False):
    """Run a recursive estimator along the last axis of ``z``.

    ``z`` and ``energy`` have shape ``batch + (n_slots,)``; ``a_known`` (for
    ``"kalman"``) broadcasts against ``batch``. Returns the estimates (same
    shape as ``z``), a boolean divergence mask of shape ``batch`` and, with
    ``record_a``, the coefficient trajectory.
    """
    z = np.asarray(z)
    batch, n_slots = z.shape[:-1], z.shape[-1]
    B = int(np.prod(batch))
    # time-major so each slot is a contiguous row
    zt = np.ascontiguousarray(z.reshape(B, n_slots).T)
    et = np.ascontiguousarray(np.broadcast_to(np.asarray(energy, float), z.shape).reshape(B, n_slots).T)
    est = np.empty((n_slots, B), dtype=complex)
    a_hist = np.empty((n_slots, B)) if record_a else None

    if kind == "kalman":
        a = np.broadcast_to(np.asarray(cfg.a0 if a_known is None else a_known, float), batch).reshape(B)
        state = FilterState.known_a(a, p1=p_known, h_hat0=cfg.h_hat0, shape=(B,))
        step = lambda st, zz, ee: kalman_update(st, zz, ee, cfg.sigma_n2, cfg.sigma_c2)  # noqa: E731
    elif kind in ("modkalman", "predictor"):
        state = FilterState.initial(cfg, shape=(B,))
        fn = modified_kalman_update if kind == "modkalman" else predictor_update
        step = lambda st, zz, ee: fn(st, zz, ee, cfg)  # noqa: E731
    elif kind == "avg":
        state = RunningAverage(total=np.zeros(B, complex))
        step = lambda st, zz, ee: st.update(zz, ee)  # noqa: E731
    else:
        raise InvalidParameterError(f"{kind!r} is not a recursive estimator")

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_slots):
            state, est[n] = step(state, zt[n], et[n])
            if a_hist is not None:
                a_hist[n] = state.a
        mag = est.real ** 2 + est.imag ** 2
        bad = ~(mag <= DIVERGENCE_LIMIT ** 2).all(axis=0)
    est = est.T.reshape(z.shape)
    diverged = bad.reshape(batch)
    if record_a:
        return est, diverged, a_hist.T.reshape(z.shape)
    return est, diverged


def run_estimator(kind: str, z, energy, cfg: TrackerConfig, a_known=None, p_known: float = 1.0):
    """Estimates of any estimator in :data:`ESTIMATORS` along the last axis."""
    if kind == "ls":
        est = np.asarray(z) / energy
        return est, np.zeros(est.shape[:-1], bool)
    if kind == "mmse":
        est = np.asarray(z) / (cfg.sigma_n2 + (1.0 + cfg.sigma_c2) * np.asarray(energy))
        return est, np.zeros(est.shape[:-1], bool)
    return run_recursive(kind, z, energy, cfg, a_known=a_known, p_known=p_known)


def grid_mse(z, energy, h_true, grid, sigma_n2: float, sigma_c2: float, burn_in: int,
             p_known: float = 1.0) -> np.ndarray:
    """MSE of the fixed-coefficient Kalman filter for every value in ``grid``.

    ``z``, ``energy`` and ``h_true`` have shape ``(R, n_slots)``; all grid
    points see the same streams. The MSE averages slots after ``burn_in``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidParameterError("empty coefficient grid")
    if np.any((grid < 0) | (grid > 1)):
        raise InvalidParameterError("grid values must lie in [0, 1]")
    z = np.asarray(z)
    G, R = grid.size, z.shape[0]
    cfg = TrackerConfig(sigma_n2=sigma_n2, sigma_c2=sigma_c2)
    zz = np.broadcast_to(z, (G,) + z.shape)
    ee = np.broadcast_to(np.asarray(energy, float), (G,) + z.shape)
    a = np.broadcast_to(grid[:, None], (G, R))
    est, _ = run_recursive("kalman", zz, ee, cfg, a_known=a, p_known=p_known)
    err = np.abs(est - np.asarray(h_true)[None]) ** 2
    return err[..., burn_in:].mean(axis=(1, 2))


def grid_optimal_a(v_kmh: float, sigma_n2: float, sigma_c2: float, grid, n_slots: int,
                   n_realizations: int, *, burn_in: int = 500, f_c: float = 1.8e9,
                   t_s: float = 5e-4, n_scatterers: int = 20, K: int = 96, tau: int = 96,
                   master_seed: int = 0, p_known: float = 1.0):
    """Best fixed AR coefficient on ``grid`` for a given mobility.

    Simulates ``n_realizations`` idealized-contamination streams and returns
    ``(a_star, mse_per_grid_point)``.
    """
    from .channel import DopplerParams
    from .pilots import make_pilot_book
    from .scenario import CellTopology, synthesize_stream

    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidParameterError("empty coefficient grid")
    if n_slots <= burn_in:
        raise InvalidParameterError("n_slots must exceed burn_in")
    f_d = DopplerParams.from_kmh(v_kmh, f_c).f_d
    topo = CellTopology(K=K, sigma_c2=sigma_c2, sigma_n2=sigma_n2)
    book = make_pilot_book(tau, K)
    zs, es, hs = [], [], []
    for r in range(n_realizations):
        st = synthesize_stream(topo, book, f_d=f_d, t_s=t_s, n_slots=n_slots,
                               n_scatterers=n_scatterers, master_seed=master_seed, realization=r)
        z, e = st.projections()
        zs.append(z)
        es.append(e)
        hs.append(st.h_true)
    mse = grid_mse(np.array(zs), np.array(es), np.array(hs), grid, sigma_n2, sigma_c2, burn_in, p_known)
    return float(grid[int(np.argmin(mse))]), mse
