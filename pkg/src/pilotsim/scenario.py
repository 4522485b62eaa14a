"""Multi-cell contamination environment and received pilot synthesis.

The received pilot of the user of interest in slot ``n`` is::

    y_n = h_n x_n + (sum of same-pilot foreign channels) x_n + z_n

Contamination comes in two flavours:

* ``idealized``: the aggregate foreign coefficient is a fresh circularly
  symmetric Gaussian with variance ``sigma_c2`` every slot (no correlation
  between slots).
* ``explicit``: every neighbor cell holds ``K`` Clarke channels that evolve
  with the common mobility; the hop schedules decide which of them shares the
  pilot of the user of interest in each slot. Each neighbor cell contributes
  with power ``sigma_c2 / (L - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ClarkeChannel, InvalidParameterError, clarke_init, clarke_sample
from .pilots import PilotBook, hop_schedule

MODES = ("idealized", "explicit")


def complex_gaussian(rng: np.random.Generator, var: float, size=None):
    """Circularly symmetric complex Gaussian samples with total variance ``var``."""
    scale = math.sqrt(var / 2.0)
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return scale * (re + 1j * im)


def sir_to_sigma_c(sir_db: float) -> float:
    """Total contamination power for a given SIR (unit desired-signal power)."""
    if sir_db == math.inf:
        return 0.0
    return 10.0 ** (-sir_db / 10.0)


def sigma_c_to_sir(sigma_c2: float) -> float:
    if sigma_c2 <= 0:
        return math.inf
    return -10.0 * math.log10(sigma_c2)


@dataclass(frozen=True)
class CellTopology:
    L: int = 7
    K: int = 96
    mode: str = "idealized"
    sigma_c2: float = 0.6
    sigma_n2: float = 0.2

    def __post_init__(self):
        if self.L < 1 or self.K < 1:
            raise InvalidParameterError(f"need L >= 1 and K >= 1, got L={self.L}, K={self.K}")
        if self.mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.sigma_c2 < 0 or self.sigma_n2 < 0:
            raise InvalidParameterError("powers must be non-negative")
        if self.mode == "explicit" and self.L < 2 and self.sigma_c2 > 0:
            raise InvalidParameterError("explicit contamination needs at least one neighbor cell (L >= 2)")

    @property
    def per_cell_power(self) -> float:
        return self.sigma_c2 / (self.L - 1) if self.L > 1 else 0.0


@dataclass(frozen=True)
class SlotObservation:
    n: int
    y: np.ndarray
    x: np.ndarray
    h_true: complex


def build_slot_observation(h: complex, contaminators, x: np.ndarray, sigma_n2: float,
                           rng: np.random.Generator, n: int = 0) -> SlotObservation:
    """Received pilot vector for one slot.

    All contaminators use the same pilot ``x`` as the user of interest.
    """
    x = np.asarray(x)
    total = h + sum(contaminators, 0.0)
    z = complex_gaussian(rng, sigma_n2, x.shape) if sigma_n2 > 0 else np.zeros(x.shape, complex)
    return SlotObservation(n=n, y=total * x + z, x=x, h_true=complex(h))


def idealized_contaminator(rng: np.random.Generator, sigma_c2: float, size=None):
    if sigma_c2 < 0:
        raise InvalidParameterError("sigma_c2 must be >= 0")
    c = complex_gaussian(rng, sigma_c2, size)
    return complex(c) if size is None else c


@dataclass(frozen=True)
class NeighborField:
    """Clarke channels of every user in every neighbor cell.

    ``channels`` has batch shape ``(L - 1, K)``; ``scale`` is the amplitude
    applied to each contaminator.
    """

    channels: ClarkeChannel
    scale: float

    @property
    def n_neighbors(self) -> int:
        return self.channels.alpha.shape[0]


def make_neighbor_field(rng: np.random.Generator, topology: CellTopology, n_scatterers: int,
                        f_d: float) -> NeighborField:
    ch = clarke_init(rng, n_scatterers, f_d, size=(topology.L - 1, topology.K))
    return NeighborField(channels=ch, scale=math.sqrt(topology.per_cell_power))


def explicit_contaminators(field: NeighborField, assignments, pilot: int, t: float) -> list[complex]:
    """Scaled channel of the same-pilot user in each neighbor cell.

    ``assignments`` holds one permutation (user -> pilot) per neighbor cell.
    """
    K = field.channels.alpha.shape[1]
    if not 0 <= pilot < K:
        raise IndexError(f"pilot index {pilot} out of range [0, {K})")
    out = []
    for cell, perm in enumerate(assignments):
        perm = getattr(perm, "perm", perm)
        user = int(np.flatnonzero(np.asarray(perm) == pilot)[0])
        sub = ClarkeChannel(alpha=field.channels.alpha[cell, user],
                            phi=field.channels.phi[cell, user], f_d=field.channels.f_d)
        out.append(field.scale * clarke_sample(sub, t))
    return out


@dataclass
class PilotStream:
    """Everything one realization feeds to the estimators.

    ``y`` and ``x`` have shape ``(n_slots, tau)``; the remaining arrays are
    per slot. ``contaminator_ids`` is ``(n_slots, L - 1)`` in explicit mode.
    """

    times: np.ndarray
    h_true: np.ndarray
    pilot_index: np.ndarray
    contamination: np.ndarray
    x: np.ndarray
    y: np.ndarray
    contaminator_ids: np.ndarray | None = None

    def projections(self) -> tuple[np.ndarray, np.ndarray]:
        """Matched-filter outputs ``x^H y`` and pilot energies ``x^H x``."""
        z = np.einsum("ni,ni->n", self.x.conj(), self.y)
        energy = np.einsum("ni,ni->n", self.x.conj(), self.x).real
        return z, energy


def realization_rngs(master_seed: int, realization: int, n: int = 3) -> list[np.random.Generator]:
    """Independent generators for one realization (channel, contamination, noise)."""
    ss = np.random.SeedSequence([int(master_seed), int(realization)])
    return [np.random.default_rng(c) for c in ss.spawn(n)]


def synthesize_stream(topology: CellTopology, book: PilotBook, *, f_d: float, t_s: float,
                      n_slots: int, n_scatterers: int = 20, master_seed: int = 0,
                      realization: int = 0, hopping: bool = True,
                      static_contamination: bool = False) -> PilotStream:
    """Generate the observation stream of one Monte Carlo realization.

    Slot ``n`` (1-based) is sampled at ``t = n * t_s``. Scatterer angles and
    phases do not depend on ``f_d``, so sweeping the mobility with a fixed seed
    reuses the same random geometry.

    ``static_contamination`` freezes the neighbor channels in time (explicit
    mode only), which together with ``hopping=False`` gives a constant
    contaminator.
    """
    if n_slots < 1:
        raise InvalidParameterError("n_slots must be >= 1")
    if book.K < topology.K:
        raise InvalidParameterError("pilot book has fewer pilots than users per cell")
    rng_ch, rng_c, rng_z = realization_rngs(master_seed, realization)
    times = np.arange(1, n_slots + 1) * t_s

    own = clarke_init(rng_ch, n_scatterers, f_d)
    h = clarke_sample(own, times)

    sched0 = hop_schedule(master_seed, 0, topology.K, n_slots, stream=realization, hopping=hopping)
    pilot_idx = sched0[:, 0]

    ids = None
    if topology.mode == "idealized" or topology.L < 2 or topology.sigma_c2 == 0:
        c = complex_gaussian(rng_c, topology.sigma_c2, n_slots)
        if topology.mode == "explicit":
            c = np.zeros(n_slots, complex)
    else:
        field = make_neighbor_field(rng_c, topology, n_scatterers, 0.0 if static_contamination else f_d)
        ids = np.empty((n_slots, topology.L - 1), dtype=np.intp)
        for cell in range(1, topology.L):
            sched = hop_schedule(master_seed, cell, topology.K, n_slots, stream=realization, hopping=hopping)
            ids[:, cell - 1] = np.argmax(sched == pilot_idx[:, None], axis=1)
        cells = np.arange(topology.L - 1)[None, :]
        cos_a = np.cos(field.channels.alpha[cells, ids])  # (n, L-1, Ns)
        phi = field.channels.phi[cells, ids]
        omega = 2.0 * np.pi * field.channels.f_d
        arg = omega * times[:, None, None] * cos_a + phi
        per_cell = np.exp(1j * arg).sum(axis=-1) / math.sqrt(n_scatterers)
        c = field.scale * per_cell.sum(axis=-1)

    x = book.pilot(pilot_idx)
    noise = complex_gaussian(rng_z, topology.sigma_n2, x.shape)
    y = (h + c)[:, None] * x + noise
    return PilotStream(times=times, h_true=h, pilot_index=pilot_idx, contamination=c,
                       x=x, y=y, contaminator_ids=ids)
