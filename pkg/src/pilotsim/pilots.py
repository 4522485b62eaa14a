"""Orthonormal pilot books, random pilot hopping and collision statistics.

Hopping schedules are generated from a counter-based generator (Philox) keyed
by ``(master_seed, stream, cell)``: the random block for slot ``n`` lives at a
fixed counter offset, so any slot can be regenerated without replaying the
slots before it, and whole schedules are drawn in one vectorized call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import InvalidParameterError


@dataclass(frozen=True)
class PilotBook:
    """``K`` orthonormal pilot sequences of length ``tau`` stored as columns."""

    columns: np.ndarray  # (tau, K) complex

    @property
    def tau(self) -> int:
        return self.columns.shape[0]

    @property
    def K(self) -> int:
        return self.columns.shape[1]

    def pilot(self, index) -> np.ndarray:
        """Pilot vector(s) for index (or array of indices); shape ``(..., tau)``."""
        index = np.asarray(index)
        if np.any((index < 0) | (index >= self.K)):
            raise IndexError(f"pilot index out of range [0, {self.K})")
        return self.columns.T[index]

    def gram(self) -> np.ndarray:
        return self.columns.conj().T @ self.columns


def make_pilot_book(tau: int, K: int | None = None) -> PilotBook:
    """First ``K`` columns of the ``tau``-point DFT matrix scaled by ``1/sqrt(tau)``."""
    K = tau if K is None else K
    if K < 1 or tau < 1:
        raise InvalidParameterError(f"need tau >= 1 and K >= 1, got tau={tau}, K={K}")
    if K > tau:
        raise InvalidParameterError(f"cannot build {K} orthogonal pilots of length {tau}")
    n = np.arange(tau)[:, None]
    k = np.arange(K)[None, :]
    cols = np.exp(-2j * np.pi * n * k / tau) / np.sqrt(tau)
    cols.setflags(write=False)
    return PilotBook(columns=cols)


@dataclass(frozen=True)
class HopAssignment:
    """Pilot assignment of one cell in one slot: ``perm[user] = pilot index``."""

    slot: int
    perm: np.ndarray

    def pilot_of(self, user: int) -> int:
        return int(self.perm[user])

    def user_on(self, pilot: int) -> int:
        return int(np.flatnonzero(self.perm == pilot)[0])


def hop(rng: np.random.Generator, K: int, slot: int = 0) -> HopAssignment:
    """Uniformly random pilot permutation for one slot (Fisher-Yates shuffle)."""
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    return HopAssignment(slot=slot, perm=rng.permutation(K))


def _stream_key(master_seed: int, stream: int, cell: int) -> np.ndarray:
    return np.random.SeedSequence([int(master_seed), int(stream), int(cell)]).generate_state(2, np.uint64)


def hop_schedule(master_seed: int, cell: int, K: int, n_slots: int, start: int = 0,
                 stream: int = 0, hopping: bool = True) -> np.ndarray:
    """Pilot permutations for slots ``start .. start + n_slots - 1`` of one cell.

    Returns an int array of shape ``(n_slots, K)`` whose row ``i`` maps user to
    pilot at slot ``start + i``. Each row is the argsort of ``K`` fresh 64-bit
    keys, which is a uniform permutation. With ``hopping=False`` every row is
    the identity (fixed schedule).
    """
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    if n_slots < 0 or start < 0:
        raise InvalidParameterError("slot range must be non-negative")
    if not hopping:
        return np.broadcast_to(np.arange(K), (n_slots, K)).copy()
    stride = 4 * math.ceil(K / 4)
    bg = np.random.Philox(key=_stream_key(master_seed, stream, cell),
                          counter=[start * stride // 4, 0, 0, 0])
    keys = bg.random_raw(n_slots * stride).reshape(n_slots, stride)[:, :K]
    return np.argsort(keys, axis=1, kind="stable")


def slot_assignment(master_seed: int, cell: int, slot: int, K: int, stream: int = 0) -> HopAssignment:
    perm = hop_schedule(master_seed, cell, K, 1, start=slot, stream=stream)[0]
    return HopAssignment(slot=slot, perm=perm)


def collision_pmf(d, K: int):
    """Probability that the collision distance equals ``d`` under random hopping.

    Geometric law ``(1 - 1/K)**(d - 1) / K`` on ``d = 1, 2, ...``.
    """
    d_arr = np.asarray(d)
    if np.any(d_arr < 1):
        raise InvalidParameterError("collision distance must be >= 1")
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    p = 1.0 / K
    out = (1.0 - p) ** (d_arr - 1) * p
    return float(out) if out.ndim == 0 else out


def expected_collision_distance(K: int) -> float:
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    return float(K)


def _gaps(hits: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(hits)
    return np.diff(idx)


def simulate_collision_distances(rng: np.random.Generator, K: int, n_slots: int) -> np.ndarray:
    """Gaps between slots in which one foreign user shares the pilot of the user of interest.

    Both users draw their pilot independently and uniformly every slot.
    """
    if n_slots < 2:
        raise InvalidParameterError("need at least two slots")
    mine = rng.integers(0, K, n_slots)
    theirs = rng.integers(0, K, n_slots)
    return _gaps(mine == theirs)


def schedule_collision_distances(master_seed: int, K: int, n_slots: int, user: int = 0,
                                 neighbor_cell: int = 1, hopping: bool = True,
                                 stream: int = 0) -> np.ndarray:
    """Collision distances from actual per-cell hopping schedules.

    Runs the hop schedules of cell 0 and one neighbor cell, finds which
    neighbor user is on the same pilot as ``user`` in every slot, and pools the
    gaps between successive collisions of every neighbor user.
    """
    if n_slots < 2:
        raise InvalidParameterError("need at least two slots")
    own = hop_schedule(master_seed, 0, K, n_slots, stream=stream, hopping=hopping)[:, user]
    other = hop_schedule(master_seed, neighbor_cell, K, n_slots, stream=stream, hopping=hopping)
    contaminator = np.argmax(other == own[:, None], axis=1)
    out = []
    for j in range(K):
        out.append(_gaps(contaminator == j))
    return np.concatenate(out) if out else np.empty(0, dtype=int)
