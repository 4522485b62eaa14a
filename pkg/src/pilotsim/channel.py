"""Time-correlated flat fading from a sum of scatterers (Clarke's model).

A channel is a fixed set of ``N_s`` scatterers, each with an angle of arrival
and an initial phase drawn uniformly on ``[-pi, pi)``. Sampling it at time
``t`` gives::

    h(t) = 1/sqrt(N_s) * sum_m exp(j * (2 pi f_d t cos(alpha_m) + phi_m))

so ``E|h|^2 = 1`` and the autocorrelation at lag ``dt`` is ``J0(2 pi f_d dt)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0

SPEED_OF_LIGHT = 299_792_458.0


class InvalidParameterError(ValueError):
    """Raised when a physical or configuration parameter is out of range."""


def kmh_to_ms(v_kmh):
    return v_kmh / 3.6


def doppler_shift(v: float, f_c: float) -> float:
    """Maximum Doppler shift in Hz for speed ``v`` (m/s) at carrier ``f_c`` (Hz)."""
    if not v >= 0:
        raise InvalidParameterError(f"speed must be >= 0 m/s, got {v!r}")
    if not f_c > 0:
        raise InvalidParameterError(f"carrier frequency must be > 0 Hz, got {f_c!r}")
    return v / SPEED_OF_LIGHT * f_c


@dataclass(frozen=True)
class DopplerParams:
    v: float
    f_c: float
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        # validate through the same path as doppler_shift
        doppler_shift(self.v, self.f_c)

    @property
    def f_d(self) -> float:
        return self.v / self.c * self.f_c

    @classmethod
    def from_kmh(cls, v_kmh: float, f_c: float) -> "DopplerParams":
        return cls(v=kmh_to_ms(v_kmh), f_c=f_c)


@dataclass(frozen=True)
class ClarkeChannel:
    """One realization of a Clarke channel.

    ``alpha`` and ``phi`` have shape ``(..., N_s)``; leading dimensions index
    independent channels sharing the same Doppler shift.
    """

    alpha: np.ndarray
    phi: np.ndarray
    f_d: float
    _cos_alpha: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.alpha.shape != self.phi.shape:
            raise InvalidParameterError("alpha and phi must have the same shape")
        self.alpha.setflags(write=False)
        self.phi.setflags(write=False)
        object.__setattr__(self, "_cos_alpha", np.cos(self.alpha))

    @property
    def n_scatterers(self) -> int:
        return self.alpha.shape[-1]

    def sample(self, t):
        return clarke_sample(self, t)


def clarke_init(rng: np.random.Generator, n_scatterers: int, f_d: float,
                size: tuple[int, ...] = ()) -> ClarkeChannel:
    """Draw scatterer angles and phases i.i.d. uniform on ``[-pi, pi)``.

    ``size`` prepends batch dimensions, so ``size=(K,)`` yields ``K``
    independent channels in a single object.
    """
    if n_scatterers < 1:
        raise InvalidParameterError(f"need at least one scatterer, got {n_scatterers}")
    if not f_d >= 0:
        raise InvalidParameterError(f"Doppler shift must be >= 0 Hz, got {f_d!r}")
    shape = (tuple(size) if np.iterable(size) else (int(size),)) + (int(n_scatterers),)
    alpha = rng.uniform(-np.pi, np.pi, shape)
    phi = rng.uniform(-np.pi, np.pi, shape)
    return ClarkeChannel(alpha=alpha, phi=phi, f_d=float(f_d))


def clarke_sample(ch: ClarkeChannel, t):
    """Evaluate the channel at time(s) ``t`` in seconds.

    Scalar ``t`` returns an array of the channel batch shape (a complex scalar
    for a single channel). Array ``t`` of shape ``(n,)`` appends a trailing
    time axis: the result has shape ``batch + (n,)``.
    """
    t = np.asarray(t, dtype=float)
    omega = 2.0 * np.pi * ch.f_d
    if t.ndim == 0:
        arg = omega * float(t) * ch._cos_alpha + ch.phi
        h = np.exp(1j * arg).sum(axis=-1)
    else:
        arg = omega * ch._cos_alpha[..., :, None] * t + ch.phi[..., :, None]
        h = np.exp(1j * arg).sum(axis=-2)
    h = h / np.sqrt(ch.n_scatterers)
    return complex(h) if h.ndim == 0 else h


def theoretical_autocorrelation(f_d, dt):
    """Normalized autocorrelation ``J0(2 pi f_d dt)`` of a Clarke channel."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise InvalidParameterError("lag must be >= 0")
    r = j0(2.0 * np.pi * np.asarray(f_d, dtype=float) * dt)
    return float(r) if np.ndim(r) == 0 else r


def ar1_coefficient(f_d: float, t_s: float) -> float:
    """Yule-Walker AR(1) coefficient for slot spacing ``t_s``, clipped to [0, 1]."""
    return float(np.clip(theoretical_autocorrelation(f_d, t_s), 0.0, 1.0))
