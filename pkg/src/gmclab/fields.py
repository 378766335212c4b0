"""Log-correlated Gaussian fields on the circle: exact covariance oracles and
an FFT-based spectral sampler.

The field is the random Fourier series

    phi_N(theta) = sum_{k=1}^{N} k^{-1/2} (A_k cos(k theta) + B_k sin(k theta))

with A_k, B_k i.i.d. standard normal.  Its covariance at angular gap ``g`` is
the exact partial sum ``sum_{k<=N} cos(k g)/k`` which converges, as the mode
cutoff N grows, to ``-ln(2|sin(g/2)|)``, the log of the inverse chord
distance.  The pointwise variance is the harmonic number H_N, playing the
role of ``ln(1/eps)`` for a mollifier at scale ``eps ~ 1/N``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class Domain(enum.Enum):
    """Supported one-dimensional domains."""

    CIRCLE = "circle"          # theta in [0, 2*pi), periodic
    UNIT_INTERVAL = "interval"  # x in [0, 1), distances not taken modulo 1

    @property
    def length(self) -> float:
        return TWO_PI if self is Domain.CIRCLE else 1.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``points`` nodes on a domain.

    ``points`` must be a power of two so that all spectral operations run on
    FFT-friendly sizes.
    """

    points: int
    domain: Domain = Domain.CIRCLE

    def __post_init__(self):
        if self.points < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.points}")
        if self.points & (self.points - 1):
            raise ValueError(f"grid size must be a power of two, got {self.points}")

    @property
    def spacing(self) -> float:
        return self.domain.length / self.points

    def nodes(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing


@dataclass
class FieldSample:
    """A sampled Gaussian field on a grid, with its pointwise variance.

    ``cutoff`` records the resolution of the truncation: the number of
    Fourier modes for the circle field, or the scale parameter ``t`` for
    interval fields.
    """

    grid: GridSpec
    values: np.ndarray
    variance: np.ndarray
    cutoff: float

    def __post_init__(self):
        if len(self.values) != self.grid.points or len(self.variance) != self.grid.points:
            raise ValueError("values/variance length must match the grid")
        if np.any(self.variance < 0):
            raise ValueError("variance entries must be nonnegative")


def circle_covariance(gap):
    """Covariance of the circle field at angular gap ``gap``: -ln(2|sin(gap/2)|).

    Diverges (raises) when the gap is a multiple of 2*pi.
    """
    gap = np.asarray(gap, dtype=float)
    if np.any(np.mod(gap, TWO_PI) == 0.0):
        raise ValueError("covariance diverges at zero gap (coincident points)")
    out = -np.log(2.0 * np.abs(np.sin(gap / 2.0)))
    return float(out) if out.ndim == 0 else out


def harmonic_number(n: int) -> float:
    """H_n = sum_{k=1}^{n} 1/k."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return float(np.sum(1.0 / np.arange(1, n + 1)))


def truncated_circle_covariance(gap, n_modes: int):
    """Partial sum ``sum_{k=1}^{N} cos(k*gap)/k`` of the circle covariance.

    At ``gap = 0`` this is the harmonic number H_N, the variance of the
    truncated field.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    gap = np.asarray(gap, dtype=float)
    k = np.arange(1, n_modes + 1)
    out = np.sum(np.cos(np.multiply.outer(gap, k)) / k, axis=-1)
    return float(out) if out.ndim == 0 else out


def sample_circle_field(n_modes: int, grid: GridSpec, rng: np.random.Generator) -> FieldSample:
    """Draw one spectral field sample on the circle grid via a single inverse FFT.

    Draw order from ``rng``: one block of 2*N standard normals laid out as
    A_1, B_1, A_2, B_2, ..., A_N, B_N.  The complex spectrum is
    ``(A_k - i B_k)/sqrt(k)`` at frequency k, zero elsewhere, and the field is
    the real part of its inverse DFT.  Given the same generator state the
    output is bit-identical.

    Raises on ``n_modes > points/2`` (aliasing past the Nyquist frequency).
    """
    if grid.domain is not Domain.CIRCLE:
        raise ValueError("spectral circle sampler requires a circle grid")
    m = grid.points
    if not 1 <= n_modes <= m // 2:
        raise ValueError(f"n_modes must be in [1, {m // 2}] for grid size {m} (Nyquist)")

    z = rng.standard_normal(2 * n_modes)
    a, b = z[0::2], z[1::2]
    k = np.arange(1, n_modes + 1)
    spectrum = np.zeros(m, dtype=complex)
    spectrum[1:n_modes + 1] = (a - 1j * b) / np.sqrt(k)
    values = np.fft.ifft(spectrum).real * m

    var = np.full(m, harmonic_number(n_modes))
    return FieldSample(grid=grid, values=values, variance=var, cutoff=float(n_modes))
