"""Interval model with an explicit scale decomposition.

The field on [0, 1] (distances NOT taken modulo 1) has covariance
``ln(1/r)`` regularized at scale ``t > 1``:

    C_t(r) = ln t + 1 - t r   for r <= 1/t,
    C_t(r) = ln(1/r)          for r >  1/t,

and the increments across scales are independent: the field at a finer scale
T is the scale-t field plus an independent field with covariance
``C_T - C_t``.  Conditioning the Fourier coefficient

    Z_n = int_0^1 e^{gamma X - gamma^2/2 Var} e^{2 pi i n x} dx

on the scale-(n/A) field therefore just replaces the field by its coarse
version, which makes second moments of the martingale increment computable
in closed form and testable against inner Monte Carlo.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import EmbeddingError, NumericError
from .fields import Domain, FieldSample, GridSpec

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# covariance kernels
# ---------------------------------------------------------------------------

def bm_covariance(t: float, r):
    """Covariance of the scale-t field at distance r (see module docstring)."""
    if t <= 1.0:
        raise ValueError("scale t must exceed 1")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    near = math.log(t) + 1.0 - t * r
    far = -np.log(np.where(r > 0, r, 1.0))
    out = np.where(r <= 1.0 / t, near, far)
    return float(out) if out.ndim == 0 else out


def increment_covariance(t: float, fine: float, r):
    """Covariance of the independent increment between scales t and ``fine``.

    Equals ``bm_covariance(fine, r) - bm_covariance(t, r)``: nonnegative,
    ``ln(fine/t)`` at r = 0, and identically zero for r >= 1/t.
    """
    if not 1.0 < t < fine:
        raise ValueError("scales must satisfy 1 < t < fine")
    out = bm_covariance(fine, r) - bm_covariance(t, r)
    return out


# ---------------------------------------------------------------------------
# sampling by circulant embedding
# ---------------------------------------------------------------------------

_CLIP_TOLERANCE = 1e-8


@functools.lru_cache(maxsize=64)
def _embedding_root(kind: str, t: float, fine: float, points: int):
    """sqrt of the circulant eigenvalues embedding the Toeplitz kernel.

    The M-point kernel is embedded in a circulant of size 2M (still a power
    of two).  Tiny negative eigenvalues (within 1e-8 of the largest) are
    clipped to zero; larger negative mass raises EmbeddingError.
    Returns (sqrt_eigenvalues, clipped_fraction), both read-only.
    """
    m = points
    length = 2 * m
    lags = np.minimum(np.arange(length), length - np.arange(length)) / m
    if kind == "field":
        c = bm_covariance(t, lags)
    else:
        c = increment_covariance(t, fine, lags)
    lam = np.fft.fft(c).real
    worst = lam.min()
    peak = lam.max()
    if worst < -_CLIP_TOLERANCE * peak:
        neg_mass = float(-lam[lam < 0].sum() / lam[lam > 0].sum())
        raise EmbeddingError(
            f"covariance embedding has negative spectral mass {neg_mass:.3e} "
            f"(min eigenvalue {worst:.3e} vs max {peak:.3e})",
            negative_mass=neg_mass,
        )
    clipped = float(-lam[lam < 0].sum() / lam.sum()) if worst < 0 else 0.0
    lam = np.maximum(lam, 0.0)
    root = np.sqrt(lam)
    root.flags.writeable = False
    return root, clipped


def _draw_stationary(root: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One real stationary Gaussian vector of length len(root)//2.

    Draw order: 2L standard normals, the first L belonging to the real part
    of the complex white noise and the last L to the imaginary part.
    """
    length = len(root)
    z = rng.standard_normal(2 * length)
    noise = z[:length] + 1j * z[length:]
    v = np.fft.ifft(root * noise) * math.sqrt(length)
    return v.real[:length // 2]


def sample_bm_field(t: float, grid: GridSpec, rng: np.random.Generator) -> FieldSample:
    """Exact draw of the scale-t interval field on the grid.

    Uses circulant embedding of the Toeplitz covariance with power-of-two
    padding; each node has variance ``ln t + 1`` exactly.  Same generator
    state gives a bit-identical field.
    """
    if grid.domain is not Domain.UNIT_INTERVAL:
        raise ValueError("interval sampler requires a unit-interval grid")
    root, _ = _embedding_root("field", float(t), 0.0, grid.points)
    values = _draw_stationary(root, rng)
    var = np.full(grid.points, bm_covariance(t, 0.0))
    return FieldSample(grid=grid, values=values, variance=var, cutoff=float(t))


def sample_increment_field(t: float, fine: float, grid: GridSpec,
                           rng: np.random.Generator) -> FieldSample:
    """Draw the independent increment between scales t and ``fine``."""
    if grid.domain is not Domain.UNIT_INTERVAL:
        raise ValueError("interval sampler requires a unit-interval grid")
    root, _ = _embedding_root("increment", float(t), float(fine), grid.points)
    values = _draw_stationary(root, rng)
    var = np.full(grid.points, increment_covariance(t, fine, 0.0))
    return FieldSample(grid=grid, values=values, variance=var, cutoff=float(fine))


@dataclass
class BmFieldPair:
    """A coarse field at scale t plus its independent refinement to scale T."""

    grid: GridSpec
    coarse: FieldSample
    increment: FieldSample
    t: float
    fine_scale: float

    def fine(self) -> FieldSample:
        """The scale-T field: coarse plus increment, variances adding."""
        return FieldSample(
            grid=self.grid,
            values=self.coarse.values + self.increment.values,
            variance=self.coarse.variance + self.increment.variance,
            cutoff=self.fine_scale,
        )


def sample_field_pair(n: int, window: float, grid: GridSpec,
                      rng_coarse: np.random.Generator,
                      rng_increment: np.random.Generator) -> BmFieldPair:
    """Coarse scale n/window and its refinement to the grid scale T = M.

    The two fields come from the two separate generators, which is what makes
    the conditional (inner Monte Carlo) constructions valid.
    """
    t = n / window
    if t <= 1.0:
        raise ValueError("coarse scale n/window must exceed 1")
    fine = float(grid.points)
    if not t < fine:
        raise ValueError("fine scale (grid size) must exceed the coarse scale")
    coarse = sample_bm_field(t, grid, rng_coarse)
    increment = sample_increment_field(t, fine, grid, rng_increment)
    return BmFieldPair(grid=grid, coarse=coarse, increment=increment,
                       t=t, fine_scale=fine)


# ---------------------------------------------------------------------------
# Fourier coefficients and the martingale projection
# ---------------------------------------------------------------------------

def _chaos_weights(field: FieldSample, gamma: float) -> np.ndarray:
    return np.exp(gamma * field.values - 0.5 * gamma * gamma * field.variance) \
        * field.grid.spacing


def toy_Z_n(field: FieldSample, gamma: float, n: int) -> complex:
    """n-th coefficient ``int e^{gamma X - gamma^2/2 Var} e^{2 pi i n x} dx``."""
    m = field.grid.points
    if abs(n) > m // 2:
        raise ValueError(f"|n|={abs(n)} beyond Nyquist limit {m // 2}")
    if gamma * gamma >= 1.0:
        raise ValueError("requires gamma^2 < 1")
    w = _chaos_weights(field, gamma)
    x = field.grid.nodes()
    return complex(np.sum(w * np.exp(2j * math.pi * n * x)))


def conditional_projection(coarse: FieldSample, gamma: float, n: int) -> complex:
    """Conditional expectation of Z_n given the coarse field.

    Independence of the increment makes this exactly Z_n evaluated on the
    coarse field: the increment exponential integrates to one.
    """
    return toy_Z_n(coarse, gamma, n)


def conditional_variance_exact(coarse: FieldSample, gamma: float, n: int,
                               fine_scale: float) -> float:
    """``n^(1-gamma^2) E[|Z_n - projection|^2 | coarse]`` by direct summation.

    Conditionally on the coarse field the increment is Gaussian, so the
    second moment is a double sum of coarse chaos weights against the kernel
    ``e^{gamma^2 * increment_covariance} - 1``, which vanishes beyond
    distance 1/t; the double sum collapses to a windowed linear
    autocorrelation (computed with one zero-padded FFT pair).
    """
    gsq = gamma * gamma
    m = coarse.grid.points
    t = coarse.cutoff
    w = _chaos_weights(coarse, gamma)
    spacing = coarse.grid.spacing

    window = min(m - 1, int(math.ceil((1.0 / t) / spacing)))
    lags = np.arange(window + 1) * spacing
    kern = np.exp(gsq * increment_covariance(t, fine_scale, lags)) - 1.0

    fw = np.fft.rfft(w, 2 * m)
    autocorr = np.fft.irfft(fw * np.conj(fw), 2 * m)[:window + 1]  # sum_j w_j w_{j+m}

    phases = np.cos(TWO_PI * n * lags)
    total = kern[0] * autocorr[0] + 2.0 * np.sum(kern[1:] * phases[1:] * autocorr[1:])
    return float(n ** (1.0 - gsq) * total)


class VarianceSplit(NamedTuple):
    """Inner-MC conditional second moments of the martingale increment."""

    real: float
    imag: float
    cross: float
    real_se: float
    imag_se: float
    cross_se: float
    inner_replicas: int


def conditional_variance_split(pair: BmFieldPair, gamma: float, n: int,
                               inner_replicas: int,
                               rng: np.random.Generator) -> VarianceSplit:
    """Estimate the real/imaginary split of the conditional variance.

    The coarse field of ``pair`` is held fixed while fresh increments are
    drawn; each inner replica yields one martingale increment
    ``Z_n - projection`` whose squared real part, squared imaginary part and
    real-imaginary product are averaged, all scaled by ``n^(1-gamma^2)``.
    """
    if inner_replicas < 2:
        raise ValueError("need at least 2 inner replicas")
    gsq = gamma * gamma
    coarse = pair.coarse
    proj = conditional_projection(coarse, gamma, n)

    grid = pair.grid
    x = grid.nodes()
    phase = np.exp(2j * math.pi * n * x)
    w_coarse = _chaos_weights(coarse, gamma)
    root, _ = _embedding_root("increment", pair.t, pair.fine_scale, grid.points)
    inc_var = increment_covariance(pair.t, pair.fine_scale, 0.0)

    scale = n ** (1.0 - gsq)
    re2 = np.empty(inner_replicas)
    im2 = np.empty(inner_replicas)
    cross = np.empty(inner_replicas)
    for i in range(inner_replicas):
        inc = _draw_stationary(root, rng)
        zn = np.sum(w_coarse * np.exp(gamma * inc - 0.5 * gsq * inc_var) * phase)
        diff = zn - proj
        re2[i] = scale * diff.real ** 2
        im2[i] = scale * diff.imag ** 2
        cross[i] = scale * diff.real * diff.imag

    k = inner_replicas
    return VarianceSplit(
        real=float(re2.mean()), imag=float(im2.mean()), cross=float(cross.mean()),
        real_se=float(re2.std(ddof=1) / math.sqrt(k)),
        imag_se=float(im2.std(ddof=1) / math.sqrt(k)),
        cross_se=float(cross.std(ddof=1) / math.sqrt(k)),
        inner_replicas=k,
    )


# ---------------------------------------------------------------------------
# deterministic window integrals
# ---------------------------------------------------------------------------

def _exp_cos_integral(rate: float, length: float) -> float:
    """int_0^L e^{-rate*u} cos(2*pi*u) du, in closed form."""
    b = TWO_PI
    num = rate + math.exp(-rate * length) * (b * math.sin(b * length)
                                             - rate * math.cos(b * length))
    return num / (rate * rate + b * b)


def sigma_A_limit(gamma: float, window: float) -> float:
    """Deterministic factor of the conditional variance at window size A.

    Value of ``int_{|u|<=A} e^{2 pi i u} (|u|^{-g^2} - e^{g^2} e^{-g^2|u|/A}
    / A^{g^2}) du``: real by symmetry, 0 at gamma = 0, and converging to
    kappa(gamma) as the window grows.
    """
    gsq = gamma * gamma
    if gsq >= 1.0:
        raise ValueError("requires gamma^2 < 1")
    a = float(window)
    if a <= 0:
        raise ValueError("window must be positive")
    if gsq == 0.0:
        return 0.0

    head_end = min(1.0, a)
    v1, e1 = integrate.quad(lambda u: math.cos(TWO_PI * u) * u ** (-gsq),
                            0.0, head_end, epsabs=1e-12, epsrel=1e-12, limit=300)
    v2, e2 = 0.0, 0.0
    if a > head_end:
        v2, e2 = integrate.quad(lambda u: u ** (-gsq), head_end, a,
                                weight="cos", wvar=TWO_PI, limit=max(100, int(8 * a)))
    if e1 + e2 > 1e-7:
        raise NumericError(f"window integral error {e1 + e2:.2e} too large at A={a}")
    regularized = math.exp(gsq) * a ** (-gsq) * _exp_cos_integral(gsq / a, a)
    return 2.0 * (v1 + v2 - regularized)


def projection_second_moment(gamma: float, window: float) -> float:
    """Limit of ``n^(1-gamma^2) E|E[Z_n | coarse]|^2`` as n grows, at window A.

    Sum of the in-window regularized part and the oscillatory tail
    ``int_{|u|>A} e^{2 pi i u} |u|^{-gamma^2} du``; tends to 0 as the window
    grows.  At gamma = 0 the tail is 0 by the same regularized convention as
    ``kappa(0)``.
    """
    gsq = gamma * gamma
    if gsq >= 1.0:
        raise ValueError("requires gamma^2 < 1")
    a = float(window)
    if a <= 0:
        raise ValueError("window must be positive")

    in_window = 2.0 * a ** (-gsq) * math.exp(gsq) * _exp_cos_integral(gsq / a, a)
    if gsq == 0.0:
        return in_window
    tail, tail_err = integrate.quad(lambda u: u ** (-gsq), a, np.inf,
                                    weight="cos", wvar=TWO_PI, limit=400)
    if tail_err > 1e-7:
        raise NumericError(f"tail quadrature error {tail_err:.2e} too large at A={a}")
    return in_window + 2.0 * tail
