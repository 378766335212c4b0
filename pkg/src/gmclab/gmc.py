"""Multiplicative chaos measures built from field samples.

A measure is stored as one nonnegative weight per grid cell,

    weight_j = exp(gamma * X_j - gamma^2/2 * Var_j) * spacing,

so that every weight has expectation exactly ``spacing`` (the exponential is
normalized to mean one) and the total mass has expectation equal to the
domain length.  The construction is subcritical only: gamma < sqrt(2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fields import FieldSample, GridSpec
from .stats import EstimateReport, jackknife_mean

GAMMA_CRITICAL = math.sqrt(2.0)


class HeavyTailWarning(UserWarning):
    """Moment order at or beyond the finite-moment range of the mass."""


@dataclass
class GmcMeasure:
    """Discretized chaos measure: per-cell weights plus construction metadata."""

    grid: GridSpec
    weights: np.ndarray
    gamma: float
    cutoff: float

    def __post_init__(self):
        if len(self.weights) != self.grid.points:
            raise ValueError("weights length must match the grid")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")


def build_measure(field: FieldSample, gamma: float) -> GmcMeasure:
    """Exponentiate a field sample into a measure with mean-one weights."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if gamma >= GAMMA_CRITICAL:
        raise ValueError(
            f"gamma={gamma} is supercritical: the limit measure is degenerate "
            f"for gamma >= sqrt(2)"
        )
    w = np.exp(gamma * field.values - 0.5 * gamma * gamma * field.variance)
    w *= field.grid.spacing
    return GmcMeasure(grid=field.grid, weights=w, gamma=gamma, cutoff=field.cutoff)


def total_mass(measure: GmcMeasure) -> float:
    return float(np.sum(measure.weights))


def mass_moment_estimate(masses, q: float, gamma: float | None = None) -> EstimateReport:
    """Estimate E[mass^q] from replicated total masses, with jackknife SE.

    When ``gamma`` is supplied and ``q >= 2/gamma^2`` the continuum moment is
    infinite; the estimator still returns the sample mean but emits a
    :class:`HeavyTailWarning`.
    """
    masses = np.asarray(masses, dtype=float)
    if masses.size == 0:
        raise ValueError("empty replica list")
    if q < 0:
        raise ValueError("q must be nonnegative")
    if gamma is not None and gamma > 0 and q >= 2.0 / (gamma * gamma):
        warnings.warn(
            f"moment order q={q} >= 2/gamma^2={2.0 / gamma ** 2:.3f}: the "
            f"continuum moment is infinite and the estimate is unstable",
            HeavyTailWarning,
            stacklevel=2,
        )
    return jackknife_mean(masses ** q)
