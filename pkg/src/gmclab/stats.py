"""Estimators and distributional tests used across the experiments.

Conventions fixed here once and used everywhere:

* complex Brownian motion is ``W_t = B1_t + i B2_t`` with independent standard
  real components, so ``E|W_t|^2 = 2t``;
* a "standard complex normal" has independent real and imaginary parts of
  variance one each (``E|N|^2 = 2``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import NumericError

TWO_PI = 2.0 * math.pi


@dataclass
class EstimateReport:
    """A scalar statistic with its standard error and 95% interval."""

    value: float
    std_error: float
    n_replicas: int
    ci95: tuple[float, float]

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")
        lo, hi = self.ci95
        if not lo <= self.value <= hi:
            raise ValueError("ci95 must contain the value")


@dataclass
class TestReport:
    """Outcome of a two-sample or goodness-of-fit test."""

    statistic: float
    p_value: float
    method: str
    n_permutations: int = 0
    n_excluded: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")


def _report(value: float, se: float, n: int) -> EstimateReport:
    return EstimateReport(value=value, std_error=se, n_replicas=n,
                          ci95=(value - 1.96 * se, value + 1.96 * se))


def jackknife_mean(x) -> EstimateReport:
    """Mean with leave-one-out jackknife standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    m = float(x.mean())
    if n == 1:
        return _report(m, 0.0, 1)
    loo = (x.sum() - x) / (n - 1)
    se = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return _report(m, se, n)


def mean_report(x) -> EstimateReport:
    """Plain mean with sigma/sqrt(n) standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return _report(m, se, n)


# ---------------------------------------------------------------------------
# decay and moment-scaling fits
# ---------------------------------------------------------------------------

def loglog_slope(points) -> EstimateReport:
    """OLS slope of log(value) on log(n) with heteroskedasticity-robust SE.

    ``points`` is a sequence of (n, value) pairs with positive values and at
    least three distinct n.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    ns = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    if len(np.unique(ns)) != len(ns):
        raise ValueError("n values must be distinct")
    if np.any(vals <= 0) or np.any(ns <= 0):
        raise ValueError("values and n must be positive for a log-log fit")

    x = np.log(ns)
    y = np.log(vals)
    xc = x - x.mean()
    sxx = np.sum(xc * xc)
    slope = float(np.sum(xc * y) / sxx)
    resid = y - (y.mean() + slope * xc)
    # HC1 sandwich variance for the slope
    k = len(x)
    hc = np.sum((xc * resid) ** 2) / (sxx * sxx) * k / max(k - 2, 1)
    se = math.sqrt(hc)
    return _report(slope, se, k)


@dataclass
class FourthMomentCurve:
    """Per-frequency fourth-moment estimates with the fitted log-log slope."""

    frequencies: list[int]
    estimates: list[EstimateReport]
    slope: EstimateReport
    noisy: bool  # any per-n SE above 30% of its value


def fourth_moment_curve(samples_by_n: dict[int, np.ndarray], gammasq: float) -> FourthMomentCurve:
    """Estimate E|c_n|^4 on a frequency grid and fit its decay exponent.

    ``samples_by_n`` maps a frequency to an array of replicated complex
    coefficients (or their moduli).
    """
    if gammasq >= 0.5:
        raise ValueError("fourth-moment scaling requires gamma^2 < 1/2")
    ns = sorted(samples_by_n)
    reports = []
    noisy = False
    for n in ns:
        m4 = np.abs(np.asarray(samples_by_n[n])) ** 4
        rep = mean_report(m4)
        if rep.value > 0 and rep.std_error > 0.3 * rep.value:
            noisy = True
        reports.append(rep)
    positive = [(n, r.value) for n, r in zip(ns, reports) if r.value > 0]
    if len(positive) >= 3:
        slope = loglog_slope(positive)
    else:
        slope = _report(0.0, 0.0, len(positive))
    return FourthMomentCurve(frequencies=ns, estimates=reports, slope=slope, noisy=noisy)


@dataclass
class EnvelopeReport:
    """Running-maximum diagnostics of |c_n| n^beta over dyadic blocks."""

    beta: float
    block_edges: list[tuple[int, int]]
    running_maxima: np.ndarray      # (replicas, blocks): cumulative max at block ends
    block_maxima: np.ndarray        # (replicas, blocks): per-block maxima
    fraction_stopped: float         # replicas with no new record in the last block
    median_block_maxima: np.ndarray


def envelope_decay_check(abs_coeffs: np.ndarray, gammasq: float, beta: float,
                         block_edges=((128, 256), (256, 512), (512, 1024))) -> EnvelopeReport:
    """Check per-replica boundedness of |c_n| n^beta via running maxima.

    ``abs_coeffs`` has shape (replicas, n_max+1), entry [r, n] = |c_n| of
    replica r.  For each replica the running maximum of |c_n| n^beta is
    recorded at the end of every dyadic block; a replica "stopped increasing"
    when the last block sets no new record.
    """
    abs_coeffs = np.asarray(abs_coeffs, dtype=float)
    if abs_coeffs.ndim != 2:
        raise ValueError("abs_coeffs must be (replicas, n_max+1)")
    n_max = abs_coeffs.shape[1] - 1
    edges = [(int(a), int(b)) for a, b in block_edges]
    if edges[-1][1] - 1 > n_max:
        raise ValueError("block edges exceed available frequencies")

    n = np.arange(n_max + 1, dtype=float)
    weighted = abs_coeffs * n ** beta

    blocks = np.stack([weighted[:, a:b].max(axis=1) for a, b in edges], axis=1)
    head = weighted[:, 1:edges[0][0]].max(axis=1) if edges[0][0] > 1 else np.zeros(len(weighted))
    running = np.maximum.accumulate(np.column_stack([head, blocks]), axis=1)[:, 1:]
    stopped = running[:, -1] <= running[:, -2] if running.shape[1] >= 2 else np.ones(len(running), bool)
    return EnvelopeReport(
        beta=beta,
        block_edges=edges,
        running_maxima=running,
        block_maxima=blocks,
        fraction_stopped=float(np.mean(stopped)),
        median_block_maxima=np.median(blocks, axis=0),
    )


# ---------------------------------------------------------------------------
# limit-law reference mixture
# ---------------------------------------------------------------------------

def limit_mass_scale(gamma: float) -> float:
    """Deterministic mass factor (2*pi)^(1-gamma^2) in the circle limit law.

    The coefficient phase e^{i n theta} sweeps one cycle over an angular
    window of length 2*pi/n, while the variance integral kappa is normalized
    to unit-rate phase e^{2*pi*i*u}; rescaling the window by 2*pi produces
    this factor multiplying the doubled-parameter mass.  Cross-checked
    against the exact second-moment quadrature (see integrals module tests).
    """
    return TWO_PI ** (1.0 - gamma * gamma)


def limit_law_reference_sample(gamma: float, mass_sampler, rng: np.random.Generator,
                               kappa_value: float | None = None) -> complex:
    """One draw from the limiting mixture of the rescaled circle coefficients.

    Draws a doubled-parameter total mass ``m`` from ``mass_sampler()`` and
    returns a complex Gaussian whose real and imaginary parts are independent
    ``Normal(0, kappa * (2*pi)^(1-gamma^2) * m / 2)``.

    Draw order from ``rng``: after the mass, two standard normals (real part
    first).  ``kappa_value`` may be passed to avoid recomputing the variance
    integral per draw.
    """
    if gamma >= 1.0 / math.sqrt(2.0):
        raise ValueError("limit law reference requires gamma < 1/sqrt(2)")
    if kappa_value is None:
        from .integrals import kappa
        kappa_value = kappa(gamma).value
    m = float(mass_sampler())
    comp_var = kappa_value * limit_mass_scale(gamma) * m / 2.0
    sd = math.sqrt(max(comp_var, 0.0))
    z = rng.standard_normal(2)
    return complex(sd * z[0], sd * z[1])


# ---------------------------------------------------------------------------
# two-sample and uniformity tests
# ---------------------------------------------------------------------------

def _energy_statistic_parts(d_matrix, mask, row_sums, total):
    v = mask.astype(float)
    dv = d_matrix @ v
    s_aa = float(v @ dv)
    s_ab = float(v @ (row_sums - dv))
    s_bb = total - s_aa - 2.0 * s_ab
    n1 = int(mask.sum())
    n2 = len(mask) - n1
    return 2.0 * s_ab / (n1 * n2) - s_aa / (n1 * n1) - s_bb / (n2 * n2)


def energy_distance_test(sample_a, sample_b, n_permutations: int = 1000,
                         rng: np.random.Generator | None = None) -> TestReport:
    """Two-sample energy-distance test for complex (or real) samples.

    The statistic is ``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` over pooled pairwise
    absolute differences; the p-value is a label-permutation tail with the
    +1 correction.
    """
    a = np.asarray(sample_a).ravel()
    b = np.asarray(sample_b).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    if rng is None:
        rng = np.random.default_rng(0)

    pooled = np.concatenate([a, b]).astype(complex)
    d = np.abs(pooled[:, None] - pooled[None, :])
    rows = d.sum(axis=1)
    total = float(rows.sum())

    mask = np.zeros(pooled.size, dtype=bool)
    mask[:a.size] = True
    observed = _energy_statistic_parts(d, mask, rows, total)

    exceed = 0
    perm = mask.copy()
    for _ in range(n_permutations):
        rng.shuffle(perm)
        if _energy_statistic_parts(d, perm, rows, total) >= observed:
            exceed += 1
    p = (exceed + 1) / (n_permutations + 1)
    return TestReport(statistic=float(observed), p_value=float(p),
                      method="energy", n_permutations=n_permutations)


def ks_test(sample_a, sample_b) -> TestReport:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    res = sps.ks_2samp(a, b, method="asymp")
    return TestReport(statistic=float(res.statistic), p_value=float(res.pvalue),
                      method="ks")


def phase_uniformity_test(sample, bins: int = 16) -> TestReport:
    """Chi-square test that arg(z) is uniform over equal angular bins.

    Zero entries carry no phase; they are dropped and counted in
    ``n_excluded``.
    """
    z = np.asarray(sample).ravel()
    if z.size == 0:
        raise ValueError("sample must be nonempty")
    if bins < 4:
        raise ValueError("need at least 4 bins")
    nonzero = z[z != 0]
    excluded = z.size - nonzero.size
    if nonzero.size == 0:
        raise NumericError("all sample values are zero: no phases to test")
    phases = np.mod(np.angle(nonzero), TWO_PI)
    counts, _ = np.histogram(phases, bins=bins, range=(0.0, TWO_PI))
    expected = nonzero.size / bins
    stat = float(np.sum((counts - expected) ** 2 / expected))
    p = float(sps.chi2.sf(stat, df=bins - 1))
    return TestReport(statistic=stat, p_value=p, method="chi2_phase",
                      n_excluded=int(excluded))
