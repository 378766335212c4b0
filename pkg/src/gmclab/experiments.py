"""Experiment definitions for the runner: one replica function plus one
aggregator per experiment type.

Replica functions are pure in (config, replica seed).  Sub-streams inside a
replica are derived from the replica seed with the same mixing function as
the replica seeds themselves, with documented stream indices:

    0  main field / measure draw
    1  independent doubled-parameter mass replica (limit_law)
    2  reference Gaussian draw (limit_law)
    1  increment field (toy_model; coarse field uses stream 0)

Aggregators consume payloads sorted by replica index and combine them with
fixed-tree pairwise summation, so the aggregate is bit-identical no matter
how many workers produced the payloads.
"""

from __future__ import annotations

import math

import numpy as np

from . import spectrum, stats, toy_model
from .errors import ConfigError
from .fields import Domain, GridSpec, sample_circle_field
from .gmc import build_measure, total_mass
from .integrals import kappa, kappa_closed_form, second_moment_tail_constant

TWO_PI = 2.0 * math.pi


def pairwise_sum(values):
    """Sum a sequence with a fixed binary tree (order-independent of workers)."""
    vals = list(values)
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def pairwise_mean(values):
    vals = list(values)
    if not vals:
        raise ValueError("empty")
    return pairwise_sum(vals) / len(vals)


def _measure_coeffs(config, rng):
    grid = GridSpec(points=config.grid_m, domain=Domain.CIRCLE)
    field = sample_circle_field(config.n_modes, grid, rng)
    measure = build_measure(field, math.sqrt(config.gamma_sq))
    series = spectrum.fourier_coefficients(measure, config.n_max)
    return measure, series


def _parse_blocks(text):
    blocks = []
    for part in str(text).split(","):
        lo, hi = part.split(":")
        blocks.append((int(lo), int(hi)))
    return blocks


def _parse_ints(text):
    return [int(p) for p in str(text).split(",")]


# --------------------------------------------------------------------------
# decay: dyadic block maxima of |c_n| (n^beta-weighted envelope)
# --------------------------------------------------------------------------

def decay_replica(config, rng, sub_rngs):
    _, series = _measure_coeffs(config, rng)
    return {"abs_coeffs": series.abs_positive().tolist()}


def decay_aggregate(config, payloads):
    abs_coeffs = np.array([p["abs_coeffs"] for p in payloads])
    beta = float(config.extras.get("beta", 0.0))
    blocks = _parse_blocks(config.extras.get("block_edges", "128:256,256:512,512:1024"))
    report = stats.envelope_decay_check(abs_coeffs, config.gamma_sq, beta, blocks)
    return {
        "beta": beta,
        "block_edges": [list(b) for b in report.block_edges],
        "fraction_stopped": report.fraction_stopped,
        "median_block_maxima": report.median_block_maxima.tolist(),
    }


# --------------------------------------------------------------------------
# fourth_moment: E|c_n|^4 scaling across frequencies
# --------------------------------------------------------------------------

def fourth_moment_replica(config, rng, sub_rngs):
    freqs = _parse_ints(config.extras.get("frequencies", "16,32,64,128,256,512"))
    _, series = _measure_coeffs(config, rng)
    return {"moduli": [abs(series.coeff(n)) for n in freqs]}


def fourth_moment_aggregate(config, payloads):
    freqs = _parse_ints(config.extras.get("frequencies", "16,32,64,128,256,512"))
    moduli = np.array([p["moduli"] for p in payloads])
    fourth = moduli ** 4
    estimates = {}
    for j, n in enumerate(freqs):
        mean = pairwise_mean(fourth[:, j].tolist())
        se = float(fourth[:, j].std(ddof=1) / math.sqrt(len(payloads)))
        estimates[n] = {"value": mean, "std_error": se}
    slope = stats.loglog_slope([(n, estimates[n]["value"]) for n in freqs])
    noisy = any(v["std_error"] > 0.3 * v["value"] for v in estimates.values() if v["value"] > 0)
    return {
        "frequencies": freqs,
        "estimates": {str(n): estimates[n] for n in freqs},
        "slope": {"value": slope.value, "std_error": slope.std_error},
        "noisy": noisy,
        "bound_slope": -2.0 * (1.0 - config.gamma_sq),
    }


# --------------------------------------------------------------------------
# limit_law: rescaled coefficient against the reference mixture
# --------------------------------------------------------------------------

def limit_law_replica(config, rng, sub_rngs):
    gamma = math.sqrt(config.gamma_sq)
    n = int(config.extras.get("n", 512))
    _, series = _measure_coeffs(config, rng)
    value = spectrum.rescale_coefficient(series.coeff(n), n, gamma)

    mass_m = int(config.extras.get("mass_grid_m", 16384))
    mass_modes = int(config.extras.get("mass_n_modes", mass_m // 2))
    grid = GridSpec(points=mass_m, domain=Domain.CIRCLE)
    mass_field = sample_circle_field(mass_modes, grid, sub_rngs(1))
    mass = total_mass(build_measure(mass_field, 2.0 * gamma))

    kap = kappa(gamma).value
    ref = stats.limit_law_reference_sample(gamma, lambda: mass, sub_rngs(2),
                                           kappa_value=kap)
    return {"re": value.real, "im": value.imag,
            "ref_re": ref.real, "ref_im": ref.imag, "mass": mass}


def limit_law_aggregate(config, payloads):
    gamma = math.sqrt(config.gamma_sq)
    n_perm = int(config.extras.get("n_permutations", 1000))
    data = np.array([complex(p["re"], p["im"]) for p in payloads])
    ref = np.array([complex(p["ref_re"], p["ref_im"]) for p in payloads])

    test_rng = np.random.Generator(np.random.Philox(key=config.master_seed ^ 0xD1F))
    energy = stats.energy_distance_test(data, ref, n_permutations=n_perm, rng=test_rng)
    ks = stats.ks_test(np.abs(data), np.abs(ref))
    phase = stats.phase_uniformity_test(data, bins=16)

    second = pairwise_mean([abs(z) ** 2 for z in data])
    second_se = float((np.abs(data) ** 2).std(ddof=1) / math.sqrt(len(data)))
    target = kappa(gamma).value * stats.limit_mass_scale(gamma) * TWO_PI
    return {
        "n": int(config.extras.get("n", 512)),
        "energy": {"statistic": energy.statistic, "p_value": energy.p_value,
                   "n_permutations": energy.n_permutations},
        "ks_modulus": {"statistic": ks.statistic, "p_value": ks.p_value},
        "phase_chi2": {"statistic": phase.statistic, "p_value": phase.p_value},
        "second_moment": {"value": second, "std_error": second_se, "target": target},
    }


# --------------------------------------------------------------------------
# capacity: Riesz energy against the spectral capacity sum
# --------------------------------------------------------------------------

def capacity_replica(config, rng, sub_rngs):
    s = float(config.extras.get("s", 0.5))
    measure, series = _measure_coeffs(config, rng)
    energy = spectrum.riesz_energy(measure, s)
    capsum = spectrum.capacity_sum(series, s)
    return {"energy": energy, "capacity_sum": capsum, "ratio": energy / capsum}


def capacity_aggregate(config, payloads):
    ratios = [p["ratio"] for p in payloads]
    return {
        "s": float(config.extras.get("s", 0.5)),
        "ratio_min": min(ratios),
        "ratio_max": max(ratios),
        "ratio_spread": max(ratios) / min(ratios),
        "mean_energy": pairwise_mean([p["energy"] for p in payloads]),
        "mean_capacity_sum": pairwise_mean([p["capacity_sum"] for p in payloads]),
    }


# --------------------------------------------------------------------------
# convolve: Fejer reconstruction of a convolution power
# --------------------------------------------------------------------------

def convolve_replica(config, rng, sub_rngs):
    d = int(config.extras.get("d", 2))
    cutoffs = _parse_ints(config.extras.get("cutoffs", "64,128,256"))
    _, series = _measure_coeffs(config, rng)
    conv = spectrum.convolution_power(series, d)
    grids = [spectrum.fejer_density(conv, k, out_points=config.grid_m) for k in cutoffs]
    spacing = TWO_PI / config.grid_m
    l1_diffs = [float(np.sum(np.abs(b - a)) * spacing) for a, b in zip(grids, grids[1:])]
    dens = grids[-1]
    return {
        "l1_diffs": l1_diffs,
        "min_density": float(dens.min()),
        "max_density": float(dens.max()),
    }


def convolve_aggregate(config, payloads):
    decreasing = [all(b < a for a, b in zip(p["l1_diffs"], p["l1_diffs"][1:]))
                  for p in payloads]
    floors = [p["min_density"] / p["max_density"] for p in payloads]
    return {
        "d": int(config.extras.get("d", 2)),
        "cutoffs": _parse_ints(config.extras.get("cutoffs", "64,128,256")),
        "fraction_l1_decreasing": float(np.mean(decreasing)),
        "worst_density_floor": min(floors),
        "mean_l1_diffs": [pairwise_mean([p["l1_diffs"][j] for p in payloads])
                          for j in range(len(payloads[0]["l1_diffs"]))],
    }


# --------------------------------------------------------------------------
# toy_model: martingale projection diagnostics on the interval
# --------------------------------------------------------------------------

def toy_model_replica(config, rng, sub_rngs):
    gamma = math.sqrt(config.gamma_sq)
    n = int(config.extras.get("n", 256))
    window = float(config.extras.get("window", 8))
    grid = GridSpec(points=config.grid_m, domain=Domain.UNIT_INTERVAL)
    pair = toy_model.sample_field_pair(n, window, grid, rng, sub_rngs(1))
    proj = toy_model.conditional_projection(pair.coarse, gamma, n)
    zn = toy_model.toy_Z_n(pair.fine(), gamma, n)
    cond_var = toy_model.conditional_variance_exact(pair.coarse, gamma, n, pair.fine_scale)
    return {"proj_re": proj.real, "proj_im": proj.imag,
            "z_re": zn.real, "z_im": zn.imag, "cond_var": cond_var}


def toy_model_aggregate(config, payloads):
    gamma = math.sqrt(config.gamma_sq)
    gsq = config.gamma_sq
    n = int(config.extras.get("n", 256))
    window = float(config.extras.get("window", 8))
    scale = n ** (1.0 - gsq)
    proj2 = [scale * (p["proj_re"] ** 2 + p["proj_im"] ** 2) for p in payloads]
    r = len(payloads)
    proj2_mean = pairwise_mean(proj2)
    proj2_se = float(np.std(proj2, ddof=1) / math.sqrt(r))
    return {
        "n": n,
        "window": window,
        "projection_second_moment_mc": {"value": proj2_mean, "std_error": proj2_se},
        "projection_second_moment_formula": toy_model.projection_second_moment(gamma, window),
        "mean_cond_var": pairwise_mean([p["cond_var"] for p in payloads]),
        "sigma_window_limit": toy_model.sigma_A_limit(gamma, window),
        "tower_mean_z": [pairwise_mean([p["z_re"] for p in payloads]),
                         pairwise_mean([p["z_im"] for p in payloads])],
        "tower_mean_proj": [pairwise_mean([p["proj_re"] for p in payloads]),
                            pairwise_mean([p["proj_im"] for p in payloads])],
    }


# --------------------------------------------------------------------------
# kappa: deterministic dual-oracle evaluation
# --------------------------------------------------------------------------

def kappa_replica(config, rng, sub_rngs):
    gamma = math.sqrt(config.gamma_sq)
    q = kappa(gamma)
    closed = kappa_closed_form(gamma)
    return {"value": q.value, "abs_error_estimate": q.abs_error_estimate,
            "evaluations": q.evaluations, "converged": q.converged,
            "closed_form": closed, "difference": abs(q.value - closed)}


def kappa_aggregate(config, payloads):
    out = dict(payloads[0])
    if config.gamma_sq < 0.5:
        out["tail_constant"] = second_moment_tail_constant(math.sqrt(config.gamma_sq))
    return out


EXPERIMENTS = {
    "decay": (decay_replica, decay_aggregate,
              {"beta", "block_edges"}),
    "fourth_moment": (fourth_moment_replica, fourth_moment_aggregate,
                      {"frequencies"}),
    "limit_law": (limit_law_replica, limit_law_aggregate,
                  {"n", "mass_grid_m", "mass_n_modes", "n_permutations"}),
    "capacity": (capacity_replica, capacity_aggregate, {"s"}),
    "convolve": (convolve_replica, convolve_aggregate, {"d", "cutoffs"}),
    "toy_model": (toy_model_replica, toy_model_aggregate,
                  {"n", "window"}),
    "kappa": (kappa_replica, kappa_aggregate, set()),
}


def experiment_names():
    return sorted(EXPERIMENTS)


def get_experiment(name: str):
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; choose from {experiment_names()}")
