"""gmclab: Monte-Carlo laboratory for multiplicative chaos on the circle.

Samples log-correlated Gaussian fields by exact spectral synthesis, builds
the associated chaos measures, analyses their Fourier coefficients (decay
envelopes, moment scaling, limit-law comparisons, capacity functionals), and
runs everything under a fully reproducible experiment harness.
"""

__version__ = "0.1.0"

from .errors import ConfigError, EmbeddingError, GmcLabError, NumericError
from .fields import (
    Domain,
    FieldSample,
    GridSpec,
    circle_covariance,
    harmonic_number,
    sample_circle_field,
    truncated_circle_covariance,
)
from .gmc import GmcMeasure, build_measure, mass_moment_estimate, total_mass
from .integrals import (
    QuadratureResult,
    circle_second_moment,
    kappa,
    kappa_closed_form,
    second_moment_tail_constant,
    singular_integral,
)
from .spectrum import (
    FourierSeries,
    capacity_sum,
    capacity_threshold,
    convolution_power,
    export_series_csv,
    fejer_density,
    fourier_coefficients,
    rescale_coefficient,
    riesz_energy,
)
from .stats import (
    EstimateReport,
    TestReport,
    energy_distance_test,
    envelope_decay_check,
    fourth_moment_curve,
    ks_test,
    limit_law_reference_sample,
    limit_mass_scale,
    loglog_slope,
    phase_uniformity_test,
)
from .toy_model import (
    BmFieldPair,
    bm_covariance,
    conditional_projection,
    conditional_variance_exact,
    conditional_variance_split,
    increment_covariance,
    projection_second_moment,
    sample_bm_field,
    sample_field_pair,
    sample_increment_field,
    sigma_A_limit,
    toy_Z_n,
)
from .harness import (
    ResultRecord,
    RunConfig,
    load_config,
    read_results,
    rng_for_seed,
    run_experiment,
    seed_for_replica,
    write_results,
)
