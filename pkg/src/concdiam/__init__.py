"""Distribution-dependent concentration quantities on metric probability spaces.

The package computes subgaussian and Orlicz diameters, exact Wasserstein-1
distances, transportation-cost mixing coefficients of Markov chains, the
deviation bounds these quantities plug into, and seeded Monte Carlo
certification of those bounds.
"""

from .bounds import (
    LipschitzReport,
    TailBound,
    lipschitz_check,
    mcdiarmid_bound,
    mixing_bound,
    orlicz_bound,
    stability_bias_bound,
    stability_excess_bound,
    subgaussian_bound,
)
from .diameter import (
    DiscreteDistribution,
    SubgaussianEstimate,
    certificate_gap,
    component_diameters,
    conditional_subgaussian_diameters,
    mgf_log,
    orlicz_p_diameter,
    sigma_star,
    subgaussian_diameter,
    symmetrized_distance,
    symmetrized_distance_from,
)
from .errors import (
    CertificationError,
    ConcdiamError,
    EnumerationCapError,
    ParseError,
    ValidationError,
)
from .montecarlo import (
    ExperimentConfig,
    TailReport,
    binomial_ci,
    bounds_from_config,
    certify_bounds,
    empirical_tail,
    estimate_beta,
    estimate_beta_profile,
    resolve_statistic,
    sample_markov,
    sample_product,
    uniforms,
)
from .spaces import (
    FiniteMetricSpace,
    GaussianLineSpace,
    MarkovProcessSpec,
    ProductSpec,
    dump_space,
    enumerate_tuples,
    load_space,
    metric_diameter,
    product_distance,
)
from .transport import (
    Coupling,
    MixingProfile,
    backend_name,
    expectation_pair,
    tau_coefficients,
    tv_distance,
    wasserstein1,
)

__version__ = "0.1.0"

__all__ = [
    "CertificationError",
    "ConcdiamError",
    "Coupling",
    "DiscreteDistribution",
    "EnumerationCapError",
    "ExperimentConfig",
    "FiniteMetricSpace",
    "GaussianLineSpace",
    "LipschitzReport",
    "MarkovProcessSpec",
    "MixingProfile",
    "ParseError",
    "ProductSpec",
    "SubgaussianEstimate",
    "TailBound",
    "TailReport",
    "ValidationError",
    "backend_name",
    "binomial_ci",
    "bounds_from_config",
    "certificate_gap",
    "certify_bounds",
    "component_diameters",
    "conditional_subgaussian_diameters",
    "dump_space",
    "enumerate_tuples",
    "empirical_tail",
    "estimate_beta",
    "estimate_beta_profile",
    "expectation_pair",
    "lipschitz_check",
    "load_space",
    "mcdiarmid_bound",
    "metric_diameter",
    "mgf_log",
    "mixing_bound",
    "orlicz_bound",
    "orlicz_p_diameter",
    "product_distance",
    "resolve_statistic",
    "sample_markov",
    "sample_product",
    "sigma_star",
    "stability_bias_bound",
    "stability_excess_bound",
    "subgaussian_bound",
    "subgaussian_diameter",
    "symmetrized_distance",
    "symmetrized_distance_from",
    "tau_coefficients",
    "tv_distance",
    "uniforms",
    "wasserstein1",
]
