"""Sensitivity analysis for IPW estimates under interference.

Exact discrete scenarios, bias decompositions of the naive IPW functional,
and worst-case bias bounds from sensitivity parameters.
"""

from .bounds import (
    BiasBound,
    DataSummary,
    SensitivityParams,
    contour_grid,
    sigma_eps_from_alpha,
    sigma_eps_upper,
    t1_bound,
    t2_bound,
    t3_bound,
    worst_case_bias,
)
from .decompose import (
    BiasBreakdown,
    bias_phi1,
    bias_phi2,
    bias_undefined,
    check_corollary,
    shen_decomposition,
    t3_theta,
)
from .errors import (
    EnumerationSizeError,
    EstimationError,
    ExposureOverflowError,
    InputDomainError,
    ModeError,
    NumericError,
    PositivityError,
    ScenarioValidationError,
    SpillsenseError,
    StructuralError,
    UndefinedStratumError,
)
from .estimate import (
    EffectTables,
    ObservedSample,
    effect_tables,
    ipw_identify,
    mew_scores,
    naive_functional_psi,
    naive_ipw_estimate,
    naive_ipw_summary,
    oracle_estimands,
)
from .graph import (
    ExposureSpec,
    InterferenceNetwork,
    exposure_distribution,
    exposure_value,
    neighborhood_exposures,
    poisson_binomial_pmf,
)
from .measure import ROLES, PopulationMeasure
from .scenario import (
    JointState,
    ScenarioSpec,
    SizeCaps,
    enumerate_joint,
    enumeration_measure,
    pseudo_propensity_table,
    random_scenario,
    validate_scenario,
    with_degree,
)
from .simulate import (
    SyntheticPopulation,
    configuration_conditional_measure,
    empirical_measure,
    generate_network,
    generate_population,
    sample_observations,
)

__version__ = "0.1.0"
