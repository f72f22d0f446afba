"""Excursion chains on quotients of regular trees.

The package models the unit-speed geodesic walk on a quotient of the
(q+1)-regular tree as a countable-state Markov chain whose states are the
directed edges of a finite core plus geometric ray tails, and checks the
extreme-value behaviour of the maximal cusp-excursion height both exactly and
by seeded Monte Carlo.
"""

from .chain import (
    ChainSpec,
    Classification,
    Compact,
    RayDown,
    RayUp,
    StationaryDistribution,
    build_chain,
    classify,
    first_return_distribution,
    n_step_prob,
    peak_height_cdf,
    predecessors,
    state_id,
    stationary_distribution,
    successors,
    transition_prob,
)
from .errors import (
    CuspflowError,
    DeltaTooSmall,
    DuplicateRay,
    EmptySamples,
    InadmissiblePath,
    InvalidModel,
    ModelSyntaxError,
    NotIrreducible,
    SingularCompactBlock,
    UnknownEdge,
    UnknownState,
    UnknownVertex,
    UnsupportedMode,
)
from .evt import (
    EvtReport,
    EvtRow,
    LimitParams,
    center_level,
    empirical_cdf_compare,
    galambos_cdf,
    limit_cdf,
    max_height_exact,
    n_of_t,
    n_of_t_variant,
    t_of_n,
)
from .excursion import (
    Excursion,
    ExcursionTrace,
    c_gamma_exact,
    cycle_law,
    decompose,
    expected_excursion_time,
    height_under_time_cap,
)
from .figures import evt_report_figure, heights_figure
from .measure import (
    ball_shadow,
    check_markov_property,
    cylinder_measure,
    excursion_height_tail,
    lambda_cylinder,
    markov_property_residuals,
    random_admissible_path,
    shadow_ratio,
)
from .model import QuotientModel, parse_model, rho_value, serialize_model, validate_model
from .sim import (
    McResult,
    RunConfig,
    c_gamma_mc,
    chain_walk_states,
    run_monte_carlo,
    sample_height,
    sample_trajectory,
    trial_stream,
)

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "Classification",
    "Compact",
    "RayDown",
    "RayUp",
    "StationaryDistribution",
    "build_chain",
    "classify",
    "first_return_distribution",
    "n_step_prob",
    "peak_height_cdf",
    "predecessors",
    "state_id",
    "stationary_distribution",
    "successors",
    "transition_prob",
    "CuspflowError",
    "DeltaTooSmall",
    "DuplicateRay",
    "EmptySamples",
    "InadmissiblePath",
    "InvalidModel",
    "ModelSyntaxError",
    "NotIrreducible",
    "SingularCompactBlock",
    "UnknownEdge",
    "UnknownState",
    "UnknownVertex",
    "UnsupportedMode",
    "EvtReport",
    "EvtRow",
    "LimitParams",
    "center_level",
    "empirical_cdf_compare",
    "galambos_cdf",
    "limit_cdf",
    "max_height_exact",
    "n_of_t",
    "n_of_t_variant",
    "t_of_n",
    "Excursion",
    "ExcursionTrace",
    "c_gamma_exact",
    "cycle_law",
    "decompose",
    "expected_excursion_time",
    "height_under_time_cap",
    "evt_report_figure",
    "heights_figure",
    "ball_shadow",
    "check_markov_property",
    "cylinder_measure",
    "excursion_height_tail",
    "lambda_cylinder",
    "markov_property_residuals",
    "random_admissible_path",
    "shadow_ratio",
    "QuotientModel",
    "parse_model",
    "rho_value",
    "serialize_model",
    "validate_model",
    "McResult",
    "RunConfig",
    "c_gamma_mc",
    "chain_walk_states",
    "run_monte_carlo",
    "sample_height",
    "sample_trajectory",
    "trial_stream",
    "__version__",
]
